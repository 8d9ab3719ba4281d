"""Run configuration: a single YAML file, validated against documented defaults."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .bvar import DEFAULT_LAMBDA1, DEFAULT_LAMBDA2, DEFAULT_N_DRAWS
from .density import DEFAULT_N_GRID, MIN_OBS_PER_PERIOD
from .firf import APPLICATION_BAND, SIMULATION_BAND
from .flp import HAC_METHODS
from .lqd import DEFAULT_N_GRID01
from .simlab import BASIS_SCALINGS, OMEGA_RECIPES, TRANSFORMS

DEFAULT_HORIZONS = (0, 1, 2, 3, 4, 8, 12, 24)
DEFAULT_SCREE = 0.9
DEFAULT_VAR_LAGS = 4
DEFAULT_FLP_LAGS = 1


class ConfigError(ValueError):
    pass


@dataclass
class SimulationConfig:
    dgp: int = 1  # 1: LQD basis, 2: log-density basis
    t: int = 500
    n_obs: int = 8000
    burn_in: int = 500
    omega_seed: int = 0
    basis_seed: int = 0
    basis_scaling: str = "unit"
    omega_recipe: str = "average"

    def validate(self):
        _check(self.dgp in (1, 2), "simulation.dgp must be 1 or 2")
        _check(self.t >= 10, "simulation.t must be >= 10")
        _check(self.n_obs >= MIN_OBS_PER_PERIOD, f"simulation.n_obs must be >= {MIN_OBS_PER_PERIOD}")
        _check(self.burn_in >= 0, "simulation.burn_in must be >= 0")
        _check(self.basis_scaling in BASIS_SCALINGS, f"simulation.basis_scaling must be one of {BASIS_SCALINGS}")
        _check(self.omega_recipe in OMEGA_RECIPES, f"simulation.omega_recipe must be one of {OMEGA_RECIPES}")


@dataclass
class McConfig:
    k_list: list = field(default_factory=lambda: [1, 2, 3, 5, 7, 15])
    n_reps: int = 200
    shocks: list = field(default_factory=lambda: [0, 1])

    def validate(self):
        _check(self.n_reps >= 1, "mc.n_reps must be >= 1")
        for k in self.k_list:
            _check(k == "scree" or (isinstance(k, int) and k >= 1), f"mc.k_list entry {k!r} invalid")


@dataclass
class MiseConfig:
    k_list: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    n_reps: int = 100
    split: float = 0.8
    transforms: list = field(default_factory=lambda: list(TRANSFORMS))
    regenerate: bool = False

    def validate(self):
        _check(self.n_reps >= 1, "mise.n_reps must be >= 1")
        _check(0 < self.split < 1, "mise.split must lie in (0, 1)")
        _check(all(isinstance(k, int) and k >= 1 for k in self.k_list), "mise.k_list must hold positive integers")
        _check(set(self.transforms) <= set(TRANSFORMS), f"mise.transforms must be drawn from {TRANSFORMS}")


@dataclass
class RunConfig:
    """Every tunable of the pipeline; ``None`` means "use the documented rule".

    ``k: null`` selects K by the scree threshold. ``band_level: null``
    means 0.68 for estimation commands and 0.90 for simulation studies.
    """

    macro_csv: str | None = None
    micro_csv: str | None = None
    output_dir: str = "out"
    support: list = field(default_factory=lambda: [0.0, 1.0])
    n_grid: int = DEFAULT_N_GRID
    n_grid01: int = DEFAULT_N_GRID01
    kde_method: str = "exact"
    min_obs: int = MIN_OBS_PER_PERIOD
    k: int | None = None
    scree_threshold: float = DEFAULT_SCREE
    p: int = DEFAULT_VAR_LAGS
    lambda1: float = DEFAULT_LAMBDA1
    lambda2: float = DEFAULT_LAMBDA2
    persistent: list = field(default_factory=list)
    n_draws: int = DEFAULT_N_DRAWS
    seed: int = 0
    horizons: list = field(default_factory=lambda: list(DEFAULT_HORIZONS))
    band_level: float | None = None
    impulse: str | None = None
    shock_size: float = 1.0
    method: str = "fsvar"
    quantiles: list = field(default_factory=lambda: [0.1, 0.5, 0.9])
    n_classes: int = 4
    gini_percent: bool = False
    write_long: bool = False
    flp_p: int = DEFAULT_FLP_LAGS
    hac_method: str = "driscoll-kraay"
    lag_truncation: int | None = None
    n_sim: int = 1000
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    mc: McConfig = field(default_factory=McConfig)
    mise: MiseConfig = field(default_factory=MiseConfig)

    def validate(self) -> "RunConfig":
        _check(len(self.support) == 2 and float(self.support[0]) < float(self.support[1]),
               "support must be [L, U] with L < U")
        self.support = [float(self.support[0]), float(self.support[1])]
        _check(self.n_grid >= 64 and self.n_grid01 >= 64, "n_grid and n_grid01 must be >= 64")
        _check(self.kde_method in ("exact", "binned"), "kde_method must be 'exact' or 'binned'")
        _check(self.min_obs >= 2, "min_obs must be >= 2")
        _check(self.k is None or (isinstance(self.k, int) and self.k >= 0), "k must be null or an integer >= 0")
        _check(0 < self.scree_threshold <= 1, "scree_threshold must lie in (0, 1]")
        _check(self.p >= 1 and self.flp_p >= 0, "p must be >= 1 and flp_p >= 0")
        _check(self.lambda1 > 0 and self.lambda2 >= 0, "lambda1 must be > 0 and lambda2 >= 0")
        _check(self.n_draws >= 1 and self.n_sim >= 1, "n_draws and n_sim must be >= 1")
        _check(isinstance(self.seed, int) and self.seed >= 0, "seed must be a non-negative integer")
        _check(len(self.horizons) > 0 and all(isinstance(h, int) and h >= 0 for h in self.horizons),
               "horizons must be non-negative integers")
        _check(self.band_level is None or 0 < self.band_level < 1, "band_level must lie in (0, 1)")
        _check(self.method in ("fsvar", "flp"), "method must be 'fsvar' or 'flp'")
        _check(all(0 < q < 1 for q in self.quantiles), "quantiles must lie in (0, 1)")
        _check(self.n_classes >= 2, "n_classes must be >= 2")
        _check(self.hac_method in HAC_METHODS, f"hac_method must be one of {HAC_METHODS}")
        _check(self.lag_truncation is None or self.lag_truncation >= 0, "lag_truncation must be >= 0")
        self.simulation.validate()
        self.mc.validate()
        self.mise.validate()
        return self

    def application_band(self) -> float:
        return APPLICATION_BAND if self.band_level is None else self.band_level

    def simulation_band(self) -> float:
        return SIMULATION_BAND if self.band_level is None else self.band_level

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _check(ok: bool, message: str) -> None:
    if not ok:
        raise ConfigError(message)


_SECTIONS = {"simulation": SimulationConfig, "mc": McConfig, "mise": MiseConfig}


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown config keys in {where or 'top level'}: {unknown}")
    kwargs = {}
    for key, value in data.items():
        if cls is RunConfig and key in _SECTIONS:
            value = _build(_SECTIONS[key], value or {}, key)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def config_from_dict(data: dict | None) -> RunConfig:
    cfg = _build(RunConfig, data or {}, "")
    try:
        return cfg.validate()
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config value: {exc}") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: config file not found")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    return config_from_dict(data)
