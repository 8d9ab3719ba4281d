"""Command-line front end.

Every command reads one YAML config (see :mod:`fsvar.config`), writes
UTF-8 CSV/JSON into ``output_dir`` and finishes with a manifest naming the
config hash, the library version and a checksum of every file written.
Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .bvar import VarData, build_minnesota_prior, posterior_moments, posterior_summary, read_draws_csv, \
    sample_posterior, write_draws_csv, write_summary_json
from .config import ConfigError, RunConfig, load_config
from .density import DataError, estimate_density, read_micro_csv, write_micro_csv
from .firf import class_share_response, functional_irf, gini, gini_response, \
    quantile_response, write_long_csv, write_path_csv, write_summary_csv
from .flp import flp_fit_horizons, flp_functional_irf, flp_score_irf
from .fpca import FpcaModel, explained_variance, fit_fpca, select_k_scree
from .lqd import LqdOverflowError
from .pipeline import assemble_system, lqd_panel_from_samples
from .simlab import DgpSpec, mc_correlation_study, mise_cv_study, simulate_dgp, true_functional_irf

logger = logging.getLogger("fsvar")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


class Outputs:
    """Tracks files written by a command, for the manifest."""

    def __init__(self, root: Path):
        self.root = root
        try:
            root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise DataError(f"cannot create output directory {root}: {exc}") from None
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.root / name

    def json(self, name: str, obj) -> None:
        self.path(name).write_text(json.dumps(obj, indent=2, sort_keys=True), encoding="utf-8")

    def manifest(self, command: str, cfg: RunConfig, extra: dict | None = None) -> None:
        checksums = {}
        for name in self.files:
            checksums[name] = hashlib.sha256((self.root / name).read_bytes()).hexdigest()
        doc = {
            "command": command,
            "library_version": __version__,
            "config_hash": cfg.digest(),
            "config": cfg.to_dict(),
            "files": checksums,
        }
        doc.update(extra or {})
        (self.root / f"{command.replace('-', '_')}_manifest.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")


# ---------------------------------------------------------------- macro CSV

def read_macro_csv(path):
    """``period,<name>,...`` with a header; periods sorted lexicographically."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "period" or len(header) < 2:
            raise DataError(f"{path}: header must start with 'period' followed by variable names")
        names = [h.strip() for h in header[1:]]
        rows = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                values = [float(v) for v in row[1:]]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric value") from None
            if not all(np.isfinite(values)):
                raise DataError(f"{path}:{lineno}: non-finite value")
            if row[0].strip() in rows:
                raise DataError(f"{path}:{lineno}: duplicate period {row[0].strip()!r}")
            rows[row[0].strip()] = values
    periods = sorted(rows)
    return periods, names, np.array([rows[p] for p in periods], dtype=float).reshape(len(periods), len(names))


def write_macro_csv(path, periods, names, values) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["period", *names])
        for period, row in zip(periods, np.asarray(values).tolist()):
            w.writerow([period, *(repr(v) for v in row)])


def _period_labels(t: int) -> list[str]:
    width = max(4, len(str(t - 1)))
    return [f"t{i:0{width}d}" for i in range(t)]


def _spec_from(cfg: RunConfig) -> DgpSpec:
    s = cfg.simulation
    return DgpSpec(basis_kind="lqd" if s.dgp == 1 else "logdensity", omega_seed=s.omega_seed,
                   basis_seed=s.basis_seed, n_obs=s.n_obs, t=s.t, burn_in=s.burn_in,
                   basis_scaling=s.basis_scaling, omega_recipe=s.omega_recipe)


# ---------------------------------------------------------------- commands

def cmd_simulate(cfg: RunConfig) -> None:
    spec = _spec_from(cfg)
    out = Outputs(Path(cfg.output_dir))
    sim = simulate_dgp(spec, cfg.seed)
    periods = _period_labels(spec.t)
    names = [f"y{i + 1}" for i in range(spec.n_v)]
    write_macro_csv(out.path("macro.csv"), periods, names, sim.y)
    write_micro_csv(out.path("micro.csv"), periods, sim.samples)
    truth = {}
    for s in range(spec.n_v):
        tr = true_functional_irf(spec, sim.basis, s, cfg.shock_size, cfg.horizons)
        truth[names[s]] = {"horizons": tr.horizons, "delta": tr.deltas.tolist(), "alpha_irf": tr.alpha_irf.tolist()}
    out.json("truth.json", {
        "spec": spec.to_dict(),
        "seed": cfg.seed,
        "grid": np.linspace(*spec.support, spec.n_grid).tolist(),
        "alpha": sim.alpha.tolist(),
        "basis_mean": sim.basis.mean.tolist(),
        "basis": sim.basis.basis.tolist(),
        "true_irf": truth,
    })
    out.manifest("simulate", cfg)


def _load_panels(cfg: RunConfig):
    """Macro block, its names, the period labels and (if K != 0) the LQD panel."""
    need_micro = cfg.k != 0
    periods = None
    macro, names = None, []
    if cfg.macro_csv:
        periods, names, macro = read_macro_csv(cfg.macro_csv)
    panel = None
    if need_micro:
        if not cfg.micro_csv:
            raise ConfigError("micro_csv is required unless k is 0")
        micro = read_micro_csv(cfg.micro_csv, tuple(cfg.support), cfg.min_obs)
        if periods is not None and list(micro.periods) != list(periods):
            raise DataError("macro and micro CSVs cover different periods")
        periods = micro.periods
        _, panel = lqd_panel_from_samples(micro.samples, tuple(cfg.support), cfg.n_grid, cfg.n_grid01,
                                          cfg.kde_method, times=micro.periods)
    if periods is None:
        raise ConfigError("no input data: set macro_csv and/or micro_csv")
    return periods, names, macro, panel


def _choose_k(cfg: RunConfig, panel) -> int:
    k = select_k_scree(panel, cfg.scree_threshold) if cfg.k is None else cfg.k
    logger.info("K = %d (explained shares %s)", k, np.round(fit_fpca(panel, k).explained_shares, 4).tolist())
    return k


def cmd_fit(cfg: RunConfig) -> None:
    out = Outputs(Path(cfg.output_dir))
    periods, names, macro, panel = _load_panels(cfg)
    scores, model, k = None, None, 0
    if panel is not None:
        k = _choose_k(cfg, panel)
        model = fit_fpca(panel, k)
        scores = model.scores
        model.save(out.path("fpca_model.json"))
        shares = explained_variance(panel)
        with out.path("fpca_shares.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["component", "share", "cumulative"])
            for i, (s, c) in enumerate(zip(shares.tolist(), np.cumsum(shares).tolist()), start=1):
                w.writerow([i, repr(s), repr(c)])
    z, layout = assemble_system(macro, names, scores, cfg.impulse)
    unknown = sorted(set(cfg.persistent) - set(layout.names))
    if unknown:
        raise ConfigError(f"persistent names not in the system: {unknown}")
    data = VarData.from_array(z, cfg.p, layout.names)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        prior = build_minnesota_prior(data, cfg.lambda1, cfg.lambda2, [n in cfg.persistent for n in layout.names])
    for w in caught:
        logger.warning("%s", w.message)
    post = posterior_moments(prior, data)
    draws = sample_posterior(post, cfg.n_draws, cfg.seed)
    write_draws_csv(draws, out.path("posterior_draws.csv"))
    write_summary_json(posterior_summary(post, draws, layout.names), out.path("posterior_summary.json"))
    out.json("system.json", {"names": list(layout.names), "score_cols": list(layout.score_cols),
                             "impulse_col": layout.impulse_col, "p": cfg.p, "K": k, "periods": list(periods),
                             "support": cfg.support})
    out.manifest("fit", cfg, {"K": k})


def _shock_index(cfg: RunConfig, names) -> int:
    if cfg.impulse is None:
        return len(names) - 1
    if cfg.impulse not in names:
        raise ConfigError(f"impulse {cfg.impulse!r} not in the fitted system {list(names)}")
    return list(names).index(cfg.impulse)


def _write_functionals(out: Outputs, dirf, cfg: RunConfig, level: float) -> None:
    write_summary_csv(dirf, out.path(f"{dirf.method}_irf_summary.csv"), level)
    if cfg.write_long:
        write_long_csv(dirf, out.path(f"{dirf.method}_irf_long.csv"))
    qs = np.stack([quantile_response(dirf, q) for q in cfg.quantiles], axis=2)
    write_path_csv(qs, dirf.horizons, out.path(f"{dirf.method}_quantile_paths.csv"), level,
                   [f"q{q:g}" for q in cfg.quantiles], dirf.method)
    cs = class_share_response(dirf, cfg.n_classes)
    write_path_csv(cs, dirf.horizons, out.path(f"{dirf.method}_class_shares.csv"), level,
                   [f"class{i + 1}" for i in range(cfg.n_classes)], dirf.method)
    write_path_csv(gini_response(dirf, cfg.gini_percent), dirf.horizons, out.path(f"{dirf.method}_gini.csv"),
                   level, ["gini"], dirf.method)


def cmd_irf(cfg: RunConfig) -> None:
    root = Path(cfg.output_dir)
    needed = ["system.json", "posterior_draws.csv"]
    missing = [n for n in needed if not (root / n).exists()]
    if missing:
        raise DataError(f"missing fitted artifacts in {root}: {missing} (run 'fit' first)")
    system = json.loads((root / "system.json").read_text(encoding="utf-8"))
    if system["K"] == 0:
        raise DataError("the fitted system has no score block (K = 0); nothing to map to densities")
    if not (root / "fpca_model.json").exists():
        raise DataError(f"missing fitted artifact {root / 'fpca_model.json'}")
    model = FpcaModel.load(root / "fpca_model.json")
    draws = read_draws_csv(root / "posterior_draws.csv")
    out = Outputs(root)
    shock = _shock_index(cfg, system["names"])
    dirf = functional_irf(draws, model, shock, cfg.shock_size, cfg.horizons, tuple(system["support"]),
                          system["score_cols"], cfg.n_grid)
    level = cfg.application_band()
    _write_functionals(out, dirf, cfg, level)
    out.manifest("irf", cfg, {"n_draws_used": dirf.n_draws, "n_draws_dropped": dirf.n_dropped, "band_level": level})


def cmd_flp(cfg: RunConfig) -> None:
    out = Outputs(Path(cfg.output_dir))
    periods, names, macro, panel = _load_panels(cfg)
    if panel is None:
        raise ConfigError("flp needs a micro panel (k must not be 0)")
    k = _choose_k(cfg, panel)
    model = fit_fpca(panel, k)
    z, layout = assemble_system(macro, names, model.scores, cfg.impulse)
    impulse = layout.impulse_col if layout.impulse_col is not None else layout.n - 1
    fits = flp_fit_horizons(z, impulse, layout.score_cols, cfg.flp_p, cfg.horizons, names=layout.names,
                            lag_truncation=cfg.lag_truncation, method=cfg.hac_method)
    point, se = flp_score_irf(fits, cfg.shock_size)
    with out.path("flp_score_irf.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "horizon", "score", "irf", "se"])
        for i, h in enumerate(cfg.horizons):
            for j in range(k):
                w.writerow(["flp", h, j + 1, repr(float(point[i, j])), repr(float(se[i, j]))])
    dirf = flp_functional_irf(fits, model, tuple(cfg.support), cfg.shock_size, cfg.n_sim, cfg.seed, cfg.n_grid)
    level = cfg.application_band()
    _write_functionals(out, dirf, cfg, level)
    model.save(out.path("flp_fpca_model.json"))
    out.manifest("flp", cfg, {"K": k, "band_level": level})


def cmd_mc(cfg: RunConfig) -> None:
    out = Outputs(Path(cfg.output_dir))
    table = mc_correlation_study(_spec_from(cfg), cfg.mc.k_list, cfg.horizons, cfg.mc.n_reps, cfg.seed,
                                 cfg.n_draws, cfg.mc.shocks, cfg.shock_size, kde_method="binned",
                                 scree_threshold=cfg.scree_threshold)
    table.to_csv(out.path("mc_table.csv"))
    out.json("mc_settings.json", table.settings)
    out.manifest("mc", cfg)


def cmd_mise_cv(cfg: RunConfig) -> None:
    out = Outputs(Path(cfg.output_dir))
    m = cfg.mise
    table = mise_cv_study(_spec_from(cfg), m.transforms, m.k_list, m.n_reps, m.split, cfg.seed,
                          kde_method="binned", regenerate=m.regenerate)
    table.to_csv(out.path("mise_table.csv"))
    out.json("mise_settings.json", table.settings)
    out.manifest("mise-cv", cfg)


def cmd_gini(cfg: RunConfig) -> None:
    if not cfg.micro_csv:
        raise ConfigError("gini needs micro_csv")
    out = Outputs(Path(cfg.output_dir))
    micro = read_micro_csv(cfg.micro_csv, tuple(cfg.support), cfg.min_obs)
    with out.path("gini_by_period.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["period", "gini"])
        for period, obs in zip(micro.periods, micro.samples):
            d = estimate_density(obs, tuple(cfg.support), cfg.n_grid, method=cfg.kde_method)
            w.writerow([period, repr(gini(d))])
    out.manifest("gini", cfg)


HELP = {
    "simulate": "write macro/micro CSVs and the truth for a simulated design",
    "fit": "estimate densities, LQDs, FPCA and the Bayesian VAR",
    "irf": "distributional impulse responses from a fitted model",
    "flp": "distributional responses by functional local projections",
    "mc": "Monte Carlo correlation study",
    "mise-cv": "transform cross-validation (MISE) study",
    "gini": "Gini coefficient of each period's estimated density",
}

COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "irf": cmd_irf,
    "flp": cmd_flp,
    "mc": cmd_mc,
    "mise-cv": cmd_mise_cv,
    "gini": cmd_gini,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fsvar", description="Functional structural VAR toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("-c", "--config", required=True, help="YAML run configuration")
        p.add_argument("-o", "--output-dir", help="override output_dir from the config")
        p.add_argument("--seed", type=int, help="override seed from the config")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.output_dir:
            cfg.output_dir = args.output_dir
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be non-negative")
            cfg.seed = args.seed
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, LqdOverflowError, np.linalg.LinAlgError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
