"""Distributional impulse responses and their summary functionals."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bvar import NoSteadyStateError, PosteriorDraw, structural_irf, unconditional_mean
from .density import DensityCurve, cumulative_trapezoid, uniform_grid
from .fpca import FpcaModel, reconstruct
from .lqd import lqd_inverse

logger = logging.getLogger(__name__)

APPLICATION_BAND = 0.68
SIMULATION_BAND = 0.90


@dataclass
class DistributionalIrf:
    """Per-draw density responses ``p_{ss+h} - p_ss`` on a grid over the support.

    ``deltas`` has shape (draws, horizons, grid); ``baselines`` holds each
    draw's steady-state density, shape (draws, grid).
    """

    horizons: list
    grid: np.ndarray
    deltas: np.ndarray
    baselines: np.ndarray
    n_dropped: int = 0
    method: str = "fsvar"
    point: np.ndarray | None = None  # (horizons, grid) point estimate, if any
    meta: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return self.deltas.shape[0]

    @property
    def support(self) -> tuple[float, float]:
        return float(self.grid[0]), float(self.grid[-1])

    def levels(self) -> np.ndarray:
        """``p_{ss+h}`` for every draw and horizon."""
        return self.baselines[:, None, :] + self.deltas

    def curve(self, draw: int, h_index: int) -> DensityCurve:
        return DensityCurve(self.grid, self.baselines[draw] + self.deltas[draw, h_index])

    def median(self) -> np.ndarray:
        return np.median(self.deltas, axis=0)

    def bands(self, level: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return pointwise_bands(self.deltas, level)


def pointwise_bands(samples: np.ndarray, level: float):
    """Median and equal-tailed ``level`` band along axis 0."""
    if not 0 < level < 1:
        raise ValueError("band level must lie in (0, 1)")
    tail = (1.0 - level) / 2.0
    lo, med, hi = np.quantile(samples, [tail, 0.5, 1.0 - tail], axis=0)
    return med, lo, hi


def functional_irf(
    draws: Sequence[PosteriorDraw],
    model: FpcaModel,
    shock_index: int,
    size_sd: float,
    horizons: Sequence[int],
    support: tuple[float, float],
    score_cols: Sequence[int] | None = None,
    n_grid: int | None = None,
) -> DistributionalIrf:
    """Map each posterior draw's score IRF into density space.

    For each draw the steady-state scores come from the VAR's unconditional
    mean; the steady-state LQD is ``mean + basis @ alpha_ss`` and the
    horizon-``h`` LQD adds the score IRF. Both are mapped back with
    :func:`lqd_inverse`. Draws without a steady state (companion spectral
    radius >= 1) are dropped and counted in ``n_dropped``.

    ``score_cols`` locates the K score variables inside the VAR vector and
    defaults to its last K entries.
    """
    horizons = [int(h) for h in horizons]
    if not horizons or min(horizons) < 0:
        raise ValueError("horizons must be non-negative integers")
    k = model.n_components
    if not draws:
        raise ValueError("no posterior draws")
    n = draws[0].n
    cols = np.arange(n - k, n) if score_cols is None else np.asarray(score_cols, dtype=int)
    if cols.size != k:
        raise ValueError(f"model has K={k} components but {cols.size} score columns were given")
    grid = uniform_grid(support, n_grid or model.grid01.size)
    h_max = max(horizons)
    deltas, baselines = [], []
    dropped = 0
    for draw in draws:
        if draw.n != n:
            raise ValueError("draws of differing dimension")
        try:
            alpha_ss = unconditional_mean(draw)[cols]
        except NoSteadyStateError:
            dropped += 1
            continue
        irf = structural_irf(draw, shock_index, size_sd, h_max).responses[cols]
        p_ss = lqd_inverse(reconstruct(model, alpha_ss), support, grid.size).values
        rows = np.empty((len(horizons), grid.size))
        for i, h in enumerate(horizons):
            rows[i] = lqd_inverse(reconstruct(model, alpha_ss + irf[:, h]), support, grid.size).values - p_ss
        deltas.append(rows)
        baselines.append(p_ss)
    if dropped:
        logger.info("dropped %d of %d draws without a steady state", dropped, len(draws))
    if not deltas:
        raise NoSteadyStateError("no posterior draw has a steady state")
    return DistributionalIrf(
        horizons=horizons,
        grid=grid,
        deltas=np.stack(deltas),
        baselines=np.stack(baselines),
        n_dropped=dropped,
        method="fsvar",
        meta={"shock_index": shock_index, "size_sd": size_sd, "K": k},
    )


def _quantiles_of(values: np.ndarray, grid: np.ndarray, q) -> np.ndarray:
    cdf = cumulative_trapezoid(values, grid)
    return np.interp(q, cdf / cdf[-1], grid)


def quantile_levels(dirf: DistributionalIrf, q: float) -> tuple[np.ndarray, np.ndarray]:
    """``(Q_ss(q) per draw, Q_h(q) per draw and horizon)``."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    base = np.array([_quantiles_of(b, dirf.grid, q) for b in dirf.baselines])
    lev = dirf.levels()
    shocked = np.array([[_quantiles_of(lev[d, i], dirf.grid, q) for i in range(lev.shape[1])]
                        for d in range(lev.shape[0])])
    return base, shocked


def quantile_response(dirf: DistributionalIrf, q: float) -> np.ndarray:
    """Percent change ``100 (Q_h(q) / Q_ss(q) - 1)``, shape (draws, horizons)."""
    base, shocked = quantile_levels(dirf, q)
    return 100.0 * (shocked / base[:, None] - 1.0)


def _class_shares(values: np.ndarray, grid: np.ndarray, n_classes: int) -> np.ndarray:
    cdf = cumulative_trapezoid(values, grid)
    edges = np.linspace(grid[0], grid[-1], n_classes + 1)
    return np.diff(np.interp(edges, grid, cdf))


def class_share_response(dirf: DistributionalIrf, n_classes: int = 4) -> np.ndarray:
    """Change in the mass of ``n_classes`` equal-width slices of the support.

    Shape (draws, horizons, classes); each row sums to zero.
    """
    if n_classes < 2:
        raise ValueError("need at least two classes")
    base = np.array([_class_shares(b, dirf.grid, n_classes) for b in dirf.baselines])
    lev = dirf.levels()
    shocked = np.array([[_class_shares(lev[d, i], dirf.grid, n_classes) for i in range(lev.shape[1])]
                        for d in range(lev.shape[0])])
    return shocked - base[:, None, :]


def gini(p: DensityCurve, n_u: int | None = None) -> float:
    """Gini coefficient ``1 - 2 int_0^1 L(u) du`` from the Lorenz curve of ``p``.

    ``L(u) = int_0^u Q / int_0^1 Q`` with the quantile ``Q`` obtained by
    inverting the trapezoid cdf on a uniform ``u`` grid.
    """
    lo, _ = p.support
    if lo < 0:
        raise ValueError("Gini requires a non-negative support")
    u = uniform_grid((0.0, 1.0), n_u or 4 * p.grid.size + 1)
    q = p.quantile(u)
    lorenz = cumulative_trapezoid(q, u)
    mu = lorenz[-1]
    if not mu > 0:
        raise ZeroDivisionError("zero mean: Gini undefined")
    return float(1.0 - 2.0 * np.trapezoid(lorenz / mu, u))


def gini_response(dirf: DistributionalIrf, percent: bool = False) -> np.ndarray:
    """``G_h - G_ss`` per draw and horizon (or the percent change)."""
    g_ss = np.array([gini(DensityCurve(dirf.grid, b)) for b in dirf.baselines])
    lev = dirf.levels()
    g_h = np.array([[gini(DensityCurve(dirf.grid, lev[d, i])) for i in range(lev.shape[1])]
                    for d in range(lev.shape[0])])
    if percent:
        return 100.0 * (g_h / g_ss[:, None] - 1.0)
    return g_h - g_ss[:, None]


def write_long_csv(dirf: DistributionalIrf, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "draw", "horizon", "x", "delta"])
        xs = [repr(float(x)) for x in dirf.grid]
        for d in range(dirf.n_draws):
            for i, h in enumerate(dirf.horizons):
                for x, v in zip(xs, dirf.deltas[d, i].tolist()):
                    w.writerow([dirf.method, d, h, x, repr(v)])


def write_summary_csv(dirf: DistributionalIrf, path, level: float) -> None:
    med, lo, hi = dirf.bands(level)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "horizon", "x", "median", "lo", "hi", "level"])
        for i, h in enumerate(dirf.horizons):
            for j, x in enumerate(dirf.grid.tolist()):
                w.writerow([dirf.method, h, repr(x), repr(float(med[i, j])), repr(float(lo[i, j])),
                            repr(float(hi[i, j])), level])


def write_path_csv(paths: np.ndarray, horizons, path, level: float, labels=None, method="fsvar") -> None:
    """Band summary of per-draw paths, shape (draws, horizons[, series])."""
    arr = paths if paths.ndim == 3 else paths[:, :, None]
    med, lo, hi = pointwise_bands(arr, level)
    labels = labels or [str(c) for c in range(arr.shape[2])]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "series", "horizon", "median", "lo", "hi", "level"])
        for c, label in enumerate(labels):
            for i, h in enumerate(horizons):
                w.writerow([method, label, h, repr(float(med[i, c])), repr(float(lo[i, c])),
                            repr(float(hi[i, c])), level])
