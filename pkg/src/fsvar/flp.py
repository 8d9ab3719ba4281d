"""Functional local projections with HAC system covariance.

For horizon ``h`` the score block is projected on

    [1, z_t[controls], z_t[impulse], z_{t-1}', ..., z_{t-p}']

where ``controls`` are the variables ordered before the impulse in a
recursive identification. The coefficient on ``z_t[impulse]`` is the
response to a unit innovation in the impulse variable's orthogonalized
residual; multiplying by that residual's standard deviation gives the
response to a one standard deviation shock.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .density import uniform_grid
from .firf import DistributionalIrf
from .fpca import FpcaModel, reconstruct
from .lqd import lqd_inverse

HAC_METHODS = ("driscoll-kraay", "newey-west")


class RankDeficientError(np.linalg.LinAlgError):
    pass


def default_lag_truncation(t: int) -> int:
    return int(math.floor(1.3 * math.sqrt(t)))


@dataclass
class FlpFit:
    """One horizon's least-squares projection of the score block."""

    h: int
    coef: np.ndarray  # m x K, one column per score equation
    regressors: list
    X: np.ndarray
    residuals: np.ndarray  # T_h x K
    impulse_row: int
    impulse_sd: float
    cov: np.ndarray | None = None  # covariance of vec(coef), column-major

    @property
    def n_scores(self) -> int:
        return self.coef.shape[1]

    @property
    def intercept(self) -> np.ndarray:
        return self.coef[0]

    @property
    def beta(self) -> np.ndarray:
        """Impact coefficient on the impulse variable, one per score."""
        return self.coef[self.impulse_row]

    def beta_cov(self) -> np.ndarray:
        if self.cov is None:
            raise ValueError("fit has no covariance; call hac_cov first")
        m = self.coef.shape[0]
        idx = np.arange(self.n_scores) * m + self.impulse_row
        return self.cov[np.ix_(idx, idx)]


def _names(names, cols, suffix):
    return [f"{names[c]}[{suffix}]" for c in cols]


def _design(z: np.ndarray, names, impulse_col: int, controls, p: int, h: int):
    t_total, n = z.shape
    rows = np.arange(p, t_total - h)
    blocks = [np.ones((rows.size, 1)), z[np.ix_(rows, controls)], z[rows, impulse_col][:, None]]
    labels = ["const"] + _names(names, controls, "t") + _names(names, [impulse_col], "t")
    for lag in range(1, p + 1):
        blocks.append(z[rows - lag])
        labels += _names(names, range(n), f"t-{lag}")
    return rows, np.hstack(blocks), labels, 1 + len(controls)


def _check_rank(X: np.ndarray, labels) -> None:
    _, r, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag[0] * max(X.shape) * np.finfo(float).eps if diag.size else 0.0
    rank = int(np.sum(diag > tol))
    if rank < X.shape[1]:
        bad = sorted(labels[i] for i in piv[rank:])
        raise RankDeficientError(f"rank-deficient design: collinear columns {bad}")


def flp_fit(
    z: np.ndarray,
    impulse_col: int,
    score_cols: Sequence[int],
    p: int,
    h: int,
    names: Sequence[str] | None = None,
    controls: Sequence[int] | None = None,
    lag_truncation: int | None = None,
    method: str = "driscoll-kraay",
) -> FlpFit:
    """Project ``z_{t+h}[score_cols]`` on the identified impulse.

    Parameters
    ----------
    z : (T, n) array
        The full system, in identification order.
    impulse_col : int
        Column of the impulse variable (0-based).
    score_cols : sequence of int
        Columns holding the FPC scores (the dependent block).
    p, h : int
        Number of lags of the whole system, and the horizon.
    controls : sequence of int, optional
        Contemporaneous controls; defaults to every column before the
        impulse.

    Returns
    -------
    FlpFit
        With its HAC covariance already computed.
    """
    z = np.asarray(z, dtype=float)
    t_total, n = z.shape
    impulse_col = range(n)[impulse_col]
    names = list(names) if names is not None else [f"z{i}" for i in range(n)]
    if p < 0 or h < 0:
        raise ValueError("p and h must be non-negative")
    controls = list(range(impulse_col)) if controls is None else [int(c) for c in controls]
    if impulse_col in controls:
        raise ValueError("the impulse cannot be its own control")
    score_cols = [int(c) for c in score_cols]
    rows, X, labels, impulse_row = _design(z, names, impulse_col, controls, p, h)
    if rows.size < X.shape[1]:
        raise ValueError(
            f"T - p - h = {rows.size} is smaller than the {X.shape[1]} regressors at horizon {h}"
        )
    _check_rank(X, labels)
    Y = z[np.ix_(rows + h, score_cols)]
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    resid = Y - X @ coef
    # orthogonalized impulse: residual of the impulse on everything else in the design
    others = np.delete(X, impulse_row, axis=1)
    g, *_ = np.linalg.lstsq(others, X[:, impulse_row], rcond=None)
    u = X[:, impulse_row] - others @ g
    impulse_sd = float(np.sqrt(u @ u / (u.size - others.shape[1])))
    fit = FlpFit(h, coef, labels, X, resid, impulse_row, impulse_sd)
    fit.cov = hac_cov(fit, lag_truncation, method)
    return fit


def hac_cov(fit: FlpFit, lag_truncation: int | None = None, method: str = "driscoll-kraay") -> np.ndarray:
    """Bartlett-kernel HAC covariance of ``vec(coef)`` (equation by equation).

    ``driscoll-kraay`` uses the stacked per-period moments ``e_t (x) x_t``,
    so serial and cross-equation correlation both enter. ``newey-west``
    applies the same kernel to each equation separately and leaves the
    cross-equation blocks at zero.
    """
    X, E = fit.X, fit.residuals
    t, m = X.shape
    k = E.shape[1]
    lags = default_lag_truncation(t) if lag_truncation is None else int(lag_truncation)
    if lags < 0:
        raise ValueError("lag_truncation must be >= 0")
    if lags >= t:
        raise ValueError(f"lag_truncation {lags} must be smaller than T={t}")
    if method not in HAC_METHODS:
        raise ValueError(f"unknown HAC method {method!r}; choose from {HAC_METHODS}")
    # moments ordered to match column-major vec(coef): equation-major blocks of m
    g = (E[:, :, None] * X[:, None, :]).reshape(t, k * m)
    meat = g.T @ g
    for lag in range(1, lags + 1):
        w = 1.0 - lag / (lags + 1.0)
        gamma = g[lag:].T @ g[:-lag]
        meat += w * (gamma + gamma.T)
    if method == "newey-west":
        mask = np.kron(np.eye(k), np.ones((m, m)))
        meat = meat * mask
    bread = np.kron(np.eye(k), np.linalg.inv(X.T @ X))
    cov = bread @ meat @ bread
    return 0.5 * (cov + cov.T)


def flp_fit_horizons(z, impulse_col, score_cols, p, horizons, **kwargs) -> list[FlpFit]:
    return [flp_fit(z, impulse_col, score_cols, p, h, **kwargs) for h in horizons]


def flp_score_irf(fits: Sequence[FlpFit], size_sd: float = 1.0):
    """Point score IRFs (H x K) and their standard errors for a ``size_sd`` shock."""
    point = np.array([size_sd * f.impulse_sd * f.beta for f in fits])
    se = np.array([size_sd * f.impulse_sd * np.sqrt(np.diag(f.beta_cov())) for f in fits])
    return point, se


def flp_functional_irf(
    fits: Sequence[FlpFit],
    model: FpcaModel,
    support: tuple[float, float],
    size_sd: float = 1.0,
    n_sim: int = 1000,
    seed: int = 0,
    n_grid: int | None = None,
) -> DistributionalIrf:
    """Density responses around the sample-mean LQD.

    The baseline is ``lqd_inverse(mean)``. The point response at horizon
    ``h`` maps ``mean + basis @ irf_h``; the band draws map Gaussian
    coefficient draws from ``(beta_h, cov_h)`` through the same inverse.
    """
    if not fits:
        raise ValueError("no fitted horizons")
    k = model.n_components
    if fits[0].n_scores != k:
        raise ValueError(f"fits have {fits[0].n_scores} scores, model has K={k}")
    grid = uniform_grid(support, n_grid or model.grid01.size)
    p_ss = lqd_inverse(model.mean_curve, support, grid.size).values
    rng = np.random.default_rng(seed)
    point = np.empty((len(fits), grid.size))
    sims = np.empty((n_sim, len(fits), grid.size))
    for i, fit in enumerate(fits):
        scale = size_sd * fit.impulse_sd
        point[i] = lqd_inverse(reconstruct(model, scale * fit.beta), support, grid.size).values - p_ss
        betas = rng.multivariate_normal(fit.beta, fit.beta_cov(), size=n_sim, method="eigh")
        for d in range(n_sim):
            sims[d, i] = lqd_inverse(reconstruct(model, scale * betas[d]), support, grid.size).values - p_ss
    return DistributionalIrf(
        horizons=[f.h for f in fits],
        grid=grid,
        deltas=sims,
        baselines=np.broadcast_to(p_ss, (n_sim, grid.size)).copy(),
        n_dropped=0,
        method="flp",
        point=point,
        meta={"size_sd": size_sd, "K": k, "n_sim": n_sim},
    )
