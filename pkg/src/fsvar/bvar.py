"""Conjugate Normal-Inverse-Wishart VAR with Minnesota-style prior.

Orientation used throughout: the VAR is ``z_t = Pi x_t + u_t`` with
``x_t = [1, z_{t-1}', ..., z_{t-p}']'``, so ``Pi`` is n x m (m = n p + 1).
Prior and posterior means are stored transposed, as m x n matrices
(``psi`` and ``psi_bar``), which keeps the posterior formulas conformable:

    gamma_bar = (Gamma^-1 + X'X)^-1
    psi_bar   = gamma_bar (Gamma^-1 psi + X'Y)
    phi_bar   = Phi + Y'Y + psi' Gamma^-1 psi - psi_bar' gamma_bar^-1 psi_bar
    nu_bar    = nu + T_eff
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import linalg

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA1 = 0.2
DEFAULT_LAMBDA2 = 2.0
INTERCEPT_PRIOR_VARIANCE = 1e3
DEFAULT_N_DRAWS = 1000
DEFAULT_CHUNK = 1000


class NoSteadyStateError(ArithmeticError):
    pass


@dataclass(frozen=True)
class VarData:
    z: np.ndarray
    names: tuple
    p: int

    def __post_init__(self):
        z = np.atleast_2d(np.asarray(self.z, dtype=float))
        if z.ndim != 2:
            raise ValueError("z must be T x n")
        if self.p < 1:
            raise ValueError("lag order p must be >= 1")
        if z.shape[0] < self.p:
            raise ValueError(f"need at least p={self.p} observations, got {z.shape[0]}")
        names = tuple(self.names) if self.names is not None else tuple(f"z{i}" for i in range(z.shape[1]))
        if len(names) != z.shape[1]:
            raise ValueError("one name per column of z required")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "names", names)

    @classmethod
    def from_array(cls, z, p: int, names: Sequence[str] | None = None) -> "VarData":
        return cls(z, tuple(names) if names is not None else None, p)

    @property
    def n(self) -> int:
        return self.z.shape[1]

    @property
    def m(self) -> int:
        return self.n * self.p + 1

    @property
    def t_eff(self) -> int:
        return self.z.shape[0] - self.p

    @property
    def Y(self) -> np.ndarray:
        return self.z[self.p:]

    @property
    def X(self) -> np.ndarray:
        return lag_matrix(self.z, self.p)


def lag_matrix(z: np.ndarray, p: int) -> np.ndarray:
    """Rows ``[1, z_{t-1}', ..., z_{t-p}']`` for ``t = p, ..., T-1``."""
    t = z.shape[0]
    cols = [np.ones((t - p, 1))]
    cols += [z[p - lag: t - lag] for lag in range(1, p + 1)]
    return np.hstack(cols)


@dataclass(frozen=True)
class NiwPrior:
    psi: np.ndarray  # m x n prior mean of Pi'
    gamma_diag: np.ndarray  # m
    nu: float
    phi: np.ndarray  # n x n
    lambda1: float
    lambda2: float
    sigma: np.ndarray  # n AR(1) residual variances

    @property
    def gamma(self) -> np.ndarray:
        return np.diag(self.gamma_diag)


@dataclass(frozen=True)
class NiwPosterior:
    gamma_bar: np.ndarray  # m x m
    psi_bar: np.ndarray  # m x n
    nu_bar: float
    phi_bar: np.ndarray  # n x n
    n: int
    p: int

    def mean_pi(self) -> np.ndarray:
        return self.psi_bar.T.copy()

    def mean_omega(self) -> np.ndarray:
        return self.phi_bar / (self.nu_bar - self.n - 1)


@dataclass(frozen=True)
class PosteriorDraw:
    pi: np.ndarray  # n x m, intercept first
    omega: np.ndarray
    a0inv: np.ndarray  # lower Cholesky factor of omega

    @property
    def n(self) -> int:
        return self.omega.shape[0]

    @property
    def p(self) -> int:
        return (self.pi.shape[1] - 1) // self.n

    @property
    def intercept(self) -> np.ndarray:
        return self.pi[:, 0]

    def lag(self, lag: int) -> np.ndarray:
        n = self.n
        return self.pi[:, 1 + (lag - 1) * n: 1 + lag * n]


def ar1_residual_variances(z: np.ndarray) -> np.ndarray:
    """OLS residual variance of an AR(1) with intercept, per column."""
    out = np.empty(z.shape[1])
    for j in range(z.shape[1]):
        y = z[1:, j]
        x = np.column_stack([np.ones(y.size), z[:-1, j]])
        coef, *_ = np.linalg.lstsq(x, y, rcond=None)
        resid = y - x @ coef
        out[j] = resid @ resid / (y.size - 2)
    if not np.all(np.isfinite(out)) or np.any(out <= 0):
        bad = [j for j in range(out.size) if not (np.isfinite(out[j]) and out[j] > 0)]
        raise ValueError(f"non-finite or zero AR(1) residual variance for columns {bad} (constant series?)")
    return out


def build_minnesota_prior(
    data: VarData,
    lambda1: float = DEFAULT_LAMBDA1,
    lambda2: float = DEFAULT_LAMBDA2,
    persistent: Sequence[bool] | None = None,
) -> NiwPrior:
    """Minnesota-style conjugate prior.

    The prior mean of ``Pi`` is zero except for a 1 on the own first lag of
    every variable flagged persistent. ``Gamma`` is diagonal with 1e3 for
    the intercept and ``lambda1**2 / (sigma_j * l**lambda2)`` for lag ``l``
    of variable ``j``; ``nu = n + 2`` and ``Phi = diag(sigma)``.
    """
    n, p, m = data.n, data.p, data.m
    if data.t_eff <= n * p + 1:
        warnings.warn(
            f"effective sample {data.t_eff} is not larger than the {n * p + 1} regressors per equation",
            stacklevel=2,
        )
    flags = np.zeros(n, dtype=bool) if persistent is None else np.asarray(persistent, dtype=bool)
    if flags.shape != (n,):
        raise ValueError(f"need {n} persistence flags")
    sigma = ar1_residual_variances(data.z)
    psi = np.zeros((m, n))
    for i in np.nonzero(flags)[0]:
        psi[1 + i, i] = 1.0
    gamma_diag = np.empty(m)
    gamma_diag[0] = INTERCEPT_PRIOR_VARIANCE
    for lag in range(1, p + 1):
        gamma_diag[1 + (lag - 1) * n: 1 + lag * n] = lambda1**2 / (sigma * lag**lambda2)
    return NiwPrior(psi, gamma_diag, n + 2, np.diag(sigma), lambda1, lambda2, sigma)


def _symmetrize_spd(a: np.ndarray, what: str) -> np.ndarray:
    a = 0.5 * (a + a.T)
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError(f"{what} is not positive definite") from None
    return a


def posterior_moments(prior: NiwPrior, data: VarData) -> NiwPosterior:
    X, Y = data.X, data.Y
    gamma_inv = 1.0 / prior.gamma_diag
    precision = X.T @ X + np.diag(gamma_inv)
    factor = linalg.cho_factor(precision, lower=True)
    gamma_bar = linalg.cho_solve(factor, np.eye(data.m))
    gamma_bar = 0.5 * (gamma_bar + gamma_bar.T)
    psi_bar = linalg.cho_solve(factor, gamma_inv[:, None] * prior.psi + X.T @ Y)
    # residual form of Phi + Y'Y + psi' G^-1 psi - psi_bar' G_bar^-1 psi_bar
    resid = Y - X @ psi_bar
    shift = psi_bar - prior.psi
    phi_bar = prior.phi + resid.T @ resid + shift.T @ (gamma_inv[:, None] * shift)
    phi_bar = _symmetrize_spd(phi_bar, "posterior scale Phi_bar")
    return NiwPosterior(gamma_bar, psi_bar, prior.nu + data.t_eff, phi_bar, data.n, data.p)


def prior_as_posterior(prior: NiwPrior, p: int) -> NiwPosterior:
    """The prior itself, packaged as a posterior (no data)."""
    n = prior.phi.shape[0]
    return NiwPosterior(prior.gamma, prior.psi.copy(), prior.nu, prior.phi.copy(), n, p)


def sample_posterior(
    post: NiwPosterior,
    n_draws: int = DEFAULT_N_DRAWS,
    seed: int = 0,
    chunk_size: int = DEFAULT_CHUNK,
) -> list[PosteriorDraw]:
    """Direct Monte Carlo from the Normal-Inverse-Wishart posterior.

    ``Omega`` comes from the Bartlett decomposition of a Wishart draw with
    scale ``phi_bar^-1``; then ``Pi' = psi_bar + chol(gamma_bar) G chol(Omega)'``
    with iid standard normal ``G``. Draws are produced in chunks of
    ``chunk_size``; chunk ``c`` uses the ``c``-th child of
    ``SeedSequence(seed)``, so output depends only on ``(seed, chunk_size)``.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    n, m = post.n, post.psi_bar.shape[0]
    try:
        c_phi = np.linalg.cholesky(post.phi_bar)
        c_gamma = np.linalg.cholesky(post.gamma_bar)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"Cholesky failure in posterior scale matrices: {exc}") from None
    n_chunks = -(-n_draws // chunk_size)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    dof = post.nu_bar - np.arange(n)
    lower = np.tril_indices(n, -1)
    draws: list[PosteriorDraw] = []
    for c, child in enumerate(children):
        rng = np.random.default_rng(child)
        size = min(chunk_size, n_draws - c * chunk_size)
        bartlett = np.zeros((size, n, n))
        bartlett[:, np.arange(n), np.arange(n)] = np.sqrt(rng.chisquare(dof, size=(size, n)))
        bartlett[:, lower[0], lower[1]] = rng.standard_normal((size, lower[0].size))
        g = rng.standard_normal((size, m, n))
        # W = C^-T A A' C^-1 ~ Wishart(nu_bar, phi_bar^-1), Omega = W^-1 = B'B, B = A^-1 C'
        b = np.linalg.solve(bartlett, np.broadcast_to(c_phi.T, (size, n, n)))
        omega = np.transpose(b, (0, 2, 1)) @ b
        omega = 0.5 * (omega + np.transpose(omega, (0, 2, 1)))
        chol = np.linalg.cholesky(omega)
        pi_t = post.psi_bar + c_gamma @ g @ np.transpose(chol, (0, 2, 1))
        for i in range(size):
            draws.append(PosteriorDraw(pi_t[i].T.copy(), omega[i], chol[i]))
    return draws


def companion(draw: PosteriorDraw) -> np.ndarray:
    n, p = draw.n, draw.p
    top = draw.pi[:, 1:]
    if p == 1:
        return top.copy()
    lower = np.hstack([np.eye(n * (p - 1)), np.zeros((n * (p - 1), n))])
    return np.vstack([top, lower])


def spectral_radius(draw: PosteriorDraw) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(companion(draw)))))


def is_stable(draw: PosteriorDraw) -> bool:
    return spectral_radius(draw) < 1.0


@dataclass(frozen=True)
class ImpulseResponse:
    responses: np.ndarray  # n x (h_max + 1)
    explosive: bool


def structural_irf(draw: PosteriorDraw, shock_index: int, size_sd: float, h_max: int) -> ImpulseResponse:
    """Responses of ``z_{t+h}``, ``h = 0..h_max``, to a Cholesky shock.

    ``shock_index`` is 0-based (negative values count from the end). The
    impact is ``size_sd`` times column ``shock_index`` of ``a0inv``; later
    horizons follow the lag recursion (intercept excluded).
    """
    n, p = draw.n, draw.p
    if not -n <= shock_index < n:
        raise IndexError(f"shock_index {shock_index} out of range for n={n}")
    if h_max < 0:
        raise ValueError("h_max must be >= 0")
    lags = [draw.lag(l) for l in range(1, p + 1)]
    out = np.zeros((n, h_max + 1))
    out[:, 0] = size_sd * draw.a0inv[:, shock_index]
    for h in range(1, h_max + 1):
        acc = np.zeros(n)
        for l in range(1, min(h, p) + 1):
            acc += lags[l - 1] @ out[:, h - l]
        out[:, h] = acc
    return ImpulseResponse(out, not is_stable(draw))


def unconditional_mean(draw: PosteriorDraw) -> np.ndarray:
    """``(I - sum_l Pi_l)^-1 c``; requires a stable companion matrix."""
    radius = spectral_radius(draw)
    if radius >= 1.0:
        raise NoSteadyStateError(f"no steady state: companion spectral radius {radius:.6g} >= 1")
    total = sum(draw.lag(l) for l in range(1, draw.p + 1))
    return np.linalg.solve(np.eye(draw.n) - total, draw.intercept)


def fit_bvar(
    data: VarData,
    lambda1: float = DEFAULT_LAMBDA1,
    lambda2: float = DEFAULT_LAMBDA2,
    persistent: Sequence[bool] | None = None,
    n_draws: int = DEFAULT_N_DRAWS,
    seed: int = 0,
) -> tuple[NiwPosterior, list[PosteriorDraw]]:
    prior = build_minnesota_prior(data, lambda1, lambda2, persistent)
    post = posterior_moments(prior, data)
    return post, sample_posterior(post, n_draws, seed)


def write_draws_csv(draws: Sequence[PosteriorDraw], path) -> None:
    """Long format ``draw,matrix,row,col,value`` for ``pi`` and ``omega``."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["draw", "matrix", "row", "col", "value"])
        for d, draw in enumerate(draws):
            for label, mat in (("pi", draw.pi), ("omega", draw.omega)):
                for (r, c), v in np.ndenumerate(mat):
                    w.writerow([d, label, r, c, repr(float(v))])


def read_draws_csv(path) -> list[PosteriorDraw]:
    mats: dict[int, dict[str, dict]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            entry = mats.setdefault(int(row["draw"]), {}).setdefault(row["matrix"], {})
            entry[(int(row["row"]), int(row["col"]))] = float(row["value"])
    draws = []
    for d in sorted(mats):
        out = {}
        for label, cells in mats[d].items():
            shape = tuple(np.max(list(cells), axis=0) + 1)
            arr = np.zeros(shape)
            for idx, v in cells.items():
                arr[idx] = v
            out[label] = arr
        draws.append(PosteriorDraw(out["pi"], out["omega"], np.linalg.cholesky(out["omega"])))
    return draws


def posterior_summary(post: NiwPosterior, draws: Sequence[PosteriorDraw], names: Sequence[str],
                      quantiles=(0.05, 0.16, 0.5, 0.84, 0.95)) -> dict:
    pis = np.stack([d.pi for d in draws])
    omegas = np.stack([d.omega for d in draws])
    return {
        "names": list(names),
        "p": post.p,
        "nu_bar": post.nu_bar,
        "n_draws": len(draws),
        "pi_mean": pis.mean(axis=0).tolist(),
        "omega_mean": omegas.mean(axis=0).tolist(),
        "pi_quantiles": {str(q): np.quantile(pis, q, axis=0).tolist() for q in quantiles},
        "posterior_mean_pi": post.mean_pi().tolist(),
        "stable_share": float(np.mean([is_stable(d) for d in draws])),
    }


def write_summary_json(summary: dict, path) -> None:
    Path(path).write_text(json.dumps(summary, indent=2), encoding="utf-8")
