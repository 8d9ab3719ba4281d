"""Functional principal components of a panel of curves on a common grid."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .lqd import LqdCurve


@dataclass(frozen=True)
class LqdPanel:
    """T curves sharing one ``[0, 1]`` grid, with their time mean removed."""

    times: list
    grid01: np.ndarray
    matrix: np.ndarray  # T x N_Z raw curve values
    support_sup: float

    @classmethod
    def from_curves(cls, curves: Sequence[LqdCurve], times=None) -> "LqdPanel":
        if not curves:
            raise ValueError("empty panel")
        grid = curves[0].grid01
        for c in curves[1:]:
            if c.grid01.shape != grid.shape or np.any(c.grid01 != grid):
                raise ValueError("all curves in a panel must share one grid")
        matrix = np.vstack([c.values for c in curves])
        times = list(range(len(curves))) if times is None else list(times)
        return cls(times, grid, matrix, curves[0].support_sup)

    @property
    def curves(self) -> list[LqdCurve]:
        return [LqdCurve(self.grid01, row, self.support_sup) for row in self.matrix]

    @property
    def mean_curve(self) -> LqdCurve:
        return LqdCurve(self.grid01, self.matrix.mean(axis=0), self.support_sup)

    @property
    def demeaned(self) -> np.ndarray:
        return self.matrix - self.matrix.mean(axis=0)

    def __len__(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class FpcaModel:
    """Truncated SVD ``Z ~ A D'`` of the demeaned panel.

    ``basis`` (N_Z x K) has orthonormal columns, ``scores`` is ``A = S V``
    (T x K). ``explained_shares[k]`` is the share of total squared
    variation carried by component ``k``.
    """

    mean_curve: LqdCurve
    basis: np.ndarray
    scores: np.ndarray
    singular_values: np.ndarray
    explained_shares: np.ndarray

    @property
    def n_components(self) -> int:
        return self.basis.shape[1]

    @property
    def grid01(self) -> np.ndarray:
        return self.mean_curve.grid01

    def to_dict(self) -> dict:
        return {
            "grid01": self.mean_curve.grid01.tolist(),
            "mean": self.mean_curve.values.tolist(),
            "support_sup": self.mean_curve.support_sup,
            "basis": self.basis.tolist(),
            "scores": self.scores.tolist(),
            "singular_values": self.singular_values.tolist(),
            "explained_shares": self.explained_shares.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FpcaModel":
        k = len(d["singular_values"])
        n_z = len(d["grid01"])
        return cls(
            LqdCurve(np.array(d["grid01"]), np.array(d["mean"]), d["support_sup"]),
            np.array(d["basis"], dtype=float).reshape(n_z, k),
            np.array(d["scores"], dtype=float).reshape(-1, k),
            np.array(d["singular_values"], dtype=float),
            np.array(d["explained_shares"], dtype=float),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FpcaModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _svd(z: np.ndarray):
    u, s, vt = np.linalg.svd(z, full_matrices=False)
    # sign convention: the largest-magnitude loading of each basis vector is positive
    pivot = np.argmax(np.abs(vt), axis=1)
    signs = np.sign(vt[np.arange(vt.shape[0]), pivot])
    signs[signs == 0] = 1.0
    return u * signs, s, vt * signs[:, None]


def explained_variance(panel: LqdPanel) -> np.ndarray:
    """Per-component shares of ``||Z||_F^2`` for every available component."""
    s = np.linalg.svd(panel.demeaned, compute_uv=False)
    total = np.sum(s**2)
    if total == 0:
        return np.zeros_like(s)
    return s**2 / total


def principal_components(matrix: np.ndarray, k: int):
    """Mean row and rank-``k`` SVD of the demeaned rows of any T x G matrix.

    Returns ``(mean, basis G x k, scores T x k, singular values, shares)``.
    """
    matrix = np.asarray(matrix, dtype=float)
    t, n_z = matrix.shape
    if not 1 <= k <= min(t, n_z):
        raise ValueError(f"K={k} outside [1, {min(t, n_z)}]")
    mean = matrix.mean(axis=0)
    u, s, vt = _svd(matrix - mean)
    total = np.sum(s**2)
    shares = s[:k] ** 2 / total if total > 0 else np.zeros(k)
    return mean, vt[:k].T.copy(), u[:, :k] * s[:k], s[:k].copy(), shares


def fit_fpca(panel: LqdPanel, k: int) -> FpcaModel:
    _, basis, scores, s, shares = principal_components(panel.matrix, k)
    return FpcaModel(
        mean_curve=panel.mean_curve,
        basis=basis,
        scores=scores,
        singular_values=s,
        explained_shares=shares,
    )


def select_k_scree(panel: LqdPanel, threshold: float = 0.90) -> int:
    """Smallest K whose cumulative explained share reaches ``threshold``."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    cum = np.cumsum(explained_variance(panel))
    if cum.size == 0 or cum[-1] == 0:
        return 1
    # guard against the last cumulative share rounding just below 1
    hit = np.nonzero(cum >= threshold - 1e-12)[0]
    return int(hit[0]) + 1 if hit.size else cum.size


def _check_grid(model: FpcaModel, curve: LqdCurve) -> None:
    g = model.grid01
    if curve.grid01.shape != g.shape or np.any(curve.grid01 != g):
        raise ValueError("curve grid does not match the model grid")


def project_scores(model: FpcaModel, curve: LqdCurve) -> np.ndarray:
    """Least-squares scores of ``curve - mean`` on the basis."""
    _check_grid(model, curve)
    resid = curve.values - model.mean_curve.values
    coef, *_ = np.linalg.lstsq(model.basis, resid, rcond=None)
    return coef


def project_matrix(model: FpcaModel, matrix: np.ndarray) -> np.ndarray:
    """Scores for each row of ``matrix`` (curves on the model grid)."""
    resid = np.atleast_2d(matrix) - model.mean_curve.values
    coef, *_ = np.linalg.lstsq(model.basis, resid.T, rcond=None)
    return coef.T


def reconstruct(model: FpcaModel, scores) -> LqdCurve:
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (model.n_components,):
        raise ValueError(f"expected {model.n_components} scores, got shape {scores.shape}")
    m = model.mean_curve
    return LqdCurve(m.grid01, m.values + model.basis @ scores, m.support_sup)


def reconstruction_error(panel: LqdPanel, model: FpcaModel) -> float:
    """Frobenius norm of ``Z - A D'``."""
    return float(np.linalg.norm(panel.demeaned - model.scores @ model.basis.T))
