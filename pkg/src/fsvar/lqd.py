"""Log quantile density (LQD) transform and its inverse.

The LQD of a density ``p`` on ``[L, U]`` is ``f(z) = log Q'(z)`` on ``[0, 1]``,
where ``Q`` is the quantile function. ``f`` is unconstrained; mapping any
finite ``f`` back yields a non-negative density with unit mass, so no
renormalization is ever applied on the way back.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .density import (
    DENSITY_FLOOR,
    DensityCurve,
    _xy_from_csv,
    _xy_to_csv,
    cumulative_trapezoid,
    uniform_grid,
)

DEFAULT_N_GRID01 = 1000
EXP_CLAMP = 700.0


class LqdOverflowError(ArithmeticError):
    pass


@dataclass(frozen=True)
class LqdCurve:
    grid01: np.ndarray
    values: np.ndarray
    support_sup: float

    def __post_init__(self):
        grid = np.asarray(self.grid01, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValueError("grid01 and values must be 1-d arrays of equal length")
        if grid[0] != 0.0 or grid[-1] != 1.0 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid01 must increase strictly from 0 to 1")
        object.__setattr__(self, "grid01", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "support_sup", float(self.support_sup))

    def __add__(self, other: float) -> "LqdCurve":
        return LqdCurve(self.grid01, self.values + other, self.support_sup)

    def to_json(self) -> str:
        return json.dumps(
            {"grid01": self.grid01.tolist(), "values": self.values.tolist(),
             "support_sup": self.support_sup}
        )

    @classmethod
    def from_json(cls, text: str) -> "LqdCurve":
        d = json.loads(text)
        return cls(np.array(d["grid01"]), np.array(d["values"]), d["support_sup"])

    def to_csv(self, path) -> None:
        _xy_to_csv(self.grid01, self.values, path)

    @classmethod
    def from_csv(cls, path, support_sup: float) -> "LqdCurve":
        x, v = _xy_from_csv(path)
        return cls(x, v, support_sup)


def unit_grid(n: int) -> np.ndarray:
    return uniform_grid((0.0, 1.0), n)


def lqd_forward(p: DensityCurve, n_grid01: int = DEFAULT_N_GRID01) -> LqdCurve:
    """Map a density to its log quantile density on a uniform ``[0, 1]`` grid.

    The cdf comes from cumulative trapezoid integration, the quantile function
    from linear inversion of the cdf, and its derivative from central
    differences (one-sided at the two endpoints).
    """
    values = np.maximum(p.values, DENSITY_FLOOR)
    cdf = cumulative_trapezoid(values, p.grid)
    if np.any(np.diff(cdf) <= 0) or not np.isfinite(cdf[-1]):
        raise ValueError("cdf is not strictly increasing; density curve is corrupted")
    cdf /= cdf[-1]
    z = unit_grid(n_grid01)
    quantile = np.interp(z, cdf, p.grid)
    slope = np.gradient(quantile, z)
    return LqdCurve(z, np.log(slope), p.grid[-1])


def _quantile_and_slope(f: LqdCurve, support: tuple[float, float]):
    v = f.values
    if not np.all(np.isfinite(v)):
        bad = v[~np.isfinite(v)][0]
        raise LqdOverflowError(f"LQD overflow: non-finite value {bad}")
    top = v.max()
    if top - v.min() > 2 * EXP_CLAMP:
        raise LqdOverflowError(
            f"LQD overflow: range {top - v.min():.6g} exceeds {2 * EXP_CLAMP:g} (max {top:.6g})"
        )
    expo = np.exp(v - top)
    lo, hi = support
    cum = cumulative_trapezoid(expo, f.grid01)
    theta = (hi - lo) / cum[-1]
    quantile = lo + theta * cum
    quantile[-1] = hi
    return quantile, theta * expo


def lqd_quantile(f: LqdCurve, support: tuple[float, float]) -> np.ndarray:
    """Quantile function on ``f.grid01`` implied by ``f``, pinned to ``Q(0)=L``, ``Q(1)=U``.

    ``Q(z) = L + theta * int_0^z exp f``, ``theta = (U - L) / int_0^1 exp f``.
    The curve is shifted by its maximum before exponentiation; the shift
    cancels in ``theta``.
    """
    return _quantile_and_slope(f, support)[0]


def monotone_slopes(x: np.ndarray, y: np.ndarray, slopes: np.ndarray) -> np.ndarray:
    """Shrink Hermite knot slopes so the cubic through ``(x, y)`` is non-decreasing.

    Fritsch-Carlson: on each interval the ratios of knot slope to secant must
    lie in the disc of radius 3.
    """
    secant = np.diff(y) / np.diff(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        radius = np.hypot(slopes[:-1] / secant, slopes[1:] / secant)
        tau = np.where(radius > 3.0, 3.0 / radius, 1.0)
    tau = np.where(secant > 0, tau, 0.0)
    factor = np.ones_like(slopes)
    factor[:-1] = np.minimum(factor[:-1], tau)
    factor[1:] = np.minimum(factor[1:], tau)
    return slopes * factor


def hermite_eval(x: np.ndarray, y: np.ndarray, slopes: np.ndarray, at: np.ndarray) -> np.ndarray:
    """Evaluate the piecewise cubic Hermite interpolant at ``at`` (inside ``[x[0], x[-1]]``)."""
    i = np.clip(np.searchsorted(x, at, side="right") - 1, 0, x.size - 2)
    width = x[i + 1] - x[i]
    t = (at - x[i]) / width
    t2 = t * t
    t3 = t2 * t
    return (
        (2 * t3 - 3 * t2 + 1) * y[i]
        + (t3 - 2 * t2 + t) * width * slopes[i]
        + (-2 * t3 + 3 * t2) * y[i + 1]
        + (t3 - t2) * width * slopes[i + 1]
    )


def lqd_inverse(f: LqdCurve, support: tuple[float, float], n_grid: int | None = None) -> DensityCurve:
    """Recover the density on ``support`` from its LQD.

    The cdf interpolates the inverse of the reconstructed quantile function
    with a monotone cubic Hermite spline (knot slopes ``1/Q'``), and the
    density is its central-difference derivative on a uniform grid. Because
    the cdf runs from exactly 0 to exactly 1 and never decreases, the result
    is non-negative and its trapezoid integral telescopes to 1; nothing is
    rescaled.
    """
    lo, hi = support
    if not lo < hi:
        raise ValueError(f"invalid support [{lo}, {hi}]")
    quantile, dq = _quantile_and_slope(f, support)
    grid = uniform_grid(support, n_grid or f.grid01.size)
    if np.all(dq > 0) and np.all(np.diff(quantile) > 0):
        slopes = monotone_slopes(quantile, f.grid01, 1.0 / dq)
        cdf = hermite_eval(quantile, f.grid01, slopes, grid)
        np.clip(cdf, 0.0, 1.0, out=cdf)
        cdf[0], cdf[-1] = 0.0, 1.0
    else:
        # exp(f) underflowed somewhere: the quantile has flat stretches
        cdf = np.interp(grid, quantile, f.grid01)
    pdf = np.gradient(cdf, grid)
    return DensityCurve(grid, np.maximum(pdf, 0.0))


def write_lqd_json(curve: LqdCurve, path) -> None:
    Path(path).write_text(curve.to_json(), encoding="utf-8")


def read_lqd_json(path) -> LqdCurve:
    return LqdCurve.from_json(Path(path).read_text(encoding="utf-8"))
