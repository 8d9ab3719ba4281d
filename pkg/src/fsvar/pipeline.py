"""Glue between the estimation stages: micro samples to an LQD panel, and
assembly of the VAR vector from macro series and FPC scores."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .density import DEFAULT_N_GRID, estimate_density
from .fpca import LqdPanel
from .lqd import DEFAULT_N_GRID01, lqd_forward


def lqd_panel_from_samples(
    samples: Sequence,
    support: tuple[float, float],
    n_grid: int = DEFAULT_N_GRID,
    n_grid01: int = DEFAULT_N_GRID01,
    method: str = "exact",
    times=None,
):
    """Kernel density per period, then its LQD. Returns ``(densities, panel)``."""
    densities = [estimate_density(obs, support, n_grid, method=method) for obs in samples]
    curves = [lqd_forward(d, n_grid01) for d in densities]
    return densities, LqdPanel.from_curves(curves, times)


@dataclass(frozen=True)
class SystemLayout:
    """Column layout of the VAR vector."""

    names: tuple
    score_cols: tuple
    impulse_col: int | None

    @property
    def n(self) -> int:
        return len(self.names)


def assemble_system(
    macro: np.ndarray | None,
    macro_names: Sequence[str],
    scores: np.ndarray | None,
    impulse: str | None = None,
) -> tuple[np.ndarray, SystemLayout]:
    """Stack ``[macro without impulse, scores, impulse]``.

    Without an ``impulse`` name the order is simply ``[macro, scores]``.
    Either block may be empty.
    """
    t = macro.shape[0] if macro is not None and macro.size else scores.shape[0]
    macro = np.zeros((t, 0)) if macro is None else np.asarray(macro, dtype=float).reshape(t, -1)
    scores = np.zeros((t, 0)) if scores is None else np.asarray(scores, dtype=float).reshape(t, -1)
    if macro.shape[1] != len(macro_names):
        raise ValueError("one name per macro column required")
    k = scores.shape[1]
    score_names = [f"score{i + 1}" for i in range(k)]
    if impulse is None:
        z = np.hstack([macro, scores])
        names = list(macro_names) + score_names
        return z, SystemLayout(tuple(names), tuple(range(macro.shape[1], macro.shape[1] + k)), None)
    if impulse not in macro_names:
        raise ValueError(f"impulse variable {impulse!r} not among macro columns {list(macro_names)}")
    j = list(macro_names).index(impulse)
    rest = [i for i in range(macro.shape[1]) if i != j]
    z = np.hstack([macro[:, rest], scores, macro[:, [j]]])
    names = [macro_names[i] for i in rest] + score_names + [impulse]
    return z, SystemLayout(tuple(names), tuple(range(len(rest), len(rest) + k)), len(names) - 1)
