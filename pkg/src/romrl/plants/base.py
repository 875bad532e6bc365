"""Shared plant types."""

from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError


@dataclass(frozen=True)
class PlantState:
    """Plant state vector ``q`` at time ``t``."""

    q: np.ndarray
    t: float = 0.0


def plant_step(state, action, noise, plant):
    """Advance ``state`` by one RK4 step of ``plant``.

    Raises
    ------
    DivergenceError
        If the new state has non-finite entries.
    """
    if not (np.isfinite(action) and np.isfinite(noise)):
        raise ValueError("action and noise must be finite")
    q = plant.advance(state.q, float(action), float(noise))
    t = state.t + plant.dt
    if not np.all(np.isfinite(q)):
        raise DivergenceError(f"plant state became non-finite at t={t:.6g}", time=t)
    return PlantState(q, t)


def interpolation_rows(grid, positions):
    """Rows of a linear-interpolation operator from a uniform 1-D grid."""
    grid = np.asarray(grid, dtype=float)
    rows = np.zeros((len(positions), grid.size))
    dx = grid[1] - grid[0]
    for i, p in enumerate(positions):
        s = (p - grid[0]) / dx
        j = int(np.floor(s))
        w = s - j
        if j >= grid.size - 1:
            j, w = grid.size - 2, 1.0
        rows[i, j] += 1.0 - w
        if w:
            rows[i, j + 1] += w
    return rows
