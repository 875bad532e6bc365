"""Divergence-free Gaussian forcing shapes used for noise and actuation."""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError


@dataclass(frozen=True)
class ForcingShape:
    """Solenoidal Gaussian forcing ``F(x, y; A, x0, y0, sx, sy)``.

    The field is the curl of the Gaussian stream function
    ``psi = -A sx sy / 2 * exp(-xi^2 - eta^2)`` with ``xi = (x - x0)/sx`` and
    ``eta = (y - y0)/sy``, so it is divergence-free by construction.
    """

    amplitude: float
    x0: float
    y0: float
    sigma_x: float
    sigma_y: float

    def __post_init__(self):
        if not (self.sigma_x > 0 and self.sigma_y > 0):
            raise ConfigurationError("forcing widths must be positive")
        vals = (self.amplitude, self.x0, self.y0, self.sigma_x, self.sigma_y)
        if not np.all(np.isfinite(vals)):
            raise ConfigurationError("forcing parameters must be finite")

    @property
    def line_offset(self):
        """Wall-normal offset at which the streamwise component peaks."""
        return self.sigma_y / np.sqrt(2.0)

    def to_dict(self):
        return {"amplitude": self.amplitude, "x0": self.x0, "y0": self.y0,
                "sigma_x": self.sigma_x, "sigma_y": self.sigma_y}


def forcing_field(shape, x, y):
    """Evaluate both components of the forcing at points ``(x, y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sx, sy = shape.sigma_x, shape.sigma_y
    env = np.exp(-((x - shape.x0) / sx) ** 2 - ((y - shape.y0) / sy) ** 2)
    fx = shape.amplitude * (y - shape.y0) * sx / sy * env
    fy = -shape.amplitude * (x - shape.x0) * sy / sx * env
    return fx, fy


def forcing_vector(shape, x, y=None):
    """Discrete forcing profile on a grid.

    Parameters
    ----------
    shape : ForcingShape
    x : array_like
        Streamwise grid coordinates. For a 1-D grid (``y is None``) the
        streamwise component is sampled on the line ``y = y0 + sigma_y/sqrt(2)``
        where it is largest, giving a profile that peaks at ``x0``.
    y : array_like, optional
        Wall-normal coordinates (same shape as ``x``) for a 2-D grid. The result
        is then ``[Fx; Fy]`` flattened, of length ``2 * x.size``.

    Returns
    -------
    numpy.ndarray
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ConfigurationError("forcing grid is empty")
    if y is None:
        if not (x.min() <= shape.x0 <= x.max()):
            raise ConfigurationError(f"forcing center x0={shape.x0} lies outside the grid")
        fx, _ = forcing_field(shape, x, shape.y0 + shape.line_offset)
        return fx
    y = np.asarray(y, dtype=float)
    if not (x.min() <= shape.x0 <= x.max() and y.min() <= shape.y0 <= y.max()):
        raise ConfigurationError(
            f"forcing center ({shape.x0}, {shape.y0}) lies outside the grid")
    fx, fy = forcing_field(shape, x, y)
    return np.concatenate([fx.ravel(), fy.ravel()])
