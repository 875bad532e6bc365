"""Convectively unstable linear plant (boundary-layer stand-in).

A linearized complex Ginzburg-Landau equation written in real form. With
complex amplitude ``psi = qr + i qi``::

    dpsi/dt = -(U + i c) dpsi/dx + (g_r + i g_i) d2psi/dx2 + mu(x) psi
              + w(t) b_w(x) + a(t) b_a(x)

Second-order central differences with homogeneous Dirichlet ends. The growth
profile ``mu(x)`` is negative except on a pocket downstream of the actuator,
so wave packets are amplified while they advect past it but every initial
condition eventually decays (convective, not global, instability).
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .. import _kernels
from ..errors import ConfigurationError
from .base import PlantState, interpolation_rows
from .forcing import ForcingShape, forcing_vector


def _default_noise():
    return ForcingShape(1.0, 20.0, 0.0, 2.0, 1.0)


def _default_actuator():
    return ForcingShape(1.0, 100.0, 0.0, 2.0, 1.0)


@dataclass(frozen=True)
class ConvectivePlantConfig:
    n: int = 220
    dx: float = 1.0
    advection: float = 2.0
    dispersion: float = 1.0
    diffusion: float = 1.0
    diffusion_imag: float = 0.0
    growth_background: float = -0.3
    growth_peak: float = 0.35
    growth_center: float = 130.0
    growth_width: float = 15.0
    noise: ForcingShape = field(default_factory=_default_noise)
    actuator: ForcingShape = field(default_factory=_default_actuator)
    y_fb: float = 105.0
    z_p: float = 150.0
    dt: float = 0.1

    def __post_init__(self):
        if self.n < 8:
            raise ConfigurationError("grid size must be at least 8")
        if not (self.dx > 0 and self.dt > 0):
            raise ConfigurationError("dx and dt must be positive")
        if self.growth_width <= 0:
            raise ConfigurationError("growth width must be positive")
        span = (self.n - 1) * self.dx
        for name in ("y_fb", "z_p"):
            if not 0.0 <= getattr(self, name) <= span:
                raise ConfigurationError(f"sensor {name} lies outside the grid")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("noise", "actuator"):
            if key in d and isinstance(d[key], dict):
                d[key] = ForcingShape(**d[key])
        return cls(**d)

    def to_dict(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["noise"] = self.noise.to_dict()
        out["actuator"] = self.actuator.to_dict()
        return out


class ConvectivePlant:
    """Linear convective plant with one noise and one actuator channel.

    Sensors are the real part of ``psi`` at ``y_fb`` (feedback) and ``z_p``
    (performance), linearly interpolated between nodes.
    """

    name = "convective"
    linear = True
    sensor_labels = ("y_fb", "z_p")
    feedback_labels = ("y_fb",)
    performance_labels = ("z_p",)

    def __init__(self, cfg=None, backend=None):
        self.cfg = cfg or ConvectivePlantConfig()
        c = self.cfg
        self.x = np.arange(c.n) * c.dx
        self.mu = c.growth_background + c.growth_peak * np.exp(
            -((self.x - c.growth_center) / c.growth_width) ** 2)
        self.b_w = forcing_vector(c.noise, self.x)
        self.b_a = forcing_vector(c.actuator, self.x)
        self._coef = np.array([c.advection, c.dispersion, c.diffusion,
                               c.diffusion_imag, c.dx])
        rows = interpolation_rows(self.x, [c.y_fb, c.z_p])
        self.C = np.hstack([rows, np.zeros_like(rows)])
        self.backend = backend

    @property
    def dt(self):
        return self.cfg.dt

    @property
    def n_state(self):
        return 2 * self.cfg.n

    def with_config(self, **changes):
        return ConvectivePlant(replace(self.cfg, **changes), backend=self.backend)

    def initial_state(self):
        return PlantState(np.zeros(self.n_state), 0.0)

    def advance(self, q, action, noise):
        forcing = noise * self.b_w + action * self.b_a
        return _kernels.gl_rk4_step(q, forcing, self.dt, self.mu, self._coef,
                                    backend=self.backend)

    def observe(self, q):
        return self.C @ q

    def feedback(self, sensors):
        return sensors[:1]

    def snapshot(self, q):
        return q

    def system_matrices(self):
        """Dense continuous-time ``(A, b_w, b_a, C)`` of the real-form system."""
        c = self.cfg
        n = c.n
        off = np.ones(n - 1)
        D = (np.diag(off, 1) - np.diag(off, -1)) / (2 * c.dx)
        D2 = (np.diag(off, 1) - 2 * np.eye(n) + np.diag(off, -1)) / c.dx ** 2
        L = (-(c.advection + 1j * c.dispersion) * D
             + (c.diffusion + 1j * c.diffusion_imag) * D2 + np.diag(self.mu))
        A = np.block([[L.real, -L.imag], [L.imag, L.real]])
        z = np.zeros(n)
        return A, np.r_[self.b_w, z], np.r_[self.b_a, z], self.C.copy()
