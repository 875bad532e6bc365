"""Nonlinear wake-oscillator plant (bluff-body wake stand-in).

Mean-field model of vortex shedding: a self-excited oscillator pair
``(a1, a2)`` saturated by a shift mode ``a3``::

    da1/dt = (mu - a3) a1 - omega a2 + g1 Q
    da2/dt = omega a1 + (mu - a3) a2 + g2 Q
    da3/dt = -lam (a3 - a1^2 - a2^2) + g3 Q

The uncontrolled limit cycle has ``a1^2 + a2^2 = a3 = mu`` and period
``2 pi / omega``. A synthetic streamwise-velocity field on a 2-D grid is
built from the oscillator state so that POD and sparse sensing have
something to act on:

* a symmetric mean deficit plus a symmetric shift-mode correction ``a3 S``;
* an antisymmetric travelling shedding wave ``E(x; a3) Y1(y) Re[(a1 - i a2) e^{ikx}]``
  whose streamwise envelope moves downstream as the shift mode shrinks
  (longer formation length when shedding is suppressed);
* a symmetric second harmonic in ``(a1^2 - a2^2, 2 a1 a2)``;
* an antisymmetric actuator footprint confined to ``x < x_act``.

The drag proxy is ``c0 + c1 a3 + c2 (a1^2 - a2^2)``; on the limit cycle it
oscillates at twice the shedding frequency around ``c0 + c1 mu``.
"""

from dataclasses import dataclass, replace

import numpy as np

from .. import _kernels
from ..errors import ConfigurationError
from .base import PlantState


@dataclass(frozen=True)
class WakePlantConfig:
    mu: float = 0.2
    omega: float = 0.917
    lam: float = 1.0
    g: tuple = (-0.697, 0.717, 0.0)
    wavenumber: float = 1.26
    width: float = 0.75
    envelope_center: float = 1.6
    envelope_shift: float = 2.0
    envelope_width: float = 1.2
    harmonic_amplitude: float = 0.5
    actuator_extent: float = 0.4
    drag: tuple = (1.3, 1.0, 0.05)
    x_range: tuple = (0.0, 3.0, 31)
    y_range: tuple = (-1.5, 1.5, 25)
    sensor_x0: float = 0.45
    sensor_dx: float = 0.228
    sensor_nx: int = 9
    sensor_y: tuple = (-0.75, -0.375, 0.0, 0.375, 0.75)
    probe_x: float = 2.5
    feedback_points: tuple = ((0.9, -0.75), (0.9, 0.75), (1.4, -0.75), (1.4, 0.75))
    pressure_x: float = 0.5
    pressure_y: tuple = (-0.375, -0.125, 0.125, 0.375)
    pressure_phase: float = 0.6
    dt: float = 0.05

    def __post_init__(self):
        if self.dt <= 0 or self.mu <= 0 or self.omega <= 0 or self.lam <= 0:
            raise ConfigurationError("wake rates and dt must be positive")
        if len(self.g) != 3 or len(self.drag) != 3:
            raise ConfigurationError("g and drag need three entries")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("g", "drag", "x_range", "y_range", "sensor_y", "pressure_y"):
            if key in d:
                d[key] = tuple(d[key])
        if "feedback_points" in d:
            d["feedback_points"] = tuple(tuple(p) for p in d["feedback_points"])
        return cls(**d)

    def to_dict(self):
        out = {}
        for k in self.__dataclass_fields__:
            v = getattr(self, k)
            if isinstance(v, tuple):
                v = [list(p) if isinstance(p, tuple) else p for p in v]
            out[k] = v
        return out

    @property
    def period(self):
        return 2.0 * np.pi / self.omega


def _union(values, extra):
    return np.unique(np.round(np.concatenate([values, extra]), 12))


class WakePlant:
    """Wake oscillator with 47 velocity sensors, four wall pressures and drag."""

    name = "wake"
    linear = False
    performance_labels = ("up1", "up2")
    feedback_labels = ("u1-u2", "u3-u4")

    def __init__(self, cfg=None, backend=None):
        self.cfg = c = cfg or WakePlantConfig()
        self.backend = backend
        self._p = np.array([c.mu, c.omega, c.lam, *c.g], dtype=float)
        sx = c.sensor_x0 + c.sensor_dx * np.arange(c.sensor_nx)
        pts = [(x, y) for x in sx for y in c.sensor_y]
        pts += [(c.probe_x, c.sensor_y[0]), (c.probe_x, c.sensor_y[-1])]
        self.sensor_points = np.array(pts)
        self.xg = _union(np.linspace(*c.x_range[:2], int(c.x_range[2])), self.sensor_points[:, 0])
        self.yg = _union(np.linspace(*c.y_range[:2], int(c.y_range[2])), self.sensor_points[:, 1])
        X, Y = np.meshgrid(self.xg, self.yg)
        self.X, self.Y = X.ravel(), Y.ravel()
        self.sensor_index = np.array([self._node(x, y) for x, y in pts])
        # feedback sensors are the layout nodes nearest the requested points
        fb = []
        for x, y in c.feedback_points:
            d = np.hypot(self.sensor_points[:, 0] - x, self.sensor_points[:, 1] - y)
            fb.append(int(np.argmin(d[:-2])))
        self.feedback_index = np.array(fb)
        self.probe_index = np.array([len(pts) - 2, len(pts) - 1])
        n = len(pts)
        self.sensor_labels = tuple(f"s{i:02d}" for i in range(n)) + (
            "p1", "p2", "p3", "p4", "cd")
        self._modes()

    def _node(self, x, y):
        i = int(np.argmin(np.abs(self.xg - x)))
        j = int(np.argmin(np.abs(self.yg - y)))
        if abs(self.xg[i] - x) > 1e-9 or abs(self.yg[j] - y) > 1e-9:
            raise ConfigurationError(f"sensor ({x}, {y}) is not a grid node")
        return j * self.xg.size + i

    def _modes(self):
        c = self.cfg
        X, Y = self.X, self.Y
        ell = c.width
        sym = np.exp(-(Y / 0.5) ** 2)
        self.base = 1.0 - 0.8 * sym * np.exp(-(X / 1.5) ** 2)
        self.shift = -sym * np.exp(-((X - 1.0) / 1.0) ** 2)
        self.y1 = (Y / ell) * np.exp(-(Y / ell) ** 2)
        self.y2 = c.harmonic_amplitude * np.exp(-(Y / ell) ** 2) * np.exp(-((X - 2.0) / 1.2) ** 2)
        self.ckx = np.cos(c.wavenumber * X)
        self.skx = np.sin(c.wavenumber * X)
        self.c2kx = np.cos(2 * c.wavenumber * X)
        self.s2kx = np.sin(2 * c.wavenumber * X)
        xa = np.clip(1.0 - (X / c.actuator_extent) ** 2, 0.0, None) ** 2
        self.act = (Y / 0.3) * np.exp(-(Y / 0.3) ** 2) * xa

    @property
    def dt(self):
        return self.cfg.dt

    @property
    def n_state(self):
        return 3

    @property
    def n_field(self):
        return self.X.size

    def with_config(self, **changes):
        return WakePlant(replace(self.cfg, **changes), backend=self.backend)

    def limit_cycle_state(self, phase=0.0):
        r = np.sqrt(self.cfg.mu)
        return np.array([r * np.cos(phase), r * np.sin(phase), self.cfg.mu])

    def initial_state(self):
        return PlantState(self.limit_cycle_state(), 0.0)

    def advance(self, q, action, noise=0.0):
        # the wake has no disturbance channel; ``noise`` is accepted for API symmetry
        return _kernels.wake_rk4_step(q, action, self.dt, self._p, backend=self.backend)

    def _field_at(self, q, action, idx=None):
        c = self.cfg
        a1, a2, a3 = q
        sl = slice(None) if idx is None else idx
        xc = c.envelope_center + c.envelope_shift * (c.mu - a3)
        env = np.exp(-((self.X[sl] - xc) / c.envelope_width) ** 2)
        u = (self.base[sl] + a3 * self.shift[sl]
             + env * self.y1[sl] * (a1 * self.ckx[sl] + a2 * self.skx[sl])
             + self.y2[sl] * ((a1 * a1 - a2 * a2) * self.c2kx[sl] + 2 * a1 * a2 * self.s2kx[sl])
             + action * self.act[sl])
        return u

    def snapshot(self, q, action=0.0):
        """Full streamwise-velocity field, flattened row-major over (y, x)."""
        return self._field_at(q, action)

    def pressures(self, q):
        c = self.cfg
        a1, a2, a3 = q
        y = np.asarray(c.pressure_y)
        ph = c.wavenumber * c.pressure_x + c.pressure_phase
        odd = (y / c.width) * np.exp(-(y / c.width) ** 2)
        return (-0.4 * np.exp(-y ** 2) + 0.3 * a3 * np.exp(-y ** 2)
                + 0.8 * odd * (a1 * np.cos(ph) + a2 * np.sin(ph)))

    def drag(self, q):
        c0, c1, c2 = self.cfg.drag
        a1, a2, a3 = q
        return c0 + c1 * a3 + c2 * (a1 * a1 - a2 * a2)

    def observe(self, q, action=0.0):
        u = self._field_at(q, action, self.sensor_index)
        return np.concatenate([u, self.pressures(q), [self.drag(q)]])

    def feedback(self, sensors):
        i = self.feedback_index
        return np.array([sensors[i[0]] - sensors[i[1]], sensors[i[2]] - sensors[i[3]]])

    def sensor_columns(self):
        """Indices of the 47 velocity sensors within :meth:`observe` output."""
        return np.arange(len(self.sensor_points))
