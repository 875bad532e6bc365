"""NODE-corrected reduced model ``dq/dt = A q + B a + F(q, a)``."""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, DivergenceError
from ..sysid import LinearRom
from .mlp import MLP

DEFAULT_K = 3e-4


class ResidualNet:
    """Bounded residual ``F(q, a) = k tanh(MLP([q, a]))``.

    The final layer is zero-initialized so a fresh network is an exact zero
    correction.
    """

    def __init__(self, r, hidden=(128, 128, 128), k=DEFAULT_K, params=None, seed=0):
        self.r = int(r)
        self.hidden = tuple(int(h) for h in hidden)
        self.k = float(k)
        self.net = MLP((self.r + 1, *self.hidden, self.r), activation="relu")
        if params is None:
            params = self.net.init(np.random.default_rng(seed), zero_last=True)
        self.params = np.asarray(params, dtype=float).copy()
        if self.params.size != self.net.n_params:
            raise ConfigurationError("residual parameter count does not match architecture")
        self.seed = seed

    @property
    def n_params(self):
        return self.net.n_params

    def with_params(self, params):
        return ResidualNet(self.r, self.hidden, self.k, params, self.seed)

    def forward(self, params, q, a):
        x = np.concatenate([q, a[:, None]], axis=1)
        z, cache = self.net.forward(params, x)
        t = np.tanh(z)
        return self.k * t, (cache, t)

    def vjp(self, params, cache, gout):
        net_cache, t = cache
        gp, gx = self.net.vjp(params, net_cache, gout * self.k * (1.0 - t * t))
        return gp, gx[:, :-1], gx[:, -1]

    def __call__(self, q, a):
        q2 = np.atleast_2d(q)
        out = self.forward(self.params, q2, np.atleast_1d(np.asarray(a, dtype=float))
                           * np.ones(q2.shape[0]))[0]
        return out if np.ndim(q) == 2 else out[0]

    def to_dict(self):
        return {"r": self.r, "hidden": list(self.hidden), "k": self.k, "seed": self.seed,
                "n_params": self.n_params}


@dataclass
class NodeRom:
    """Linear operators, optional residual network, and ROM step size."""

    linear: LinearRom
    dt: float
    residual: ResidualNet = None
    linear_only: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError("ROM step size must be positive")
        if self.residual is not None and self.residual.r != self.linear.r:
            raise ConfigurationError("residual width does not match the reduced dimension")

    @property
    def r(self):
        return self.linear.r

    @property
    def A(self):
        return self.linear.A

    @property
    def B(self):
        return self.linear.B

    @property
    def has_residual(self):
        return self.residual is not None and not self.linear_only

    def with_residual_params(self, params):
        return NodeRom(self.linear, self.dt, self.residual.with_params(params), self.linear_only)


def rom_rhs(q, a, rom, params=None):
    """``A q + B a`` plus the residual output when present.

    ``q`` may be a single state ``(r,)`` or a batch ``(batch, r)``.
    """
    q2 = np.atleast_2d(np.asarray(q, dtype=float))
    a2 = np.broadcast_to(np.asarray(a, dtype=float), (q2.shape[0],))
    out = q2 @ rom.A.T + a2[:, None] * rom.B[None, :]
    if rom.has_residual:
        p = rom.residual.params if params is None else params
        out = out + rom.residual.forward(p, q2, np.array(a2))[0]
    return out if np.ndim(q) == 2 else out[0]


def rk4_step(rhs, q, t, dt):
    """Classic four-stage Runge-Kutta step of ``dq/dt = rhs(q, t)``.

    Raises
    ------
    DivergenceError
        When any stage value is non-finite; ``stage`` records which one.
    """
    if not dt > 0:
        raise ConfigurationError("step size must be positive")
    k1 = rhs(q, t)
    _check(k1, t, 1)
    k2 = rhs(q + 0.5 * dt * k1, t + 0.5 * dt)
    _check(k2, t, 2)
    k3 = rhs(q + 0.5 * dt * k2, t + 0.5 * dt)
    _check(k3, t, 3)
    k4 = rhs(q + dt * k3, t + dt)
    _check(k4, t, 4)
    return q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check(k, t, stage):
    if not np.all(np.isfinite(k)):
        raise DivergenceError(f"non-finite RK4 stage {stage} at t={t:.6g}", time=t, stage=stage)
