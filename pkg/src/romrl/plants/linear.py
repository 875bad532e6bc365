"""Generic small linear plant ``dq/dt = A q + b_a a + b_w w``, ``y = C q``."""

import numpy as np

from ..errors import ConfigurationError
from .base import PlantState


class LinearPlant:
    """Dense LTI plant integrated with RK4; intended for small oracles.

    The scalar default is the open-loop unstable system ``dq/dt = q + a``.
    """

    name = "linear"
    linear = True

    def __init__(self, A=((1.0,),), b_a=(1.0,), b_w=None, C=None, dt=0.01,
                 q0=None, labels=None):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        n = self.A.shape[0]
        self.b_a = np.asarray(b_a, dtype=float).reshape(n)
        self.b_w = np.zeros(n) if b_w is None else np.asarray(b_w, dtype=float).reshape(n)
        self.C = np.eye(n) if C is None else np.atleast_2d(np.asarray(C, dtype=float))
        if self.C.shape[1] != n:
            raise ConfigurationError("C must have one column per state")
        if not dt > 0:
            raise ConfigurationError("dt must be positive")
        self._dt = float(dt)
        self.q0 = np.zeros(n) if q0 is None else np.asarray(q0, dtype=float).reshape(n)
        self.sensor_labels = tuple(labels) if labels else tuple(
            f"y{i}" for i in range(self.C.shape[0]))
        self.feedback_labels = self.sensor_labels
        self.performance_labels = self.sensor_labels

    @property
    def dt(self):
        return self._dt

    @property
    def n_state(self):
        return self.A.shape[0]

    def initial_state(self):
        return PlantState(self.q0.copy(), 0.0)

    def _rhs(self, q, action, noise):
        return self.A @ q + action * self.b_a + noise * self.b_w

    def advance(self, q, action, noise):
        h = self._dt
        k1 = self._rhs(q, action, noise)
        k2 = self._rhs(q + 0.5 * h * k1, action, noise)
        k3 = self._rhs(q + 0.5 * h * k2, action, noise)
        k4 = self._rhs(q + h * k3, action, noise)
        return q + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    def observe(self, q):
        return self.C @ q

    def feedback(self, sensors):
        return sensors

    def snapshot(self, q):
        return q

    def system_matrices(self):
        return self.A.copy(), self.b_w.copy(), self.b_a.copy(), self.C.copy()

    def to_dict(self):
        return {"A": self.A.tolist(), "b_a": self.b_a.tolist(), "b_w": self.b_w.tolist(),
                "C": self.C.tolist(), "dt": self._dt, "q0": self.q0.tolist()}
