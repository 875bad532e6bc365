"""Window integrals, performance/stability metrics and penalized costs.

All window integrals integrate the piecewise-linear interpolant of the
sampled integrand over ``[t_start, t_end]``; on grid-aligned windows this is
the composite trapezoid rule. Each metric returns its value and, on request,
its derivative with respect to the samples so it can seed a reverse pass.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError

DIVERGED_J2 = 1e6


@dataclass(frozen=True)
class CostSpec:
    """Cost window, stability penalty and stabilized-training parameters.

    The window is ``[t0, t_end]`` when both are given, otherwise
    ``[t1 - n_cycles * period, t1]``.
    """

    t1: float = None
    period: float = None
    n_cycles: int = 4
    t0: float = None
    t_end: float = None
    j2_threshold: float = 1e-5
    alpha: float = 1e3
    frequencies: tuple = ()
    tau: float = 1.0
    lambda_rep: float = 1.0
    gamma_crit: float = 0.05
    action_weight: float = 0.0

    def __post_init__(self):
        for name in ("j2_threshold", "alpha", "tau", "lambda_rep", "gamma_crit"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        lo, hi = self.window
        if not hi > lo:
            raise ConfigurationError("cost window is empty")

    @property
    def window(self):
        if self.t0 is not None and self.t_end is not None:
            return float(self.t0), float(self.t_end)
        if self.t1 is None or self.period is None:
            raise ConfigurationError("cost window needs (t0, t_end) or (t1, period)")
        return float(self.t1 - self.n_cycles * self.period), float(self.t1)

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["frequencies"] = list(self.frequencies)
        return d


def window_weights(t, t_start, t_end):
    """Weights ``w`` with ``sum(w * f) = int_{t_start}^{t_end} I[f](t) dt``.

    ``I[f]`` is the linear interpolant of samples ``f`` on the grid ``t``.
    """
    t = np.asarray(t, dtype=float)
    tol = 1e-9 * max(1.0, abs(t[-1]))
    if t_start < t[0] - tol or t_end > t[-1] + tol or t_end < t_start:
        raise ConfigurationError(
            f"window [{t_start}, {t_end}] not covered by series [{t[0]}, {t[-1]}]")
    w = np.zeros_like(t)
    lo = max(int(np.searchsorted(t, t_start, side="right")) - 1, 0)
    for k in range(lo, t.size - 1):
        a, b = t[k], t[k + 1]
        if a >= t_end:
            break
        s0, s1 = max(a, t_start), min(b, t_end)
        if s1 <= s0:
            continue
        L = b - a
        th0, th1 = (s0 - a) / L, (s1 - a) / L
        # int (1-th) and int th over [th0, th1], times L
        w[k] += L * ((th1 - th0) - 0.5 * (th1 ** 2 - th0 ** 2))
        w[k + 1] += L * 0.5 * (th1 ** 2 - th0 ** 2)
    return w


def _window(spec_or_window):
    if isinstance(spec_or_window, CostSpec):
        return spec_or_window.window
    lo, hi = spec_or_window
    return float(lo), float(hi)


def cost_j1(t, u, window, return_grad=False):
    """``J1 = int u^2 dt`` over the window."""
    u = np.asarray(u, dtype=float)
    w = window_weights(t, *_window(window))
    val = float(np.sum(w * u * u))
    return (val, 2.0 * w * u) if return_grad else val


def cost_j2(t, u, window, return_grad=False):
    """``J2 = (int u dt)^2`` over the window."""
    u = np.asarray(u, dtype=float)
    w = window_weights(t, *_window(window))
    m = float(np.sum(w * u))
    return (m * m, 2.0 * m * w) if return_grad else m * m


def relu(x):
    return x if x > 0.0 else 0.0


def cost_total(j1, j2, spec, return_grad=False):
    """``sum_i J1_i + alpha * ReLU(J2_i - J2_th)``.

    The ReLU subgradient at the threshold is zero.
    """
    j1 = np.atleast_1d(np.asarray(j1, dtype=float))
    j2 = np.atleast_1d(np.asarray(j2, dtype=float))
    if j1.shape != j2.shape:
        raise ConfigurationError("J1 and J2 lists must have the same length")
    excess = j2 - spec.j2_threshold
    active = excess > 0.0
    val = float(j1.sum() + spec.alpha * np.sum(np.where(active, excess, 0.0)))
    if return_grad:
        return val, np.ones_like(j1), spec.alpha * active.astype(float)
    return val


def wake_cost(t, up1, up2, window, return_grad=False):
    """``int (u_p1^2 + u_p2^2) dt`` over the window."""
    w = window_weights(t, *_window(window))
    up1 = np.asarray(up1, dtype=float)
    up2 = np.asarray(up2, dtype=float)
    val = float(np.sum(w * (up1 * up1 + up2 * up2)))
    if return_grad:
        return val, 2.0 * w * up1, 2.0 * w * up2
    return val


def quadratic_cost(t, q, a, window, action_weight, return_grad=False):
    """``int (q^2 + rho a^2) dt``; actions are held over each step.

    ``q`` is sampled on ``t`` (length n+1); ``a`` has length n and is treated
    as piecewise constant, so its integral uses rectangle weights.
    """
    lo, hi = _window(window)
    w = window_weights(t, lo, hi)
    q = np.asarray(q, dtype=float)
    a = np.asarray(a, dtype=float)
    h = np.diff(t)
    wa = np.clip(np.minimum(t[1:], hi) - np.maximum(t[:-1], lo), 0.0, None)
    wa = np.where(h > 0, wa, 0.0)
    val = float(np.sum(w * q * q) + action_weight * np.sum(wa * a * a))
    if return_grad:
        return val, 2.0 * w * q, 2.0 * action_weight * wa * a
    return val
