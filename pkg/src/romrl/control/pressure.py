"""Velocity-to-wall-pressure surrogate for pressure-based feedback.

The map is ``p = mu_p + s_p * (L x + MLP(x))`` with ``x`` the standardized
reduced velocity state. ``L`` is the least-squares linear fit and the
network (ReLU hidden layers, zero-initialized output) learns what the linear
part misses, mirroring the linear-plus-residual structure of the ROM.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from ..romcore.adam import AdamState, adam_update
from ..romcore.mlp import MLP

MIN_SAMPLES = 8


@dataclass
class PressureMap:
    x_mean: np.ndarray
    x_std: np.ndarray
    p_mean: np.ndarray
    p_std: np.ndarray
    L: np.ndarray
    net: MLP
    params: np.ndarray

    def __call__(self, q_r):
        return pressure_map_eval(self, q_r)[0]


def _standardize(A):
    m = A.mean(axis=0)
    s = A.std(axis=0)
    s = np.where(s > 1e-12 * max(1.0, np.abs(m).max()), s, 1.0)
    return m, s


def pressure_map_fit(q_r, pressures, hidden=(128, 128, 128), epochs=200, batch=64, lr=1e-3,
                     seed=0):
    """Fit the surrogate on paired samples by mini-batch Adam on the MSE.

    Parameters
    ----------
    q_r : array_like, shape (n_samples, r)
    pressures : array_like, shape (n_samples, n_p)

    Raises
    ------
    ConfigurationError
        Fewer than ``MIN_SAMPLES`` samples or mismatched counts.
    """
    Xr = np.atleast_2d(np.asarray(q_r, dtype=float))
    Pr = np.atleast_2d(np.asarray(pressures, dtype=float))
    if Xr.shape[0] != Pr.shape[0]:
        raise ConfigurationError("velocity and pressure sample counts differ")
    if Xr.shape[0] < MIN_SAMPLES:
        raise ConfigurationError(f"pressure map needs at least {MIN_SAMPLES} samples")
    xm, xs = _standardize(Xr)
    pm, ps = _standardize(Pr)
    X = (Xr - xm) / xs
    T = (Pr - pm) / ps
    # constant targets are exact means; drop their round-off so nothing is fitted to it
    T[:, Pr.std(axis=0) <= 1e-12 * np.maximum(1.0, np.abs(pm))] = 0.0
    L = np.linalg.lstsq(X, T, rcond=None)[0].T
    net = MLP((X.shape[1], *hidden, T.shape[1]), activation="relu")
    rng = np.random.default_rng(seed)
    params = net.init(rng, zero_last=True)
    resid = T - X @ L.T
    state = AdamState.zeros_like(params, lr=lr)
    n = X.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            out, cache = net.forward(params, X[idx])
            g = 2.0 * (out - resid[idx]) / (idx.size * T.shape[1])
            gp, _ = net.vjp(params, cache, g)
            params, state = adam_update(params, gp, state)
    return PressureMap(xm, xs, pm, ps, L, net, params)


def pressure_map_eval(g, q_r):
    """Pressures ``p1..p4`` and the antisymmetric signals ``y1 = p1 - p4``, ``y2 = p2 - p3``."""
    Xr = np.atleast_2d(np.asarray(q_r, dtype=float))
    X = (Xr - g.x_mean) / g.x_std
    p = g.p_mean + g.p_std * (X @ g.L.T + g.net(g.params, X))
    y1, y2 = antisymmetric_signals(p)
    if np.ndim(q_r) == 1:
        return p[0], y1[0], y2[0]
    return p, y1, y2


def antisymmetric_signals(p):
    p = np.atleast_2d(p)
    return p[:, 0] - p[:, 3], p[:, 1] - p[:, 2]
