"""Trajectory-matching loss with trapezoidal time quadrature."""

import numpy as np

from ..errors import ConfigurationError


def trapezoid_weights(n_points, h):
    """Quadrature weights of the composite trapezoid rule on ``n_points`` nodes."""
    w = np.full(n_points, float(h))
    if n_points:
        w[0] *= 0.5
        w[-1] *= 0.5
    if n_points == 1:
        w[0] = 0.0
    return w


def resample(t_src, values, t_dst):
    """Linear interpolation of ``values`` (time along axis 0) onto ``t_dst``."""
    t_src = np.asarray(t_src, dtype=float)
    t_dst = np.asarray(t_dst, dtype=float)
    tol = 1e-9 * max(1.0, np.abs(t_src).max())
    if t_dst[0] < t_src[0] - tol or t_dst[-1] > t_src[-1] + tol:
        raise ConfigurationError("reference does not cover the prediction time range")
    v = np.asarray(values, dtype=float)
    flat = v.reshape(v.shape[0], -1)
    out = np.stack([np.interp(t_dst, t_src, col) for col in flat.T], axis=1)
    return out.reshape((t_dst.size,) + v.shape[1:])


def rom_loss(pred_t, pred, ref_t, ref, return_grad=False):
    """``int ||q(t) - q*(t)||^2 dt`` on the prediction grid.

    Parameters
    ----------
    pred_t : array_like, shape (n,)
        Uniform prediction grid.
    pred : array_like, shape (n, ...)
    ref_t, ref : reference samples, linearly interpolated onto ``pred_t``.
    return_grad : bool
        Also return ``dL/dpred``.
    """
    pred_t = np.asarray(pred_t, dtype=float)
    pred = np.asarray(pred, dtype=float)
    ref_t = np.asarray(ref_t, dtype=float)
    if pred_t[-1] < ref_t[0] or pred_t[0] > ref_t[-1]:
        raise ConfigurationError("prediction and reference time ranges are disjoint")
    if ref_t.shape == pred_t.shape and np.array_equal(ref_t, pred_t):
        r = np.asarray(ref, dtype=float)
    else:
        r = resample(ref_t, ref, pred_t)
    h = pred_t[1] - pred_t[0] if pred_t.size > 1 else 0.0
    w = trapezoid_weights(pred_t.size, h).reshape((-1,) + (1,) * (pred.ndim - 1))
    err = pred - r
    value = float(np.sum(w * err * err))
    if return_grad:
        return value, 2.0 * w * err
    return value
