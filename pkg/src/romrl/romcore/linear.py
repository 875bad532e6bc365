"""Fast path for linear ROMs in closed loop with a discrete transfer function.

For a linear right-hand side and an action held over each step, one RK4
step is exactly ``q+ = Phi q + Gam a`` with the polynomials below, so the
closed loop can be rolled out and differentiated by the compiled kernels in
:mod:`romrl._kernels`. Results agree with the generic tape engine to
round-off (checked in the test suite).
"""

import numpy as np

from .. import _kernels
from ..control.costs import DIVERGED_J2, cost_j1, cost_j2

BLOWUP = 1e8


def discretize_rk4(A, B, h):
    """One-step maps of RK4 applied to ``dq/dt = A q + B a`` with held ``a``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(-1)
    n = A.shape[0]
    I = np.eye(n)
    hA = h * A
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    Phi = I + hA + hA2 / 2.0 + hA3 / 6.0 + hA3 @ hA / 24.0
    Gam = h * ((I + hA / 2.0 + hA2 / 6.0 + hA3 / 24.0) @ B)
    return Phi, Gam


def tf_rollout(Phi, Gam, R, r0, b, c, q0, n_steps, k_on=0, backend=None):
    """Closed-loop states, controller inputs and actions; see :func:`_kernels.lti_tf_rollout`."""
    return _kernels.lti_tf_rollout(
        np.ascontiguousarray(Phi, dtype=float), np.ascontiguousarray(Gam, dtype=float),
        np.ascontiguousarray(np.ravel(R), dtype=float), float(r0),
        np.ascontiguousarray(b, dtype=float), np.ascontiguousarray(c, dtype=float),
        np.ascontiguousarray(q0, dtype=float), n_steps, k_on, backend=backend)


def tf_rollout_cost(Phi, Gam, R, r0, b, c, q0, t, k_on, perf, perf_offset, spec,
                    backend=None, need_grad=True):
    """``J1``, ``J2`` of the performance output and their gradients.

    Returns
    -------
    dict
        ``j1``, ``j2``, ``diverged``, ``z`` and, when ``need_grad``, ``g_j1`` /
        ``g_j2`` dicts with keys ``theta`` (``[b, c]``), ``q0``, ``R``, ``r0``.
    """
    t = np.asarray(t, dtype=float)
    n = t.size - 1
    states, ys, acts, blow = tf_rollout(Phi, Gam, R, r0, b, c, q0, n, k_on, backend)
    perf = np.asarray(perf, dtype=float).ravel()
    diverged = blow >= 0 or not np.all(np.isfinite(states)) or np.abs(states).max() > BLOWUP
    nth = b.size + c.size
    zero = {"theta": np.zeros(nth), "q0": np.zeros(q0.size), "R": np.zeros(q0.size),
            "r0": 0.0}
    if diverged:
        out = {"j1": 0.0, "j2": DIVERGED_J2, "diverged": True, "z": None}
        if need_grad:
            out.update(g_j1=dict(zero), g_j2=dict(zero))
        return out
    z = states @ perf + perf_offset
    j1, gz1 = cost_j1(t, z, spec, return_grad=True)
    j2, gz2 = cost_j2(t, z, spec, return_grad=True)
    out = {"j1": j1, "j2": j2, "diverged": False, "z": z}
    if need_grad:
        ga = np.zeros(n)
        for key, gz in (("g_j1", gz1), ("g_j2", gz2)):
            gq = np.ascontiguousarray(np.outer(gz, perf))
            lam, gb, gc, gR, gr0 = _kernels.lti_tf_adjoint(
                Phi, Gam, np.ascontiguousarray(np.ravel(R), dtype=float), b, c, states, ys,
                acts, gq, ga, k_on, backend=backend)
            out[key] = {"theta": np.concatenate([gb, gc]), "q0": lam, "R": gR,
                        "r0": float(gr0)}
    return out
