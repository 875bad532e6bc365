"""Hot numeric kernels.

Each kernel has a numba implementation and a pure-numpy implementation with
identical semantics. The numba path is used when numba imports and the
environment variable ``ROMRL_DISABLE_NUMBA`` is unset (or ``0``). Both
implementations stay importable as ``<name>_numba`` / ``<name>_numpy`` so tests
and ``benchmarks/bench_kernels.py`` can compare them directly.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

_flag = os.environ.get("ROMRL_DISABLE_NUMBA", "0").strip().lower()
USE_NUMBA = numba is not None and _flag in ("", "0", "false", "no")
BACKEND = "numba" if USE_NUMBA else "numpy"


def _njit(fn):
    if numba is None:  # pragma: no cover
        return fn
    return numba.njit(cache=True)(fn)


# ---------------------------------------------------------------------------
# Convective (complex Ginzburg-Landau type) plant, real/imag split state.
# q = [qr; qi], Dirichlet zero ghosts at both ends.
# ---------------------------------------------------------------------------

def _gl_rhs_numpy(q, forcing, mu, coef):
    U, cu, gr, gi, dx = coef
    n = mu.shape[0]
    qr = q[:n]
    qi = q[n:]
    pr = np.zeros(n + 2)
    pi = np.zeros(n + 2)
    pr[1:-1] = qr
    pi[1:-1] = qi
    dr = (pr[2:] - pr[:-2]) / (2.0 * dx)
    di = (pi[2:] - pi[:-2]) / (2.0 * dx)
    lr = (pr[2:] - 2.0 * qr + pr[:-2]) / (dx * dx)
    li = (pi[2:] - 2.0 * qi + pi[:-2]) / (dx * dx)
    out = np.empty(2 * n)
    out[:n] = -U * dr + cu * di + gr * lr - gi * li + mu * qr + forcing
    out[n:] = -U * di - cu * dr + gr * li + gi * lr + mu * qi
    return out


def gl_rk4_step_numpy(q, forcing, h, mu, coef):
    k1 = _gl_rhs_numpy(q, forcing, mu, coef)
    k2 = _gl_rhs_numpy(q + 0.5 * h * k1, forcing, mu, coef)
    k3 = _gl_rhs_numpy(q + 0.5 * h * k2, forcing, mu, coef)
    k4 = _gl_rhs_numpy(q + h * k3, forcing, mu, coef)
    return q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _gl_rhs_loop(q, forcing, mu, coef, out):
    U = coef[0]
    cu = coef[1]
    gr = coef[2]
    gi = coef[3]
    dx = coef[4]
    n = mu.shape[0]
    inv2dx = 1.0 / (2.0 * dx)
    invdx2 = 1.0 / (dx * dx)
    for j in range(n):
        rl = q[j - 1] if j > 0 else 0.0
        rr = q[j + 1] if j < n - 1 else 0.0
        il = q[n + j - 1] if j > 0 else 0.0
        ir = q[n + j + 1] if j < n - 1 else 0.0
        rc = q[j]
        ic = q[n + j]
        dr = (rr - rl) * inv2dx
        di = (ir - il) * inv2dx
        lr = (rr - 2.0 * rc + rl) * invdx2
        li = (ir - 2.0 * ic + il) * invdx2
        out[j] = -U * dr + cu * di + gr * lr - gi * li + mu[j] * rc + forcing[j]
        out[n + j] = -U * di - cu * dr + gr * li + gi * lr + mu[j] * ic


def _gl_rk4_step_loop(q, forcing, h, mu, coef):
    m = q.shape[0]
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    _gl_rhs_loop(q, forcing, mu, coef, k1)
    for i in range(m):
        tmp[i] = q[i] + 0.5 * h * k1[i]
    _gl_rhs_loop(tmp, forcing, mu, coef, k2)
    for i in range(m):
        tmp[i] = q[i] + 0.5 * h * k2[i]
    _gl_rhs_loop(tmp, forcing, mu, coef, k3)
    for i in range(m):
        tmp[i] = q[i] + h * k3[i]
    _gl_rhs_loop(tmp, forcing, mu, coef, k4)
    out = np.empty(m)
    for i in range(m):
        out[i] = q[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return out


# ---------------------------------------------------------------------------
# Mean-field wake oscillator (two shedding amplitudes plus shift mode).
# ---------------------------------------------------------------------------

def _wake_rhs(s, action, p, out):
    # p = (mu, omega, lam, g1, g2, g3)
    a1 = s[0]
    a2 = s[1]
    a3 = s[2]
    growth = p[0] - a3
    out[0] = growth * a1 - p[1] * a2 + p[3] * action
    out[1] = p[1] * a1 + growth * a2 + p[4] * action
    out[2] = -p[2] * (a3 - a1 * a1 - a2 * a2) + p[5] * action


def _wake_rk4_step_loop(s, action, h, p):
    k1 = np.empty(3)
    k2 = np.empty(3)
    k3 = np.empty(3)
    k4 = np.empty(3)
    tmp = np.empty(3)
    _wake_rhs(s, action, p, k1)
    for i in range(3):
        tmp[i] = s[i] + 0.5 * h * k1[i]
    _wake_rhs(tmp, action, p, k2)
    for i in range(3):
        tmp[i] = s[i] + 0.5 * h * k2[i]
    _wake_rhs(tmp, action, p, k3)
    for i in range(3):
        tmp[i] = s[i] + h * k3[i]
    _wake_rhs(tmp, action, p, k4)
    out = np.empty(3)
    for i in range(3):
        out[i] = s[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return out


def _wake_rhs_numpy(s, action, p):
    a1, a2, a3 = s
    growth = p[0] - a3
    return np.array([
        growth * a1 - p[1] * a2 + p[3] * action,
        p[1] * a1 + growth * a2 + p[4] * action,
        -p[2] * (a3 - a1 * a1 - a2 * a2) + p[5] * action,
    ])


def wake_rk4_step_numpy(s, action, h, p):
    k1 = _wake_rhs_numpy(s, action, p)
    k2 = _wake_rhs_numpy(s + 0.5 * h * k1, action, p)
    k3 = _wake_rhs_numpy(s + 0.5 * h * k2, action, p)
    k4 = _wake_rhs_numpy(s + h * k3, action, p)
    return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# ---------------------------------------------------------------------------
# Discrete LTI map q+ = Phi q + Gam a in closed loop with a SISO difference
# equation a_k = sum_i b_i y_{k-i} - sum_i c_i a_{k-i}, y = R q + r0.
# Registers are zero at step k_on; before k_on the action is zero.
# ---------------------------------------------------------------------------

def _lti_tf_rollout_loop(Phi, Gam, R, r0, b, c, q0, n_steps, k_on):
    r = q0.shape[0]
    nb = b.shape[0]
    nc = c.shape[0]
    states = np.empty((n_steps + 1, r))
    ys = np.zeros(n_steps + 1)
    acts = np.zeros(n_steps)
    for i in range(r):
        states[0, i] = q0[i]
    for k in range(n_steps):
        y = r0
        for i in range(r):
            y += R[i] * states[k, i]
        ys[k] = y
        a = 0.0
        if k >= k_on:
            for i in range(nb):
                j = k - i
                if j >= k_on:
                    a += b[i] * ys[j]
            for i in range(nc):
                j = k - 1 - i
                if j >= k_on:
                    a -= c[i] * acts[j]
        acts[k] = a
        for i in range(r):
            acc = Gam[i] * a
            for l in range(r):
                acc += Phi[i, l] * states[k, l]
            states[k + 1, i] = acc
        for i in range(r):
            if not np.isfinite(states[k + 1, i]):
                return states[: k + 2], ys[: k + 2], acts[: k + 1], k + 1
    y = r0
    for i in range(r):
        y += R[i] * states[n_steps, i]
    ys[n_steps] = y
    return states, ys, acts, -1


def _lti_tf_adjoint_loop(Phi, Gam, R, b, c, states, ys, acts, gq, ga, k_on):
    n_steps = acts.shape[0]
    r = states.shape[1]
    nb = b.shape[0]
    nc = c.shape[0]
    lam = np.empty(r)
    for i in range(r):
        lam[i] = gq[n_steps, i]
    abar = np.zeros(n_steps)
    ybar = np.zeros(n_steps + 1)
    gb = np.zeros(nb)
    gc = np.zeros(nc)
    gR = np.zeros(r)
    gr0 = 0.0
    new = np.empty(r)
    for k in range(n_steps - 1, -1, -1):
        # lam holds dJ/dq_{k+1}
        s = ga[k]
        for i in range(r):
            s += Gam[i] * lam[i]
        abar[k] += s
        if k >= k_on:
            ak = abar[k]
            for i in range(nb):
                j = k - i
                if j >= k_on:
                    ybar[j] += b[i] * ak
                    gb[i] += ak * ys[j]
            for i in range(nc):
                j = k - 1 - i
                if j >= k_on:
                    abar[j] -= c[i] * ak
                    gc[i] -= ak * acts[j]
        yb = ybar[k]
        for i in range(r):
            acc = gq[k, i] + R[i] * yb
            for l in range(r):
                acc += Phi[l, i] * lam[l]
            new[i] = acc
        for i in range(r):
            lam[i] = new[i]
            gR[i] += yb * states[k, i]
        gr0 += yb
    return lam, gb, gc, gR, gr0


def lti_tf_rollout_numpy(Phi, Gam, R, r0, b, c, q0, n_steps, k_on):
    r = q0.shape[0]
    states = np.empty((n_steps + 1, r))
    ys = np.zeros(n_steps + 1)
    acts = np.zeros(n_steps)
    states[0] = q0
    nb, nc = b.shape[0], c.shape[0]
    for k in range(n_steps):
        q = states[k]
        ys[k] = R @ q + r0
        a = 0.0
        if k >= k_on:
            idx = np.arange(k, max(k - nb + 1, k_on) - 1, -1)
            a += b[: idx.size] @ ys[idx]
            idx = np.arange(k - 1, max(k - nc, k_on) - 1, -1)
            if idx.size:
                a -= c[: idx.size] @ acts[idx]
        acts[k] = a
        nxt = Phi @ q + Gam * a
        states[k + 1] = nxt
        if not np.all(np.isfinite(nxt)):
            return states[: k + 2], ys[: k + 2], acts[: k + 1], k + 1
    ys[n_steps] = R @ states[n_steps] + r0
    return states, ys, acts, -1


def lti_tf_adjoint_numpy(Phi, Gam, R, b, c, states, ys, acts, gq, ga, k_on):
    n_steps = acts.shape[0]
    nb, nc = b.shape[0], c.shape[0]
    lam = gq[n_steps].copy()
    abar = np.zeros(n_steps)
    ybar = np.zeros(n_steps + 1)
    gb = np.zeros(nb)
    gc = np.zeros(nc)
    gR = np.zeros_like(R)
    gr0 = 0.0
    PhiT = Phi.T
    for k in range(n_steps - 1, -1, -1):
        abar[k] += ga[k] + Gam @ lam
        if k >= k_on:
            ak = abar[k]
            lo = max(k - nb + 1, k_on)
            idx = np.arange(k, lo - 1, -1)
            ybar[idx] += b[: idx.size] * ak
            gb[: idx.size] += ak * ys[idx]
            lo = max(k - nc, k_on)
            idx = np.arange(k - 1, lo - 1, -1)
            if idx.size:
                abar[idx] -= c[: idx.size] * ak
                gc[: idx.size] -= ak * acts[idx]
        yb = ybar[k]
        gR += yb * states[k]
        gr0 += yb
        lam = gq[k] + PhiT @ lam + R * yb
    return lam, gb, gc, gR, gr0


if numba is not None:
    _gl_rhs_loop = _njit(_gl_rhs_loop)
    gl_rk4_step_numba = _njit(_gl_rk4_step_loop)
    _wake_rhs = _njit(_wake_rhs)
    wake_rk4_step_numba = _njit(_wake_rk4_step_loop)
    lti_tf_rollout_numba = _njit(_lti_tf_rollout_loop)
    lti_tf_adjoint_numba = _njit(_lti_tf_adjoint_loop)
else:  # pragma: no cover
    gl_rk4_step_numba = gl_rk4_step_numpy
    wake_rk4_step_numba = wake_rk4_step_numpy
    lti_tf_rollout_numba = lti_tf_rollout_numpy
    lti_tf_adjoint_numba = lti_tf_adjoint_numpy


def _pick(name, backend=None):
    backend = backend or BACKEND
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown kernel backend {backend!r}")
    return globals()[f"{name}_{backend}"]


def gl_rk4_step(q, forcing, h, mu, coef, backend=None):
    """One RK4 step of the convective plant; ``coef = (U, cu, gr, gi, dx)``."""
    return _pick("gl_rk4_step", backend)(q, forcing, h, mu, coef)


def wake_rk4_step(s, action, h, p, backend=None):
    """One RK4 step of the wake oscillator; ``p = (mu, omega, lam, g1, g2, g3)``."""
    return _pick("wake_rk4_step", backend)(s, float(action), h, p)


def lti_tf_rollout(Phi, Gam, R, r0, b, c, q0, n_steps, k_on=0, backend=None):
    """Closed-loop rollout of a discrete LTI map with a SISO difference equation.

    Returns ``(states, ys, actions, blowup)`` where ``blowup`` is the index of
    the first non-finite state or -1. Arrays are truncated at blow-up.
    """
    return _pick("lti_tf_rollout", backend)(
        Phi, Gam, R, float(r0), b, c, q0, int(n_steps), int(k_on))


def lti_tf_adjoint(Phi, Gam, R, b, c, states, ys, acts, gq, ga, k_on=0, backend=None):
    """Reverse pass of :func:`lti_tf_rollout`.

    Returns ``(g_q0, g_b, g_c, g_R, g_r0)`` given seeds ``gq = dJ/dstates`` and
    ``ga = dJ/dactions``.
    """
    return _pick("lti_tf_adjoint", backend)(
        Phi, Gam, R, b, c, states, ys, acts, gq, ga, int(k_on))
