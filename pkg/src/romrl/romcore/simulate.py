"""Fixed-step RK4 rollouts of a NodeRom with a store-all gradient tape.

Rollouts are batched: ``q0`` may hold several initial states that are
advanced together (one per dataset or segment). The tape keeps every RK4
stage input, residual-network activation and controller evaluation, and
:func:`backward` walks it in exact reverse order to return gradients of a
scalar loss with respect to the residual parameters, the controller
parameters, the initial states and the controller readout.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, DivergenceError, TapeMismatchError

BLOWUP = 1e8


@dataclass
class Trajectory:
    """States on a uniform grid; ``states`` has shape (n+1, batch, r)."""

    t: np.ndarray
    states: np.ndarray
    actions: np.ndarray = None

    @property
    def dt(self):
        return self.t[1] - self.t[0] if self.t.size > 1 else np.nan


@dataclass
class GradientTape:
    mode: str
    rom: object
    params: np.ndarray
    h: float
    states: np.ndarray
    stage_x: list = field(default_factory=list)
    stage_a: list = field(default_factory=list)
    stage_cache: list = field(default_factory=list)
    controller: object = None
    theta: np.ndarray = None
    readout: tuple = None
    k_on: int = 0
    ctrl_inputs: np.ndarray = None
    ctrl_cache: list = field(default_factory=list)
    actions: np.ndarray = None


def _rhs(rom, params, x, a):
    out = x @ rom.A.T + a[:, None] * rom.B[None, :]
    cache = None
    if rom.has_residual:
        F, cache = rom.residual.forward(params, x, a)
        out = out + F
    return out, cache


def _check(k, t, stage, limit=BLOWUP):
    if not np.all(np.isfinite(k)) or np.max(np.abs(k)) > limit:
        raise DivergenceError(f"ROM rollout diverged in RK4 stage {stage} at t={t:.6g}",
                              time=t, stage=stage)


def _step(rom, params, q, a_stages, h, t, tape, record):
    xs, caches = [], []
    x = q
    ks = []
    for s, (c_prev, a) in enumerate(zip((0.0, 0.5, 0.5, 1.0), a_stages)):
        if s:
            x = q + (c_prev * h) * ks[-1]
        k, cache = _rhs(rom, params, x, a)
        _check(k, t, s + 1)
        ks.append(k)
        if record:
            xs.append(x)
            caches.append(cache)
    if record:
        tape.stage_x.append(xs)
        tape.stage_a.append(a_stages)
        tape.stage_cache.append(caches)
    q_new = q + (h / 6.0) * (ks[0] + 2.0 * ks[1] + 2.0 * ks[2] + ks[3])
    _check(q_new, t + h, 4)
    return q_new


def _prep_q0(q0, r):
    q0 = np.asarray(q0, dtype=float)
    single = q0.ndim == 1
    q0 = np.atleast_2d(q0)
    if q0.shape[1] != r:
        raise ConfigurationError(f"initial state has length {q0.shape[1]}, ROM has r={r}")
    return q0, single


def simulate_open_loop(rom, q0, t_act, a_act, n_steps, t0=None, params=None, record=True):
    """Open-loop rollout with linearly interpolated recorded actions.

    Parameters
    ----------
    rom : NodeRom
    q0 : array_like, shape (r,) or (batch, r)
    t_act : array_like, shape (m,)
        Sample times of the recorded actions.
    a_act : array_like, shape (m,) or (batch, m)
    n_steps : int
    t0 : float, optional
        Start time (defaults to ``t_act[0]``).

    Returns
    -------
    (Trajectory, GradientTape or None)
    """
    q, single = _prep_q0(q0, rom.r)
    t_act = np.asarray(t_act, dtype=float)
    a_act = np.atleast_2d(np.asarray(a_act, dtype=float))
    if a_act.shape[0] == 1 and q.shape[0] > 1:
        a_act = np.repeat(a_act, q.shape[0], axis=0)
    t0 = t_act[0] if t0 is None else float(t0)
    h = rom.dt
    t_end = t0 + n_steps * h
    if t0 < t_act[0] - 1e-9 * h or t_end > t_act[-1] + 1e-9 * max(h, abs(t_end)):
        raise ConfigurationError("action series does not cover the rollout horizon")
    p = rom.residual.params if (params is None and rom.has_residual) else params
    tape = GradientTape("open", rom, p, h, None) if record else None
    states = np.empty((n_steps + 1, *q.shape))
    states[0] = q
    stage_t = t0 + h * np.arange(n_steps)[:, None] + h * np.array([0.0, 0.5, 1.0])[None, :]
    interp = np.stack([np.interp(stage_t.ravel(), t_act, row).reshape(n_steps, 3)
                       for row in a_act], axis=-1)
    for k in range(n_steps):
        a0, ah, a1 = interp[k]
        q = _step(rom, p, q, (a0, ah, ah, a1), h, t0 + k * h, tape, record)
        states[k + 1] = q
    if record:
        tape.states = states
    traj = Trajectory(t0 + h * np.arange(n_steps + 1), states)
    return traj, tape


def simulate_closed_loop(rom, q0, controller, readout, n_steps, k_on=0, t0=0.0,
                         params=None, theta=None, record=True):
    """Closed-loop rollout; the action ``pi(R q + r0)`` is held over each step.

    Parameters
    ----------
    readout : tuple (R, r0)
        ``R`` of shape (n_inputs, r) and offset ``r0`` of shape (n_inputs,).
    k_on : int
        First step at which the controller acts; earlier actions are zero and
        stateful controllers start from zero registers at ``k_on``.

    Raises
    ------
    DivergenceError
        Carries the blow-up time.
    """
    q, single = _prep_q0(q0, rom.r)
    R, r0 = readout
    R = np.atleast_2d(np.asarray(R, dtype=float))
    r0 = np.broadcast_to(np.asarray(r0, dtype=float), (R.shape[0],)).copy()
    if R.shape != (controller.n_inputs, rom.r):
        raise ConfigurationError(
            f"readout maps to {R.shape[0]} inputs over r={R.shape[1]}, controller expects "
            f"{controller.n_inputs} over r={rom.r}")
    h = rom.dt
    p = rom.residual.params if (params is None and rom.has_residual) else params
    th = controller.params if theta is None else np.asarray(theta, dtype=float)
    B = q.shape[0]
    tape = GradientTape("closed", rom, p, h, None, controller=controller, theta=th,
                        readout=(R, r0), k_on=k_on) if record else None
    states = np.empty((n_steps + 1, B, rom.r))
    states[0] = q
    acts = np.zeros((n_steps, B))
    inputs = np.zeros((n_steps, B, R.shape[0]))
    caches = [None] * n_steps
    if controller.stateful:
        nb = controller.b.size
        coef_b, coef_a = th[:nb], th[nb:]
    for k in range(n_steps):
        t = t0 + k * h
        Y = q @ R.T + r0
        inputs[k] = Y
        if k >= k_on:
            if controller.stateful:
                a = np.zeros(B)
                for i in range(coef_b.size):
                    if k - i >= k_on:
                        a += coef_b[i] * inputs[k - i, :, 0]
                for i in range(coef_a.size):
                    if k - 1 - i >= k_on:
                        a -= coef_a[i] * acts[k - 1 - i]
            else:
                a, caches[k] = controller.forward(th, Y)
            acts[k] = a
        a = acts[k]
        q = _step(rom, p, q, (a, a, a, a), h, t, tape, record)
        states[k + 1] = q
    if record:
        tape.states = states
        tape.actions = acts
        tape.ctrl_inputs = inputs
        tape.ctrl_cache = caches
    traj = Trajectory(t0 + h * np.arange(n_steps + 1), states, acts)
    return traj, tape


def backward(tape, gq, ga=None):
    """Reverse pass through a recorded rollout.

    Parameters
    ----------
    tape : GradientTape
    gq : array_like, shape (n+1, batch, r)
        Derivative of the loss with respect to every stored state.
    ga : array_like, shape (n, batch), optional
        Derivative of the loss with respect to the closed-loop actions.

    Returns
    -------
    dict
        ``omega`` (residual params or None), ``theta`` (controller params or
        None), ``q0`` (batch, r), ``R`` and ``r0`` (closed loop only).
    """
    if tape is None:
        raise TapeMismatchError("no tape was recorded for this rollout")
    states = tape.states
    gq = np.asarray(gq, dtype=float)
    if gq.shape != states.shape:
        raise TapeMismatchError(f"state seed shape {gq.shape} != tape {states.shape}")
    n = states.shape[0] - 1
    closed = tape.mode == "closed"
    if ga is not None:
        ga = np.asarray(ga, dtype=float)
        if not closed or ga.shape != tape.actions.shape:
            raise TapeMismatchError("action seed does not match the recorded rollout")
    rom, p, h = tape.rom, tape.params, tape.h
    res = rom.has_residual
    g_omega = np.zeros_like(p) if res else None
    A, Bv = rom.A, rom.B
    lam = gq[n].copy()
    if closed:
        ctrl = tape.controller
        th = tape.theta
        g_theta = np.zeros_like(th)
        R, r0 = tape.readout
        gR = np.zeros_like(R)
        gr0 = np.zeros_like(r0)
        abar = np.zeros_like(tape.actions) if ga is None else ga.copy()
        ybar = np.zeros_like(tape.ctrl_inputs)
        if ctrl.stateful:
            nb = ctrl.b.size
            coef_b, coef_a = th[:nb], th[nb:]
    for k in range(n - 1, -1, -1):
        caches = tape.stage_cache[k]
        kb = [h / 6.0 * lam, h / 3.0 * lam, h / 3.0 * lam, h / 6.0 * lam]
        qbar = lam.copy()
        a_bar_stage = np.zeros(lam.shape[0]) if closed else None
        for s in (3, 2, 1, 0):
            kbar = kb[s]
            xbar = kbar @ A
            ab = kbar @ Bv
            if res:
                gp, gx, gaa = rom.residual.vjp(p, caches[s], kbar)
                g_omega += gp
                xbar = xbar + gx
                ab = ab + gaa
            qbar += xbar
            if s == 3:
                kb[2] = kb[2] + h * xbar
            elif s in (1, 2):
                kb[s - 1] = kb[s - 1] + 0.5 * h * xbar
            if closed:
                a_bar_stage += ab
        if closed:
            abar[k] += a_bar_stage
            if k >= tape.k_on:
                if ctrl.stateful:
                    ak = abar[k]
                    inputs = tape.ctrl_inputs
                    for i in range(coef_b.size):
                        j = k - i
                        if j >= tape.k_on:
                            ybar[j, :, 0] += coef_b[i] * ak
                            g_theta[i] += ak @ inputs[j, :, 0]
                    for i in range(coef_a.size):
                        j = k - 1 - i
                        if j >= tape.k_on:
                            abar[j] -= coef_a[i] * ak
                            g_theta[nb + i] -= ak @ tape.actions[j]
                else:
                    gth, gY = ctrl.vjp(th, tape.ctrl_cache[k], abar[k])
                    g_theta += gth
                    ybar[k] += gY
            yb = ybar[k]
            qbar += yb @ R
            gR += yb.T @ states[k]
            gr0 += yb.sum(axis=0)
        lam = qbar + gq[k]
    out = {"omega": g_omega, "q0": lam, "theta": None, "R": None, "r0": None}
    if closed:
        out.update(theta=g_theta, R=gR, r0=gr0)
    return out
