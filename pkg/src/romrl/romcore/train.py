"""Residual-network training on recorded reduced trajectories."""

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, DivergenceError
from .adam import AdamState, adam_update
from .loss import resample, rom_loss
from .simulate import backward, simulate_closed_loop, simulate_open_loop

log = logging.getLogger(__name__)


@dataclass
class TrainingSeries:
    """One dataset in reduced coordinates.

    Attributes
    ----------
    t : (n,) uniform sample times
    q : (n, r) reduced states
    a : (n,) recorded actions
    controller : policy that produced the data (closed-loop training)
    readout : (R, r0) mapping reduced state to controller inputs
    t_on : control-on time
    """

    t: np.ndarray
    q: np.ndarray
    a: np.ndarray
    controller: object = None
    readout: tuple = None
    t_on: float = 0.0
    name: str = ""


def _segments(series, dt, segment_steps):
    """Start indices (into the data grid) and step count of training windows."""
    t = series.t
    span = t[-1] - t[0]
    total = int(np.floor(span / dt + 1e-9))
    if total < 1:
        raise ConfigurationError("dataset shorter than one ROM step")
    if not segment_steps or segment_steps >= total:
        return [0], total
    seg_T = segment_steps * dt
    starts = []
    s = t[0]
    while s + seg_T <= t[-1] + 1e-9 * dt:
        starts.append(int(np.argmin(np.abs(t - s))))
        s += seg_T
    return starts, segment_steps


def dataset_loss(rom, series, mode, params, segment_steps=None, need_grad=True):
    """Summed trajectory loss of one dataset (all its windows) and its gradient.

    In closed-loop mode windows that end before the control-on time are run
    open loop (their recorded actions are zero) and windows straddling it are
    dropped, unless the whole horizon is a single window.
    """
    if mode not in ("open", "closed"):
        raise ConfigurationError(f"unknown training mode {mode!r}")
    starts, n = _segments(series, rom.dt, segment_steps)
    h = rom.dt
    grid = h * np.arange(n + 1)
    if mode == "closed" and (series.controller is None or series.readout is None):
        raise ConfigurationError("closed-loop training needs the dataset's controller")
    groups = []
    if mode == "open":
        groups.append(("open", starts))
    elif len(starts) == 1:
        groups.append(("closed", starts))
    else:
        t0s = series.t[starts]
        pre = [s for s, t0 in zip(starts, t0s) if t0 + n * h <= series.t_on + 1e-9 * h]
        post = [s for s, t0 in zip(starts, t0s) if t0 >= series.t_on - 1e-9 * h]
        if pre:
            groups.append(("open", pre))
        if post:
            groups.append(("closed", post))
    total = 0.0
    grad = None if not need_grad else (np.zeros_like(params) if params is not None else None)
    for kind, idx in groups:
        t0s = series.t[idx]
        if kind == "open":
            traj, tape = _open_batched(rom, series, idx, n, params, need_grad)
        else:
            k_on = max(0, int(np.ceil((series.t_on - t0s[0]) / h - 1e-9)))
            traj, tape = simulate_closed_loop(rom, series.q[idx], series.controller,
                                              series.readout, n, k_on=k_on, t0=t0s[0],
                                              params=params, record=need_grad)
        ref = np.stack([resample(series.t, series.q, t0 + grid) for t0 in t0s], axis=1)
        val, g = rom_loss(grid, traj.states, grid, ref, return_grad=True)
        total += val
        if need_grad and grad is not None:
            grad += backward(tape, g)["omega"]
    return total, grad


def _open_batched(rom, series, starts, n, params, need_grad):
    from .simulate import GradientTape, Trajectory, _step
    h = rom.dt
    t = series.t
    q = series.q[starts].copy()
    t0s = t[starts]
    B = len(starts)
    stage = t0s[None, :, None] + h * np.arange(n)[:, None, None] + \
        h * np.array([0.0, 0.5, 1.0])[None, None, :]
    acts = np.interp(stage.ravel(), t, series.a).reshape(stage.shape)
    tape = GradientTape("open", rom, params, h, None) if need_grad else None
    states = np.empty((n + 1, B, rom.r))
    states[0] = q
    for k in range(n):
        a0, ah, a1 = acts[k, :, 0], acts[k, :, 1], acts[k, :, 2]
        q = _step(rom, params, q, (a0, ah, ah, a1), h, float(t0s[0] + k * h), tape, need_grad)
        states[k + 1] = q
    if need_grad:
        tape.states = states
    return Trajectory(h * np.arange(n + 1), states), tape


def train_residual(rom, datasets, mode="open", epochs=100, lr=1e-3, segment_steps=None,
                   optimizer=None, events=None):
    """Train the residual network with the linear operators frozen.

    One epoch is one pass over all datasets with their losses summed,
    followed by one Adam step. A dataset whose rollout diverges is skipped
    for that epoch and the event is logged (and appended to ``events``).

    Parameters
    ----------
    mode : {"open", "closed"} or sequence of those (one per dataset)

    Returns
    -------
    (NodeRom, list of float, AdamState)
        Updated ROM, per-epoch summed losses, optimizer state.
    """
    if not rom.has_residual:
        raise ConfigurationError("ROM has no residual network to train")
    modes = [mode] * len(datasets) if isinstance(mode, str) else list(mode)
    params = rom.residual.params.copy()
    state = optimizer or AdamState.zeros_like(params, lr=lr)
    history = []
    for epoch in range(epochs):
        total, grad = 0.0, np.zeros_like(params)
        for ds, m in zip(datasets, modes):
            try:
                val, g = dataset_loss(rom, ds, m, params, segment_steps)
            except DivergenceError as exc:
                msg = f"epoch {epoch}: dataset {ds.name or '?'} diverged at t={exc.time}; skipped"
                log.info(msg)
                if events is not None:
                    events.append(msg)
                continue
            total += val
            grad += g
        history.append(total)
        params, state = adam_update(params, grad, state)
    new = rom.with_residual_params(params) if epochs else rom
    return new, history, state


def evaluate_loss(rom, datasets, mode="open", segment_steps=None):
    """Summed trajectory loss without gradients (``inf`` on divergence)."""
    modes = [mode] * len(datasets) if isinstance(mode, str) else list(mode)
    params = rom.residual.params if rom.has_residual else None
    total = 0.0
    for ds, m in zip(datasets, modes):
        try:
            total += dataset_loss(rom, ds, m, params, segment_steps, need_grad=False)[0]
        except DivergenceError:
            return float("inf")
    return total


def verify_step_size(rom, q0, t_act, a_act, horizon, rtol=1e-3):
    """Step-doubling check: compare rollouts at ``dt`` and ``dt/2``.

    Returns the relative max difference on the common grid and whether it
    is below ``rtol``.
    """
    from .rom import NodeRom
    n = int(round(horizon / rom.dt))
    coarse, _ = simulate_open_loop(rom, q0, t_act, a_act, n, record=False)
    half = NodeRom(rom.linear, rom.dt / 2, rom.residual, rom.linear_only)
    fine, _ = simulate_open_loop(half, q0, t_act, a_act, 2 * n, record=False)
    diff = np.abs(coarse.states - fine.states[::2]).max()
    scale = max(np.abs(fine.states).max(), 1e-300)
    rel = float(diff / scale)
    return rel, rel < rtol
