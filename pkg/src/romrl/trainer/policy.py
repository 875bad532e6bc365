"""Gradient-based policy updates against a differentiable ROM cost."""

import logging

import numpy as np

from ..control.stabilize import repulsive_penalty
from ..errors import DivergenceError
from ..romcore.adam import AdamState, adam_update

log = logging.getLogger(__name__)


def optimize_policy_on_rom(objective, controller, steps, lr=1e-3, penalty=None, events=None):
    """Adam on the controller parameters; returns the best iterate.

    Parameters
    ----------
    objective : callable
        ``objective(theta) -> (cost, grad)``; may raise DivergenceError or
        return a non-finite cost for an unstable iterate.
    controller : initial controller (its ``params`` seed the search)
    steps : int
        Number of Adam updates ``N``; ``N + 1`` points are evaluated.
    penalty : callable, optional
        ``penalty(theta) -> (value, grad)`` added to the cost (repulsion).

    Returns
    -------
    (controller, dict)
        Best controller by total ROM cost and a history dict with ``cost``
        (per evaluation), ``best`` (running best) and ``penalty``.
    """
    theta = controller.params
    state = AdamState.zeros_like(theta, lr=lr)
    hist = {"cost": [], "best": [], "penalty": []}
    best_val, best_theta = np.inf, theta.copy()
    for it in range(steps + 1):
        try:
            val, grad = objective(theta)
        except DivergenceError as exc:
            val, grad = np.inf, None
            msg = f"policy step {it}: ROM rollout diverged at t={exc.time}"
            log.info(msg)
            if events is not None:
                events.append(msg)
        if it == 0 and not np.isfinite(val):
            raise DivergenceError("every ROM rollout diverges at the initial controller; "
                                  "reduce the initial gain")
        pen = 0.0
        if penalty is not None:
            pen, gpen = penalty(theta)
            val = val + pen
            if grad is not None:
                grad = grad + gpen
        hist["cost"].append(float(val))
        hist["penalty"].append(float(pen))
        if val < best_val:
            best_val, best_theta = val, theta.copy()
        hist["best"].append(float(best_val))
        if it == steps:
            break
        if grad is None:
            # step back towards the best point seen so far
            theta = best_theta.copy()
            state = AdamState.zeros_like(theta, lr=state.lr * 0.5)
            continue
        theta, state = adam_update(theta, grad, state)
    return controller.with_params(best_theta), hist


def make_penalty(policy, bad_set, X, tau, lambda_rep):
    """Repulsive penalty closure for :func:`optimize_policy_on_rom` (``None`` if no bad policies)."""
    if not bad_set:
        return None

    def penalty(theta):
        return repulsive_penalty(policy, theta, bad_set, X, tau, lambda_rep, return_grad=True)

    return penalty
