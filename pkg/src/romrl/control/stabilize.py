"""Policy-space distances and repulsive penalties for stabilized training."""

import numpy as np

from ..errors import ConfigurationError


def sample_grid(y_ranges, n=32):
    """Uniform ``n x n`` grid over the bounding box ``[(lo1, hi1), (lo2, hi2)]``."""
    if y_ranges is None or len(y_ranges) == 0:
        raise ConfigurationError("no stable input ranges recorded; cannot build the sample grid")
    axes = [np.linspace(lo, hi, n) for lo, hi in y_ranges]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def input_ranges(inputs_list):
    """Bounding box of recorded controller inputs (list of (n_t, n_in) arrays)."""
    if not inputs_list:
        raise ConfigurationError("no stable datasets to take input ranges from")
    X = np.vstack([np.atleast_2d(x) for x in inputs_list])
    return [(float(lo), float(hi)) for lo, hi in zip(X.min(axis=0), X.max(axis=0))]


def policy_distance(policy, theta, theta_bad, X, return_grad=False):
    """Mean squared output difference ``mean_x (pi_theta(x) - pi_bad(x))^2``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise ConfigurationError("empty sample grid")
    out, cache = policy.forward(theta, X)
    bad, _ = policy.forward(theta_bad, X)
    diff = out - bad
    d = float(np.mean(diff * diff))
    if not return_grad:
        return d
    g, _ = policy.vjp(theta, cache, 2.0 * diff / X.shape[0])
    return d, g


def repulsive_penalty(policy, theta, bad_set, X, tau, lambda_rep, return_grad=False):
    """``sum_j lambda_rep * exp(-(d_j / tau)^2)`` over archived dangerous policies."""
    val = 0.0
    grad = np.zeros_like(np.asarray(theta, dtype=float))
    for theta_bad in bad_set:
        d, gd = policy_distance(policy, theta, theta_bad, X, return_grad=True)
        e = lambda_rep * np.exp(-(d / tau) ** 2)
        val += e
        grad += e * (-2.0 * d / tau ** 2) * gd
    return (float(val), grad) if return_grad else float(val)
