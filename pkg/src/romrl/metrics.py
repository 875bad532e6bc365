"""Frequency-domain and performance metrics."""

import warnings
from dataclasses import dataclass

import numpy as np

from .control.costs import window_weights
from .errors import ConfigurationError

TAIL_TOL = 1e-8


@dataclass
class TransferFunction:
    """``G(e^{i w dt})`` on a uniform grid of ``(-pi/dt, pi/dt]``."""

    omega: np.ndarray
    values: np.ndarray
    dt: float
    n_impulse: int
    truncated: bool = False

    @property
    def magnitude(self):
        return np.abs(self.values)


def transfer_from_impulse(h, dt, n_bins=None):
    """Discrete-time Fourier transform of an impulse response.

    Parameters
    ----------
    h : array_like
        ``h[0], h[1], ...`` sampled every ``dt``.
    n_bins : int, optional
        Number of frequency bins (at least ``len(h)``; defaults to ``len(h)``).
    """
    h = np.asarray(h, dtype=float)
    if h.size == 0:
        raise ConfigurationError("impulse response is empty")
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    N = h.size if n_bins is None else int(n_bins)
    if N < h.size:
        raise ConfigurationError("n_bins must be at least the impulse length")
    peak = np.abs(h).max()
    truncated = bool(peak > 0 and np.abs(h[-max(1, h.size // 20):]).max() > TAIL_TOL * peak)
    if truncated:
        warnings.warn("impulse response has not decayed; transfer function is truncated",
                      stacklevel=2)
    j = np.arange(-(N // 2) + 1 if N % 2 == 0 else -(N // 2), N // 2 + 1)
    omega = 2.0 * np.pi * j / (N * dt)
    G = np.fft.fft(h, n=N)[j % N]
    return TransferFunction(omega, G, float(dt), h.size, truncated)


def h2_norm(tf):
    """``sqrt((1/2pi) int |G|^2 d(w dt))`` over one period of the normalized frequency.

    The integrand is periodic, so the trapezoid rule on the uniform grid is a
    plain mean; it equals ``sum(h**2)`` whenever the grid has at least as
    many bins as the impulse response (Parseval).
    """
    return float(np.sqrt(np.mean(np.abs(tf.values) ** 2)))


def bode_table(tf):
    """Non-negative frequencies and gains, ready for plotting."""
    keep = tf.omega >= 0
    return tf.omega[keep], np.abs(tf.values[keep])


def drag_stats(record, window, baseline_mean=None, label="cd"):
    """Time-averaged drag proxy over ``window`` and reduction vs. baseline.

    Returns
    -------
    dict
        ``mean``, ``reduction`` (``1 - mean / baseline``), ``diverged``.
    """
    lo, hi = window
    if lo < record.schedule.t_on - 1e-12:
        raise ConfigurationError("drag window starts before the control-on time")
    if record.diverged or record.t[-1] < hi - 1e-9:
        return {"mean": float("nan"), "reduction": float("-inf"), "diverged": True}
    w = window_weights(record.t, lo, hi)
    mean = float(np.sum(w * record.sensor(label)) / (hi - lo))
    red = float("nan") if baseline_mean is None else 1.0 - mean / baseline_mean
    return {"mean": mean, "reduction": red, "diverged": False}


def perturbation_energy(field, region=None, weights=None):
    """Pointwise time mean of ``u^T u`` and its (weighted) sum over a region.

    Parameters
    ----------
    field : array_like, shape (n_t, n_points) or (n_t, n_points, n_comp)
    region : boolean mask over points, optional
    weights : per-point quadrature weights, optional (unit by default)
    """
    u = np.asarray(field, dtype=float)
    if u.ndim == 2:
        u = u[:, :, None]
    e = np.mean(np.sum(u * u, axis=2), axis=0)
    mask = np.ones(e.size, dtype=bool) if region is None else np.asarray(region, dtype=bool)
    if mask.shape != e.shape:
        raise ConfigurationError("region mask does not match the field")
    w = np.ones(e.size) if weights is None else np.asarray(weights, dtype=float)
    return e, float(np.sum((e * w)[mask]))


def normalized_linear_loss(aggregate, reference, datasets, dt):
    """Open-loop trajectory loss of ``aggregate`` divided by that of ``reference``.

    Parameters
    ----------
    aggregate, reference : LinearRom
    datasets : iterable of (t, q_r, actions)
    dt : float
        ROM step size used for both rollouts.
    """
    from .romcore.loss import rom_loss
    from .romcore.rom import NodeRom
    from .romcore.simulate import simulate_open_loop
    out = []
    for t, q, a in datasets:
        n = int(np.floor((t[-1] - t[0]) / dt + 1e-9))
        vals = []
        for lin in (aggregate, reference):
            traj, _ = simulate_open_loop(NodeRom(lin, dt), q[0], t, a, n, record=False)
            vals.append(rom_loss(traj.t, traj.states[:, 0], t, q))
        out.append(vals[0] / vals[1] if vals[1] > 0 else float("inf"))
    return np.array(out)
