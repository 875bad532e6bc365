"""Differentiable Gaussian sensor reads and joint sensor/controller optimization."""

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from ..romcore.adam import AdamState, adam_update

log = logging.getLogger(__name__)

_UNDERFLOW = 700.0


def gaussian_weights(X, Y, x0, y0, sx, sy, return_grad=False):
    """Normalized Gaussian sensor weights on grid points ``(X, Y)``.

    Returns ``w`` (sums to one) and, if requested, ``dw/dx0`` and ``dw/dy0``.
    """
    if not (sx > 0 and sy > 0):
        raise ConfigurationError("sensor widths must be positive")
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    ex = (X - x0) / sx
    ey = (Y - y0) / sy
    expo = -(ex * ex) - (ey * ey)
    top = expo.max()
    if top < -_UNDERFLOW:
        raise ConfigurationError(f"sensor at ({x0}, {y0}) lies outside the field domain")
    e = np.exp(expo - top)
    w = e / e.sum()
    if not return_grad:
        return w
    gx = 2.0 * ex / sx
    gy = 2.0 * ey / sy
    dwx = w * (gx - np.sum(w * gx))
    dwy = w * (gy - np.sum(w * gy))
    return w, dwx, dwy


def gaussian_sensor_read(field, X, Y, x0, y0, sx, sy, return_grad=False):
    """Gaussian-weighted reading of ``field`` at ``(x0, y0)``.

    Returns the reading, and with ``return_grad`` also its derivatives with
    respect to ``x0`` and ``y0``.
    """
    f = np.asarray(field, dtype=float)
    if not return_grad:
        return float(gaussian_weights(X, Y, x0, y0, sx, sy) @ f)
    w, dwx, dwy = gaussian_weights(X, Y, x0, y0, sx, sy, True)
    return float(w @ f), float(dwx @ f), float(dwy @ f)


@dataclass
class PlacementEntry:
    """One ROM of a bank as seen by the sensor optimizer.

    ``mean`` and ``modes`` reconstruct the field on the grid, ``perf`` and
    ``perf_offset`` map the reduced state to the performance output; ``Phi``,
    ``Gam`` are the discrete one-step maps of the ROM.
    """

    Phi: np.ndarray
    Gam: np.ndarray
    mean: np.ndarray
    modes: np.ndarray
    perf: np.ndarray
    perf_offset: float
    q0: np.ndarray
    t: np.ndarray
    k_on: int = 0


def _entry_cost(entry, tf_params, nb, R, r0, spec, lti):
    from ..romcore.linear import tf_rollout_cost
    return tf_rollout_cost(entry.Phi, entry.Gam, R, r0, tf_params[:nb], tf_params[nb:],
                           entry.q0, entry.t, entry.k_on, entry.perf, entry.perf_offset,
                           spec, backend=lti)


def placement_cost(entries, controller, theta, pos, grid, widths, spec, lti=None):
    """Bank cost and gradients with respect to controller params and position."""
    X, Y = grid
    x0, y0 = pos
    w, dwx, dwy = gaussian_weights(X, Y, x0, y0, *widths, return_grad=True)
    nb = controller.b.size
    j1s, j2s = [], []
    per = []
    for e in entries:
        R = (w @ e.modes)[None, :]
        r0 = float(w @ e.mean)
        out = _entry_cost(e, theta, nb, R, r0, spec, lti)
        j1s.append(out["j1"])
        j2s.append(out["j2"])
        per.append((e, out))
    from .costs import cost_total
    val, d1, d2 = cost_total(j1s, j2s, spec, return_grad=True)
    g_theta = np.zeros_like(theta)
    gx = gy = 0.0
    for i, (e, out) in enumerate(per):
        g1, g2 = out["g_j1"], out["g_j2"]
        g_theta += d1[i] * g1["theta"] + d2[i] * g2["theta"]
        gR = d1[i] * np.ravel(g1["R"]) + d2[i] * np.ravel(g2["R"])
        gr0 = d1[i] * g1["r0"] + d2[i] * g2["r0"]
        gx += gR @ (dwx @ e.modes) + gr0 * (dwx @ e.mean)
        gy += gR @ (dwy @ e.modes) + gr0 * (dwy @ e.mean)
    return val, g_theta, np.array([gx, gy])


def optimize_sensor_placement(entries, controller, position, grid, widths, spec, steps=100,
                              lr_theta=1e-3, lr_pos=1e-2, bounds=None, margin=0.0, lti=None):
    """Adam co-update of controller coefficients and sensor position.

    Parameters
    ----------
    entries : list of PlacementEntry
    controller : DiscreteTf
    position : (x0, y0)
    grid : (X, Y) flattened field coordinates
    widths : (sigma_x, sigma_y)
    bounds : ((xmin, xmax), (ymin, ymax)), optional
        Position box; iterates are clamped inside it (minus ``margin``).

    Returns
    -------
    (controller, position, history)
        Best iterate by cost; ``history`` lists ``(cost, x0, y0, clamped)``.
    """
    theta = controller.params
    pos = np.asarray(position, dtype=float).copy()
    X, Y = grid
    if bounds is None:
        bounds = ((X.min(), X.max()), (Y.min(), Y.max()))
    lo = np.array([bounds[0][0], bounds[1][0]]) + margin
    hi = np.array([bounds[0][1], bounds[1][1]]) - margin
    if np.any(pos < lo) or np.any(pos > hi):
        raise ConfigurationError("initial sensor position is outside the allowed domain")
    st_t = AdamState.zeros_like(theta, lr=lr_theta)
    st_p = AdamState.zeros_like(pos, lr=lr_pos)
    best = (np.inf, theta.copy(), pos.copy())
    history = []
    for it in range(steps + 1):
        val, g_t, g_p = placement_cost(entries, controller, theta, pos, grid, widths, spec, lti)
        clamped = False
        history.append((val, float(pos[0]), float(pos[1]), clamped))
        if val < best[0]:
            best = (val, theta.copy(), pos.copy())
        if it == steps:
            break
        if lr_theta > 0:
            theta, st_t = adam_update(theta, g_t, st_t)
        if lr_pos > 0:
            pos, st_p = adam_update(pos, g_p, st_p)
        clipped = np.clip(pos, lo, hi)
        if np.any(clipped != pos):
            log.info("sensor position clamped from %s to %s", pos, clipped)
            history[-1] = (val, float(pos[0]), float(pos[1]), True)
            pos = clipped
    return controller.with_params(best[1]), (float(best[2][0]), float(best[2][1])), history


@dataclass(frozen=True)
class PlacementBenchmark:
    """Two-entry bank whose cost is quadratic in the sensor position.

    The sensor reads a static field ``c (x - x_star)`` in the first entry and
    ``c (y - y_star)`` in the second. A unit-gain controller feeds the reading
    into the stable map ``q+ = phi q + a``, so the output settles at
    ``reading / (1 - phi)`` and both ``J1`` and ``J2`` vanish only when the
    sensor sits at ``(x_star, y_star)``.
    """

    x_star: float = 2.6
    y_star: float = 0.3
    start: tuple = (1.4, -0.4)
    x_range: tuple = (0.0, 4.0, 81)
    y_range: tuple = (-1.0, 1.0, 41)
    widths: tuple = (0.15, 0.15)
    slope: float = 1.0
    phi: float = 0.5
    n_steps: int = 40
    window: tuple = (10.0, 40.0)
    steps: int = 300
    lr_pos: float = 0.02
    margin: float = 0.2

    def grid(self):
        x = np.linspace(*self.x_range[:2], int(self.x_range[2]))
        y = np.linspace(*self.y_range[:2], int(self.y_range[2]))
        X, Y = np.meshgrid(x, y, indexing="ij")
        return X.ravel(), Y.ravel()

    def span(self):
        return (self.x_range[1] - self.x_range[0], self.y_range[1] - self.y_range[0])

    def entries(self):
        X, Y = self.grid()
        t = np.arange(self.n_steps + 1, dtype=float)
        out = []
        for field in (self.slope * (X - self.x_star), self.slope * (Y - self.y_star)):
            out.append(PlacementEntry(np.array([[self.phi]]), np.array([1.0]), field,
                                      np.zeros((X.size, 1)), np.array([1.0]), 0.0,
                                      np.zeros(1), t))
        return out

    def bounds(self):
        return ((self.x_range[0], self.x_range[1]), (self.y_range[0], self.y_range[1]))


def run_placement_benchmark(bench, spec=None, lti=None):
    """Optimize the sensor position only; returns ``(position, history)``."""
    from ..control.controllers import DiscreteTf
    from .costs import CostSpec
    spec = spec or CostSpec(t0=bench.window[0], t_end=bench.window[1])
    ctrl = DiscreteTf([1.0], [], 1.0)
    _, pos, hist = optimize_sensor_placement(bench.entries(), ctrl, bench.start, bench.grid(),
                                             bench.widths, spec, bench.steps, lr_theta=0.0,
                                             lr_pos=bench.lr_pos, bounds=bench.bounds(),
                                             margin=bench.margin, lti=lti)
    return pos, hist
