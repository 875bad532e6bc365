"""Frequency-bank workflow for linear convective plants.

One single-frequency forced episode per frequency gives one linear ROM
(two-stage POD + OpInf, no disturbance input). A discrete transfer-function
controller is optimized against the summed bank cost and deployed on the
plant after bilinear resampling to the plant step. An ERA model of the
plant supplies the initial proportional gain, and closed-loop impulse
responses give the H2 report.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from ..control.bilinear import bilinear_resample
from ..control.controllers import DiscreteTf
from ..control.costs import CostSpec, cost_total
from ..errors import ConfigurationError
from ..metrics import bode_table, h2_norm, transfer_from_impulse
from ..plants.base import PlantState, plant_step
from ..plants.convective import ConvectivePlant, ConvectivePlantConfig
from ..plants.episode import EpisodeSchedule, impulse_response, run_episode
from ..reduction import project, two_stage_pod
from ..romcore.linear import discretize_rk4, tf_rollout_cost
from ..sysid import era_fit, estimate_derivatives, opinf_fit
from .policy import optimize_policy_on_rom

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BankSetup:
    """Settings of the frequency-bank workflow (desk-scale defaults)."""

    plant: dict = field(default_factory=dict)
    frequencies: tuple = (0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0, 1.05, 1.1)
    noise_amplitude: float = 1.0
    duration: float = 300.0
    t_on: float = 150.0
    transient: float = 80.0
    dither: float = 0.05
    dither_frequencies: tuple = (0.05, 0.11, 0.23, 0.37, 0.53)
    seed: int = 7
    region: tuple = (60.0, 200.0)
    r_a: int = 2
    r_c: int = 8
    ridge: float = 1e-8
    rom_dt: float = 0.2
    horizon: float = 100.0
    n_cycles: int = 4
    j2_threshold: float = 1e-5
    alpha: float = 1e3
    controller_order: int = 2
    policy_steps: int = 200
    policy_lr: float = 0.01
    initial_gain: float = None
    era_stride: int = 2
    era_horizon: int = 1000
    era_order: int = 24
    gain_grid: tuple = (-2.0, 3.0, 101)
    gain_margin: float = 0.45
    low_signal: float = 1e-2
    probe_gains: tuple = (0.4, 0.8, 1.1, 1.7, 2.2)
    classify_threshold: float = 0.1
    impulse_steps: int = 3000

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        if f.size == 0 or np.any(np.diff(f) <= 0):
            raise ConfigurationError("bank frequencies must be strictly increasing")
        if self.t_on <= self.transient or self.duration <= self.t_on:
            raise ConfigurationError("need transient < t_on < duration")

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = [float(x) for x in v]
        return d


@dataclass
class BankEntry:
    frequency: float
    rom: object
    basis: object
    readout: tuple
    perf: tuple
    q0: np.ndarray
    amplitude: float
    low_signal: bool = False


@dataclass
class FrequencyBank:
    frequencies: np.ndarray
    entries: list

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        if len(self.entries) != self.frequencies.size:
            raise ConfigurationError("one ROM per frequency is required")
        if np.any(np.diff(self.frequencies) <= 0):
            raise ConfigurationError("bank frequencies must be strictly increasing")


def _region_mask(plant, region):
    lo, hi = region
    m = (plant.x >= lo) & (plant.x <= hi)
    if not m.any():
        raise ConfigurationError("snapshot region contains no grid nodes")
    return np.concatenate([m, m])


def build_entry(plant, controller, frequency, setup):
    """Forced episode at one frequency, two-stage POD and OpInf fit."""
    sched = EpisodeSchedule(duration=setup.duration, t_on=setup.t_on, noise="sine",
                            noise_amplitude=setup.noise_amplitude, noise_frequency=frequency,
                            seed=setup.seed, dither=setup.dither,
                            dither_frequencies=tuple(setup.dither_frequencies))
    rec = run_episode(plant, controller, sched)
    if rec.diverged:
        raise ConfigurationError(f"bank episode at w={frequency} diverged; lower the gain")
    mask = _region_mask(plant, setup.region)
    X = rec.snapshots[:, mask]
    t = rec.snapshot_t
    keep = t >= setup.transient - 1e-9
    unc = keep & (t < setup.t_on - 1e-9)
    ctrl = t >= setup.t_on - 1e-9
    # fluctuations about the zero base state of the linear plant
    basis = two_stage_pod(X[unc], X[ctrl], setup.r_a, setup.r_c, mean=np.zeros(X.shape[1]))
    q = project(X, basis)
    dq = estimate_derivatives(q[keep], t=t[keep])
    rom = opinf_fit(q[keep].T, dq.T, rec.actions[keep], setup.ridge,
                    (f"w={frequency:.6g}",))
    Cm = plant.C[:, mask]
    readout = (Cm[0] @ basis.modes, float(Cm[0] @ basis.mean))
    perf = (Cm[1] @ basis.modes, float(Cm[1] @ basis.mean))
    k_on = int(np.argmin(np.abs(t - setup.t_on)))
    z = rec.sensor("z_p")[unc]
    amp = float(np.sqrt(np.mean(z * z)))
    low = amp < setup.low_signal * setup.noise_amplitude
    if low:
        log.warning("bank entry w=%.4g: low downstream signal (rms %.3g)", frequency, amp)
    return BankEntry(float(frequency), rom, basis, readout, perf, q[k_on], amp, low)


def build_frequency_bank(plant, controller, frequencies, setup, workers=1):
    """One ROM per frequency; entries are independent and built concurrently."""
    if not plant.linear:
        raise ConfigurationError("the frequency bank needs a linear plant")
    freqs = [float(f) for f in frequencies]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            entries = list(ex.map(lambda f: build_entry(plant, controller, f, setup), freqs))
    else:
        entries = [build_entry(plant, controller, f, setup) for f in freqs]
    return FrequencyBank(freqs, entries)


def bank_spec(setup, frequency=None):
    period = 2 * np.pi / (frequency if frequency else 1.0)
    return CostSpec(t1=setup.horizon, period=period, n_cycles=setup.n_cycles,
                    j2_threshold=setup.j2_threshold, alpha=setup.alpha)


def bank_rollouts(bank, b, c, setup, need_grad=True):
    """Per-entry closed-loop costs of a transfer function at the ROM step."""
    h = setup.rom_dt
    n = int(round(setup.horizon / h))
    t = h * np.arange(n + 1)
    out = []
    for e in bank.entries:
        Phi, Gam = discretize_rk4(e.rom.A, e.rom.B, h)
        R, r0 = e.readout
        P, p0 = e.perf
        out.append(tf_rollout_cost(Phi, Gam, R, r0, np.asarray(b, float), np.asarray(c, float),
                                   e.q0, t, 0, P, p0, bank_spec(setup, e.frequency),
                                   need_grad=need_grad))
    return out


def bank_objective(bank, nb, setup):
    """``theta -> (cost_total, grad)`` over all bank entries."""
    spec = bank_spec(setup)

    def objective(theta):
        res = bank_rollouts(bank, theta[:nb], theta[nb:], setup)
        j1 = [r["j1"] for r in res]
        j2 = [r["j2"] for r in res]
        val, d1, d2 = cost_total(j1, j2, spec, return_grad=True)
        grad = np.zeros_like(theta)
        for r, a1, a2 in zip(res, d1, d2):
            grad += a1 * r["g_j1"]["theta"] + a2 * r["g_j2"]["theta"]
        return val, grad

    return objective


def rom_unstable(bank, gain, setup):
    """ROM verdict: any bank entry diverges or its ``J2`` exceeds the classification threshold."""
    res = bank_rollouts(bank, [gain], [], setup, need_grad=False)
    return any(r["diverged"] or r["j2"] > setup.classify_threshold for r in res)


def closed_loop_impulse(plant, controller, n_steps, output="z_p"):
    """Plant response at ``output`` to a unit noise pulse over the first step."""
    i = plant.sensor_labels.index(output)
    state = PlantState(np.zeros(plant.n_state), 0.0)
    regs = controller.reset() if controller is not None else None
    out = np.empty(n_steps)
    for k in range(n_steps):
        y = plant.observe(state.q)
        out[k] = y[i]
        a = 0.0
        if controller is not None:
            a, regs = controller.act(plant.feedback(y), regs)
        state = plant_step(state, a, 1.0 if k == 0 else 0.0, plant)
    return out


def plant_unstable(plant, gain, n_steps):
    """Direct-simulation verdict: the late impulse response outgrows the early one."""
    z = closed_loop_impulse(plant, DiscreteTf([gain], dt=plant.dt), n_steps, output="y_fb")
    if not np.all(np.isfinite(z)):
        return True
    half = np.abs(z[: n_steps // 2]).max()
    tail = np.abs(z[-max(n_steps // 10, 1):]).max()
    return bool(tail > half)


def era_model(plant, setup):
    """ERA realization of ``(noise, actuator) -> (y_fb, z_p)`` at ``era_stride * dt``."""
    hw = impulse_response(plant, "noise", setup.era_horizon, setup.era_stride)
    ha = impulse_response(plant, "actuator", setup.era_horizon, setup.era_stride)
    Y = np.stack([np.stack([hw["y_fb"], ha["y_fb"]], axis=-1),
                  np.stack([hw["z_p"], ha["z_p"]], axis=-1)], axis=1)
    return era_fit(Y, setup.era_order, dt=setup.era_stride * plant.dt)


def era_gain_scan(model, gains):
    """Closed-loop spectral radius and ``noise -> z_p`` H2 norm of ``a = K y_fb``."""
    rows = []
    for K in gains:
        Acl = model.A + K * np.outer(model.B[:, 1], model.C[0])
        rad = float(np.abs(np.linalg.eigvals(Acl)).max())
        if rad < 1.0:
            bw = model.B[:, :1]
            Wc = solve_discrete_lyapunov(Acl, bw @ bw.T)
            h2 = float(np.sqrt(max(model.C[1] @ Wc @ model.C[1], 0.0)))
        else:
            h2 = float("inf")
        rows.append((float(K), rad, h2))
    return rows


def initial_gain_from_era(model, setup):
    """Lowest-H2 gain within ``gain_margin`` of the ERA stability boundary on each side."""
    lo, hi, n = setup.gain_grid
    gains = np.linspace(lo, hi, int(n))
    rows = era_gain_scan(model, gains)
    unstable = [K for K, rad, _ in rows if rad >= 1.0]
    upper = min([K for K in unstable if K > 0], default=hi)
    lower = max([K for K in unstable if K < 0], default=lo)
    ok = [(h2, K) for K, rad, h2 in rows
          if setup.gain_margin * lower <= K <= setup.gain_margin * upper and np.isfinite(h2)]
    if not ok:
        raise ConfigurationError("no stabilizing gain found on the ERA model")
    return min(ok)[1], rows, (lower, upper)


def run_bank_workflow(setup=None, workers=1, backend=None):
    """Single-episode identification and controller design; returns a report dict."""
    setup = setup or BankSetup()
    plant = ConvectivePlant(ConvectivePlantConfig.from_dict(setup.plant), backend=backend)
    model = era_model(plant, setup)
    K0, scan, bounds = initial_gain_from_era(model, setup)
    if setup.initial_gain is not None:
        K0 = float(setup.initial_gain)
    init = DiscreteTf([K0], dt=plant.dt)
    bank = build_frequency_bank(plant, init, setup.frequencies, setup, workers)
    order = setup.controller_order
    start = bilinear_resample(init, setup.rom_dt)
    b0 = np.zeros(order + 1)
    b0[:start.b.size] = start.b
    a0 = np.zeros(order)
    a0[:start.a.size] = start.a
    start = DiscreteTf(b0, a0, setup.rom_dt)
    objective = bank_objective(bank, order + 1, setup)
    events = []
    tf_rom, hist = optimize_policy_on_rom(objective, start, setup.policy_steps,
                                          setup.policy_lr, events=events)
    deployed = bilinear_resample(tf_rom, plant.dt)
    n = setup.impulse_steps
    z0 = closed_loop_impulse(plant, None, n)
    z_init = closed_loop_impulse(plant, init, n)
    z_opt = closed_loop_impulse(plant, deployed, n)
    tf0 = transfer_from_impulse(z0, plant.dt)
    tfi = transfer_from_impulse(z_init, plant.dt)
    tfo = transfer_from_impulse(z_opt, plant.dt)
    h0, hi_, ho = h2_norm(tf0), h2_norm(tfi), h2_norm(tfo)
    stability = []
    for K in setup.probe_gains:
        stability.append({"gain": float(K), "rom_unstable": rom_unstable(bank, K, setup),
                          "plant_unstable": plant_unstable(plant, K, n)})
    return {
        "plant": plant, "bank": bank, "era": model, "era_scan": scan, "era_bounds": bounds,
        "initial_gain": float(K0), "controller_rom": tf_rom, "controller": deployed,
        "history": hist, "events": events,
        "h2_open": h0, "h2_initial": hi_, "h2_controlled": ho,
        "h2_ratio": ho / h0, "h2_ratio_initial": hi_ / h0,
        "bode": {"open": bode_table(tf0), "initial": bode_table(tfi),
                 "controlled": bode_table(tfo)},
        "stability": stability,
    }
