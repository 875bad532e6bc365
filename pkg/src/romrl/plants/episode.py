"""Episode execution, records, persistence and impulse responses."""

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .. import io
from ..errors import (ConfigurationError, DataIntegrityError, DivergenceError,
                      UnsupportedOperationError)
from .base import PlantState, plant_step

NOISE_GENERATOR = "numpy.PCG64"


@dataclass(frozen=True)
class EpisodeSchedule:
    """Timing and disturbance of one deployment.

    Parameters
    ----------
    duration : float
    t_on : float
        Control-on time; the action is identically zero before it.
    noise : {"none", "white", "sine", "sines"}
        Disturbance type on the noise channel (linear plants only).
    noise_amplitude : float
    noise_frequency : float or tuple
        Angular frequency (or frequencies for ``"sines"``).
    seed : int
        Seed of the named PRNG used for white noise.
    stride : int
        Snapshot subsampling stride (plant steps); sensors are always stored
        at the full rate.
    dither : float
        Standard deviation of an optional white exploration signal added to
        the action after ``t_on`` (drawn from a second stream of the same seed).
    dither_frequencies : tuple of float
        When given, the exploration signal is instead a smooth sum of sines at
        these angular frequencies with seeded random phases, scaled so its
        RMS equals ``dither``.
    """

    duration: float
    t_on: float = 0.0
    noise: str = "none"
    noise_amplitude: float = 1.0
    noise_frequency: object = 0.0
    seed: int = 0
    stride: int = 1
    dither: float = 0.0
    dither_frequencies: tuple = ()

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigurationError("episode duration must be positive")
        if self.stride < 1:
            raise ConfigurationError("snapshot stride must be at least 1")
        if self.noise not in ("none", "white", "sine", "sines"):
            raise ConfigurationError(f"unknown noise type {self.noise!r}")

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        for k in ("noise_frequency", "dither_frequencies"):
            if isinstance(d[k], tuple):
                d[k] = list(d[k])
        return d


@dataclass
class EpisodeRecord:
    """Synchronized outputs of one episode.

    Attributes
    ----------
    t, actions, noise : (n_t,) arrays at the plant rate (last action unused).
    sensors : (n_t, n_sensors) array, columns in ``sensor_labels`` order.
    snapshot_t : (n_snap,) array
    snapshots : (n_snap, n_full) array
    diverged : bool
        Truncated at ``blowup_time`` by a controller-induced divergence.
    """

    plant: str
    t: np.ndarray
    actions: np.ndarray
    noise: np.ndarray
    sensors: np.ndarray
    sensor_labels: tuple
    snapshot_t: np.ndarray
    snapshots: np.ndarray
    schedule: EpisodeSchedule
    states: np.ndarray = None
    diverged: bool = False
    blowup_time: float = None
    config_hash: str = ""
    summary: dict = field(default_factory=dict)
    danger: bool = False
    final: PlantState = None

    @property
    def k_on(self):
        return int(np.searchsorted(self.t, self.schedule.t_on - 1e-9))

    def sensor(self, label):
        return self.sensors[:, self.sensor_labels.index(label)]

    @property
    def final_state(self):
        return None if self.states is None else self.states[-1]


def _noise_series(schedule, t):
    kind = schedule.noise
    if kind == "none":
        return np.zeros_like(t)
    if kind == "white":
        rng = np.random.Generator(np.random.PCG64(schedule.seed))
        return schedule.noise_amplitude * rng.standard_normal(t.size)
    freqs = np.atleast_1d(np.asarray(schedule.noise_frequency, dtype=float))
    if kind == "sine":
        freqs = freqs[:1]
    return schedule.noise_amplitude * np.sin(np.outer(t, freqs)).sum(axis=1)


def _dither_series(schedule, t):
    if not schedule.dither:
        return np.zeros_like(t)
    rng = np.random.Generator(np.random.PCG64([schedule.seed, 1]))
    if not schedule.dither_frequencies:
        return schedule.dither * rng.standard_normal(t.size)
    w = np.asarray(schedule.dither_frequencies, dtype=float)
    phase = rng.uniform(0.0, 2.0 * np.pi, w.size)
    return schedule.dither * np.sqrt(2.0 / w.size) * np.sin(np.outer(t, w) + phase).sum(axis=1)


def control_on_index(t_on, dt):
    return max(0, int(math.ceil(t_on / dt - 1e-9)))


def run_episode(plant, controller, schedule, state=None, config_hash="", keep_states=False):
    """Deploy ``controller`` on ``plant`` following ``schedule``.

    The controller sees ``plant.feedback(observe(q_k))`` and its action is
    held over the step ``[t_k, t_(k+1))``. Stateful controllers must run at
    the plant step size.

    Returns
    -------
    EpisodeRecord
        Truncated and flagged ``diverged`` if the plant blows up.
    """
    dt = plant.dt
    n_steps = int(round(schedule.duration / dt))
    if n_steps < 1:
        raise ConfigurationError("episode shorter than one plant step")
    if controller is not None:
        n_fb = len(plant.feedback_labels)
        if controller.n_inputs != n_fb:
            raise ConfigurationError(
                f"controller takes {controller.n_inputs} inputs, plant provides {n_fb}")
        if getattr(controller, "stateful", False) and abs(controller.dt - dt) > 1e-12 * dt:
            raise ConfigurationError(
                "discrete controller step differs from the plant step; resample it first")
    state = plant.initial_state() if state is None else state
    t = state.t + dt * np.arange(n_steps + 1)
    noise = _noise_series(schedule, t)
    dither = _dither_series(schedule, t)
    k_on = control_on_index(schedule.t_on - state.t, dt)
    regs = controller.reset() if controller is not None else None
    acts = np.zeros(n_steps + 1)
    sens = []
    snaps, snap_t, states = [], [], []
    diverged, blow_t = False, None
    for k in range(n_steps + 1):
        q = state.q
        y = plant.observe(q)
        if not np.all(np.isfinite(y)):
            diverged, blow_t = True, state.t - 1
            break
        sens.append(y)
        if keep_states:
            states.append(q.copy())
        a = 0.0
        if k >= k_on and k < n_steps:
            if controller is not None:
                a, regs = controller.act(plant.feedback(y), regs)
            a += dither[k]
        acts[k] = a
        if k % schedule.stride == 0:
            snaps.append(_snapshot(plant, q, a))
            snap_t.append(state.t)
        if k == n_steps:
            break
        try:
            state = plant_step(state, a, noise[k], plant)
        except (DivergenceError, ValueError):
            diverged, blow_t = True, state.t + dt
            break
        if np.max(np.abs(state.q)) > 1e12:
            diverged, blow_t = True, state.t
            break
    n_keep = len(sens)
    rec = EpisodeRecord(
        plant=plant.name, t=t[:n_keep], actions=acts[:n_keep], noise=noise[:n_keep],
        sensors=np.array(sens).reshape(n_keep, -1), sensor_labels=tuple(plant.sensor_labels),
        snapshot_t=np.array(snap_t), snapshots=np.array(snaps), schedule=schedule,
        states=np.array(states) if keep_states else None, diverged=diverged,
        blowup_time=blow_t, config_hash=config_hash)
    if not diverged:
        rec.final = state
    return rec


def _snapshot(plant, q, a):
    try:
        return plant.snapshot(q, a)
    except TypeError:
        return plant.snapshot(q)


def impulse_response(plant, channel="actuator", horizon=100, stride=1, amplitude=1.0):
    """Sampled response to a unit pulse held over the first ``stride`` steps.

    With ``stride == 1`` this is the discrete impulse response at the plant
    rate. With ``stride > 1`` it is the exact Markov sequence of the plant
    sampled with zero-order hold at ``stride * dt``. ``h[0]`` is the direct
    feedthrough (zero for these plants).

    Returns
    -------
    dict
        Sensor label -> array of length ``horizon``.
    """
    if not plant.linear:
        raise UnsupportedOperationError("impulse responses are defined for linear plants only")
    if horizon < 1:
        raise ConfigurationError("horizon must be at least 1")
    if channel not in ("noise", "actuator"):
        raise ConfigurationError(f"unknown channel {channel!r}")
    state = PlantState(np.zeros(plant.n_state), 0.0)
    out = np.zeros((horizon, len(plant.sensor_labels)))
    for k in range(horizon):
        out[k] = plant.observe(state.q)
        if k == horizon - 1:
            break
        for j in range(stride):
            u = amplitude if (k == 0) else 0.0
            a, w = (u, 0.0) if channel == "actuator" else (0.0, u)
            state = plant_step(state, a, w, plant)
    return {lab: out[:, i].copy() for i, lab in enumerate(plant.sensor_labels)}


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_episode(record, directory, extra_meta=None):
    """Write ``metadata.json``, ``sensors.csv`` and ``snapshots.bin``."""
    io.ensure_dir(directory)
    snap_path = os.path.join(directory, "snapshots.bin")
    csv_path = os.path.join(directory, "sensors.csv")
    io.write_snapshots(snap_path, record.snapshots.reshape(len(record.snapshot_t), -1))
    io.write_table(csv_path, ["t", "a", *record.sensor_labels],
                   [record.t, record.actions, *record.sensors.T])
    meta = {
        "kind": "episode",
        "plant": record.plant,
        "config_hash": record.config_hash,
        "seed": record.schedule.seed,
        "noise_generator": NOISE_GENERATOR,
        "stride": record.schedule.stride,
        "control_on_time": record.schedule.t_on,
        "schedule": record.schedule.to_dict(),
        "snapshot_times": record.snapshot_t.tolist(),
        "diverged": record.diverged,
        "blowup_time": record.blowup_time,
        "summary": record.summary,
        "files": {"sensors.csv": io.file_sha256(csv_path),
                  "snapshots.bin": io.file_sha256(snap_path)},
    }
    if extra_meta:
        meta.update(extra_meta)
    io.write_metadata(os.path.join(directory, "metadata.json"), meta)
    return meta


def load_episode(directory, verify=True):
    """Read an episode directory; refuses files whose hash mismatches."""
    meta = io.read_metadata(os.path.join(directory, "metadata.json"))
    for name, digest in meta.get("files", {}).items():
        path = os.path.join(directory, name)
        if verify and io.file_sha256(path) != digest:
            raise DataIntegrityError(f"{path}: content hash does not match metadata")
    header, data = io.read_table(os.path.join(directory, "sensors.csv"))
    snaps = io.read_snapshots(os.path.join(directory, "snapshots.bin"))
    sched = dict(meta["schedule"])
    for k in ("noise_frequency", "dither_frequencies"):
        if isinstance(sched.get(k), list):
            sched[k] = tuple(sched[k])
    rec = EpisodeRecord(
        plant=meta["plant"], t=data[:, 0], actions=data[:, 1], noise=None,
        sensors=data[:, 2:], sensor_labels=tuple(header[2:]),
        snapshot_t=np.asarray(meta["snapshot_times"], dtype=float), snapshots=snaps,
        schedule=EpisodeSchedule(**sched), diverged=meta["diverged"],
        blowup_time=meta["blowup_time"], config_hash=meta["config_hash"],
        summary=meta.get("summary", {}))
    return rec, meta
