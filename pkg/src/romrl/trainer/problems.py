"""Problem definitions plugged into :func:`romrl.trainer.loop.adaptive_rl_loop`.

A problem owns the plant, the reduced coordinates and the costs:

* :class:`ScalarLqrProblem` - ``dq/dt = q + a`` with a quadratic cost and a
  proportional policy; the analytic Riccati gain is the oracle.
* :class:`WakeProblem` - the wake oscillator with a neural policy, in
  sparse-sensor (SS-ROM) or POD (POD-ROM) coordinates.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from ..control.controllers import NeuralPolicy, Proportional
from ..control.costs import CostSpec, quadratic_cost, wake_cost
from ..control.stabilize import input_ranges, sample_grid
from ..errors import ConfigurationError
from ..metrics import drag_stats
from ..plants.episode import EpisodeSchedule, run_episode
from ..plants.linear import LinearPlant
from ..plants.wake import WakePlant, WakePlantConfig
from ..reduction import SparseMeasurement, project, sparse_measure, two_stage_pod
from ..romcore.rom import NodeRom, ResidualNet
from ..romcore.simulate import backward, simulate_closed_loop
from ..romcore.train import TrainingSeries, evaluate_loss, train_residual
from ..sysid import estimate_derivatives, opinf_fit
from .datasets import Dataset, danger_classify

log = logging.getLogger(__name__)


def fit_linear(datasets, ridge, provenance=()):
    """OpInf on the concatenated reduced trajectories of ``datasets``."""
    Q, dQ, U = [], [], []
    for d in datasets:
        s = d.series
        Q.append(s.q.T)
        dQ.append(estimate_derivatives(s.q, t=s.t).T)
        U.append(s.a)
    return opinf_fit(np.hstack(Q), np.hstack(dQ), np.concatenate(U), ridge, provenance)


def riccati_gain(a=1.0, b=1.0, rho=1.0):
    """Optimal gain ``K`` (``u = K q``) of ``dq/dt = a q + b u`` with cost ``int q^2 + rho u^2``."""
    p = rho * (a + np.sqrt(a * a + b * b / rho)) / (b * b)
    return -b * p / rho


# ---------------------------------------------------------------------------
# scalar LQR oracle
# ---------------------------------------------------------------------------

@dataclass
class ScalarLqrProblem:
    """Unstable scalar plant with a proportional policy and quadratic cost."""

    rho: float = 1.0
    dt: float = 0.01
    rom_dt: float = 0.02
    duration: float = 5.0
    horizon: float = 5.0
    dither: float = 0.2
    dither_frequencies: tuple = (1.3, 2.9, 4.7)
    ridge: float = 1e-8

    def __post_init__(self):
        self.plant = LinearPlant(A=[[1.0]], b_a=[1.0], dt=self.dt, q0=[1.0])
        self.cost_spec = CostSpec(t0=0.0, t_end=self.horizon, action_weight=self.rho)

    def _dataset(self, controller, index, seed, reference=False):
        # the training data carry a smooth exploration signal; the plant cost
        # comes from a clean deployment of the same controller
        sched = EpisodeSchedule(duration=self.duration, t_on=0.0, seed=seed, dither=self.dither,
                                dither_frequencies=self.dither_frequencies)
        rec = run_episode(self.plant, controller, sched)
        q = rec.sensors[:, :1]
        cost = float("inf") if rec.diverged else self.plant_cost(controller)
        series = TrainingSeries(rec.t, q, rec.actions, controller, (np.ones((1, 1)),
                                np.zeros(1)), 0.0, f"d{index}")
        return Dataset(index, rec, series, {"cost": cost, "diverged": rec.diverged}, cost,
                       False if reference else bool(rec.diverged), controller, q,
                       reference, {"seed": seed})

    def plant_cost(self, controller):
        """Quadratic cost of a clean (dither-free) deployment from ``q0 = 1``."""
        clean = run_episode(self.plant, controller, EpisodeSchedule(duration=self.duration))
        if clean.diverged:
            return float("inf")
        return quadratic_cost(clean.t, clean.sensors[:, 0], clean.actions[:-1],
                              (0.0, self.duration), self.rho)

    def initial_datasets(self, controller, seed=0):
        return [self._dataset(controller, 0, seed, reference=True)]

    def initial_rom(self, ledger):
        return NodeRom(fit_linear(ledger, self.ridge, ("d0",)), self.rom_dt)

    def initial_policy(self, controller, seed=0):
        return controller

    def train_rom(self, rom, datasets, mode, epochs, lr, segment_steps, events):
        return rom, []

    def rom_loss(self, rom, datasets, mode):
        return evaluate_loss(rom, [d.series for d in datasets], "open")

    def policy_objective(self, rom, datasets, start):
        n = int(round(self.horizon / rom.dt))
        t = rom.dt * np.arange(n + 1)
        readout = (np.ones((1, 1)), np.zeros(1))

        def objective(theta):
            traj, tape = simulate_closed_loop(rom, np.ones((1, 1)), start, readout, n,
                                              theta=theta)
            val, gq, ga = quadratic_cost(t, traj.states[:, 0, 0], traj.actions[:, 0],
                                         (0.0, self.horizon), self.rho, return_grad=True)
            seed = np.zeros_like(traj.states)
            seed[:, 0, 0] = gq
            return val, backward(tape, seed, ga[:, None])["theta"]

        return objective

    def collect(self, policy, index, seed):
        return self._dataset(policy, index, seed)

    def repulsion_grid(self, stable):
        return sample_grid(input_ranges([d.inputs for d in stable]), n=32)

    def optimal_gain(self):
        return riccati_gain(1.0, 1.0, self.rho)


# ---------------------------------------------------------------------------
# wake oscillator
# ---------------------------------------------------------------------------

@dataclass
class WakeSetup:
    """Wake problem settings (desk-scale defaults)."""

    plant: dict = field(default_factory=dict)
    basis: str = "sparse"
    r_a: int = 4
    r_c: int = 3
    duration: float = 60.0
    t_on: float = 10.0
    drag_window: tuple = (30.0, 60.0)
    data_stride: int = 2
    rom_dt: float = 0.1
    ridge: float = 1e-8
    residual_hidden: tuple = (32, 32, 32)
    residual_k: float = 0.05
    policy_hidden: tuple = (32, 32)
    policy_scale: float = 1.0
    rollout_starts: tuple = (10.0, 14.0, 18.0, 22.0)
    rollout_horizon: float = 30.0
    cost_window: tuple = (10.0, 30.0)
    gamma_crit: float = 0.05
    tau: float = 1e-3
    lambda_rep: float = 1.0

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


class WakeProblem:
    """Wake drag reduction with a neural policy on the antisymmetric feedback signals."""

    def __init__(self, setup=None, backend=None):
        self.setup = s = setup or WakeSetup()
        if s.basis not in ("sparse", "pod"):
            raise ConfigurationError(f"unknown basis {s.basis!r}")
        self.plant = WakePlant(WakePlantConfig.from_dict(s.plant), backend=backend)
        self.cost_spec = CostSpec(t0=s.cost_window[0], t_end=s.cost_window[1],
                                  gamma_crit=s.gamma_crit, tau=s.tau, lambda_rep=s.lambda_rep)
        self.schedule = EpisodeSchedule(duration=s.duration, t_on=s.t_on, stride=s.data_stride)
        self.basis = None
        self.baseline = None

    # -- reduced coordinates ------------------------------------------------
    def _setup_basis(self, unc, ctrl):
        p = self.plant
        ns = len(p.sensor_points)
        on = unc.t >= self.setup.t_on
        mean_s = unc.sensors[on, :ns].mean(axis=0)
        fb = p.feedback_index
        if self.setup.basis == "sparse":
            self.basis = SparseMeasurement.selection(np.arange(ns), ns, p.sensor_labels[:ns],
                                                     mean_s)
            R = np.zeros((2, ns))
            P = np.zeros((2, ns))
            P[0, p.probe_index[0]] = P[1, p.probe_index[1]] = 1.0
            offset = mean_s
        else:
            son = unc.snapshot_t >= self.setup.t_on
            self.basis = two_stage_pod(unc.snapshots[son], ctrl.snapshots, self.setup.r_a,
                                       self.setup.r_c)
            V = self.basis.modes[p.sensor_index]
            R = np.zeros((2, V.shape[1]))
            P = V[p.probe_index].copy()
            offset = self.basis.mean[p.sensor_index]
            rows = V
        if self.setup.basis == "sparse":
            rows = np.eye(ns)
        R[0] = rows[fb[0]] - rows[fb[1]]
        R[1] = rows[fb[2]] - rows[fb[3]]
        self.readout = (R, np.array([offset[fb[0]] - offset[fb[1]],
                                     offset[fb[2]] - offset[fb[3]]]))
        self.perf = (P, np.zeros(2))

    def reduce(self, record):
        """Reduced trajectory ``(t, q_r, a)`` on the data grid."""
        s = self.setup.data_stride
        if self.setup.basis == "sparse":
            ns = self.basis.n
            return record.t[::s], sparse_measure(record.sensors[::s, :ns], self.basis), \
                record.actions[::s]
        n = len(record.snapshot_t)
        return record.snapshot_t, project(record.snapshots, self.basis), record.actions[::s][:n]

    def _dataset(self, record, controller, index, seed, reference=False):
        t, q, a = self.reduce(record)
        series = TrainingSeries(t, q, a, controller, self.readout, self.setup.t_on, f"d{index}")
        st = drag_stats(record, self.setup.drag_window, self.baseline)
        red = st["reduction"]
        cost = float("inf") if st["diverged"] else st["mean"] / self.baseline
        danger = False if reference else danger_classify(red, record.diverged,
                                                         self.setup.gamma_crit)
        inputs = np.array([self.plant.feedback(y) for y in record.sensors[record.k_on:]])
        summary = {"mean_drag": st["mean"], "reduction": red, "diverged": record.diverged,
                   "normalized_drag": cost}
        return Dataset(index, record, series, summary, cost, danger, controller, inputs,
                       reference, {"seed": seed})

    # -- loop interface ----------------------------------------------------
    def initial_datasets(self, controller, seed=0):
        unc = run_episode(self.plant, None, self.schedule)
        ctrl = run_episode(self.plant, controller, self.schedule)
        if unc.diverged or ctrl.diverged:
            raise ConfigurationError("initial episodes diverged")
        lo, hi = self.setup.drag_window
        self.baseline = drag_stats(unc, (lo, hi))["mean"]
        self._setup_basis(unc, ctrl)
        ys = np.array([self.plant.feedback(y) for y in ctrl.sensors])
        self.input_scale = 1.0 / np.maximum(ys.std(axis=0), 1e-12)
        return [self._dataset(unc, None, 0, seed, True),
                self._dataset(ctrl, controller, 1, seed, True)]

    def initial_rom(self, ledger):
        s = self.setup
        lin = fit_linear(ledger, s.ridge, tuple(f"d{d.index}" for d in ledger))
        res = ResidualNet(lin.r, s.residual_hidden, s.residual_k, seed=0)
        return NodeRom(lin, s.rom_dt, res)

    def initial_policy(self, controller, seed=0):
        s = self.setup
        return NeuralPolicy(n_inputs=2, hidden=s.policy_hidden, scale=s.policy_scale,
                            input_scale=self.input_scale, seed=seed)

    def _series(self, datasets, mode):
        out = []
        for d in datasets:
            ser = d.series
            if ser.controller is None:
                # uncontrolled data is the zero policy in closed loop
                ser = TrainingSeries(ser.t, ser.q, ser.a, Proportional([0.0, 0.0]),
                                     self.readout, ser.t_on, ser.name)
            out.append(ser)
        return out

    def train_rom(self, rom, datasets, mode, epochs, lr, segment_steps, events):
        if epochs == 0:
            return rom, []
        rom, hist, _ = train_residual(rom, self._series(datasets, mode), mode, epochs, lr,
                                      segment_steps, events=events)
        return rom, hist

    def rom_loss(self, rom, datasets, mode):
        return evaluate_loss(rom, self._series(datasets, mode), mode)

    def start_states(self, ledger_or_unc):
        unc = ledger_or_unc
        idx = [int(np.argmin(np.abs(unc.series.t - t0))) for t0 in self.setup.rollout_starts]
        return unc.series.q[idx]

    def policy_objective(self, rom, datasets, start):
        s = self.setup
        unc = next(d for d in datasets if d.index == 0)
        q0 = self.start_states(unc)
        n = int(round(s.rollout_horizon / rom.dt))
        t = rom.dt * np.arange(n + 1)
        P, p0 = self.perf
        nb = q0.shape[0]

        def objective(theta):
            traj, tape = simulate_closed_loop(rom, q0, start, self.readout, n, theta=theta)
            up = traj.states @ P.T + p0
            seed = np.zeros_like(traj.states)
            val = 0.0
            for b in range(nb):
                v, g1, g2 = wake_cost(t, up[:, b, 0], up[:, b, 1], s.cost_window,
                                      return_grad=True)
                val += v / nb
                seed[:, b, :] = (np.outer(g1, P[0]) + np.outer(g2, P[1])) / nb
            return val, backward(tape, seed)["theta"]

        return objective

    def collect(self, policy, index, seed):
        rec = run_episode(self.plant, policy, self.schedule)
        return self._dataset(rec, policy, index, seed)

    def evaluate(self, controller):
        """Deploy ``controller`` next to the uncontrolled baseline.

        Returns ``(baseline record, controlled record, drag stats, cost)`` with
        the cost normalized exactly as for the training ledger.
        """
        lo, hi = self.setup.drag_window
        unc = run_episode(self.plant, None, self.schedule)
        base = drag_stats(unc, (lo, hi))["mean"]
        rec = run_episode(self.plant, controller, self.schedule)
        st = drag_stats(rec, self.setup.drag_window, base)
        cost = float("inf") if st["diverged"] else st["mean"] / base
        return unc, rec, st, cost

    def repulsion_grid(self, stable):
        return sample_grid(input_ranges([d.inputs for d in stable if d.inputs is not None
                                         and len(d.inputs)]), n=32)
