"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import dataclasses
import filecmp
import time
from pathlib import Path

import numpy as np
from scipy.linalg import expm

import romrl
from conftest import check
from romrl import io
from romrl.cli import main
from romrl.control.bilinear import bilinear_resample
from romrl.control.controllers import DiscreteTf, NeuralPolicy, Proportional
from romrl.control.costs import CostSpec, cost_j1, cost_total
from romrl.control.sensors import PlacementBenchmark, gaussian_sensor_read, run_placement_benchmark
from romrl.control.stabilize import policy_distance, repulsive_penalty, sample_grid
from romrl.config import load_config
from romrl.metrics import h2_norm, transfer_from_impulse
from romrl.reduction import captured_energy, pod, two_stage_pod
from romrl.romcore.gradcheck import gradient_suite
from romrl.romcore.rom import NodeRom, ResidualNet, rk4_step
from romrl.romcore.train import TrainingSeries, evaluate_loss, train_residual
from romrl.sysid import DiscreteLti, LinearRom, era_fit, estimate_derivatives, opinf_fit
from romrl.trainer import LoopHooks, adaptive_rl_loop
from romrl.trainer.bank import run_bank_workflow
from romrl.trainer.problems import ScalarLqrProblem, WakeProblem, WakeSetup

CONFIGS = Path(romrl.__file__).parent / "configs"

# final drag-proxy reduction of the shipped wake_ss config (seed 0), recorded
# at the first verified run; the criterion allows 10% relative slack
WAKE_PINNED_REDUCTION = 0.08482709044595427


def _stable_matrix(rng, r, margin=0.5):
    M = rng.normal(size=(r, r))
    return M - (np.max(np.linalg.eigvals(M).real) + margin) * np.eye(r)


# 1 -----------------------------------------------------------------------------

def _sampled_trajectory(A, B, dt, T=12.0, w=1.3):
    """Exact samples of ``dq/dt = A q + B sin(w t)`` via an augmented exponential."""
    r = A.shape[0]
    G = np.zeros((r + 2, r + 2))
    G[:r, :r], G[:r, r] = A, B
    G[r, r + 1], G[r + 1, r] = w, -w
    E = expm(G * dt)
    z = np.r_[np.ones(r), 0.0, 1.0]
    Z = [z]
    for _ in range(int(round(T / dt))):
        z = E @ z
        Z.append(z)
    Z = np.array(Z)
    return Z[:, :r], Z[:, r]


def test_01_opinf_recovery():
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(20):
        r = int(rng.integers(1, 11))
        A, B = _stable_matrix(rng, r), rng.normal(size=r)
        n = max(3 * r, 30)
        Q, U = rng.normal(size=(r, n)), rng.normal(size=n)
        rom = opinf_fit(Q, A @ Q + np.outer(B, U), U, ridge=0.0)
        worst = max(worst, np.linalg.norm(rom.A - A) / np.linalg.norm(A))
    A, B = _stable_matrix(rng, 3), rng.normal(size=3)
    errs = []
    for k in range(6):
        dt = 0.1 / 2 ** k
        q, u = _sampled_trajectory(A, B, dt)
        rom = opinf_fit(q.T, estimate_derivatives(q, dt=dt).T, u, ridge=0.0)
        errs.append(np.linalg.norm(rom.A - A) / np.linalg.norm(A))
        if errs[-1] < 1e-10:
            break
    ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
    elapsed = time.perf_counter() - start
    ok = worst < 1e-8 and min(ratios) >= 40 and errs[-1] < 1e-10 and elapsed < 10
    check(1, "OpInf recovery", ok,
          f"exact-derivative error {worst:.2e}; FD ratios {np.round(ratios, 1).tolist()} "
          f"down to {errs[-1]:.1e}; {elapsed:.1f}s")


# 2 -----------------------------------------------------------------------------

def test_02_era_markov():
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for order in (1, 2, 3, 4, 4, 3, 2):
        A = rng.normal(size=(order, order))
        A *= rng.uniform(0.5, 0.95) / np.max(np.abs(np.linalg.eigvals(A)))
        true = DiscreteLti(0.1, A, rng.normal(size=(order, 1)), rng.normal(size=(1, order)))
        lti = era_fit(true.markov(400), order)
        worst = max(worst, np.max(np.abs(lti.markov(201) - true.markov(201))))
    elapsed = time.perf_counter() - start
    check(2, "ERA Markov parameters", worst < 1e-8 and elapsed < 5,
          f"max deviation over 200 steps {worst:.2e}; {elapsed:.2f}s")


# 3 -----------------------------------------------------------------------------

def test_03_rk4_order():
    def err(h):
        q = np.array([1.0])
        for k in range(int(round(1 / h))):
            q = rk4_step(lambda q, t: -q, q, k * h, h)
        return abs(q[0] - np.exp(-1))

    ratios = [err(h) / err(h / 2) for h in (0.2, 0.1, 0.05)]
    one = rk4_step(lambda q, t: -q, np.array([1.0]), 0.0, 0.1)[0]
    ok = all(12 <= r <= 20 for r in ratios) and abs(one - 0.9048375) < 1e-7
    check(3, "RK4 order", ok, f"ratios {np.round(ratios, 3).tolist()}; one step {one:.9f}")


# 4 -----------------------------------------------------------------------------

def test_04_gradient_suite():
    start = time.perf_counter()
    res = gradient_suite(50, seed=0)
    worst = max(r.max_error for r in res)
    elapsed = time.perf_counter() - start
    check(4, "gradient suite", len(res) == 50 and worst < 1e-4 and elapsed < 60,
          f"max relative error {worst:.2e} over {len(res)} instances; {elapsed:.1f}s")


# 5 -----------------------------------------------------------------------------

def test_05_parseval_h2():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(8, 400))
        h = rng.normal(size=n) * np.exp(-np.arange(n) * 40.0 / n)
        e = np.sum(h * h)
        worst = max(worst, abs(h2_norm(transfer_from_impulse(h, rng.uniform(0.01, 5))) ** 2 - e)
                    / e)
    geo = h2_norm(transfer_from_impulse(0.5 ** np.arange(200), 1.0)) ** 2
    rel = abs(geo - 4 / 3) / (4 / 3)
    check(5, "Parseval / H2", worst < 1e-6 and rel < 0.01,
          f"Parseval deviation {worst:.1e}; geometric H2^2 {geo:.6f} vs 4/3")


# 6 -----------------------------------------------------------------------------

def test_06_two_stage_pod():
    rng = np.random.default_rng(3)
    ortho = cross = 0.0
    for _ in range(20):
        Xa = rng.normal(size=(40, 5)) @ rng.normal(size=(5, 30)) + rng.normal(size=30)
        Xc = Xa[:20] + rng.normal(size=(20, 5)) @ rng.normal(size=(5, 30))
        b = two_stage_pod(Xa, Xc, int(rng.integers(1, 6)), int(rng.integers(1, 6)))
        ortho = max(ortho, np.max(np.abs(b.modes.T @ b.modes - np.eye(b.r))))
        cross = max(cross, np.max(np.abs(b.V_c.T @ b.V_a), initial=0.0))
    rank1 = pod(np.outer(rng.normal(size=20), rng.normal(size=50)), 1).energy[0]
    problem = WakeProblem(WakeSetup(basis="pod"))
    ledger = problem.initial_datasets(Proportional([0.5, 0.0]))
    unc, ctrl = ledger[0].record, ledger[1].record
    keep = unc.snapshot_t >= problem.setup.t_on
    energy = captured_energy(problem.basis, unc.snapshots[keep], ctrl.snapshots)
    ok = ortho < 1e-10 and cross < 1e-10 and abs(rank1 - 1.0) < 1e-12 and energy >= 0.9999
    check(6, "two-stage POD", ok,
          f"orthonormality {ortho:.1e}, cross-stage {cross:.1e}, rank-1 energy {rank1:.15f}, "
          f"wake {problem.basis.r_a}+{problem.basis.r_c} basis energy {energy:.6f}")


# 7 -----------------------------------------------------------------------------

CUBIC_A = np.array([[-0.1, 1.0], [-1.0, -0.1]])
CUBIC_B = np.array([0.0, 1.0])


def _cubic_trajectory(seed, T=20.0, dt=0.01, stride=5):
    """Fine RK4 samples of a linear system with a cubic damping residual."""
    rng = np.random.default_rng(seed)
    w, ph = rng.uniform(0.3, 2, 3), rng.uniform(0, 6, 3)
    t = np.arange(0, T + dt / 2, dt)
    a = 0.8 * np.sin(np.outer(t, w) + ph).sum(axis=1)

    def f(q, u):
        return CUBIC_A @ q + CUBIC_B * u - 0.5 * q ** 3

    q = np.zeros((t.size, 2))
    q[0] = 0.5 * rng.normal(size=2)
    for k in range(t.size - 1):
        am = 0.5 * (a[k] + a[k + 1])
        k1 = f(q[k], a[k])
        k2 = f(q[k] + dt / 2 * k1, am)
        k3 = f(q[k] + dt / 2 * k2, am)
        k4 = f(q[k] + dt * k3, a[k + 1])
        q[k + 1] = q[k] + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return TrainingSeries(t[::stride], q[::stride], a[::stride])


def test_07_node_benefit():
    start = time.perf_counter()
    train = [_cubic_trajectory(s) for s in range(4)]
    test = [_cubic_trajectory(100 + s) for s in range(2)]
    lin = opinf_fit(np.hstack([s.q.T for s in train]),
                    np.hstack([estimate_derivatives(s.q, t=s.t).T for s in train]),
                    np.concatenate([s.a for s in train]), 1e-8)
    budget = dict(mode="open", epochs=200, lr=2e-3, segment_steps=50)
    hidden, dt = (64, 64), 0.05
    node, hist, _ = train_residual(NodeRom(lin, dt, ResidualNet(2, hidden, 1.0, seed=0)),
                                   train, **budget)
    zero = LinearRom(np.zeros((2, 2)), np.zeros(2))
    _, hist_res, _ = train_residual(NodeRom(zero, dt, ResidualNet(2, hidden, 1.0, seed=0)),
                                    train, **budget)
    lin_loss = evaluate_loss(NodeRom(lin, dt), test)
    node_loss = evaluate_loss(node, test)
    elapsed = time.perf_counter() - start
    gain = lin_loss / node_loss
    ok = hist[-1] < hist_res[-1] and gain >= 10 and elapsed < 300
    check(7, "NODE benefit", ok,
          f"final loss linear+residual {hist[-1]:.3g} vs residual-only {hist_res[-1]:.3g}; "
          f"held-out linear {lin_loss:.3g} vs corrected {node_loss:.3g} ({gain:.0f}x); "
          f"{elapsed:.0f}s")


# 8 -----------------------------------------------------------------------------

def test_08_costs():
    T = 5.0
    t = np.arange(0, 30 + 1e-9, 0.01)
    j1 = cost_j1(t, np.sin(2 * np.pi * t / T), CostSpec(t1=25.0, period=T))
    rel = abs(j1 - 2 * T) / (2 * T)
    spec = CostSpec(t0=0, t_end=1)
    above = spec.j2_threshold * 10
    relu_ok = (cost_total([0.3], [spec.j2_threshold / 2], spec) == 0.3
               and cost_total([0.3], [spec.j2_threshold], spec) == 0.3
               and cost_total([0.3], [above], spec)
               == 0.3 + spec.alpha * (above - spec.j2_threshold))
    pol = NeuralPolicy(n_inputs=2, hidden=(5,), seed=0, init_scale=1.0)
    X = sample_grid([(-1, 1), (-2, 2)])
    th = pol.params
    lam = 2.0
    at_zero = repulsive_penalty(pol, th, [th], X, tau=0.1, lambda_rep=lam)
    other = th + 0.3
    tau = policy_distance(pol, th, other, X) / 5
    at_five = repulsive_penalty(pol, th, [other], X, tau=tau, lambda_rep=lam)
    ok = rel < 1e-6 and relu_ok and at_zero == lam and at_five < 1e-10 * lam
    check(8, "cost functions", ok,
          f"J1/2T-1 {rel:.1e}; ReLU branches exact {relu_ok}; repulsion {at_zero} at d=0, "
          f"{at_five / lam:.1e} lambda at d=5tau")


# 9 -----------------------------------------------------------------------------

def test_09_scalar_lqr():
    start = time.perf_counter()
    cfg = load_config(CONFIGS / "scalar_lqr.json")
    problem = ScalarLqrProblem()
    res = adaptive_rl_loop(problem, cfg.trainer, cfg.make_controller())
    gain = float(res.best_controller.params[0])
    opt = problem.optimal_gain()
    rel = abs(gain - opt) / abs(opt)
    elapsed = time.perf_counter() - start
    ok = len(res.best_costs) <= 3 and rel < 0.1 and elapsed < 30
    check(9, "scalar LQR oracle", ok,
          f"gain {gain:.5f} vs Riccati {opt:.5f} ({100 * rel:.2f}%) after "
          f"{len(res.best_costs)} episode(s); {elapsed:.1f}s")


# 10 ----------------------------------------------------------------------------

def test_10_bank_end_to_end():
    start = time.perf_counter()
    cfg = load_config(CONFIGS / "bank.json")
    rep = run_bank_workflow(cfg.problem)
    stab = rep["stability"]
    agree = all(s["rom_unstable"] == s["plant_unstable"] for s in stab)
    straddle = len({s["plant_unstable"] for s in stab}) == 2
    elapsed = time.perf_counter() - start
    ok = rep["h2_ratio"] < 1 and agree and straddle and len(stab) == 5 and elapsed < 300
    check(10, "frequency-bank end to end", ok,
          f"H2/H2_0 {rep['h2_ratio']:.4f}; classification agrees at gains "
          f"{[s['gain'] for s in stab]}: {agree}; {elapsed:.0f}s")


# 11 ----------------------------------------------------------------------------

def test_11_wake_end_to_end(tmp_path):
    start = time.perf_counter()
    assert main(["train", str(CONFIGS / "wake_ss.json"), "-o", str(tmp_path / "ss")]) == 0
    summary = io.read_metadata(tmp_path / "ss" / "summary.json")
    best = summary["best_costs"]
    monotone = all(b <= a for a, b in zip(best, best[1:]))
    red = summary["reduction"]
    main_elapsed = time.perf_counter() - start

    # stabilized mode: the first learned policy is replaced by the zero policy,
    # whose reduction is below the danger threshold
    cfg = load_config(CONFIGS / "wake_ss.json")
    trainer = dataclasses.replace(cfg.trainer, iterations=2, stabilize=True,
                                  rom_epochs=(40, 20), policy_steps=(30, 20))

    def inject(ep, policy):
        return policy.with_params(np.zeros_like(policy.params)) if ep == 0 else policy

    res = adaptive_rl_loop(WakeProblem(cfg.problem), trainer, cfg.make_controller(),
                           hooks=LoopHooks(after_policy=inject))
    bad = res.ledger[2]
    ep1 = [r for r in res.audit if r.get("event") == "episode" and r["episode"] == 1]
    excluded = bool(ep1) and bad.index not in ep1[0]["selection"]
    no_warm = bool(ep1) and ep1[0]["warm_start_source"] != 0
    elapsed = time.perf_counter() - start
    ok = (len(best) <= 4 and monotone and red >= 0.9 * WAKE_PINNED_REDUCTION and bad.danger
          and excluded and no_warm and elapsed < 600)
    check(11, "wake end to end", ok,
          f"best costs {np.round(best, 5).tolist()}; reduction {red:.4f} vs pinned "
          f"{WAKE_PINNED_REDUCTION:.4f}; injected dataset dangerous {bad.danger}, excluded "
          f"{excluded}, warm-start source {ep1[0]['warm_start_source'] if ep1 else None}; "
          f"{main_elapsed:.0f}s + {elapsed - main_elapsed:.0f}s")


# 12 ----------------------------------------------------------------------------

def test_12_bilinear():
    tf = DiscreteTf([0.3, -0.2, 0.05], [-1.2, 0.4], 0.1)
    trip = np.max(np.abs(bilinear_resample(bilinear_resample(tf, 0.037), 0.1).params
                         - tf.params))
    dc = max(abs(bilinear_resample(tf, d).dc_gain() - tf.dc_gain()) / abs(tf.dc_gain())
             for d in (0.5, 0.05, 0.013, 2.0))
    p, dt = 0.9, 0.1
    lp = DiscreteTf([1 - p], [-p], dt)
    w = np.linspace(0, 0.1 * np.pi / dt, 200)
    band = np.max(np.abs(bilinear_resample(lp, dt / 2).freq_response(w) - lp.freq_response(w))
                  / np.abs(lp.freq_response(w)))
    check(12, "bilinear resampling", trip < 1e-12 and dc < 1e-10 and band < 0.01,
          f"round trip {trip:.1e}; DC {dc:.1e}; low band {100 * band:.3f}%")


# 13 ----------------------------------------------------------------------------

def test_13_sensor_placement():
    x = np.linspace(0, 4, 41)
    y = np.linspace(-1, 1, 21)
    X, Y = (g.ravel() for g in np.meshgrid(x, y, indexing="ij"))
    f = np.sin(X) * np.cos(2 * Y) + 0.3 * X
    _, gx, gy = gaussian_sensor_read(f, X, Y, 1.37, 0.18, 0.3, 0.2, return_grad=True)
    h = 1e-6
    fdx = (gaussian_sensor_read(f, X, Y, 1.37 + h, 0.18, 0.3, 0.2)
           - gaussian_sensor_read(f, X, Y, 1.37 - h, 0.18, 0.3, 0.2)) / (2 * h)
    fdy = (gaussian_sensor_read(f, X, Y, 1.37, 0.18 + h, 0.3, 0.2)
           - gaussian_sensor_read(f, X, Y, 1.37, 0.18 - h, 0.3, 0.2)) / (2 * h)
    grad_err = max(abs(fdx - gx) / abs(gx), abs(fdy - gy) / abs(gy))
    bench = PlacementBenchmark()
    pos, _ = run_placement_benchmark(bench)
    sx, sy = bench.span()
    frac = max(abs(pos[0] - bench.x_star) / sx, abs(pos[1] - bench.y_star) / sy)
    check(13, "sensor placement", grad_err < 1e-5 and frac <= 0.05,
          f"gradient FD error {grad_err:.1e}; found ({pos[0]:.4f}, {pos[1]:.4f}) vs "
          f"({bench.x_star}, {bench.y_star}), {100 * frac:.2f}% of span")


# 14 ----------------------------------------------------------------------------

def _run_twice(tmp_path, name, argv):
    outs = []
    for k in range(2):
        out = tmp_path / f"{name}{k}"
        assert main(argv + ["-o", str(out)]) == 0
        outs.append(out)
    return outs


def _identical(a, b):
    files_a = sorted(str(p.relative_to(a)) for p in a.rglob("*") if p.is_file())
    files_b = sorted(str(p.relative_to(b)) for p in b.rglob("*") if p.is_file())
    if files_a != files_b:
        return False, files_a
    same = all(filecmp.cmp(a / f, b / f, shallow=False) for f in files_a)
    return same, files_a


def test_14_determinism(tmp_path):
    wake = tmp_path / "wake.json"
    wake.write_text(io.canonical_json({
        "version": 1, "workflow": "wake", "seed": 3,
        "controller": {"kind": "proportional", "gain": [0.5, 0.0]},
        "episode": {"duration": 20.0, "t_on": 5.0, "stride": 2},
        "fit": {"basis": "pod", "r_a": 2, "r_c": 2, "t_start": 5.0, "epochs": 3,
                "segment_steps": 20}}))
    zero = tmp_path / "zero.json"
    zero.write_text(wake.read_text().replace('"kind":"proportional","gain":[0.5,0.0]',
                                             '"kind":"zero","n_inputs":2'))
    runs = {
        "episode": _run_twice(tmp_path, "ep", ["episode", str(wake)]),
        "train-scalar": _run_twice(tmp_path, "sc", ["train", str(CONFIGS / "scalar_lqr.json")]),
        "train-bank": _run_twice(tmp_path, "bk", ["train", str(CONFIGS / "bank.json")]),
        "grad-check": _run_twice(tmp_path, "gc", ["grad-check", "--instances", "5"]),
        "place-sensors": _run_twice(tmp_path, "ps", ["place-sensors",
                                                     str(CONFIGS / "scalar_lqr.json")]),
    }
    assert main(["episode", str(zero), "-o", str(tmp_path / "unc")]) == 0
    runs["fit"] = _run_twice(tmp_path, "fit", ["fit", str(wake), "--episodes",
                                               str(tmp_path / "unc"), str(tmp_path / "ep0")])
    results = {k: _identical(*v) for k, v in runs.items()}
    n_files = sum(len(files) for _, files in results.values())
    differing = [k for k, (same, _) in results.items() if not same]
    check(14, "determinism", not differing,
          f"{len(results)} commands, {n_files} artifacts byte-identical"
          + (f"; differing: {differing}" if differing else ""))
