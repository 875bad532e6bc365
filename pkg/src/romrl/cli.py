"""Command-line entry points.

Every command takes a JSON run configuration (see :mod:`romrl.config`),
writes its artifacts under the output directory together with the
normalized ``config.json`` and a ``manifest.json`` listing the config hash
and the SHA-256 of every file, and prints a one-line summary.

Exit codes: 0 success, 1 numerical failure (divergence, failed check),
2 I/O or configuration error.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import checkpoint, io
from .config import load_config
from .errors import (ConfigurationError, DataIntegrityError, DivergenceError,
                     RankDeficiencyError, StabilizationFailure)

log = logging.getLogger("romrl")

EXIT_OK, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2
FEEDBACK_ARITY = {"scalar": 1, "wake": 2, "bank": 1}


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

def _plant(cfg):
    if cfg.workflow == "wake":
        from .plants.wake import WakePlant
        return WakePlant(cfg.plant, backend=cfg.backend_arg)
    if cfg.workflow == "bank":
        from .plants.convective import ConvectivePlant
        return ConvectivePlant(cfg.plant, backend=cfg.backend_arg)
    return cfg.problem.plant


def _outdir(cfg, args, default):
    out = args.out or os.path.join(cfg.output, default)
    return io.ensure_dir(out)


def _finish(out, cfg, command, summary):
    """Write ``config.json`` and ``manifest.json``; print the summary line."""
    io.write_metadata(os.path.join(out, "config.json"), cfg.document)
    files = {}
    for root, dirs, names in os.walk(out):
        dirs.sort()
        for name in sorted(names):
            path = os.path.join(root, name)
            rel = os.path.relpath(path, out)
            if rel != "manifest.json":
                files[rel.replace(os.sep, "/")] = io.file_sha256(path)
    manifest = {"command": command, "config_hash": cfg.hash, "seed": cfg.seed,
                "workflow": cfg.workflow, "summary": summary, "files": files}
    io.write_metadata(os.path.join(out, "manifest.json"), manifest)
    print(f"{command}: " + ", ".join(f"{k}={_short(v)}" for k, v in summary.items()))


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _check_arity(cfg, controller):
    want = FEEDBACK_ARITY[cfg.workflow]
    if controller.n_inputs != want:
        raise ConfigurationError(f"controller has {controller.n_inputs} input(s) but the "
                                 f"{cfg.workflow} plant provides {want}")


def _load_controller(cfg, stem):
    ctrl = checkpoint.load_controller(stem) if stem else cfg.make_controller()
    _check_arity(cfg, ctrl)
    if getattr(ctrl, "kind", None) == "discrete_tf":
        dt = _plant(cfg).dt
        if abs(ctrl.dt - dt) > 1e-12 * dt:
            raise ConfigurationError(f"controller step {ctrl.dt} differs from the plant step "
                                     f"{dt}; resample it first")
    return ctrl


def _sensor_columns(cfg, record):
    if cfg.workflow == "wake":
        return np.array([i for i, lab in enumerate(record.sensor_labels) if lab.startswith("s")])
    return np.arange(len(record.sensor_labels))


def reduce_record(record, basis, columns):
    """Reduced trajectory ``(t, q_r, a)`` of an episode on its snapshot grid."""
    from .reduction import ReducedBasis, project, sparse_measure
    dt = record.t[1] - record.t[0]
    if isinstance(basis, ReducedBasis):
        t = record.snapshot_t
        idx = np.rint((t - record.t[0]) / dt).astype(int)
        return t, project(record.snapshots, basis), record.actions[idx]
    s = record.schedule.stride
    return record.t[::s], sparse_measure(record.sensors[::s][:, columns], basis), \
        record.actions[::s]


def _clip(series, t_start):
    t, q, a = series
    keep = t >= t_start - 1e-12
    return t[keep], q[keep], a[keep]


def _linear_fit(series, ridge, provenance):
    from .sysid import estimate_derivatives, opinf_fit
    Q = np.hstack([q.T for _, q, _ in series])
    dQ = np.hstack([estimate_derivatives(q, t=t).T for t, q, _ in series])
    U = np.concatenate([a for _, _, a in series])
    return opinf_fit(Q, dQ, U, ridge, provenance)


def _episodes(paths):
    from .plants.episode import load_episode
    if not paths:
        raise ConfigurationError("no episode directories given")
    return [load_episode(p)[0] for p in paths]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_episode(cfg, args):
    from .plants.episode import run_episode, save_episode
    plant = _plant(cfg)
    ctrl = _load_controller(cfg, args.controller)
    out = _outdir(cfg, args, "episode")
    rec = run_episode(plant, ctrl, cfg.episode, config_hash=cfg.hash)
    save_episode(rec, out, {"controller": ctrl.to_dict(), "workflow": cfg.workflow})
    _finish(out, cfg, "episode", {"steps": len(rec.t) - 1, "diverged": rec.diverged})
    return EXIT_NUMERICAL if rec.diverged else EXIT_OK


def cmd_fit(cfg, args):
    from .reduction import SparseMeasurement, captured_energy, two_stage_pod
    from .romcore.rom import NodeRom, ResidualNet
    from .romcore.train import TrainingSeries, train_residual
    fs = cfg.fit
    recs = _episodes(args.episodes)
    out = _outdir(cfg, args, "fit")
    unc = recs[0]
    cols = _sensor_columns(cfg, unc)
    if fs.basis == "pod":
        if len(recs) < 2:
            raise ConfigurationError("a POD fit needs an uncontrolled and a controlled episode")
        keep = unc.snapshot_t >= fs.t_start - 1e-12
        ctrl_snaps = np.vstack([r.snapshots[r.snapshot_t >= fs.t_start - 1e-12]
                                for r in recs[1:]])
        basis = two_stage_pod(unc.snapshots[keep], ctrl_snaps, fs.r_a, fs.r_c, mean=fs.mean)
        energy = captured_energy(basis, unc.snapshots[keep], ctrl_snaps)
    else:
        keep = unc.t >= fs.t_start - 1e-12
        labels = tuple(unc.sensor_labels[i] for i in cols)
        basis = SparseMeasurement.selection(np.arange(cols.size), cols.size, labels,
                                            unc.sensors[keep][:, cols].mean(axis=0))
        energy = float("nan")
    series = [_clip(reduce_record(r, basis, cols), fs.t_start) for r in recs]
    names = tuple(f"episode:{os.path.basename(os.path.normpath(p))}" for p in args.episodes)
    lin = _linear_fit(series, fs.ridge, names)
    history = []
    if args.linear_only or not fs.residual:
        rom = NodeRom(lin, fs.rom_dt, None, linear_only=True)
    else:
        rom = NodeRom(lin, fs.rom_dt, ResidualNet(lin.r, fs.hidden, fs.k, seed=cfg.seed))
        data = [TrainingSeries(t, q, a, None, None, 0.0, n)
                for (t, q, a), n in zip(series, names)]
        rom, history, _ = train_residual(rom, data, "open", fs.epochs, fs.lr, fs.segment_steps)
    checkpoint.save_basis(basis, os.path.join(out, "basis"), cfg.hash)
    checkpoint.save_rom(rom, os.path.join(out, "rom"), cfg.hash)
    if history:
        io.write_table(os.path.join(out, "loss.csv"), ["epoch", "loss"],
                       [np.arange(len(history)), history])
    energy_value = float(np.min(energy)) if np.size(energy) else float("nan")
    _finish(out, cfg, "fit", {"r": lin.r, "energy": energy_value,
                              "residual": rom.has_residual,
                              "final_loss": float(history[-1]) if history else float("nan")})
    return EXIT_OK


def _ledger_tables(out, res, workflow):
    plant_costs = [d.cost for d in res.ledger]
    io.write_table(os.path.join(out, "episodes.csv"), ["dataset", "plant_cost"],
                   [np.arange(len(plant_costs)), plant_costs])
    if res.best_costs:
        io.write_table(os.path.join(out, "best_cost.csv"), ["episode", "best_cost"],
                       [np.arange(len(res.best_costs)), res.best_costs])
    if workflow == "wake":
        io.write_table(os.path.join(out, "drag.csv"),
                       ["episode", "mean_drag", "normalized_drag", "reduction"],
                       [np.arange(len(res.ledger)),
                        [d.summary["mean_drag"] for d in res.ledger],
                        [d.summary["normalized_drag"] for d in res.ledger],
                        [d.summary["reduction"] for d in res.ledger]])


def cmd_train(cfg, args):
    out = _outdir(cfg, args, "train")
    if cfg.workflow == "bank":
        return _train_bank(cfg, args, out)
    from .trainer.loop import adaptive_rl_loop
    from .trainer.problems import WakeProblem
    controller = _load_controller(cfg, None)
    problem = (WakeProblem(cfg.problem, backend=cfg.backend_arg) if cfg.workflow == "wake"
               else cfg.problem)
    res = adaptive_rl_loop(problem, cfg.trainer, controller, out, cfg.hash)
    checkpoint.save_controller(res.best_controller, os.path.join(out, "best_controller"),
                               cfg.hash)
    summary = {"episodes": len(res.best_costs), "best_cost": res.best_cost,
               "stopped": res.stopped}
    if res.ledger:
        _ledger_tables(out, res, cfg.workflow)
    if cfg.workflow == "wake" and res.ledger:
        best = min((d for d in res.ledger if d.controller is res.best_controller),
                   key=lambda d: d.index, default=res.ledger[-1])
        summary["reduction"] = best.summary["reduction"]
    if cfg.workflow == "scalar":
        summary["gain"] = float(res.best_controller.params[0])
        summary["optimal_gain"] = float(problem.optimal_gain())
    io.write_metadata(os.path.join(out, "summary.json"),
                      dict(summary, config_hash=cfg.hash, best_costs=res.best_costs))
    _finish(out, cfg, "train", summary)
    return EXIT_OK


def _bode(out, name, tables):
    """``tables`` maps a label to a ``(frequency, |G|)`` pair on a common grid."""
    w = next(iter(tables.values()))[0]
    io.write_table(os.path.join(out, name), ["frequency"] + [f"|G|_{k}" for k in tables],
                   [w] + [mag for _, mag in tables.values()])


def _train_bank(cfg, args, out):
    from .trainer.bank import run_bank_workflow
    rep = run_bank_workflow(cfg.problem, workers=args.workers, backend=cfg.backend_arg)
    keys = ("open", "initial", "controlled")
    _bode(out, "bode.csv", {k: rep["bode"][k] for k in keys})
    io.write_table(os.path.join(out, "stability.csv"),
                   ["gain", "rom_unstable", "plant_unstable"],
                   [[s["gain"] for s in rep["stability"]],
                    [float(s["rom_unstable"]) for s in rep["stability"]],
                    [float(s["plant_unstable"]) for s in rep["stability"]]])
    scan = np.array(rep["era_scan"], dtype=float)
    io.write_table(os.path.join(out, "era_scan.csv"), ["gain", "spectral_radius", "h2"],
                   list(scan.T))
    hist = rep["history"]
    io.write_table(os.path.join(out, "history.csv"), ["step", "cost", "best"],
                   [np.arange(len(hist["cost"])), hist["cost"], hist["best"]])
    entries = rep["bank"].entries
    io.write_table(os.path.join(out, "bank.csv"), ["frequency", "amplitude", "low_signal"],
                   [[e.frequency for e in entries], [e.amplitude for e in entries],
                    [float(e.low_signal) for e in entries]])
    checkpoint.save_controller(rep["controller"], os.path.join(out, "best_controller"),
                               cfg.hash)
    checkpoint.save_controller(rep["controller_rom"], os.path.join(out, "controller_rom"),
                               cfg.hash)
    agree = all(s["rom_unstable"] == s["plant_unstable"] for s in rep["stability"])
    report = {"config_hash": cfg.hash, "initial_gain": rep["initial_gain"],
              "era_bounds": list(rep["era_bounds"]), "h2_open": rep["h2_open"],
              "h2_initial": rep["h2_initial"], "h2_controlled": rep["h2_controlled"],
              "h2_ratio": rep["h2_ratio"], "h2_ratio_initial": rep["h2_ratio_initial"],
              "stability": rep["stability"], "classification_agrees": agree,
              "controller": rep["controller"].to_dict(), "events": rep["events"]}
    io.write_metadata(os.path.join(out, "h2_report.json"), report)
    audit = os.path.join(out, "audit.jsonl")
    if os.path.exists(audit):
        os.remove(audit)
    io.append_jsonl(audit, {"config_hash": cfg.hash, "event": "bank", "seed": cfg.seed,
                            "controller": checkpoint.controller_id(rep["controller"]),
                            "plant_cost": rep["h2_ratio"],
                            "rom_cost": float(hist["best"][-1])})
    _finish(out, cfg, "train", {"h2_ratio": rep["h2_ratio"],
                                "initial_gain": rep["initial_gain"],
                                "classification_agrees": agree})
    return EXIT_OK


def cmd_eval(cfg, args):
    ctrl = _load_controller(cfg, args.controller)
    out = _outdir(cfg, args, "eval")
    if cfg.workflow == "scalar":
        cost = cfg.problem.plant_cost(ctrl)
        report = {"plant_cost": cost}
    elif cfg.workflow == "wake":
        from .trainer.problems import WakeProblem
        problem = WakeProblem(cfg.problem, backend=cfg.backend_arg)
        unc, rec, st, cost = problem.evaluate(ctrl)
        base = cost if st["diverged"] else st["mean"] / cost
        io.write_table(os.path.join(out, "drag.csv"), ["case", "mean_drag"],
                       [[0, 1], [base, st["mean"]]])
        n = min(len(unc.t), len(rec.t))
        io.write_table(os.path.join(out, "drag_series.csv"), ["t", "cd_baseline", "cd"],
                       [unc.t[:n], unc.sensor("cd")[:n], rec.sensor("cd")[:n]])
        report = {"plant_cost": cost, "mean_drag": st["mean"], "baseline_drag": base,
                  "reduction": st["reduction"], "diverged": st["diverged"]}
    else:
        from .metrics import bode_table, h2_norm, transfer_from_impulse
        from .trainer.bank import closed_loop_impulse
        plant = _plant(cfg)
        n = cfg.problem.impulse_steps
        tf0 = transfer_from_impulse(closed_loop_impulse(plant, None, n), plant.dt)
        tfc = transfer_from_impulse(closed_loop_impulse(plant, ctrl, n), plant.dt)
        h0, hc = h2_norm(tf0), h2_norm(tfc)
        _bode(out, "bode.csv", {"open": bode_table(tf0), "closed": bode_table(tfc)})
        report = {"plant_cost": hc / h0, "h2_open": h0, "h2_closed": hc, "h2_ratio": hc / h0}
    report["config_hash"] = cfg.hash
    report["controller"] = checkpoint.controller_id(ctrl)
    io.write_metadata(os.path.join(out, "report.json"), report)
    _finish(out, cfg, "eval", {"plant_cost": report["plant_cost"]})
    finite = np.isfinite(report["plant_cost"])
    return EXIT_OK if finite else EXIT_NUMERICAL


def cmd_grad_check(cfg, args):
    from .romcore.gradcheck import gradient_suite
    res = gradient_suite(args.instances, cfg.seed)
    out = _outdir(cfg, args, "grad_check")
    nan = float("nan")
    io.write_table(os.path.join(out, "grad_check.csv"),
                   ["instance", "closed_loop", "omega", "q0", "theta"],
                   [[r.instance for r in res], [float(r.mode == "closed") for r in res],
                    [r.errors["omega"] for r in res], [r.errors["q0"] for r in res],
                    [r.errors.get("theta", nan) for r in res]])
    worst = max(r.max_error for r in res)
    ok = worst < args.tol
    _finish(out, cfg, "grad-check", {"instances": len(res), "max_rel_error": worst,
                                     "passed": ok})
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_step_check(cfg, args):
    from .romcore.train import verify_step_size
    rom = checkpoint.load_rom(args.rom)
    sc = cfg.step_check
    if args.episode:
        if not args.basis:
            raise ConfigurationError("--episode needs --basis")
        basis = checkpoint.load_basis(args.basis)
        rec = _episodes([args.episode])[0]
        t, q, a = _clip(reduce_record(rec, basis, _sensor_columns(cfg, rec)), cfg.fit.t_start)
        q0, t_act, a_act = q[0], t - t[0], a
    else:
        q0 = np.full(rom.r, 0.1 / np.sqrt(rom.r))
        t_act = np.array([0.0, sc.horizon])
        a_act = np.zeros(2)
    if t_act[-1] < sc.horizon - 1e-12:
        raise ConfigurationError("episode is shorter than the step-check horizon")
    rel, ok = verify_step_size(rom, q0[None, :], t_act, a_act[None, :], sc.horizon, sc.rtol)
    out = _outdir(cfg, args, "step_check")
    io.write_metadata(os.path.join(out, "step_check.json"),
                      {"config_hash": cfg.hash, "rom_dt": rom.dt, "horizon": sc.horizon,
                       "rtol": sc.rtol, "relative_difference": rel, "passed": ok,
                       "rom": checkpoint.rom_id(rom)})
    _finish(out, cfg, "step-check", {"rom_dt": rom.dt, "relative_difference": rel,
                                     "passed": ok})
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_ablate_linear(cfg, args):
    from .metrics import normalized_linear_loss
    basis = checkpoint.load_basis(args.basis)
    ref = _episodes(args.reference)
    extra = _episodes(args.aggregate)
    cols = _sensor_columns(cfg, ref[0])
    fs = cfg.fit
    ref_s = [_clip(reduce_record(r, basis, cols), fs.t_start) for r in ref]
    agg_s = ref_s + [_clip(reduce_record(r, basis, cols), fs.t_start) for r in extra]
    lin_ref = _linear_fit(ref_s, fs.ridge, ("reference",))
    lin_agg = _linear_fit(agg_s, fs.ridge, ("aggregate",))
    ratios = normalized_linear_loss(lin_agg, lin_ref, agg_s, fs.rom_dt)
    out = _outdir(cfg, args, "ablate_linear")
    io.write_table(os.path.join(out, "ablate_linear.csv"), ["dataset", "normalized_loss"],
                   [np.arange(ratios.size), ratios])
    _finish(out, cfg, "ablate-linear", {"datasets": int(ratios.size),
                                        "min_ratio": float(ratios.min()),
                                        "max_ratio": float(ratios.max())})
    return EXIT_OK


def cmd_place_sensors(cfg, args):
    from .control.sensors import run_placement_benchmark
    bench = cfg.placement
    pos, hist = run_placement_benchmark(bench, lti=cfg.backend_arg)
    out = _outdir(cfg, args, "place_sensors")
    h = np.array([(c, x, y, float(cl)) for c, x, y, cl in hist])
    io.write_table(os.path.join(out, "placement.csv"), ["iteration", "cost", "x0", "y0",
                                                        "clamped"],
                   [np.arange(len(h))] + list(h.T))
    span = bench.span()
    err = max(abs(pos[0] - bench.x_star) / span[0], abs(pos[1] - bench.y_star) / span[1])
    io.write_metadata(os.path.join(out, "placement.json"),
                      {"config_hash": cfg.hash, "position": list(pos),
                       "optimum": [bench.x_star, bench.y_star], "error_fraction": err,
                       "initial_cost": float(h[0, 0]), "final_cost": float(h[:, 0].min())})
    _finish(out, cfg, "place-sensors", {"x0": pos[0], "y0": pos[1], "error_fraction": err})
    return EXIT_OK


def cmd_pressure_map(cfg, args):
    from .control.pressure import pressure_map_eval, pressure_map_fit
    if cfg.workflow != "wake":
        raise ConfigurationError("the pressure map needs the wake plant")
    basis = checkpoint.load_basis(args.basis)
    recs = _episodes(args.episodes)
    X, P = [], []
    for rec in recs:
        cols = _sensor_columns(cfg, rec)
        t, q, _ = reduce_record(rec, basis, cols)
        idx = np.rint((t - rec.t[0]) / (rec.t[1] - rec.t[0])).astype(int)
        pcols = [rec.sensor_labels.index(f"p{i}") for i in range(1, 5)]
        X.append(q)
        P.append(rec.sensors[idx][:, pcols])
    X, P = np.vstack(X), np.vstack(P)
    ps = cfg.pressure
    n_fit = int(round((1.0 - ps.holdout) * X.shape[0]))
    g = pressure_map_fit(X[:n_fit], P[:n_fit], ps.hidden, ps.epochs, ps.batch, ps.lr, cfg.seed)
    p_hat, y1, y2 = pressure_map_eval(g, X[n_fit:])
    P_test = P[n_fit:]
    rel = float(np.linalg.norm(p_hat - P_test) / np.linalg.norm(P_test - P_test.mean(axis=0)))
    y1_t, y2_t = P_test[:, 0] - P_test[:, 3], P_test[:, 1] - P_test[:, 2]
    rel_y = float(np.linalg.norm(np.c_[y1 - y1_t, y2 - y2_t]) / np.linalg.norm(np.c_[y1_t, y2_t]))
    out = _outdir(cfg, args, "pressure_map")
    checkpoint.save_pressure_map(g, os.path.join(out, "pressure_map"), cfg.hash)
    io.write_table(os.path.join(out, "holdout.csv"),
                   ["sample", "y1", "y1_pred", "y2", "y2_pred"],
                   [np.arange(y1.size), y1_t, y1, y2_t, y2])
    io.write_metadata(os.path.join(out, "pressure_map.json"),
                      {"config_hash": cfg.hash, "samples": int(X.shape[0]), "fit": n_fit,
                       "holdout_relative_error": rel, "feedback_relative_error": rel_y})
    _finish(out, cfg, "pressure-map", {"samples": int(X.shape[0]),
                                       "holdout_relative_error": rel,
                                       "feedback_relative_error": rel_y})
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--out", help="output directory (default: <config output>/<cmd>)")
    common.add_argument("--workers", type=int, default=1,
                        help="maximum concurrent ROM fits/rollouts")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = argparse.ArgumentParser(prog="romrl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_, config=True):
        s = sub.add_parser(name, parents=[common], help=help_)
        if config:
            s.add_argument("config", help="JSON run configuration")
        else:
            s.add_argument("config", nargs="?", help="JSON run configuration (optional)")
        s.set_defaults(func=func)
        return s

    s = add("episode", cmd_episode, "run one plant episode and save its artifacts")
    s.add_argument("--controller", help="controller checkpoint stem (default: config)")
    s = add("fit", cmd_fit, "fit a basis and ROM from saved episodes")
    s.add_argument("--episodes", nargs="+", required=True,
                   help="episode directories; the first is the uncontrolled reference")
    s.add_argument("--linear-only", action="store_true", help="skip the residual network")
    add("train", cmd_train, "run the configured training workflow")
    s = add("eval", cmd_eval, "evaluate a controller on the full plant")
    s.add_argument("--controller", help="controller checkpoint stem (default: config)")
    s = add("grad-check", cmd_grad_check, "finite-difference check of ROM gradients",
            config=False)
    s.add_argument("--instances", type=int, default=50)
    s.add_argument("--tol", type=float, default=1e-4)
    s = add("step-check", cmd_step_check, "step-doubling check of the ROM step size")
    s.add_argument("--rom", required=True, help="ROM checkpoint stem")
    s.add_argument("--episode", help="episode directory supplying q0 and actions")
    s.add_argument("--basis", help="basis checkpoint stem (with --episode)")
    s = add("ablate-linear", cmd_ablate_linear, "reference vs. aggregate linear-ROM losses")
    s.add_argument("--basis", required=True)
    s.add_argument("--reference", nargs="+", required=True)
    s.add_argument("--aggregate", nargs="+", required=True)
    add("place-sensors", cmd_place_sensors, "sensor-placement benchmark")
    s = add("pressure-map", cmd_pressure_map, "fit the wall-pressure surrogate")
    s.add_argument("--basis", required=True)
    s.add_argument("--episodes", nargs="+", required=True)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.workers < 1:
            raise ConfigurationError("--workers must be at least 1")
        if args.config is None:
            from .config import parse_config
            cfg = parse_config({"version": 1, "workflow": "scalar", "output": "runs"})
        else:
            cfg = load_config(args.config)
        return args.func(cfg, args)
    except (ConfigurationError, DataIntegrityError, OSError, json.JSONDecodeError) as exc:
        print(f"romrl: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DivergenceError, StabilizationFailure, RankDeficiencyError,
            FloatingPointError) as exc:
        print(f"romrl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
