"""Adaptive ROM-based reinforcement-learning outer loop.

Each iteration selects a training ensemble from the dataset ledger, updates
the ROM residual (linear operators stay frozen after the initial fit),
optimizes the policy on the ROM, deploys it on the full plant, and appends
the resulting episode to the ledger. The problem-specific parts (plant,
basis, costs) are supplied by a problem object; see
:mod:`romrl.trainer.problems`.
"""

import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .. import checkpoint, io
from ..errors import StabilizationFailure
from .datasets import select_datasets
from .policy import make_penalty, optimize_policy_on_rom
from .schedule import PolicyCheckpoint, convergence_check, warm_start

log = logging.getLogger(__name__)


@dataclass
class LoopResult:
    best_controller: object
    best_cost: float
    best_costs: list
    ledger: list
    audit: list
    rom: object = None
    stopped: str = "iterations"
    controllers: list = field(default_factory=list)


@dataclass
class LoopHooks:
    """Test and diagnostic hooks.

    ``after_policy(episode, controller) -> controller`` may replace the
    policy before deployment (used to inject a dangerous dataset).
    """

    after_policy: object = None


def adaptive_rl_loop(problem, config, controller, out_dir=None, config_hash="", hooks=None):
    """Run the adaptive loop.

    Parameters
    ----------
    problem : object
        Supplies ``initial_datasets``, ``initial_rom``, ``initial_policy``,
        ``train_rom``, ``policy_objective``, ``collect`` and ``repulsion_grid``.
    config : TrainConfig
    controller : initial controller used to collect the reference data
    out_dir : str, optional
        Where checkpoints and ``audit.jsonl`` are written.

    Returns
    -------
    LoopResult
        Best controller by full-plant cost and the audit records.

    Raises
    ------
    StabilizationFailure
        Every candidate dataset is dangerous and no stable history exists.
    """
    hooks = hooks or LoopHooks()
    if config.iterations == 0:
        return LoopResult(controller, float("nan"), [], [], [], stopped="no iterations")
    audit_path = None
    if out_dir is not None:
        io.ensure_dir(os.path.join(out_dir, "checkpoints"))
        audit_path = os.path.join(out_dir, "audit.jsonl")
        if os.path.exists(audit_path):
            os.remove(audit_path)
    audit = []

    def emit(rec):
        rec = {"config_hash": config_hash, **rec}
        audit.append(rec)
        if audit_path is not None:
            io.append_jsonl(audit_path, rec)

    ledger = problem.initial_datasets(controller, seed=config.seed)
    for d in ledger:
        emit({"event": "reference", "dataset": d.index, "seed": d.meta.get("seed"),
              "plant_cost": d.cost, "summary": d.summary, "danger": d.danger})
    init = ledger[-1]
    best_ctrl, best_cost = controller, init.cost
    best_costs = []
    rom = problem.initial_rom(ledger)
    frozen = (rom.A.copy(), rom.B.copy())
    policy0 = problem.initial_policy(controller, seed=config.seed)
    checkpoints = []
    stopped = "iterations"
    controllers = []
    for ep in range(config.iterations):
        events = []
        mode = config.mode(ep)
        sel = select_datasets(ledger, config.cap, config.stabilize)
        if not sel:
            raise StabilizationFailure("all datasets are dangerous and no stable history exists")
        rom, rom_hist = problem.train_rom(rom, sel, mode, config.epochs(ep), config.rom_lr,
                                          config.segment_steps, events)
        if not (np.array_equal(rom.A, frozen[0]) and np.array_equal(rom.B, frozen[1])):
            raise AssertionError("linear operators changed after the initial fit")
        if config.warm_start:
            theta0, source = warm_start(checkpoints, config.stabilize, lambda: policy0.params)
        else:
            theta0, source = policy0.params, None
        start = policy0.with_params(theta0)
        penalty = None
        bad = [ck.params for ck in checkpoints if ck.danger]
        if config.stabilize and bad:
            X = problem.repulsion_grid([d for d in ledger if not d.danger])
            spec = problem.cost_spec
            penalty = make_penalty(start, bad, X, spec.tau, spec.lambda_rep)
        objective = problem.policy_objective(rom, sel, start)
        policy, pol_hist = optimize_policy_on_rom(objective, start, config.steps(ep),
                                                  config.policy_lr, penalty, events)
        if hooks.after_policy is not None:
            policy = hooks.after_policy(ep, policy)
        ds = problem.collect(policy, len(ledger), seed=config.seed + ep + 1)
        ledger.append(ds)
        checkpoints.append(PolicyCheckpoint(ep, policy.params, ds.danger))
        controllers.append(policy)
        if not ds.danger and ds.cost < best_cost:
            best_ctrl, best_cost = policy, ds.cost
        best_costs.append(float(best_cost))
        rom_ck = checkpoint.rom_id(rom)
        ctrl_ck = checkpoint.controller_id(policy)
        if out_dir is not None:
            ckdir = os.path.join(out_dir, "checkpoints")
            checkpoint.save_rom(rom, os.path.join(ckdir, f"rom_{ep:03d}"), config_hash)
            checkpoint.save_controller(policy, os.path.join(ckdir, f"controller_{ep:03d}"),
                                       config_hash)
        rom_loss = rom_hist[-1] if rom_hist else problem.rom_loss(rom, sel, mode)
        rom_track = [rom_hist[0], rom_hist[-1]] if rom_hist else [rom_loss, rom_loss]
        pol_track = [pol_hist["cost"][0], pol_hist["best"][-1]]
        emit({"event": "episode", "episode": ep, "seed": config.seed + ep + 1, "mode": mode,
              "selection": [d.index for d in sel], "warm_start_source": source,
              "rom_checkpoint": rom_ck, "controller": ctrl_ck,
              "rom_loss": float(rom_loss), "rom_cost": pol_track[-1],
              "rom_cost_initial": pol_hist["cost"][0], "plant_cost": ds.cost,
              "summary": ds.summary, "danger": {str(d.index): d.danger for d in ledger},
              "best_cost": best_costs[-1], "events": events})
        log.info("episode %d: plant cost %.6g (best %.6g)%s", ep, ds.cost, best_cost,
                 " DANGEROUS" if ds.danger else "")
        # stop once neither update improves its own objective by the set fraction
        if convergence_check(rom_track, pol_track, fraction=config.convergence) == "stop":
            stopped = "converged"
            break
    if out_dir is not None:
        checkpoint.save_controller(best_ctrl, os.path.join(out_dir, "best_controller"),
                                   config_hash)
    return LoopResult(best_ctrl, float(best_cost), best_costs, ledger, audit, rom, stopped,
                      controllers)
