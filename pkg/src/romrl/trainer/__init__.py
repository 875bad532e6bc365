"""Adaptive ROM-based training loop, dataset curation and workflows."""

from .datasets import Dataset, danger_classify, select_datasets
from .loop import LoopHooks, LoopResult, adaptive_rl_loop
from .policy import optimize_policy_on_rom
from .schedule import PolicyCheckpoint, TrainConfig, convergence_check, warm_start

__all__ = [
    "Dataset", "danger_classify", "select_datasets", "LoopHooks", "LoopResult",
    "adaptive_rl_loop", "optimize_policy_on_rom", "PolicyCheckpoint", "TrainConfig",
    "convergence_check", "warm_start",
]
