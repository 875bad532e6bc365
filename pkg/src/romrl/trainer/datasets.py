"""Dataset ledger entries, danger classification and ensemble selection."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Dataset:
    """One collected episode as seen by the adaptive loop.

    Attributes
    ----------
    index : int
        Position in the ledger (collection order).
    record : EpisodeRecord
    series : TrainingSeries
        Reduced trajectory in the loop's chosen basis.
    summary : dict
        Recomputed performance numbers (``reduction``, ``cost``...).
    cost : float
        Full-plant cost used for ranking (lower is better; ``inf`` if diverged).
    danger : bool
    controller : deployed controller
    inputs : (n_t, n_inputs) controller inputs seen during the episode
    reference : bool
        Initial data (uncontrolled baseline, initial controller); never
        classified dangerous and never used as a policy warm-start source.
    """

    index: int
    record: object
    series: object
    summary: dict
    cost: float
    danger: bool
    controller: object = None
    inputs: np.ndarray = None
    reference: bool = False
    meta: dict = field(default_factory=dict)


def danger_classify(reduction, diverged, gamma_crit=0.05):
    """Dangerous iff the episode diverged or its reduction is strictly below ``gamma_crit``."""
    if diverged:
        return True
    return bool(reduction < gamma_crit)


def select_datasets(ledger, cap=6, stabilize=False, n_best=4):
    """Training ensemble: uncontrolled, previous episode and the best performers.

    The first ledger entry is the uncontrolled baseline. With stabilization
    on, dangerous datasets are excluded and the freed slots are filled with
    the most recent stable datasets not yet chosen.

    Returns
    -------
    list of Dataset
        Ordered by ledger index.
    """
    if not ledger:
        raise ValueError("ledger is empty")
    if cap < 2:
        raise ValueError("dataset cap must be at least 2")
    usable = [d for d in ledger if not (stabilize and d.danger)]
    chosen = {}

    def take(d):
        if len(chosen) < cap and d.index not in chosen:
            chosen[d.index] = d

    if usable and usable[0] is ledger[0]:
        take(ledger[0])
    if not (stabilize and ledger[-1].danger):
        take(ledger[-1])
    rest = sorted((d for d in usable if d.index not in chosen), key=lambda d: (d.cost, -d.index))
    for d in rest[:n_best]:
        take(d)
    if stabilize:
        for d in sorted(usable, key=lambda d: -d.index):
            take(d)
    return [chosen[i] for i in sorted(chosen)]
