"""Loop settings, convergence test and warm-start bookkeeping."""

import logging
from dataclasses import dataclass, field

from ..errors import ConfigurationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Outer-loop schedule.

    ``rom_epochs`` and ``policy_steps`` are ``(first episode, later episodes)``
    pairs. ``modes`` lists the residual training mode per episode; the last
    entry repeats.
    """

    iterations: int = 4
    rom_epochs: tuple = (2000, 500)
    policy_steps: tuple = (150, 50)
    modes: tuple = ("open", "open", "closed")
    convergence: float = 0.15
    cap: int = 6
    warm_start: bool = True
    stabilize: bool = False
    seed: int = 0
    rom_lr: float = 1e-3
    policy_lr: float = 1e-3
    segment_steps: int = None

    def __post_init__(self):
        if self.iterations < 0 or min(self.rom_epochs) < 0 or min(self.policy_steps) < 0:
            raise ConfigurationError("iterations, epochs and steps must be non-negative")
        if self.cap < 2:
            raise ConfigurationError("dataset cap must be at least 2")
        if not self.modes or any(m not in ("open", "closed") for m in self.modes):
            raise ConfigurationError("modes must be a non-empty list of 'open'/'closed'")
        if not 0 < self.convergence < 1:
            raise ConfigurationError("convergence fraction must lie in (0, 1)")

    def mode(self, episode):
        return self.modes[min(episode, len(self.modes) - 1)]

    def epochs(self, episode):
        return self.rom_epochs[0] if episode == 0 else self.rom_epochs[1]

    def steps(self, episode):
        return self.policy_steps[0] if episode == 0 else self.policy_steps[1]

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        for k in ("rom_epochs", "policy_steps", "modes"):
            d[k] = list(d[k])
        return d


def relative_improvement(history):
    prev, cur = float(history[-2]), float(history[-1])
    if prev == 0.0:
        return 0.0
    return (prev - cur) / abs(prev)


def convergence_check(*histories, fraction=0.15):
    """``"stop"`` when every tracked history improved by less than ``fraction``.

    Each history needs at least two entries; a worsening counts as a
    negative improvement and therefore also signals stop.
    """
    if not histories:
        raise ValueError("no history given")
    for h in histories:
        if len(h) < 2:
            raise ValueError("convergence check needs at least two history entries")
    if all(relative_improvement(h) < fraction for h in histories):
        return "stop"
    return "continue"


@dataclass
class PolicyCheckpoint:
    episode: int
    params: object
    danger: bool = False
    meta: dict = field(default_factory=dict)


def warm_start(checkpoints, stabilize=False, fresh=None):
    """Starting parameters for the next policy update.

    Parameters
    ----------
    checkpoints : list of PolicyCheckpoint
        Chronological; ``danger`` marks policies whose deployment was dangerous.
    stabilize : bool
        Skip dangerous checkpoints and start from the most recent stable one.
    fresh : callable returning a parameter vector, optional
        Used when no usable checkpoint exists.

    Returns
    -------
    (params, int or None)
        Parameters (a copy) and the episode they come from (``None`` for fresh).
    """
    for ck in reversed(checkpoints):
        if stabilize and ck.danger:
            continue
        return ck.params.copy(), ck.episode
    if fresh is None:
        raise ConfigurationError("no checkpoint to warm-start from and no initializer given")
    log.info("no usable policy checkpoint; starting from a fresh initialization")
    return fresh(), None
