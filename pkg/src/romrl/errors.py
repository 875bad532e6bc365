"""Exception types shared across the toolkit."""


class RomRLError(Exception):
    """Base class for toolkit errors."""


class ConfigurationError(RomRLError, ValueError):
    """Invalid configuration, shapes, or arguments."""


class DivergenceError(RomRLError, FloatingPointError):
    """A simulation produced non-finite or runaway values.

    Attributes
    ----------
    time : float or None
        Simulation time at which the blow-up was detected.
    stage : int or None
        RK4 stage index (1-4) when raised from inside an integrator step.
    """

    def __init__(self, message, time=None, stage=None):
        super().__init__(message)
        self.time = time
        self.stage = stage


class RankDeficiencyError(RomRLError, ValueError):
    """Regression data matrix is numerically singular."""

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = tuple(rows)


class UnsupportedOperationError(RomRLError, NotImplementedError):
    """Operation is not defined for the given object (e.g. impulse on a nonlinear plant)."""


class TapeMismatchError(RomRLError, ValueError):
    """Adjoint seed does not match the recorded forward pass."""


class DataIntegrityError(RomRLError):
    """Stored artifact does not match its recorded hash or header."""


class StabilizationFailure(RomRLError):
    """Adaptive loop could not find any stable data to continue from."""
