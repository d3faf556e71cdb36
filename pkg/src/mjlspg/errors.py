"""Exception types raised by solvers and optimizers."""


class NotStabilizing(Exception):
    """The gain schedule does not stabilize the closed loop in mean square."""


class NoConvergence(Exception):
    """A fixed-point iteration hit its iteration cap without converging."""


class SingularCorrelation(Exception):
    """A state-correlation block is numerically singular.

    Carries the offending mode index in ``args[1]`` when known.
    """

    def __init__(self, message, mode=None):
        super().__init__(message)
        self.mode = mode


class DivergenceDetected(Exception):
    """An optimization run blew past its cost guard.

    The partial trace accumulated before the abort is attached as
    ``trace`` so callers can still inspect or persist it.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NonErgodic(Exception):
    """The transition matrix has no unique limiting distribution."""
