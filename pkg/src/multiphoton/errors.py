class ResonanceNotFound(ValueError):
    """The quasienergy gap has no interior minimum in the search window."""


class ConvergenceError(RuntimeError):
    """A truncation or time-stepping loop hit its limit before converging."""


class InsufficientDataError(ValueError):
    """Too few points, peaks or pairs to carry out a fit."""
