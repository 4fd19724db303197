"""Shared exception and warning types."""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of the operation."""


class BoxMismatchError(ValueError):
    """Two operators or vectors live on different lattice boxes."""


class ConvergenceError(RuntimeError):
    """An iterative kernel failed to reach its tolerance.

    Carries the last measured defect in ``defect``.
    """

    def __init__(self, msg, defect=None):
        super().__init__(msg)
        self.defect = defect


class ArcError(ValueError):
    """An arc misses the relevant spectrum or is malformed."""


class PrecisionLoss(UserWarning):
    """Truncation tails are large enough to threaten stated tolerances."""
