"""Exception types shared across the library."""


class DomainError(ValueError):
    """An input lies outside the mathematical domain of an operation."""


class SingularityError(ArithmeticError):
    """An integration ran into a singular point (q-root or step-size underflow)."""


class InvalidSolutionError(ValueError):
    """A supplied solution value is unusable, e.g. G <= 0 away from the origin."""


class NoSolutionError(ValueError):
    """Implied-vol inversion has no solution for the quoted price.

    ``reason`` is ``"below_intrinsic"`` or ``"above_upper_bound"``.
    """

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


class DecompositionError(RuntimeError):
    """A covariance factorization failed even after jitter retries.

    ``jitter_tried`` records the diagonal loadings that were attempted.
    """

    def __init__(self, message: str, jitter_tried=()):
        super().__init__(message)
        self.jitter_tried = tuple(jitter_tried)
