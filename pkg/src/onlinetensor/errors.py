"""Exception types raised across the package."""


class ImaginaryResidue(ValueError):
    """A quantity that should be real came back with a non-negligible imaginary part."""


class DimensionMismatch(ValueError):
    pass


class NotSquare(ValueError):
    pass


class OffBlockMass(ValueError):
    """A block-diagonal matrix carries mass outside its diagonal blocks."""


class NotHermitianFaces(ValueError):
    pass


class NotPD(ValueError):
    pass


class ConvergenceFailure(RuntimeError):
    pass


class SpectralNormViolation(ValueError):
    """``eta * ||blkdiag(L)||`` exceeded 1.

    The offending value is kept in ``value``.
    """

    def __init__(self, value, message=None):
        self.value = float(value)
        super().__init__(message or f"eta * ||L|| = {self.value:.6g} > 1")


class InvalidBudget(ValueError):
    pass


class BudgetExceeded(ValueError):
    pass


class ParseError(ValueError):
    pass


class IsolatedNode(ValueError):
    pass


class DisconnectedAfterRetries(RuntimeError):
    pass


class ScaleMismatch(ValueError):
    pass


class IndexOutOfRange(IndexError):
    pass
