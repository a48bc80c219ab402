"""Exception types raised across the package."""


class QuenchError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(QuenchError, ValueError):
    """Invalid lattice, tiling or bipartition."""


class PartitionOverlapError(GeometryError):
    pass


class PartitionGapError(GeometryError):
    pass


class InvalidBipartitionError(GeometryError):
    pass


class InvalidParameterError(QuenchError, ValueError):
    pass


class ConfigurationError(QuenchError, ValueError):
    """Inputs are individually valid but inconsistent with each other."""


class NumericalFailureError(QuenchError, ArithmeticError):
    """A dense linear-algebra routine failed or produced unusable output."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SingularityError(NumericalFailureError):
    """A matrix function is not finite on the spectrum (e.g. an inverse power
    of an operator whose smallest eigenvalue is below the positivity floor)."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message, {"min_eigenvalue": min_eigenvalue})
        self.min_eigenvalue = min_eigenvalue


class NonPositiveSpectrumError(NumericalFailureError):
    pass


class IndefiniteMatrixError(NumericalFailureError):
    pass


class PairingFailureError(NumericalFailureError):
    pass


class UnstableEnsembleError(QuenchError, RuntimeError):
    """Too many disorder realizations had to be skipped."""

    def __init__(self, message, skipped=0, total=0):
        super().__init__(message)
        self.skipped = skipped
        self.total = total
