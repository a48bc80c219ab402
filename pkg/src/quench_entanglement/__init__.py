"""Logarithmic negativity after a quench in disordered harmonic-oscillator lattices."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    GeometryError,
    InvalidParameterError,
    NumericalFailureError,
    QuenchError,
    SingularityError,
    UnstableEnsembleError,
)

__all__ = [
    "__version__",
    "ConfigurationError",
    "GeometryError",
    "InvalidParameterError",
    "NumericalFailureError",
    "QuenchError",
    "SingularityError",
    "UnstableEnsembleError",
]
