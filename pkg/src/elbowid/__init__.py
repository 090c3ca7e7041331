"""Single-joint elbow simulator with perturbation-based impedance identification."""

from elbowid.errors import DomainError, FitError, ValidationError

__version__ = "0.1.0"

__all__ = ["DomainError", "FitError", "ValidationError", "__version__"]
