"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain an operation is defined on."""


class ValidationError(DomainError):
    """A configuration or experiment object violates one of its invariants."""


class FitError(RuntimeError):
    """Identification could not produce an estimate."""
