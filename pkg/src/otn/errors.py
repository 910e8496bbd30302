"""Exception types shared across the package."""


class OtnError(Exception):
    """Base class for all package errors."""


class ConfigurationError(OtnError):
    """Invalid specification or configuration input."""


class NumericalError(OtnError):
    """A numerical routine failed to converge or produced non-finite values."""


class ContractionError(NumericalError):
    """Tensor-network contraction could not proceed (e.g. singular-value underflow)."""


class DegeneracyError(NumericalError):
    """Leading eigenvalue is degenerate within tolerance; boundary vectors undefined."""


class SizeError(OtnError):
    """Requested object exceeds a hard size cap."""


class StateError(OtnError):
    """A density matrix violates its contracts (hermiticity, trace, positivity)."""


class FitError(NumericalError):
    """Nonlinear fit failed to converge from every starting point."""
