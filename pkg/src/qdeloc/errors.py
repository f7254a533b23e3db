"""Exception types shared across the package."""


class QdelocError(Exception):
    """Base class for all package-specific errors."""


class CapacityError(QdelocError):
    """A requested computation exceeds a configured resource cap."""


class DegeneracyError(QdelocError):
    """A moment Gram matrix is singular for the given (dimension, order)."""


class ConfigurationError(QdelocError):
    """Mutually inconsistent or invalid configuration values."""


class LayoutError(QdelocError):
    """A gate placement does not fit the circuit layout."""


class UnsupportedRegionError(QdelocError):
    """A subsystem choice outside the supported contiguous-block form."""


class DomainError(QdelocError):
    """An argument outside the mathematical domain of an operation."""


class FitWindowError(QdelocError):
    """Not enough usable points, or invalid data, inside a fit window."""
