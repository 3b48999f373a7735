"""Exception types shared across the package."""


class MixpostError(Exception):
    """Base class for all package errors."""


class DimensionError(MixpostError):
    """Operands have incompatible parameter-space dimensions."""


class KernelError(MixpostError):
    """Kernel parameters are invalid (non-SPD covariance, bad scale, ...)."""


class EmptyMeasureError(MixpostError):
    """A discrete measure would have no atoms carrying mass."""


class DomainError(MixpostError):
    """An argument lies outside the mathematical domain of an operation."""
