"""Exception hierarchy shared by every module."""


class TomographyError(ValueError):
    """Base class for all domain errors raised by optomo."""


class DimensionError(TomographyError):
    """Operands have incompatible shapes or leg structures."""


class ValidationError(TomographyError):
    """An object violates a structural invariant (positivity, normalization, ...)."""


class IncompleteError(TomographyError):
    """A frame or design is not informationally complete on the requested subspace."""
