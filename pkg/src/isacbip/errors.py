"""Exception types shared across the package."""


class IsacBipError(Exception):
    """Base class for all package errors."""


class ConfigError(IsacBipError):
    """Invalid or inconsistent configuration."""


class GeometryError(IsacBipError):
    """Degenerate sensing geometry (rank-deficient or zero-range)."""


class UnobservableVelocityError(GeometryError):
    """Angle diversity too low to resolve the 2D velocity vector."""


class NoPeakError(IsacBipError):
    """Spectrum has no usable peak (e.g. all-zero input)."""


class FormatError(IsacBipError):
    """Malformed on-disk sample or manifest."""
