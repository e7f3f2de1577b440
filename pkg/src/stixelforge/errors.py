"""Exception hierarchy. Every failure the library can signal is a subclass of
StixelForgeError, so callers can distinguish library errors from genuine bugs."""


class StixelForgeError(Exception):
    """Base class for all errors raised by this package."""


class InvariantViolation(StixelForgeError):
    """A value type was constructed with fields that violate its invariants."""


# geometry
class BehindCameraError(StixelForgeError):
    """Point is at or behind the camera plane and cannot be projected."""


class DegenerateHullError(StixelForgeError):
    """Input points are collinear/coplanar with the origin; no 3D hull exists."""


# ground fitting
class InsufficientPointsError(StixelForgeError):
    """Fewer than three points were supplied for a plane fit."""


class NoModelFoundError(StixelForgeError):
    """Every sampled point triple was degenerate; no plane hypothesis found."""


class GroundNotFoundError(StixelForgeError):
    """Ground plane support fell below the configured inlier fraction."""


# stixel extraction
class DegenerateStixelError(StixelForgeError):
    """Extracted stixel is shorter than the configured minimum pixel height."""


# grids / losses / metrics
class GridMismatchError(StixelForgeError):
    """World and grid (or two worlds) disagree on image dims or stride."""


class DimensionMismatchError(StixelForgeError):
    """Matrix operands have incompatible shapes."""


class NonFiniteInputError(StixelForgeError):
    """A matrix contains NaN or infinite entries."""


class ColumnMismatchError(StixelForgeError):
    """Stixels being compared live in different grid columns."""


class LengthMismatchError(StixelForgeError):
    """Per-column sequences being compared have different lengths."""


# file formats
class TruncatedFileError(StixelForgeError):
    """Byte stream ended before a complete record."""


class MissingKeyError(StixelForgeError):
    """A required calibration key is absent."""


class MalformedMatrixError(StixelForgeError):
    """A calibration matrix has the wrong element count or non-numeric data."""


class ParseError(StixelForgeError):
    """Structured text could not be parsed; message carries the line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class BadMagicError(StixelForgeError):
    """Binary blob does not start with the expected magic bytes."""


class VersionUnsupportedError(StixelForgeError):
    """Binary blob declares a format version this reader does not handle."""
