"""
Errors - exception hierarchy for the heat enclosure toolkit

Every error carries the process exit code the command line front-end reports
when it escapes a command: 1 usage, 2 numerical failure, 3 assumption violation.
"""


class EnclosureError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 2


# =============================================================================
# Usage
# =============================================================================

class UsageError(EnclosureError):
    """Bad command line input or configuration values."""

    exit_code = 1


class SceneParseError(UsageError):
    """A scene document is malformed.

    Args:
        field: dotted field path, e.g. ``cavities[1].radii``
        message: what is wrong with it
        line: 1-based YAML line when known
    """

    def __init__(self, field: str, message: str, line: int = None):
        self.field = field
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{field}{where}: {message}")


# =============================================================================
# Geometry and assumptions
# =============================================================================

class GeometryError(EnclosureError):
    """Invalid geometric input or a violated scene assumption."""

    exit_code = 3


class NotStrictlyConvex(GeometryError):
    """A cavity surface failed the strict convexity audit."""


class ChartError(GeometryError):
    """A local graph chart cannot be built at the requested resolution."""


class OverlapError(GeometryError):
    """Two cavities touch or overlap, or a cavity leaves the outer domain."""


class ProbeError(GeometryError):
    """A probe point is not strictly outside the closed outer domain."""


class CoincidentPointsError(GeometryError):
    """A kernel was evaluated at coincident points."""


# =============================================================================
# Numerics
# =============================================================================

class NumericalError(EnclosureError):
    """A numerical stage failed."""

    exit_code = 2


class SingularSystemError(NumericalError):
    """A dense solve met a singular matrix."""

    def __init__(self, what: str, lam: complex = None):
        self.lam = lam
        at = f" at lambda={lam:.6g}" if lam is not None else ""
        super().__init__(f"singular system in {what}{at}")


class FitError(NumericalError):
    """A regression could not be carried out."""


class QuadratureError(NumericalError):
    """An adaptive quadrature did not converge."""


class FluxError(NumericalError):
    """The Laplace-transformed flux is not defined at the given lambda."""


class SweepError(NumericalError):
    """Every sample of a sweep failed."""
