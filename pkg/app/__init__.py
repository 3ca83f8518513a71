"""App module - shared errors and tolerances."""
from app.errors import (
    EnclosureError, UsageError, SceneParseError, GeometryError,
    NotStrictlyConvex, ChartError, OverlapError, ProbeError,
    CoincidentPointsError, NumericalError, SingularSystemError, FitError,
    QuadratureError, FluxError, SweepError,
)
from app.tolerances import Tolerances, DEFAULT_TOLERANCES

__all__ = [
    "EnclosureError", "UsageError", "SceneParseError", "GeometryError",
    "NotStrictlyConvex", "ChartError", "OverlapError", "ProbeError",
    "CoincidentPointsError", "NumericalError", "SingularSystemError",
    "FitError", "QuadratureError", "FluxError", "SweepError",
    "Tolerances", "DEFAULT_TOLERANCES",
]
