import pytest

from app.errors import (CoincidentPointsError, EnclosureError, FitError, FluxError, GeometryError,
                        NotStrictlyConvex, NumericalError, OverlapError, ProbeError, SceneParseError,
                        SingularSystemError, SweepError, UsageError)
from app.tolerances import DEFAULT_TOLERANCES, Tolerances
from config_manager import exit_code_for


@pytest.mark.parametrize("error, code", [
    (UsageError("x"), 1),
    (SceneParseError("outer.radius", "bad"), 1),
    (GeometryError("x"), 3),
    (NotStrictlyConvex("x"), 3),
    (OverlapError("x"), 3),
    (ProbeError("x"), 3),
    (CoincidentPointsError("x"), 3),
    (NumericalError("x"), 2),
    (SingularSystemError("I - Y22", 8.0), 2),
    (FitError("x"), 2),
    (FluxError("x"), 2),
    (SweepError("x"), 2),
    (RuntimeError("x"), 2),
])
def test_exit_codes(error, code):
    assert exit_code_for(error) == code


def test_scene_parse_error_message():
    e = SceneParseError("cavities[1].radii", "must be positive", line=7)
    assert e.field == "cavities[1].radii"
    assert e.line == 7
    assert "cavities[1].radii (line 7)" in str(e)
    assert isinstance(e, UsageError)


def test_singular_system_error_mentions_lambda():
    e = SingularSystemError("Schur complement", 12.5)
    assert "Schur complement" in str(e)
    assert "12.5" in str(e)
    assert isinstance(e, EnclosureError)


def test_tolerance_overrides_cast_values():
    tol = DEFAULT_TOLERANCES.with_overrides({"route": "1e-4", "degenerate_count": 5.0})
    assert tol.route == pytest.approx(1e-4)
    assert tol.degenerate_count == 5
    assert isinstance(tol.degenerate_count, int)
    assert DEFAULT_TOLERANCES.route == 1e-3


def test_tolerance_overrides_reject_unknown_keys():
    with pytest.raises(KeyError):
        Tolerances().with_overrides({"rout": 1e-4})


def test_scene_relative_tolerances():
    tol = Tolerances(merge_factor=1e-3, eig_factor=2e-3)
    assert tol.merge_radius(4.0) == pytest.approx(4e-3)
    assert tol.eig_tol(4.0) == pytest.approx(5e-4)
