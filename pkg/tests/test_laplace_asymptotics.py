import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.errors import SingularSystemError, UsageError
from laplace_asymptotics import (LaplaceIntegralSpec, SHIPPED_SPECS, asymptotic_rows, check_hypotheses,
                                 degenerate_lower_bound_audit, error_slope, gamma_holder_remainder,
                                 holder_remainder_audit, laplace_audit, nondegenerate_asymptotic,
                                 quadrature_value, shipped_spec, stieltjes_check)


@pytest.mark.parametrize("lam", [4.0, 16.0, 8.0 + 2.0j])
def test_gaussian_quadrature(lam):
    result = quadrature_value(shipped_spec("gaussian"), lam)
    assert result.value == pytest.approx(np.pi / lam, rel=1e-10)
    assert result.reduced == result.value


def test_gaussian_asymptotic_is_exact():
    spec = shipped_spec("gaussian")
    ratio = nondegenerate_asymptotic(spec, 32.0) / quadrature_value(spec, 32.0).value
    assert ratio == pytest.approx(1.0, abs=1e-9)
    one_d = shipped_spec("gaussian_1d")
    assert quadrature_value(one_d, 9.0).value == pytest.approx(np.sqrt(np.pi / 9.0), rel=1e-10)
    assert nondegenerate_asymptotic(one_d, 9.0) == pytest.approx(np.sqrt(np.pi / 9.0), rel=1e-12)


def test_anisotropic_error_and_slope():
    spec = shipped_spec("anisotropic")
    lam = 8.0
    x = 5.0 / (8.0 * lam)
    row = asymptotic_rows(spec, [lam])[0]
    assert row["rel_error"] == pytest.approx(x / (1 + x), rel=1e-8)
    slope = error_slope(spec, [8.0, 16.0, 32.0, 64.0])["slope"]
    assert -1.05 < slope < -0.8


def test_finite_difference_hessian():
    spec = LaplaceIntegralSpec("fd", 2, lambda s: s[..., 0] ** 2 + 4 * s[..., 1] ** 2 + s[..., 0] * s[..., 1])
    assert_allclose(spec.phase_hessian(), [[2.0, 1.0], [1.0, 8.0]], atol=1e-5)


def test_degenerate_phase_has_no_leading_term():
    spec = shipped_spec("degenerate")
    with pytest.raises(SingularSystemError):
        nondegenerate_asymptotic(spec, 16.0)


def test_degenerate_levels_stay_positive():
    mus = np.geomspace(8.0, 64.0, 5)
    lams = mus + 1j * 0.1 * mus / np.log(mus)
    audit = degenerate_lower_bound_audit(shipped_spec("degenerate"), lams)
    assert audit["passed"]
    levels = audit["levels"]
    assert all(b > a for a, b in zip(levels, levels[1:]))
    # mu^(1/4) growth from the quartic direction
    assert levels[-1] / levels[0] == pytest.approx(8.0 ** 0.25, rel=0.1)


def test_holder_remainder_matches_gamma_formula():
    spec = shipped_spec("holder")
    lam = 16.0
    q = quadrature_value(spec, lam, tol=1e-9).value
    a = nondegenerate_asymptotic(spec, lam)
    assert q / a - 1 == pytest.approx(gamma_holder_remainder(lam), rel=1e-5)


def test_holder_audit():
    audit = holder_remainder_audit(shipped_spec("holder"), [8.0, 16.0, 32.0, 64.0])
    assert audit["exponent"] == pytest.approx(0.25, abs=0.02)
    assert audit["passed"]
    with pytest.raises(UsageError):
        holder_remainder_audit(shipped_spec("gaussian"), [8.0, 16.0, 32.0])


def test_stieltjes_form_matches_direct_quadrature():
    result = stieltjes_check(shipped_spec("gaussian_1d"), 8.0)
    assert result["rel_difference"] < 1e-6
    with pytest.raises(UsageError):
        stieltjes_check(shipped_spec("gaussian"), 8.0)


def test_hypotheses():
    report = check_hypotheses(shipped_spec("anisotropic"))
    assert report["passed"]
    assert report["minimum_at_center"]
    assert 1.0 <= report["quadratic_upper_bound"] <= 4.0
    assert report["amplitude_lower_bound"] >= 1.0

    negative = LaplaceIntegralSpec("negative", 1, lambda s: s[..., 0] ** 2, h1=lambda s: -np.ones(s.shape[:-1]))
    assert not check_hypotheses(negative)["passed"]


def test_translation_and_scaling():
    spec = shipped_spec("gaussian")
    moved = spec.translated((1.0, -2.0))
    assert_allclose(moved.origin, (1.0, -2.0))
    assert quadrature_value(moved, 6.0).value == pytest.approx(np.pi / 6.0, rel=1e-10)
    steeper = spec.scaled(2.0)
    assert quadrature_value(steeper, 6.0).value == pytest.approx(np.pi / 12.0, rel=1e-10)
    assert nondegenerate_asymptotic(steeper, 6.0) == pytest.approx(np.pi / 12.0, rel=1e-12)


def test_shifted_minimum_value():
    spec = shipped_spec("shifted_quadratic")
    assert spec.tau == pytest.approx(1.0)
    result = quadrature_value(spec, 5.0)
    assert result.reduced == pytest.approx(np.pi / 5.0, rel=1e-10)
    assert result.value == pytest.approx(np.exp(-5.0) * np.pi / 5.0, rel=1e-10)


@pytest.mark.parametrize("make", [
    lambda: LaplaceIntegralSpec("cube", 3, lambda s: np.sum(s * s, axis=-1)),
    lambda: LaplaceIntegralSpec("offset", 2, lambda s: np.sum(s * s, axis=-1), center=(0.0,)),
    lambda: shipped_spec("bessel"),
])
def test_spec_validation(make):
    with pytest.raises(UsageError):
        make()


def test_quadrature_needs_positive_real_part():
    with pytest.raises(UsageError):
        quadrature_value(shipped_spec("gaussian"), -1.0 + 3.0j)


def test_shipped_specs_build():
    for name in SHIPPED_SPECS:
        assert shipped_spec(name).name == name


@pytest.mark.slow
def test_full_laplace_audit():
    result = laplace_audit()
    summary = result["summary"]
    assert summary["gaussian_passed"]
    assert summary["anisotropic_passed"]
    assert summary["holder"]["passed"]
    assert summary["passed"]
    assert len(result["rows"]) == 8
