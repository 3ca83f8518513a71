import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.errors import FitError, FluxError, ProbeError, UsageError
from bie_core import assemble_system, resolvent_M
from forward_indicator import (DensitySolution, FluxModel, F_k, amplitude, boundary_residuals,
                               density_audit, density_deviation, evaluate_indicator, flux_bound_check,
                               indicator_direct, indicator_terms, laplace_flux, load_external_flux,
                               perturb_data, scene_flux, shifted_layer_potential, solve_densities,
                               solve_densities_neumann, time_rule, w0_trace)

PROBE = [3.0, 0.0, 0.0]


# =============================================================================
# Flux
# =============================================================================

@pytest.mark.parametrize("kwargs", [
    dict(kind="pulse"),
    dict(T=0.0),
    dict(value=-1.0),
    dict(kind="c1_profile", modulation=1.0),
    dict(kind="c1_profile", f0=0.0),
    dict(kind="external"),
])
def test_flux_model_validation(kwargs):
    with pytest.raises(UsageError):
        FluxModel(**kwargs)


def test_constant_flux_transform():
    nodes = np.eye(3)
    g = laplace_flux(FluxModel(value=3.0, T=0.5), 2.0, nodes)
    assert_allclose(g, 3.0 * (1 - np.exp(-2.0)) / 4.0)


def test_c1_flux_transform():
    model = FluxModel(kind="c1_profile", f0=1.0, slope=0.5, T=1.0)
    g = laplace_flux(model, 1.0, np.eye(3))
    exact = (1 - np.exp(-1.0)) + 0.5 * (1 - 2 * np.exp(-1.0))
    assert_allclose(g, exact, rtol=1e-12)


def test_c1_flux_modulation_follows_axis():
    model = FluxModel(kind="c1_profile", f0=1.0, modulation=0.5, axis=(0.0, 0.0, 2.0))
    g = laplace_flux(model, 3.0, np.array([[0.0, 0.0, 2.0], [0.0, 0.0, -2.0], [2.0, 0.0, 0.0]]))
    assert g[0].real == pytest.approx(3 * g[1].real)
    assert g[2].real == pytest.approx(2 * g[1].real)


def test_flux_rejects_non_decaying_lambda():
    with pytest.raises(FluxError):
        laplace_flux(FluxModel(), 1.0 + 2.0j, np.eye(3))


def test_time_rule_integrates_exponential():
    lam2 = 400.0
    t, w = time_rule(1.0, lam2)
    assert np.sum(w * np.exp(-lam2 * t)) == pytest.approx((1 - np.exp(-lam2)) / lam2, rel=1e-12)


@pytest.mark.parametrize("model", [
    FluxModel(value=2.0),
    FluxModel(kind="c1_profile", f0=1.0, slope=0.5, modulation=0.2),
])
def test_flux_bound_check(model):
    nodes = np.array([[2.0, 0.0, 0.0], [0.0, 0.0, 2.0], [0.0, -2.0, 0.0]])
    report = flux_bound_check(model, 4.0, nodes)
    assert report["passed"]
    assert report["min_re_lam2_g"] >= report["inf_f0"] - report["bound"]


def _write_flux_csv(path, rows):
    lines = ["re_lambda,im_lambda,node,re_g,im_g"] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def test_external_flux_lookup(tmp_path):
    path = tmp_path / "flux.csv"
    _write_flux_csv(path, [(2.0, 0.0, 1, 0.5, 0.1), (2.0, 0.0, 0, 0.25, 0.0), (3.0, 0.0, 0, 1.0, 0.0),
                           (3.0, 0.0, 1, 1.0, 0.0)])
    table = load_external_flux(path)
    assert_allclose(table.lookup(complex(2.0), 2), [0.25, 0.5 + 0.1j])

    model = FluxModel(kind="external", source=str(path))
    assert_allclose(laplace_flux(model, 3.0, np.eye(3)[:2]), [1.0, 1.0])
    with pytest.raises(FluxError):
        laplace_flux(model, 4.0, np.eye(3)[:2])
    with pytest.raises(FluxError):
        laplace_flux(model, 3.0, np.eye(3))


def test_external_flux_bad_files(tmp_path):
    with pytest.raises(FluxError):
        load_external_flux(tmp_path / "missing.csv")

    gaps = tmp_path / "gaps.csv"
    _write_flux_csv(gaps, [(2.0, 0.0, 0, 1.0, 0.0), (2.0, 0.0, 2, 1.0, 0.0)])
    with pytest.raises(FluxError):
        load_external_flux(gaps)

    columns = tmp_path / "columns.csv"
    columns.write_text("lam,node,g\n1.0,0,1.0\n")
    with pytest.raises(FluxError):
        load_external_flux(columns)


def test_perturbation_is_seeded(scene_loader):
    scene = scene_loader("concentric", 1)
    a = scene_flux(scene, 4.0, noise=0.01, seed=7)
    b = scene_flux(scene, 4.0, noise=0.01, seed=7)
    clean = scene_flux(scene, 4.0)
    assert_allclose(a, b)
    assert not np.allclose(a, clean)
    assert np.max(np.abs(a / clean - 1)) < 0.1
    assert perturb_data(clean, 0.0, np.random.default_rng(0)) is clean


# =============================================================================
# Densities
# =============================================================================

def test_direct_solve_satisfies_system(scene_loader):
    scene = scene_loader("concentric", 1)
    g = scene_flux(scene, 4.0)
    dens = solve_densities(scene, 4.0, g)
    assert dens.residual < 1e-10
    assert dens.cavity_residual < 1e-10
    assert density_deviation(dens) < 0.5


@pytest.mark.parametrize("name", ["no_cavity", "concentric"])
def test_jump_relations_hold_off_surface(scene_loader, name):
    scene = scene_loader(name, 2)
    dens = solve_densities(scene, 1.0, scene_flux(scene, 1.0))
    res = boundary_residuals(scene, dens)
    assert res["neumann"] < 1e-3
    assert res["robin"] < 1e-3


@pytest.mark.parametrize("name", ["two_cavity", "ellipsoid_outer"])
def test_jump_relations_without_symmetry(scene_loader, name):
    scene = scene_loader(name, 2)
    dens = solve_densities(scene, 1.0, scene_flux(scene, 1.0))
    res = boundary_residuals(scene, dens)
    assert res["neumann"] < 0.05
    assert res["robin"] < 0.1


def test_jump_check_flags_wrong_densities(scene_loader):
    scene = scene_loader("concentric", 2)
    dens = solve_densities(scene, 1.0, scene_flux(scene, 1.0))
    scaled = DensitySolution(1.2 * dens.phi, dens.psi, dens.lam, dens.g, 0.0, 0.0)
    assert boundary_residuals(scene, scaled)["neumann"] > 0.05
    flipped = DensitySolution(dens.phi, -dens.psi, dens.lam, dens.g, 0.0, 0.0)
    assert boundary_residuals(scene, flipped)["robin"] > 0.5


def test_shifted_potential_matches_trace(scene_loader):
    scene = scene_loader("concentric", 2)
    dens = solve_densities(scene, 2.0, scene_flux(scene, 2.0))
    trace = shifted_layer_potential(scene, dens, scene.outer, 0.0, -1.0)
    assert_allclose(trace, w0_trace(scene, dens), rtol=1e-10)


def test_neumann_iteration_agrees_with_direct_solve(scene_loader):
    scene = scene_loader("concentric", 1)
    g = scene_flux(scene, 4.0)
    blocks = assemble_system(scene, 4.0)
    direct = solve_densities(scene, 4.0, g, blocks)
    iterated = solve_densities_neumann(scene, 4.0, g, terms=60, blocks=blocks)
    assert_allclose(iterated.phi, direct.phi, rtol=1e-8)
    assert_allclose(iterated.psi, direct.psi, rtol=1e-8, atol=1e-12 * np.abs(direct.psi).max())


def test_no_cavity_densities(scene_loader):
    scene = scene_loader("no_cavity", 1)
    dens = solve_densities(scene, 4.0, scene_flux(scene, 4.0))
    assert dens.psi.shape == (0,)
    assert dens.residual < 1e-10


# =============================================================================
# Indicator
# =============================================================================

def test_unsymmetrized_kernel_route_matches_cavity_route(scene_loader):
    scene = scene_loader("concentric", 1)
    lam = 8.0
    blocks = assemble_system(scene, lam)
    dens = solve_densities(scene, lam, scene_flux(scene, lam), blocks)
    split = resolvent_M(scene, lam, blocks)
    direct = indicator_direct(scene, dens, PROBE)
    terms = indicator_terms(scene, PROBE, lam, dens.phi, split, symmetric=False)
    assert terms.I0 == pytest.approx(direct, rel=1e-8)
    assert terms.I0 == pytest.approx(lam * terms.I00 + terms.I01)


def test_symmetric_kernel_route_agrees(scene_loader):
    value = evaluate_indicator(scene_loader("concentric", 2), PROBE, 8.0)
    assert value.I0_kernel_route is not None
    assert value.route_residual < 1e-3
    assert value.density_residual < 1e-10


@pytest.mark.slow
@pytest.mark.parametrize("name, p", [
    ("two_cavity", [5.0, 0.0, 0.0]),
    ("ellipsoid_outer", [4.0, 0.0, 0.0]),
])
@pytest.mark.parametrize("lam", [8.0, 16.0, 24.0, 32.0, 40.0])
def test_routes_agree_at_full_resolution(scene_loader, name, p, lam):
    value = evaluate_indicator(scene_loader(name, 3), p, lam)
    assert value.I0_direct != 0
    assert value.route_residual <= 1e-3


def test_outer_route_agrees_at_low_frequency(scene_loader):
    scene = scene_loader("concentric", 2)
    lam = 0.5
    dens = solve_densities(scene, lam, scene_flux(scene, lam))
    cavity = indicator_direct(scene, dens, PROBE, method="cavity")
    outer = indicator_direct(scene, dens, PROBE, method="outer")
    assert outer == pytest.approx(cavity, rel=1e-3)


def test_indicator_errors(scene_loader):
    scene = scene_loader("concentric", 1)
    dens = solve_densities(scene, 4.0, scene_flux(scene, 4.0))
    with pytest.raises(ProbeError):
        indicator_direct(scene, dens, [1.0, 0.0, 0.0])
    with pytest.raises(UsageError):
        indicator_direct(scene, dens, PROBE, method="volume")
    with pytest.raises(UsageError):
        F_k(scene, resolvent_M(scene, 4.0), PROBE, 4.0, 2)


@pytest.mark.parametrize("lam", [0.5, 1.0, 1.5])
def test_outer_route_vanishes_without_cavities(scene_loader, lam):
    # the outer route carries quadrature error; beyond lam ~ 1.5 at this probe point
    # the cavity signal falls under it
    p = [4.0, 0.0, 0.0]
    empty = scene_loader("no_cavity", 3)
    dens = solve_densities(empty, lam, scene_flux(empty, lam))
    null = indicator_direct(empty, dens, p, method="outer")
    signal = evaluate_indicator(scene_loader("concentric", 3), p, lam, kernel_route=False).I0_direct
    assert abs(signal) > 0
    assert abs(null) <= 1e-6 * abs(signal)


def test_indicator_without_cavities(scene_loader):
    value = evaluate_indicator(scene_loader("no_cavity", 1), PROBE, 6.0)
    assert value.I0_direct == 0
    assert value.I0_kernel_route is None
    assert np.isnan(value.route_residual)
    assert value.row()["log_abs_I0"] == float("-inf")


def test_F_k_blocks_sum_to_full(scene_loader):
    scene = scene_loader("two_cavity", 1)
    split = resolvent_M(scene, 6.0)
    p = [5.0, 0.0, 0.0]
    full = F_k(scene, split, p, 6.0, 1)
    s0 = scene.cavity_slice(0)
    parts = F_k(scene, split, p, 6.0, 1, blocks=(0, 0)) + F_k(scene, split, p, 6.0, 1, blocks=(0, 1))
    assert_allclose(parts, full[s0], rtol=1e-10, atol=1e-14 * np.abs(full).max())


def test_indicator_amplitude_is_positive(scene_loader):
    scene = scene_loader("concentric", 2)
    value = evaluate_indicator(scene, PROBE, 12.0, kernel_route=False)
    a = amplitude(value, 4.0, scene.flux.beta0)
    assert a.real > 0
    assert abs(a.imag) <= 1e-8 * abs(a)
    row = value.row()
    assert row["mu"] == 12.0
    assert row["log_abs_I0"] == pytest.approx(np.log(abs(value.I0_direct)))


# =============================================================================
# Density audit
# =============================================================================

def test_density_deviation_decays_like_inverse_mu(scene_loader):
    result = density_audit(scene_loader("concentric", 2), [8.0, 16.0, 32.0, 64.0])
    assert result["passed"]
    assert result["deviation_slope"] <= -0.8
    assert result["deviation_slope"] == pytest.approx(-1.0, abs=0.15)
    assert result["norm_slope"] == pytest.approx(-1.0, abs=0.15)
    assert [row["mu"] for row in result["rows"]] == [8.0, 16.0, 32.0, 64.0]
    assert all(row["residual"] < 1e-10 for row in result["rows"])


def test_density_audit_needs_three_points(scene_loader):
    with pytest.raises(FitError):
        density_audit(scene_loader("concentric", 1), [8.0, 16.0])
