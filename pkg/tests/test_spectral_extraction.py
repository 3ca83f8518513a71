import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.errors import FitError, ProbeError, SweepError, UsageError
from path_oracle import min_broken_path
from spectral_extraction import (convergence_report, extract_length, extraction_record,
                                 fit_log_indicator, lambda_grid, mu_ceiling, sweep)

PROBE = [3.0, 0.0, 0.0]


# =============================================================================
# Grids
# =============================================================================

def test_real_axis_grid():
    grid = lambda_grid("real", (8.0, 40.0), 9)
    assert grid.region == "real_axis"
    assert grid.im_profile == "zero"
    assert len(grid.lams) == 9
    assert grid.lams[0] == 8.0 and grid.lams[-1] == pytest.approx(40.0)
    assert all(lam.imag == 0 for lam in grid.lams)
    ratios = np.diff(np.log([lam.real for lam in grid.lams]))
    assert_allclose(ratios, ratios[0])


def test_sector_grid_sits_on_the_edge():
    grid = lambda_grid("sector", (4.0, 16.0), 5, delta0=2.0)
    assert grid.im_profile == "sector_edge"
    assert all(s.in_region() for s in grid.samples)
    assert_allclose([lam.imag for lam in grid.lams], [lam.real / 2.0 for lam in grid.lams])


def test_log_region_grid():
    grid = lambda_grid("log", (4.0, 32.0), 4, delta1=0.1)
    mus = np.array([lam.real for lam in grid.lams])
    assert_allclose([lam.imag for lam in grid.lams], 0.1 * mus / np.log(mus))
    sector = lambda_grid("sector", (4.0, 32.0), 4, im_profile="log_edge", delta0=2.0, delta1=0.1)
    assert sector.region == "sector"


@pytest.mark.parametrize("args, kwargs", [
    (("disk", (8.0, 40.0), 9), {}),
    (("real", (8.0, 40.0), 2), {}),
    (("real", (40.0, 8.0), 9), {}),
    (("real", (0.0, 8.0), 9), {}),
    (("log", (2.0, 8.0), 9), {}),
    (("real", (8.0, 40.0), 9), {"im_profile": "sector_edge"}),
    (("log", (8.0, 40.0), 9), {"im_profile": "sector_edge"}),
    (("real", (8.0, 40.0), 9), {"im_profile": "spiral"}),
])
def test_lambda_grid_rejects_bad_input(args, kwargs):
    with pytest.raises(UsageError):
        lambda_grid(*args, **kwargs)


# =============================================================================
# Fits
# =============================================================================

def test_fit_recovers_exact_model():
    mu = np.geomspace(8.0, 40.0, 9)
    fit = fit_log_indicator(mu, -4.0 * mu + 2.0 * np.log(mu) + 1.0)
    assert fit.l_hat == pytest.approx(4.0, rel=1e-10)
    assert fit.a == pytest.approx(2.0, rel=1e-8)
    assert fit.b == pytest.approx(1.0, rel=1e-7)
    assert fit.residual < 1e-10
    assert fit.n_samples == 9


def test_fit_drops_non_finite_samples():
    mu = np.array([8.0, 10.0, 12.0, 14.0, 16.0])
    y = -3.0 * mu
    y[2] = -np.inf
    fit = fit_log_indicator(mu, y)
    assert fit.n_samples == 4
    assert fit.l_hat == pytest.approx(3.0, rel=1e-8)


@pytest.mark.parametrize("mu, y", [
    ([8.0, 10.0, 12.0], [-1.0, -2.0, -3.0]),
    ([8.0, 8.0, 8.0, 8.0], [-1.0, -1.0, -1.0, -1.0]),
    ([8.0, 10.0, 12.0, 14.0], [8.0, 10.0, 12.0, 14.0]),
])
def test_fit_errors(mu, y):
    with pytest.raises(FitError):
        fit_log_indicator(mu, y)


# =============================================================================
# Sweeps
# =============================================================================

def test_sweep_is_independent_of_worker_count(scene_loader):
    scene = scene_loader("concentric", 1)
    grid = lambda_grid("real", (6.0, 12.0), 4)
    serial = sweep(scene, PROBE, grid, workers=1, kernel_route=False)
    pooled = sweep(scene, PROBE, grid, workers=2, kernel_route=False)
    assert serial.oracle_l == pytest.approx(4.0, rel=1e-9)
    for a, b in zip(serial.values, pooled.values):
        assert b.I0_direct == pytest.approx(a.I0_direct, rel=1e-12)
    assert serial.failures == {}
    assert len(serial.rows()) == 4
    assert all(a > 0 for a in serial.normalized_real_parts(4.0))


def test_sweep_fails_when_flux_transform_diverges(scene_loader):
    # with delta0 = 0.5 every sample has Re lambda^2 < 0
    grid = lambda_grid("sector", (6.0, 12.0), 3)
    with pytest.raises(SweepError):
        sweep(scene_loader("concentric", 1), PROBE, grid, kernel_route=False)


def test_sweep_rejects_inner_probe(scene_loader):
    with pytest.raises(ProbeError):
        sweep(scene_loader("concentric", 1), [0.0, 0.0, 0.0], lambda_grid("real", (6.0, 12.0), 3))


def test_noisy_sweeps_are_reproducible(scene_loader):
    scene = scene_loader("concentric", 1)
    grid = lambda_grid("real", (6.0, 12.0), 3)
    a = sweep(scene, PROBE, grid, kernel_route=False, noise=0.01, seed=3, check=False)
    b = sweep(scene, PROBE, grid, workers=3, kernel_route=False, noise=0.01, seed=3, check=False)
    c = sweep(scene, PROBE, grid, kernel_route=False, noise=0.01, seed=4, check=False)
    for x, y in zip(a.values, b.values):
        assert y.I0_direct == pytest.approx(x.I0_direct, rel=1e-12)
    assert a.values[0].I0_direct != c.values[0].I0_direct
    assert a.oracle_l is None


def test_sweep_with_finer_data_scene(scene_loader):
    scene = scene_loader("concentric", 1)
    grid = lambda_grid("real", (6.0, 10.0), 3)
    coarse = sweep(scene, PROBE, grid, kernel_route=False, check=False)
    crossed = sweep(scene, PROBE, grid, kernel_route=False, check=False,
                    data_scene=scene_loader("concentric", 2))
    for a, b in zip(coarse.values, crossed.values):
        assert b.I0_direct == pytest.approx(a.I0_direct, rel=1e-6)


def test_extraction_record(scene_loader):
    scene = scene_loader("concentric", 1)
    curve = sweep(scene, PROBE, lambda_grid("real", (6.0, 14.0), 5), kernel_route=False)
    fit = extract_length(curve)
    record = extraction_record(curve)
    assert set(record) >= {"p", "l_hat", "stderr", "a", "b", "region", "mu_range", "oracle_value",
                           "rel_error", "failures"}
    assert record["l_hat"] == fit.l_hat
    assert record["oracle_value"] == pytest.approx(4.0)
    assert record["rel_error"] == pytest.approx(abs(fit.l_hat - 4.0) / 4.0)
    assert record["failures"] == {}


def test_mu_ceiling_tracks_mesh(scene_loader):
    assert mu_ceiling(scene_loader("concentric", 2)) > mu_ceiling(scene_loader("concentric", 1)) > 0


def test_convergence_report_needs_two_meshes(scene_loader):
    with pytest.raises(UsageError):
        convergence_report(scene_loader("concentric", 1), PROBE, [2, 2], [(8.0, 16.0)])


# =============================================================================
# Extraction accuracy
# =============================================================================

def fine_oracle(scene_loader, name, p) -> float:
    """Minimum broken-path length on a mesh four times finer than the inversion mesh."""
    return min_broken_path(scene_loader(name, 6), p).l_min


@pytest.mark.slow
@pytest.mark.parametrize("name, p, tolerance", [
    ("concentric", [3.0, 0.0, 0.0], 0.02),
    ("two_cavity", [5.0, 0.0, 0.0], 0.03),
])
def test_extracted_length_matches_oracle(scene_loader, name, p, tolerance):
    scene = scene_loader(name, 3)
    curve = sweep(scene, p, lambda_grid("real", (8.0, 40.0), 9), workers=4, kernel_route=False)
    fit = extract_length(curve)
    assert fit.l_hat == pytest.approx(fine_oracle(scene_loader, name, p), rel=tolerance)


@pytest.mark.slow
@pytest.mark.parametrize("region, kwargs", [
    ("log", {"delta1": 0.1}),
    ("sector", {"delta0": 2.0}),
])
def test_complex_grids_recover_length(scene_loader, region, kwargs):
    scene = scene_loader("concentric", 3)
    curve = sweep(scene, PROBE, lambda_grid(region, (8.0, 40.0), 9, **kwargs), workers=4,
                  kernel_route=False)
    assert curve.failures == {}
    fit = extract_length(curve)
    assert fit.l_hat == pytest.approx(fine_oracle(scene_loader, "concentric", PROBE), abs=0.02)


@pytest.mark.slow
def test_normalized_indicator_is_positive_on_log_region(scene_loader):
    scene = scene_loader("concentric", 3)
    curve = sweep(scene, PROBE, lambda_grid("log", (8.0, 40.0), 9, delta1=0.1), workers=4,
                  kernel_route=False)
    l = fine_oracle(scene_loader, "concentric", PROBE)
    parts = curve.normalized_real_parts(l, scene.flux.beta0)
    assert len(parts) == 9
    assert all(a > 0 for a in parts)


@pytest.mark.slow
def test_convergence_report_error_falls_with_refinement(scene_loader):
    report = convergence_report(scene_loader("concentric", 3), PROBE, [1, 3], [(8.0, 24.0), (8.0, 40.0)],
                                workers=4)
    assert report.oracle_l == pytest.approx(4.0, rel=1e-6)
    assert len(report.rows) == 4
    assert report.mesh_trend
    coarse, fine = (row["abs_error"] for row in report.rows if row["mu_max"] == 40.0)
    assert fine < coarse
    assert fine < 0.02 * report.oracle_l
