import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.errors import GeometryError, NotStrictlyConvex, OverlapError
from geometry import (SurfaceSpec, angular_rule, build_scene, cavity_separation, convexity_audit,
                      local_chart, make_surface, moved_scene, normal_orientation_max, tangent_frame,
                      validate_scene)


@pytest.mark.parametrize("refinement", [1, 2, 3])
def test_angular_rule_sizes(refinement):
    t, phi, w = angular_rule(refinement)
    assert len(t) == len(phi) == len(w) == 128 * refinement ** 2
    assert w.sum() == pytest.approx(4 * np.pi)


@pytest.mark.parametrize("radius", [0.5, 2.0])
def test_sphere_area_is_exact(radius):
    surface = make_surface(SurfaceSpec.sphere((1.0, -2.0, 0.5), radius, refinement=2))
    assert surface.area == pytest.approx(4 * np.pi * radius ** 2, rel=1e-12)


def test_ellipsoid_area_converges_to_closed_form():
    spec = SurfaceSpec.ellipsoid((0.0, 0.0, 0.0), (3.0, 2.5, 2.0), refinement=3)
    surface = make_surface(spec)
    assert surface.area == pytest.approx(spec.primitive.area(), rel=1e-4)


def test_nodes_on_surface_with_outward_unit_normals():
    spec = SurfaceSpec.ellipsoid((0.5, 0.0, -1.0), (2.0, 1.0, 1.5), refinement=2, rotation=(20.0, 0.0, 45.0))
    surface = make_surface(spec)
    prim = spec.primitive
    assert_allclose(prim.implicit(surface.nodes), 0.0, atol=1e-12)
    assert_allclose(np.linalg.norm(surface.normals, axis=1), 1.0, atol=1e-12)
    outward = np.einsum("ij,ij->i", surface.normals, surface.nodes - prim.center)
    assert np.all(outward > 0)


@pytest.mark.parametrize("kwargs", [
    dict(kind="torus", center=(0, 0, 0), radii=(1, 1, 1)),
    dict(kind="sphere", center=(0, 0, 0), radii=(1, 1, 2)),
    dict(kind="ellipsoid", center=(0, 0, 0), radii=(1, 0, 1)),
    dict(kind="ellipsoid", center=(0, 0), radii=(1, 1, 1)),
    dict(kind="sphere", center=(0, 0, 0), radii=(1, 1, 1), refinement=0),
])
def test_surface_spec_validation(kwargs):
    with pytest.raises(GeometryError):
        SurfaceSpec(**kwargs)


def test_tangent_frame_is_orthonormal():
    rng = np.random.default_rng(3)
    nu = rng.standard_normal((50, 3))
    nu /= np.linalg.norm(nu, axis=1, keepdims=True)
    e1, e2 = tangent_frame(nu)
    assert_allclose(np.einsum("ij,ij->i", e1, nu), 0.0, atol=1e-14)
    assert_allclose(np.einsum("ij,ij->i", e2, nu), 0.0, atol=1e-14)
    assert_allclose(np.cross(e1, e2), nu, atol=1e-14)


def test_sphere_chart_curvature():
    radius = 1.5
    surface = make_surface(SurfaceSpec.sphere((0.0, 0.0, 0.0), radius, refinement=2))
    chart = local_chart(surface, 17)
    assert chart.g(np.zeros(2)) == pytest.approx(0.0, abs=1e-14)
    assert_allclose(chart.hessian(), np.eye(2) / radius, atol=1e-5)
    assert_allclose(chart.gradient(), 0.0, atol=1e-8)

    sigma = np.array([0.2, -0.1])
    s2 = sigma @ sigma
    assert chart.g(sigma) == pytest.approx(radius - np.sqrt(radius ** 2 - s2), rel=1e-10)
    lifted = chart.lift(sigma)
    assert np.linalg.norm(lifted) == pytest.approx(radius, rel=1e-12)
    assert_allclose(chart.project(lifted), sigma, atol=1e-12)


def test_local_chart_rejects_bad_index():
    surface = make_surface(SurfaceSpec.sphere((0.0, 0.0, 0.0), 1.0, refinement=1))
    with pytest.raises(GeometryError):
        local_chart(surface, surface.size)


def test_convexity_constants_of_sphere():
    radius = 0.8
    surface = make_surface(SurfaceSpec.sphere((0.0, 1.0, 0.0), radius, refinement=1), "ball")
    report = convexity_audit(surface)
    assert report.surface_id == "ball"
    assert report.M0 == pytest.approx(1 / (2 * radius), rel=1e-8)
    assert report.M1 == pytest.approx(1 / (2 * radius), rel=1e-8)
    assert report.r0 == pytest.approx(0.3 * radius)


def test_convexity_constants_of_ellipsoid_are_ordered():
    surface = make_surface(SurfaceSpec.ellipsoid((0.0, 0.0, 0.0), (2.0, 1.0, 1.0), refinement=2))
    report = convexity_audit(surface)
    assert 0 < report.M0 < report.M1
    assert normal_orientation_max(surface) <= 1e-12


def test_peanut_is_rejected_by_convexity_audit():
    surface = make_surface(SurfaceSpec.peanut((0.0, 0.0, 0.0), (1.0, 1.0, 1.5), refinement=1), "peanut")
    assert surface.spec.primitive.kind == "peanut"
    assert np.all(surface.weights > 0)
    assert_allclose(np.linalg.norm(surface.normals, axis=1), 1.0, atol=1e-12)
    assert normal_orientation_max(surface) > 0
    with pytest.raises(NotStrictlyConvex):
        convexity_audit(surface)


def test_peanut_waist_and_poles():
    primitive = SurfaceSpec.peanut((0.0, 0.0, 0.0), (1.0, 1.0, 1.5)).primitive
    assert_allclose(primitive.local_points(np.array([0.0]), np.array([0.0])), [[0.5, 0.0, 0.0]])
    assert_allclose(primitive.local_points(np.array([1.0]), np.array([0.0])), [[0.0, 0.0, 1.5]])
    assert primitive.implicit(np.zeros(3)) < 0
    assert primitive.implicit(np.array([0.6, 0.0, 0.0])) > 0
    t, phi = np.array([0.3, -0.7]), np.array([1.0, 4.0])
    h = 1e-6
    x_t = (primitive.local_points(t + h, phi) - primitive.local_points(t - h, phi)) / (2 * h)
    x_p = (primitive.local_points(t, phi + h) - primitive.local_points(t, phi - h)) / (2 * h)
    assert_allclose(primitive.area_element(t, phi), np.linalg.norm(np.cross(x_t, x_p), axis=-1), rtol=1e-7)


def test_two_cavity_separation(scene_loader):
    scene = scene_loader("two_cavity", 2)
    assert cavity_separation(scene) == pytest.approx(0.2, rel=1e-8)
    assert validate_scene(scene) == pytest.approx(0.2, rel=1e-8)


def test_single_cavity_separation_is_infinite(scene_loader):
    assert cavity_separation(scene_loader("concentric", 1)) == float("inf")


def test_overlapping_cavities_rejected(scene_loader):
    with pytest.raises(OverlapError):
        validate_scene(scene_loader("overlapping", 1))


def test_cavity_outside_outer_rejected():
    scene = build_scene(SurfaceSpec.sphere((0.0, 0.0, 0.0), 1.0, 1),
                        [SurfaceSpec.sphere((0.9, 0.0, 0.0), 0.3, 1)])
    with pytest.raises(OverlapError):
        validate_scene(scene)


def test_build_scene_checks_rho_count():
    with pytest.raises(GeometryError):
        build_scene(SurfaceSpec.sphere((0.0, 0.0, 0.0), 2.0, 1),
                    [SurfaceSpec.sphere((0.0, 0.0, 0.0), 0.5, 1)], rho=[0.0, 1.0])


def test_scene_stacking(scene_loader):
    scene = scene_loader("two_cavity", 1)
    sizes = [c.size for c in scene.cavities]
    assert list(scene.cavity_offsets) == [0, sizes[0], sizes[0] + sizes[1]]
    assert scene.cavity_nodes.shape == (sum(sizes), 3)
    assert_allclose(scene.cavity_nodes[scene.cavity_slice(1)], scene.cavities[1].nodes)
    assert scene.cavity_weights.sum() == pytest.approx(2 * 4 * np.pi, rel=1e-12)
    assert scene.cavity_rho.shape == (sum(sizes),)


def test_scene_without_cavities(scene_loader):
    scene = scene_loader("no_cavity", 1)
    assert scene.n_cavities == 0
    assert scene.cavity_nodes.shape == (0, 3)
    assert scene.cavity_weights.shape == (0,)


def test_rigid_motion_preserves_geometry(scene_loader):
    scene = scene_loader("two_cavity", 1)
    moved = moved_scene(scene, rotation=(0.0, 0.0, 90.0), translation=(1.0, 2.0, 3.0))
    assert_allclose(moved.cavities[0].spec.center, (1.0, 3.2, 3.0), atol=1e-12)
    assert moved.outer.area == pytest.approx(scene.outer.area, rel=1e-12)
    assert cavity_separation(moved) == pytest.approx(cavity_separation(scene), rel=1e-8)
    assert_allclose(moved.probes[0], (1.0, 7.0, 3.0), atol=1e-12)


def test_scaling_and_refinement(scene_loader):
    scene = scene_loader("concentric", 1)
    bigger = moved_scene(scene, scale=2.0, refinement=2)
    assert bigger.outer.spec.refinement == 2
    assert bigger.outer.area == pytest.approx(4 * scene.outer.area, rel=1e-12)
    assert bigger.cavities[0].size == 4 * scene.cavities[0].size


def test_ellipsoid_distance_from_interior_points():
    primitive = SurfaceSpec.ellipsoid((1.0, 0.0, 0.0), (2.0, 1.0, 1.5)).primitive
    d = primitive.distance(np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 1.0], [1.3, 0.2, -0.4]]))
    assert_allclose(d[:2], [1.0, 0.5], atol=1e-12)
    T, P = np.meshgrid(np.linspace(-1.0, 1.0, 801), np.linspace(0.0, 2 * np.pi, 1601))
    samples = primitive.points(T.ravel(), P.ravel())
    nearest = np.min(np.linalg.norm(samples - [1.3, 0.2, -0.4], axis=1))
    assert d[2] <= nearest + 1e-12
    assert d[2] == pytest.approx(nearest, abs=1e-4)
