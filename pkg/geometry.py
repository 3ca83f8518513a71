"""
Geometry for Heat Enclosure
Builds and audits discretized scenes: parametric strictly convex cavities, the
outer boundary, product quadrature rules and local graph charts.

Surfaces use Gauss-Legendre nodes in t = cos(theta) and the trapezoid rule in
the azimuth, so a sphere's weights sum to its area to round-off.
"""

from dataclasses import dataclass, replace
from functools import cached_property
from typing import TYPE_CHECKING, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation
from scipy.special import roots_legendre

from app.errors import ChartError, GeometryError, NotStrictlyConvex, OverlapError
from app.tolerances import DEFAULT_TOLERANCES, Tolerances
from run_logger import get_logger
from surfaces import SUPPORTED_KINDS, SurfacePrimitive, get_primitive

if TYPE_CHECKING:
    from forward_indicator import FluxModel

log = get_logger("geometry")

Vec3 = Tuple[float, float, float]


# =============================================================================
# Surface specifications
# =============================================================================

@dataclass(frozen=True)
class SurfaceSpec:
    """Placement and resolution of one closed surface."""
    kind: str
    center: Vec3
    radii: Vec3
    refinement: int = 3
    rotation: Vec3 = (0.0, 0.0, 0.0)

    def __post_init__(self):
        center = tuple(float(c) for c in self.center)
        radii = tuple(float(r) for r in self.radii)
        rotation = tuple(float(a) for a in self.rotation)
        if self.kind not in SUPPORTED_KINDS:
            raise GeometryError(f"unsupported surface kind {self.kind!r}")
        if len(center) != 3 or len(radii) != 3 or len(rotation) != 3:
            raise GeometryError("center, radii and rotation must have 3 components")
        if not all(np.isfinite(radii)) or min(radii) <= 0:
            raise GeometryError(f"radii must be strictly positive, got {radii}")
        if int(self.refinement) < 1:
            raise GeometryError(f"refinement must be >= 1, got {self.refinement}")
        if self.kind == "sphere" and not np.allclose(radii, radii[0], rtol=0, atol=0):
            raise GeometryError(f"sphere radii must agree, got {radii}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "refinement", int(self.refinement))

    @classmethod
    def sphere(cls, center: Sequence[float], radius: float, refinement: int = 3) -> "SurfaceSpec":
        return cls("sphere", tuple(center), (radius, radius, radius), refinement)

    @classmethod
    def ellipsoid(cls, center: Sequence[float], radii: Sequence[float], refinement: int = 3,
                  rotation: Sequence[float] = (0.0, 0.0, 0.0)) -> "SurfaceSpec":
        return cls("ellipsoid", tuple(center), tuple(radii), refinement, tuple(rotation))

    @classmethod
    def peanut(cls, center: Sequence[float], radii: Sequence[float], refinement: int = 3,
               rotation: Sequence[float] = (0.0, 0.0, 0.0)) -> "SurfaceSpec":
        return cls("peanut", tuple(center), tuple(radii), refinement, tuple(rotation))

    @property
    def primitive(self) -> SurfacePrimitive:
        return get_primitive(self.kind, self.center, self.radii, self.rotation)

    def with_refinement(self, refinement: int) -> "SurfaceSpec":
        return replace(self, refinement=refinement)

    def translated(self, offset: Sequence[float]) -> "SurfaceSpec":
        return replace(self, center=tuple(np.add(self.center, offset)))

    def scaled(self, factor: float) -> "SurfaceSpec":
        return replace(self, center=tuple(np.multiply(self.center, factor)),
                       radii=tuple(np.multiply(self.radii, factor)))

    def rotated(self, euler_deg: Sequence[float], about: Sequence[float] = (0.0, 0.0, 0.0)) -> "SurfaceSpec":
        """Rigidly rotate the surface about a point (xyz Euler angles, degrees)."""
        rot = Rotation.from_euler("xyz", euler_deg, degrees=True)
        about = np.asarray(about, dtype=float)
        center = rot.apply(np.asarray(self.center) - about) + about
        composed = rot * Rotation.from_euler("xyz", self.rotation, degrees=True)
        return replace(self, center=tuple(center),
                       rotation=tuple(composed.as_euler("xyz", degrees=True)))


def angular_rule(refinement: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Product rule in (t, phi): Gauss-Legendre x trapezoid.

    Returns flattened t, phi and the (t, phi)-measure weights.
    """
    n_t = 8 * refinement
    n_phi = 2 * n_t
    t, wt = roots_legendre(n_t)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(t, phi, indexing="ij")
    W = np.repeat(wt, n_phi) * (2.0 * np.pi / n_phi)
    return T.ravel(), P.ravel(), W


# =============================================================================
# Discretized surfaces and charts
# =============================================================================

@dataclass(frozen=True, eq=False)
class DiscretizedSurface:
    """Quadrature nodes, outward normals and weights of one surface."""
    nodes: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    surface_id: str
    spec: SurfaceSpec

    def __post_init__(self):
        for arr in (self.nodes, self.normals, self.weights):
            arr.setflags(write=False)

    @property
    def primitive(self) -> SurfacePrimitive:
        return self.spec.primitive

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def area(self) -> float:
        return float(np.sum(self.weights))

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.nodes)

    @cached_property
    def spacing(self) -> float:
        """Median nearest-neighbour distance between nodes."""
        d, _ = self.tree.query(self.nodes, k=2)
        return float(np.median(d[:, 1]))

    def chart_radius(self, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
        return tol.r0_factor * self.primitive.min_curvature_radius

    def chart(self, index: int, tol: Tolerances = DEFAULT_TOLERANCES) -> "LocalChart":
        return local_chart(self, index, tol)


def _discretize(spec: SurfaceSpec, surface_id: str) -> DiscretizedSurface:
    primitive = spec.primitive
    t, phi, w = angular_rule(spec.refinement)
    nodes = primitive.points(t, phi)
    weights = w * primitive.area_element(t, phi)
    normals = primitive.normals(nodes)
    log.debug("discretized %s (%s): %d nodes, area %.12g", surface_id, spec.kind,
              len(weights), weights.sum())
    return DiscretizedSurface(np.ascontiguousarray(nodes), np.ascontiguousarray(normals),
                              weights, surface_id, spec)


def make_sphere(spec: SurfaceSpec, surface_id: str = "surface") -> DiscretizedSurface:
    """Discretize a sphere; the rule integrates low-degree spherical polynomials exactly."""
    if spec.kind != "sphere":
        raise GeometryError(f"make_sphere needs a sphere spec, got {spec.kind!r}")
    return _discretize(spec, surface_id)


def make_ellipsoid(spec: SurfaceSpec, surface_id: str = "surface") -> DiscretizedSurface:
    """Discretize an ellipsoid; normals come from the gradient of the quadric."""
    if spec.kind != "ellipsoid":
        raise GeometryError(f"make_ellipsoid needs an ellipsoid spec, got {spec.kind!r}")
    return _discretize(spec, surface_id)


def make_peanut(spec: SurfaceSpec, surface_id: str = "surface") -> DiscretizedSurface:
    """Discretize a two-lobed surface; it is smooth but fails the convexity audit."""
    if spec.kind != "peanut":
        raise GeometryError(f"make_peanut needs a peanut spec, got {spec.kind!r}")
    return _discretize(spec, surface_id)


def make_surface(spec: SurfaceSpec, surface_id: str = "surface") -> DiscretizedSurface:
    if spec.kind == "sphere":
        return make_sphere(spec, surface_id)
    if spec.kind == "peanut":
        return make_peanut(spec, surface_id)
    return make_ellipsoid(spec, surface_id)


def tangent_frame(nu: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Orthonormal tangent vectors e1, e2 with e1 x e2 = nu (vectorized)."""
    nu = np.asarray(nu, dtype=float)
    helper = np.zeros_like(nu)
    idx = np.argmin(np.abs(nu), axis=-1)
    np.put_along_axis(helper, idx[..., None], 1.0, axis=-1)
    e1 = np.cross(nu, helper)
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(nu, e1)
    return e1, e2


@dataclass(frozen=True, eq=False)
class LocalChart:
    """Graph of the surface over its tangent plane at ``base``.

    A point with tangent coordinates sigma lifts to
    ``base + sigma[0]*e1 + sigma[1]*e2 - g(sigma)*normal``.
    """
    base: np.ndarray
    normal: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    radius: float
    fd_step: float
    primitive: SurfacePrimitive

    @property
    def frame(self) -> np.ndarray:
        """Tangent basis as a (2, 3) array."""
        return np.stack([self.e1, self.e2])

    def g(self, sigma) -> np.ndarray:
        sigma = np.asarray(sigma, dtype=float)
        q = self.base + sigma @ self.frame
        return self.primitive.line_offset(q, self.normal, reach=2.0 * self.radius + np.max(np.abs(sigma)))

    def lift(self, sigma) -> np.ndarray:
        sigma = np.asarray(sigma, dtype=float)
        return self.base + sigma @ self.frame - self.g(sigma)[..., None] * self.normal

    def project(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.base) @ self.frame.T

    def normal_at(self, sigma) -> np.ndarray:
        return self.primitive.normals(self.lift(sigma))

    def gradient(self, sigma=(0.0, 0.0)) -> np.ndarray:
        """Central-difference gradient of g."""
        sigma = np.asarray(sigma, dtype=float)
        h = self.fd_step
        out = np.empty(sigma.shape)
        for k in range(2):
            step = np.zeros(2)
            step[k] = h
            out[..., k] = (self.g(sigma + step) - self.g(sigma - step)) / (2 * h)
        return out

    def hessian(self, sigma=(0.0, 0.0)) -> np.ndarray:
        """Central-difference Hessian of g."""
        sigma = np.asarray(sigma, dtype=float)
        h = self.fd_step
        e = np.eye(2) * h
        g0 = self.g(sigma)
        out = np.empty(sigma.shape[:-1] + (2, 2))
        for k in range(2):
            out[..., k, k] = (self.g(sigma + e[k]) - 2 * g0 + self.g(sigma - e[k])) / h ** 2
        cross = (self.g(sigma + e[0] + e[1]) - self.g(sigma + e[0] - e[1])
                 - self.g(sigma - e[0] + e[1]) + self.g(sigma - e[0] - e[1])) / (4 * h ** 2)
        out[..., 0, 1] = cross
        out[..., 1, 0] = cross
        return out


def chart_at(primitive: SurfacePrimitive, point, tol: Tolerances = DEFAULT_TOLERANCES) -> LocalChart:
    """Chart centred at an arbitrary point of the surface."""
    point = np.asarray(point, dtype=float)
    normal = primitive.normals(point)
    e1, e2 = tangent_frame(normal)
    rc = primitive.min_curvature_radius
    return LocalChart(point, normal, e1, e2, tol.r0_factor * rc, tol.fd_factor * rc, primitive)


def local_chart(surface: DiscretizedSurface, node_index: int,
                tol: Tolerances = DEFAULT_TOLERANCES) -> LocalChart:
    """
    Graph chart of a surface over the tangent plane at one node.

    Raises:
        ChartError: the chart radius is small against the mesh spacing
    """
    if not 0 <= node_index < surface.size:
        raise GeometryError(f"{surface.surface_id}: node {node_index} out of range")
    r0 = surface.chart_radius(tol)
    if r0 < tol.chart_spacing_factor * surface.spacing:
        raise ChartError(
            f"{surface.surface_id}: chart radius {r0:.3g} below "
            f"{tol.chart_spacing_factor} x mesh spacing {surface.spacing:.3g}; refine the surface")
    return chart_at(surface.primitive, surface.nodes[node_index], tol)


# =============================================================================
# Audits
# =============================================================================

@dataclass(frozen=True)
class ConvexityReport:
    surface_id: str
    M0: float
    M1: float
    r0: float
    samples: int


def convexity_audit(surface: DiscretizedSurface, tol: Tolerances = DEFAULT_TOLERANCES) -> ConvexityReport:
    """
    Fit the strict-convexity constants of a surface.

    M0 and M1 are the extremes of -nu_xi.(zeta - xi)/|zeta - xi|^2 over chart
    samples around every node, which gives M0|s|^2 <= g(s) <= 2 M1|s|^2.

    Raises:
        NotStrictlyConvex: M0 <= 0
    """
    primitive = surface.primitive
    r0 = surface.chart_radius(tol)
    e1, e2 = tangent_frame(surface.normals)
    radii = r0 * np.array([0.25, 0.5, 0.75, 1.0])
    angles = 2.0 * np.pi * np.arange(8) / 8
    s1 = np.outer(radii, np.cos(angles)).ravel()
    s2 = np.outer(radii, np.sin(angles)).ravel()

    q = (surface.nodes[:, None, :] + s1[None, :, None] * e1[:, None, :]
         + s2[None, :, None] * e2[:, None, :])
    nu = np.broadcast_to(surface.normals[:, None, :], q.shape)
    t = primitive.line_offset(q, nu, reach=2.0 * r0)
    ratio = t / (s1 ** 2 + s2 ** 2 + t ** 2)
    valid = np.isfinite(ratio)
    if not np.any(valid):
        raise ChartError(f"{surface.surface_id}: no valid chart samples")
    M0 = float(np.min(ratio[valid]))
    M1 = float(np.max(ratio[valid]))
    if M0 <= 0:
        raise NotStrictlyConvex(f"{surface.surface_id}: fitted M0 = {M0:.3g} <= 0")
    return ConvexityReport(surface.surface_id, M0, M1, r0, int(valid.sum()))


def normal_orientation_max(surface: DiscretizedSurface) -> float:
    """Largest nu_xi.(zeta - xi) over node pairs; <= 0 for convex bodies."""
    dots = surface.normals @ surface.nodes.T
    own = np.einsum("ij,ij->i", surface.normals, surface.nodes)
    return float(np.max(dots - own[:, None]))


# =============================================================================
# Scenes
# =============================================================================

@dataclass(frozen=True, eq=False)
class Scene:
    """Outer boundary, cavities and the data model of one experiment."""
    outer: DiscretizedSurface
    cavities: Tuple[DiscretizedSurface, ...]
    rho: Tuple[float, ...]
    T: float = 1.0
    flux: Optional["FluxModel"] = None
    name: str = "scene"
    probes: Tuple[Vec3, ...] = ()

    @property
    def n_cavities(self) -> int:
        return len(self.cavities)

    @property
    def diameter(self) -> float:
        return self.outer.primitive.diameter

    @cached_property
    def cavity_offsets(self) -> np.ndarray:
        """Start index of each cavity block in the stacked cavity arrays."""
        sizes = [c.size for c in self.cavities]
        return np.concatenate([[0], np.cumsum(sizes)]).astype(int)

    def cavity_slice(self, j: int) -> slice:
        return slice(int(self.cavity_offsets[j]), int(self.cavity_offsets[j + 1]))

    @cached_property
    def cavity_nodes(self) -> np.ndarray:
        return _stack([c.nodes for c in self.cavities], (0, 3))

    @cached_property
    def cavity_normals(self) -> np.ndarray:
        return _stack([c.normals for c in self.cavities], (0, 3))

    @cached_property
    def cavity_weights(self) -> np.ndarray:
        return _stack([c.weights for c in self.cavities], (0,))

    @cached_property
    def cavity_rho(self) -> np.ndarray:
        """Robin coefficient at every stacked cavity node."""
        return _stack([np.full(c.size, r) for c, r in zip(self.cavities, self.rho)], (0,))

    def with_refinement(self, refinement: int) -> "Scene":
        return moved_scene(self, refinement=refinement)


def _stack(parts, empty_shape) -> np.ndarray:
    if not parts:
        return np.zeros(empty_shape)
    return np.concatenate(parts)


def build_scene(outer: SurfaceSpec, cavities: Sequence[SurfaceSpec], rho: Sequence[float] = None,
                T: float = 1.0, flux: "FluxModel" = None, name: str = "scene",
                probes: Sequence[Sequence[float]] = ()) -> Scene:
    """Discretize every surface of a scene. Assumptions are checked separately."""
    rho = tuple(float(r) for r in (rho if rho is not None else [0.0] * len(cavities)))
    if len(rho) != len(cavities):
        raise GeometryError(f"{len(rho)} rho values for {len(cavities)} cavities")
    if flux is None:
        from forward_indicator import FluxModel
        flux = FluxModel()
    return Scene(
        outer=make_surface(outer, "outer"),
        cavities=tuple(make_surface(spec, f"cavity{j}") for j, spec in enumerate(cavities)),
        rho=rho, T=float(T), flux=flux, name=name,
        probes=tuple(tuple(float(c) for c in p) for p in probes),
    )


def moved_scene(scene: Scene, rotation: Sequence[float] = (0.0, 0.0, 0.0),
                translation: Sequence[float] = (0.0, 0.0, 0.0), scale: float = 1.0,
                refinement: int = None) -> Scene:
    """Apply x -> scale * R x + translation to every surface (and probes), optionally re-refining."""
    rot = Rotation.from_euler("xyz", rotation, degrees=True)

    def move(spec: SurfaceSpec) -> SurfaceSpec:
        spec = spec.scaled(scale).rotated(rotation).translated(translation)
        return spec.with_refinement(refinement) if refinement is not None else spec

    probes = [tuple(scale * rot.apply(p) + np.asarray(translation)) for p in scene.probes]
    return build_scene(move(scene.outer.spec), [move(c.spec) for c in scene.cavities],
                       scene.rho, scene.T, scene.flux, scene.name, probes)


def _closest_pair_refined(a: DiscretizedSurface, b: DiscretizedSurface, ia: int, ib: int,
                          tol: Tolerances) -> float:
    """Minimize |x - y| over two charts starting from a node pair."""
    pa, pb = a.nodes[ia], b.nodes[ib]
    best = float(np.linalg.norm(pa - pb))
    for _ in range(6):
        ca, cb = chart_at(a.primitive, pa, tol), chart_at(b.primitive, pb, tol)
        reach = min(ca.radius, cb.radius)

        def objective(z):
            d = ca.lift(z[:2]) - cb.lift(z[2:])
            return float(d @ d)

        res = minimize(objective, np.zeros(4), method="BFGS", options={"gtol": 1e-14})
        z = res.x
        if np.linalg.norm(z[:2]) > reach or np.linalg.norm(z[2:]) > reach:
            z = z * reach / max(np.linalg.norm(z[:2]), np.linalg.norm(z[2:]))
        pa, pb = ca.lift(z[:2]), cb.lift(z[2:])
        if not (np.all(np.isfinite(pa)) and np.all(np.isfinite(pb))):
            break
        d = float(np.linalg.norm(pa - pb))
        converged = best - d <= 1e-15 * max(1.0, d)
        best = min(best, d)
        if converged:
            break
    return best


def cavity_separation(scene: Scene, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """
    Half the minimum distance between distinct cavity surfaces.

    Returns +inf for fewer than two cavities.

    Raises:
        OverlapError: two cavities intersect or touch
    """
    if scene.n_cavities < 2:
        return float("inf")
    gap = float("inf")
    for i in range(scene.n_cavities):
        for j in range(i + 1, scene.n_cavities):
            a, b = scene.cavities[i], scene.cavities[j]
            if np.any(b.primitive.implicit(a.nodes) <= 0) or np.any(a.primitive.implicit(b.nodes) <= 0):
                raise OverlapError(f"{a.surface_id} and {b.surface_id} overlap")
            d, idx = b.tree.query(a.nodes)
            ia = int(np.argmin(d))
            pair = _closest_pair_refined(a, b, ia, int(idx[ia]), tol)
            if pair <= 0:
                raise OverlapError(f"{a.surface_id} and {b.surface_id} touch")
            gap = min(gap, pair)
    return 0.5 * gap


def validate_scene(scene: Scene, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """
    Check that cavities sit strictly inside the outer surface and are disjoint.

    Disjoint convex cavities inside a closed outer surface leave a connected
    complement, so no separate connectivity test is needed for these primitives.

    Returns:
        the separation d1
    """
    for cavity in scene.cavities:
        if np.any(scene.outer.primitive.implicit(cavity.nodes) >= 0):
            raise OverlapError(f"{cavity.surface_id} is not strictly inside the outer surface")
    return cavity_separation(scene, tol)
