"""
Forward Indicator for Heat Enclosure
Synthetic data and indicator evaluation in the Laplace domain.

The heat flux f(t, y) on the outer surface becomes g(y; lam) = int_0^T
exp(-lam^2 t) f(t, y) dt. Densities (phi, psi) on the outer and cavity
surfaces solve the second-kind block system, w0 = V phi + V psi is the
reflected solution, and the indicator I0(lam, p) is evaluated two ways:
directly as a boundary integral, and through the kernel representation built
from the transposed cavity resolvent.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import lu_solve
from scipy.special import roots_legendre

from app.errors import FitError, FluxError, UsageError
from app.tolerances import DEFAULT_TOLERANCES, Tolerances
from bie_core import (TWO_PI, ResolventSplit, SystemBlocks, _check_lambda, _kernel, assemble_system,
                      factor, fundamental_solution, normal_derivative_kernel, operator_norm_Y22,
                      pair_geometry, polar_patch, resolvent_M, single_layer_blocks)
from run_logger import get_logger

log = get_logger("forward_indicator")

FLUX_KINDS = ("constant", "c1_profile", "external")
TIME_ORDER = 16
FD_STEP_FACTOR = 0.05   # one-sided difference step, fraction of the smallest curvature radius
DENSITY_SLOPE = -0.8    # required log-log slope of |phi - g| / |g| against mu


# =============================================================================
# Flux models
# =============================================================================

@dataclass(frozen=True)
class FluxModel:
    """
    Heat flux prescribed on the outer surface over [0, T].

    constant:    f = value
    c1_profile:  f(t, y) = f0 (1 + modulation (y_hat . axis)) + slope t,
                 y_hat the unit direction of y from the outer center
    external:    g(y; lam) tabulated in a CSV file, see load_external_flux
    """
    kind: str = "constant"
    T: float = 1.0
    beta0: float = 2.0
    value: float = 1.0
    f0: float = 1.0
    slope: float = 0.0
    modulation: float = 0.0
    axis: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    source: Optional[str] = None

    def __post_init__(self):
        if self.kind not in FLUX_KINDS:
            raise UsageError(f"unknown flux kind {self.kind!r}")
        if self.T <= 0:
            raise UsageError("flux horizon T must be positive")
        if self.kind == "constant" and self.value <= 0:
            raise UsageError("constant flux value must be positive")
        if self.kind == "c1_profile":
            if self.f0 <= 0 or abs(self.modulation) >= 1:
                raise UsageError("c1 profile needs f0 > 0 and |modulation| < 1 so that inf f(0, .) > 0")
        if self.kind == "external" and not self.source:
            raise UsageError("external flux needs a source file")

    def profile(self, t: np.ndarray, directions: np.ndarray) -> np.ndarray:
        """f(t, y) on a (times x nodes) grid given unit directions of the nodes."""
        if self.kind == "constant":
            return np.full(np.broadcast_shapes(np.shape(t), directions.shape[:-1]), self.value)
        axis = np.asarray(self.axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        spatial = self.f0 * (1.0 + self.modulation * (directions @ axis))
        return spatial[None, :] + self.slope * np.asarray(t)[:, None]

    def initial_infimum(self) -> float:
        if self.kind == "constant":
            return self.value
        return self.f0 * (1.0 - abs(self.modulation))

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def _node_directions(nodes: np.ndarray, center) -> np.ndarray:
    d = np.asarray(nodes, dtype=float) - np.asarray(center, dtype=float)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def time_rule(T: float, lam2: complex) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre on [0, T], panels graded toward t = 0 by |lam^2|."""
    levels = max(4, int(np.ceil(np.log2(max(T * abs(lam2), 1.0)))) + 4)
    edges = np.concatenate([[0.0], T * 2.0 ** -np.arange(levels, -1, -1)])
    x, w = roots_legendre(TIME_ORDER)
    a, b = edges[:-1, None], edges[1:, None]
    return (0.5 * (b - a) * x + 0.5 * (a + b)).ravel(), (0.5 * (b - a) * w).ravel()


def laplace_flux(model: FluxModel, lam, nodes: np.ndarray, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    """
    g(y; lam) = int_0^T exp(-lam^2 t) f(t, y) dt at every node.

    Raises:
        FluxError: Re lam^2 <= 0, or lam missing from an external table
    """
    lam = complex(lam)
    lam2 = lam * lam
    if lam2.real <= 0:
        raise FluxError(f"Re lambda^2 = {lam2.real:.4g} <= 0 at lambda={lam}; flux transform does not decay")
    nodes = np.asarray(nodes, dtype=float)
    if model.kind == "constant":
        return np.full(len(nodes), model.value * (1.0 - np.exp(-lam2 * model.T)) / lam2, dtype=complex)
    if model.kind == "external":
        return load_external_flux(model.source).lookup(lam, len(nodes))
    t, w = time_rule(model.T, lam2)
    f = model.profile(t, _node_directions(nodes, center))
    return (w * np.exp(-lam2 * t)) @ f


def flux_bound_check(model: FluxModel, lam, nodes: np.ndarray, center=(0.0, 0.0, 0.0)) -> Dict[str, object]:
    """
    Compare lam^2 g with f(0, y).

    Integration by parts gives |lam^2 g - f(0, y)| <= sup|d_t f| / |lam^2|
    + exp(-Re lam^2 T) sup|f(T, .)|, so Re[lam^2 g] stays above inf f(0, .)
    up to that bound.
    """
    lam = complex(lam)
    lam2 = lam * lam
    g = laplace_flux(model, lam, nodes, center)
    dirs = _node_directions(nodes, center)
    f0 = model.profile(np.zeros(1), dirs).reshape(-1)
    fT = model.profile(np.full(1, model.T), dirs).reshape(-1)
    dt = abs(model.slope) if model.kind == "c1_profile" else 0.0
    bound = dt / abs(lam2) + np.exp(-lam2.real * model.T) * float(np.max(np.abs(fT)))
    deviation = float(np.max(np.abs(lam2 * g - f0)))
    return {
        "lambda": [lam.real, lam.imag],
        "min_re_lam2_g": float(np.min((lam2 * g).real)),
        "inf_f0": model.initial_infimum(),
        "deviation": deviation,
        "bound": float(bound),
        "passed": deviation <= bound * (1.0 + 1e-9) + 1e-12,
    }


@dataclass
class ExternalFlux:
    """Tabulated g(y; lam) keyed by lambda."""
    table: Dict[Tuple[float, float], np.ndarray]

    def lookup(self, lam: complex, n_nodes: int) -> np.ndarray:
        key = (round(lam.real, 10), round(lam.imag, 10))
        if key not in self.table:
            raise FluxError(f"external flux has no samples at lambda={lam}")
        g = self.table[key]
        if len(g) != n_nodes:
            raise FluxError(f"external flux at lambda={lam} has {len(g)} nodes, scene has {n_nodes}")
        return g


def load_external_flux(path) -> ExternalFlux:
    """
    Read a CSV with header re_lambda,im_lambda,node,re_g,im_g.

    Raises:
        FluxError: missing file, bad columns, or gaps in node numbering
    """
    path = Path(path)
    if not path.exists():
        raise FluxError(f"external flux file not found: {path}")
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    needed = {"re_lambda", "im_lambda", "node", "re_g", "im_g"}
    if data.dtype.names is None or not needed <= set(data.dtype.names):
        raise FluxError(f"{path}: expected columns {sorted(needed)}")
    data = np.atleast_1d(data)
    table: Dict[Tuple[float, float], np.ndarray] = {}
    keys = np.stack([np.round(data["re_lambda"], 10), np.round(data["im_lambda"], 10)], axis=1)
    for key in np.unique(keys, axis=0):
        rows = data[np.all(keys == key, axis=1)]
        order = np.argsort(rows["node"])
        nodes = rows["node"][order].astype(int)
        if not np.array_equal(nodes, np.arange(len(nodes))):
            raise FluxError(f"{path}: node indices at lambda={tuple(key)} are not 0..n-1")
        table[(float(key[0]), float(key[1]))] = rows["re_g"][order] + 1j * rows["im_g"][order]
    return ExternalFlux(table)


def perturb_data(g: np.ndarray, relative: float, rng: np.random.Generator) -> np.ndarray:
    """Relative perturbation g (1 + relative * eps), eps standard normal per node."""
    if relative <= 0:
        return g
    return g * (1.0 + relative * rng.standard_normal(len(g)))


def scene_flux(scene, lam, noise: float = 0.0, seed: Optional[int] = None) -> np.ndarray:
    """Flux data for a scene at lambda, optionally perturbed with a seeded generator."""
    g = laplace_flux(scene.flux, lam, scene.outer.nodes, scene.outer.primitive.center)
    if noise > 0:
        g = perturb_data(g, noise, np.random.default_rng(seed))
    return g


# =============================================================================
# Densities
# =============================================================================

@dataclass(frozen=True, eq=False)
class DensitySolution:
    phi: np.ndarray
    psi: np.ndarray
    lam: complex
    g: np.ndarray
    residual: float
    cavity_residual: float


def _system_residual(blocks: SystemBlocks, phi, psi, g) -> Tuple[float, float]:
    r1 = phi - blocks.A11 @ phi - blocks.A12 @ psi - g
    gnorm = max(float(np.max(np.abs(g))), np.finfo(float).tiny)
    if len(psi) == 0:
        return float(np.max(np.abs(r1))) / gnorm, 0.0
    r2 = psi - blocks.A21 @ phi - blocks.A22 @ psi
    scale = max(float(np.max(np.abs(blocks.A21 @ phi))), np.finfo(float).tiny)
    return (max(float(np.max(np.abs(r1))), float(np.max(np.abs(r2)))) / gnorm,
            float(np.max(np.abs(r2))) / scale)


def solve_densities(scene, lam, g: np.ndarray, blocks: SystemBlocks = None,
                    tol: Tolerances = DEFAULT_TOLERANCES) -> DensitySolution:
    """
    Solve [I - Y11, -Y12; -Y21, I - Y22] (phi, psi) = (g, 0) by block elimination.

    Raises:
        SingularSystemError: a diagonal block or the Schur complement is singular
    """
    lam = _check_lambda(lam)
    blocks = blocks if blocks is not None else assemble_system(scene, lam)
    g = np.asarray(g, dtype=complex)
    n1 = len(g)
    if scene.n_cavities == 0:
        phi = lu_solve(factor(np.eye(n1) - blocks.A11, "I - Y11", lam), g)
        psi = np.zeros(0, dtype=complex)
    else:
        n2 = blocks.A22.shape[0]
        X = lu_solve(factor(np.eye(n2) - blocks.A22, "I - Y22", lam), blocks.A21)
        schur = np.eye(n1) - blocks.A11 - blocks.A12 @ X
        phi = lu_solve(factor(schur, "Schur complement", lam), g)
        psi = X @ phi
    res, cres = _system_residual(blocks, phi, psi, g)
    if res > 1e3 * tol.solver:
        log.warning("lambda=%s: density residual %.3g exceeds solver tolerance", lam, res)
    return DensitySolution(phi, psi, lam, g, res, cres)


def solve_densities_neumann(scene, lam, g: np.ndarray, terms: int = 30,
                            blocks: SystemBlocks = None) -> DensitySolution:
    """Fixed-point iteration x <- b + Y x on the full block system."""
    lam = _check_lambda(lam)
    blocks = blocks if blocks is not None else assemble_system(scene, lam)
    g = np.asarray(g, dtype=complex)
    phi = g.copy()
    psi = np.zeros(blocks.A22.shape[0], dtype=complex)
    for _ in range(terms):
        phi, psi = (g + blocks.A11 @ phi + blocks.A12 @ psi,
                    blocks.A21 @ phi + blocks.A22 @ psi)
    res, cres = _system_residual(blocks, phi, psi, g)
    return DensitySolution(phi, psi, lam, g, res, cres)


def w0_trace(scene, densities: DensitySolution) -> np.ndarray:
    """w0 = V_outer phi + V_cavity psi on the outer nodes."""
    V11, V12 = single_layer_blocks(scene, densities.lam)
    return V11 @ densities.phi + V12 @ densities.psi


def _surface_densities(scene, densities: DensitySolution):
    yield scene.outer, densities.phi
    for j, cavity in enumerate(scene.cavities):
        yield cavity, densities.psi[scene.cavity_slice(j)]


def shifted_layer_potential(scene, densities: DensitySolution, target, s: float,
                            side: float) -> np.ndarray:
    """
    w0 at target.nodes + side * s * target.normals, for s >= 0.

    The target surface's own contribution is written as int E sigma_y plus
    int E (sigma - sigma_y): the first by the polar rule about each node, the
    second by the nodal rule. The other surfaces are far and use the nodal rule.
    """
    lam = densities.lam
    x = target.nodes + side * s * target.normals
    total = np.zeros(len(x), dtype=complex)
    for source, sigma in _surface_densities(scene, densities):
        r = np.linalg.norm(x[:, None, :] - source.nodes[None, :, :], axis=-1)
        if source is not target:
            total += _kernel("E", lam, r, None) @ (source.weights * sigma)
            continue
        patch = polar_patch(source)
        rs = np.sqrt(np.maximum(patch.r ** 2 + s * s - 2.0 * side * s * patch.ndot, 0.0))
        own = np.sum(_kernel("E", lam, rs, None) * patch.weights, axis=1)
        E = np.where(r > 0, _kernel("E", lam, np.where(r > 0, r, 1.0), None), 0.0)
        total += own * sigma + (E * (sigma[None, :] - sigma[:, None])) @ source.weights
    return total


def one_sided_normal_derivative(scene, densities: DensitySolution, target, side: float,
                                step: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Trace and d_nu of w0 on one side of a surface, by a third-order one-sided
    difference along side * nu.
    """
    f = [shifted_layer_potential(scene, densities, target, k * step, side) for k in range(4)]
    slope = (-11.0 * f[0] + 18.0 * f[1] - 9.0 * f[2] + 2.0 * f[3]) / (6.0 * step)
    return f[0], side * slope


def boundary_residuals(scene, densities: DensitySolution, step_factor: float = FD_STEP_FACTOR) -> Dict[str, float]:
    """
    Boundary conditions of w0, differentiated off the surfaces.

    d_nu w0 is taken from the inside of the outer surface and compared with g;
    (d_nu + rho) w0 is taken on the domain side of each cavity and compared
    with zero, relative to the cavity density.
    """
    outer = scene.outer
    h = step_factor * outer.primitive.min_curvature_radius
    _, dnu = one_sided_normal_derivative(scene, densities, outer, -1.0, h)
    neumann = float(np.max(np.abs(dnu - densities.g)) / max(np.max(np.abs(densities.g)), 1e-300))
    robin = 0.0
    for j, cavity in enumerate(scene.cavities):
        h = step_factor * cavity.primitive.min_curvature_radius
        trace, dnu = one_sided_normal_derivative(scene, densities, cavity, 1.0, h)
        psi = densities.psi[scene.cavity_slice(j)]
        err = np.max(np.abs(dnu + scene.rho[j] * trace)) / max(np.max(np.abs(psi)), 1e-300)
        robin = max(robin, float(err))
    log.debug("lambda=%s: jump residuals neumann %.3g robin %.3g", densities.lam, neumann, robin)
    return {"neumann": neumann, "robin": robin}


def density_deviation(densities: DensitySolution) -> float:
    """|phi - g|_inf / |g|_inf."""
    return float(np.max(np.abs(densities.phi - densities.g)) / np.max(np.abs(densities.g)))


def density_audit(scene, mu_grid: Sequence[float], max_slope: float = DENSITY_SLOPE) -> Dict[str, object]:
    """
    |phi - g|_inf / |g|_inf and |Y22| against real mu, with log-log slopes.

    The deviation is O(1/mu); the audit passes when its fitted slope is at
    most max_slope.

    Raises:
        FitError: fewer than 3 grid points
    """
    if len(mu_grid) < 3:
        raise FitError(f"density audit needs at least 3 mu values, got {len(mu_grid)}")
    rows = []
    for mu in mu_grid:
        blocks = assemble_system(scene, mu)
        dens = solve_densities(scene, mu, scene_flux(scene, mu), blocks)
        norm = operator_norm_Y22(scene, mu) if scene.n_cavities else 0.0
        rows.append({"mu": float(mu), "deviation": density_deviation(dens),
                     "residual": dens.residual, "norm_Y22": norm})
    mus = np.log([r["mu"] for r in rows])
    slope = float(np.polyfit(mus, np.log([r["deviation"] for r in rows]), 1)[0])
    out = {"rows": rows, "deviation_slope": slope, "passed": slope <= max_slope}
    if scene.n_cavities:
        out["norm_slope"] = float(np.polyfit(mus, np.log([r["norm_Y22"] for r in rows]), 1)[0])
    log.info("density audit: deviation slope %.3f (%s)", slope, "ok" if out["passed"] else "too shallow")
    return out


# =============================================================================
# Indicator, direct route
# =============================================================================

def indicator_direct(scene, densities: DensitySolution, p, lam=None, method: str = "cavity") -> complex:
    """
    I0(lam, p) as a boundary integral.

    method="outer" integrates d_nu E(y, p) w0(y) - E(y, p) g(y) over the outer
    surface, which cancels to the reflected part and loses digits fast as mu
    grows. method="cavity" evaluates the same quantity through the cavity
    density, 2 int E(zeta, p) psi(zeta) dS, and is exact zero without cavities.

    Raises:
        ProbeError: p is on or inside the outer surface
    """
    from path_oracle import probe_outside

    p = probe_outside(scene, p)
    lam = _check_lambda(densities.lam if lam is None else lam)
    if method == "cavity":
        if scene.n_cavities == 0:
            return 0j
        E = fundamental_solution(lam, scene.cavity_nodes, p)
        return complex(2.0 * np.sum(scene.cavity_weights * E * densities.psi))
    if method == "outer":
        outer = scene.outer
        w0 = w0_trace(scene, densities)
        dE = normal_derivative_kernel(lam, outer.nodes, p, outer.normals)
        E = fundamental_solution(lam, outer.nodes, p)
        return complex(np.sum(outer.weights * (dE * w0 - E * densities.g)))
    raise UsageError(f"unknown indicator method {method!r}")


# =============================================================================
# Indicator, kernel route
# =============================================================================

def F_k(scene, split: ResolventSplit, p, lam, k: int,
        blocks: Tuple[int, int] = None) -> np.ndarray:
    """
    F^(k)(xi, p) = exp(lam |xi - p|) (M_k e_p)(xi), e_p = exp(-lam |. - p|)/|. - p|.

    With blocks=(i, j) only the contribution of cavity j on cavity i is
    returned, on the nodes of cavity i.
    """
    lam = complex(lam)
    p = np.asarray(p, dtype=float)
    if k not in (0, 1):
        raise UsageError("F_k needs k in {0, 1}")
    Mk = split.M0 if k == 0 else split.M1
    rp = np.linalg.norm(scene.cavity_nodes - p, axis=-1)
    ep = np.exp(-lam * rp) / rp
    if blocks is None:
        return np.exp(lam * rp) * (Mk @ ep)
    i, j = blocks
    si, sj = scene.cavity_slice(i), scene.cavity_slice(j)
    return np.exp(lam * rp[si]) * (Mk[si, sj] @ ep[sj])


@dataclass
class IndicatorTerms:
    """Pieces of the kernel representation I0 = lam I00 + I01."""
    I00: complex
    I01: complex
    I0: complex
    I0_hplus_only: complex


def indicator_terms(scene, p, lam, phi: np.ndarray, split: ResolventSplit,
                    symmetric: bool = True) -> IndicatorTerms:
    """
    Double surface quadrature of exp(-lam (|p - xi| + |xi - y|)) G_j phi(y).

    G0 = H0(xi,p)/|xi-y| + H0(xi,y)/|xi-p| + 2 H0(xi,y)(F0 + F1)
    G1 = H1(xi,p)/|xi-y| + H1(xi,y)/|xi-p| + 2 H1(xi,y)(F0 + F1)

    symmetric=False replaces the first two terms with 2 H(xi, y)/|xi - p|, the
    unsymmetrized form that reproduces the cavity route to round-off.
    """
    lam = complex(lam)
    p = np.asarray(p, dtype=float)
    if scene.n_cavities == 0:
        return IndicatorTerms(0j, 0j, 0j, 0j)
    outer = scene.outer
    xi, nu, rho = scene.cavity_nodes, scene.cavity_normals, scene.cavity_rho

    dp = p - xi
    rp = np.linalg.norm(dp, axis=-1)
    H0p = np.sum(nu * dp, axis=-1) / rp ** 2
    H1p = (H0p + rho) / rp

    ry = np.vstack([pair_geometry(c, outer).r for c in scene.cavities])
    ndy = np.vstack([pair_geometry(c, outer).ndot for c in scene.cavities])
    H0y = ndy / ry ** 2
    H1y = (H0y + rho[:, None]) / ry

    Fsum = F_k(scene, split, p, lam, 0) + F_k(scene, split, p, lam, 1)
    phase = np.exp(-lam * (rp[:, None] + ry))

    if symmetric:
        lead0 = H0p[:, None] / ry + H0y / rp[:, None]
        lead1 = H1p[:, None] / ry + H1y / rp[:, None]
    else:
        lead0 = 2.0 * H0y / rp[:, None]
        lead1 = 2.0 * H1y / rp[:, None]
    G0 = lead0 + 2.0 * H0y * Fsum[:, None]
    G1 = lead1 + 2.0 * H1y * Fsum[:, None]

    left = scene.cavity_weights / TWO_PI ** 2
    right = outer.weights * phi

    def integrate(G):
        return complex(left @ (phase * G) @ right)

    I00, I01 = integrate(G0), integrate(G1)
    lead = lam * integrate(lead0) + integrate(lead1)
    return IndicatorTerms(I00, I01, lam * I00 + I01, lead)


def indicator_kernel_route(scene, p, lam, phi: np.ndarray, split: ResolventSplit = None) -> complex:
    split = split if split is not None else resolvent_M(scene, lam)
    return indicator_terms(scene, p, lam, phi, split).I0


# =============================================================================
# Evaluation
# =============================================================================

@dataclass
class IndicatorValue:
    lam: complex
    p: np.ndarray
    I0_direct: complex
    I0_kernel_route: Optional[complex] = None
    density_residual: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def route_residual(self) -> float:
        if self.I0_kernel_route is None or self.I0_direct == 0:
            return float("nan")
        return abs(self.I0_direct - self.I0_kernel_route) / abs(self.I0_direct)

    def row(self) -> dict:
        a = abs(self.I0_direct)
        return {
            "mu": self.lam.real, "im_lambda": self.lam.imag,
            "re_I0": self.I0_direct.real, "im_I0": self.I0_direct.imag,
            "log_abs_I0": float(np.log(a)) if a > 0 else float("-inf"),
            "route_residual": self.route_residual,
        }


def evaluate_indicator(scene, p, lam, g: np.ndarray = None, method: str = "cavity",
                       kernel_route: bool = True, tol: Tolerances = DEFAULT_TOLERANCES) -> IndicatorValue:
    """Assemble, solve and evaluate I0 at one lambda, optionally by both routes."""
    lam = _check_lambda(lam)
    blocks = assemble_system(scene, lam)
    if g is None:
        g = scene_flux(scene, lam)
    dens = solve_densities(scene, lam, g, blocks, tol)
    direct = indicator_direct(scene, dens, p, lam, method)
    value = IndicatorValue(lam, np.asarray(p, dtype=float), direct, density_residual=dens.residual)
    if kernel_route and scene.n_cavities:
        split = resolvent_M(scene, lam, blocks)
        value.I0_kernel_route = indicator_kernel_route(scene, p, lam, dens.phi, split)
        if value.route_residual > tol.route:
            log.warning("lambda=%s: routes differ by %.3g (> %.1g)", lam, value.route_residual, tol.route)
    return value


def amplitude(value: IndicatorValue, l: float, beta0: float = 2.0) -> complex:
    """lam^beta0 * lam * exp(lam l) * I0, which tends to a positive constant along the real axis."""
    lam = value.lam
    return complex(lam ** beta0 * lam * np.exp(lam * l) * value.I0_direct)
