"""
BIE Core for Heat Enclosure
Kernels and dense Nystrom operators for the modified Helmholtz layer potentials
E(x, y) = exp(-lam r) / (2 pi r), the Neumann resolvent of the transposed
cavity operator, its split into a leading part and a remainder, the block
diagonal / off-diagonal decomposition between cavities, and the decay audits
of the resulting kernels.

Quadrature weights are folded into every matrix, so applying an operator is a
matrix-vector product. Weakly singular self blocks use singularity
subtraction: the diagonal entry is fixed so that each row integrates the
kernel exactly, with that integral taken by a polar rule centred on the
target node.
"""

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.special import roots_legendre

from app.errors import (CoincidentPointsError, FitError, SingularSystemError, UsageError)
from app.tolerances import DEFAULT_TOLERANCES, Tolerances
from geometry import DiscretizedSurface, Scene, angular_rule, tangent_frame
from run_logger import get_logger

log = get_logger("bie_core")

TWO_PI = 2.0 * np.pi

TAGS = ("Y11", "Y12", "Y21", "Y22", "tY22", "M0", "Mtilde", "M", "M1",
        "W", "Winf", "M_Dj", "V11", "V12")

# Polar rule: Gauss-Legendre panels in the polar angle, of width pi/8 and halved
# DYADIC_LEVELS times towards the pole; trapezoid in azimuth
POLAR_PANEL = np.pi / 8
DYADIC_LEVELS = 4
POLAR_ORDER = 8
ANGULAR_POINTS = 24
POLAR_CHUNK = 128       # nodes per batch when building the rule


# =============================================================================
# Spectral samples and operators
# =============================================================================

@dataclass(frozen=True)
class SpectralSample:
    """A complex lambda tagged with the region it was drawn from."""
    lam: complex
    region: str = "real_axis"
    delta: float = 0.0

    @property
    def mu(self) -> float:
        return float(np.real(self.lam))

    def in_region(self, rtol: float = 1e-12) -> bool:
        mu, im = self.mu, abs(float(np.imag(self.lam)))
        if self.region == "real_axis":
            return mu > 0 and im == 0
        if self.region == "sector":
            return mu > 0 and mu >= self.delta * im * (1 - rtol)
        if self.region == "logregion":
            return mu >= np.e and im <= self.delta * mu / np.log(mu) * (1 + rtol)
        return False


@dataclass(frozen=True, eq=False)
class BoundaryOperator:
    """Dense operator between node sets, quadrature weights folded in."""
    matrix: np.ndarray
    tag: str
    lam: complex
    targets: np.ndarray
    sources: np.ndarray
    source_weights: np.ndarray
    row_blocks: Tuple[Tuple[str, slice], ...] = ()
    col_blocks: Tuple[Tuple[str, slice], ...] = ()

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.matrix @ f

    def kernel(self) -> np.ndarray:
        """Kernel values at node pairs (diagonal entries are not kernel values)."""
        return self.matrix / self.source_weights[None, :]

    def block(self, i: int, j: int) -> "BoundaryOperator":
        (rid, rs), (cid, cs) = self.row_blocks[i], self.col_blocks[j]
        return BoundaryOperator(self.matrix[rs, cs], f"{self.tag}[{rid},{cid}]", self.lam,
                                self.targets[rs], self.sources[cs], self.source_weights[cs],
                                ((rid, slice(0, rs.stop - rs.start)),),
                                ((cid, slice(0, cs.stop - cs.start)),))


# =============================================================================
# Kernels
# =============================================================================

def _check_lambda(lam) -> complex:
    lam = complex(lam)
    if lam.real <= 0:
        raise UsageError(f"Re lambda must be positive, got {lam}")
    return lam


def fundamental_solution(lam, x, y) -> np.ndarray:
    """E(x, y) = exp(-lam |x - y|) / (2 pi |x - y|)."""
    lam = _check_lambda(lam)
    r = np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), axis=-1)
    if np.any(r == 0):
        raise CoincidentPointsError("fundamental solution at coincident points")
    return np.exp(-lam * r) / (TWO_PI * r)


def normal_derivative_kernel(lam, x, y, nu) -> np.ndarray:
    """nu . grad_x E(x, y) = -exp(-lam r)(lam + 1/r) nu.(x - y) / (2 pi r^2)."""
    lam = _check_lambda(lam)
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = np.linalg.norm(d, axis=-1)
    if np.any(r == 0):
        raise CoincidentPointsError("normal derivative at coincident points")
    nd = np.sum(np.asarray(nu, dtype=float) * d, axis=-1)
    return -np.exp(-lam * r) * (lam + 1.0 / r) * nd / (TWO_PI * r ** 2)


def h_kernels(xi, zeta, nu_xi, rho: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """H0 = nu_xi.(zeta - xi)/r^2 and H1 = (H0 + rho)/r with r = |xi - zeta|."""
    d = np.asarray(zeta, dtype=float) - np.asarray(xi, dtype=float)
    r = np.linalg.norm(d, axis=-1)
    if np.any(r == 0):
        raise CoincidentPointsError("H kernels at coincident points")
    h0 = np.sum(np.asarray(nu_xi, dtype=float) * d, axis=-1) / r ** 2
    return h0, (h0 + rho) / r


def _kernel(kind: str, lam: complex, r: np.ndarray, ndot: np.ndarray, rho=0.0) -> np.ndarray:
    """
    Kernel values from target-source distance r and ndot = nu_target.(source - target).

    Kinds:
        E   single layer
        DT  -d/dnu_target E, the outer-surface Neumann kernel
        K0  lam-part of d/dnu_target E + rho E
        K1  remaining part of d/dnu_target E + rho E
        K   K0 + K1
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.exp(-lam * r) / TWO_PI
        if kind == "E":
            return e / r
        if kind == "DT":
            return -e * (lam + 1.0 / r) * ndot / r ** 2
        h0 = ndot / r ** 2
        if kind == "K0":
            return e * lam * h0
        if kind == "K1":
            return e * (h0 + rho) / r
        if kind == "K":
            return e * (lam * h0 + (h0 + rho) / r)
    raise UsageError(f"unknown kernel kind {kind!r}")


# =============================================================================
# Cached geometry
# =============================================================================

def smooth_step(s: np.ndarray) -> np.ndarray:
    """C-infinity step from 0 at s <= 0 to 1 at s >= 1."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        g = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return f / (f + g)


def polar_angles() -> Tuple[np.ndarray, np.ndarray]:
    """Polar-angle nodes on [0, pi], graded towards the pole."""
    edges = np.concatenate([[0.0], POLAR_PANEL / 2.0 ** np.arange(DYADIC_LEVELS, 0, -1),
                            POLAR_PANEL * np.arange(1, int(round(np.pi / POLAR_PANEL)) + 1)])
    x, w = roots_legendre(POLAR_ORDER)
    a, b = edges[:-1, None], edges[1:, None]
    theta = (0.5 * (b - a) * x[None, :] + 0.5 * (a + b)).ravel()
    w_theta = (0.5 * (b - a) * w[None, :]).ravel()
    return theta, w_theta


@dataclass(frozen=True, eq=False)
class PolarPatch:
    """Polar quadrature of the whole surface around every node."""
    r: np.ndarray        # (n, P) distances to the patch points
    ndot: np.ndarray     # (n, P) nu_node . (point - node)
    weights: np.ndarray  # (n, P) area element x polar weights


@lru_cache(maxsize=4)
def polar_patch(surface: DiscretizedSurface) -> PolarPatch:
    """
    Polar rule centred on each node of the parameter sphere.

    The parameter sphere is rotated so the node sits at the pole; the surface
    element sin(theta) dtheta dphi cancels the 1/r of the kernels, so the
    integrands are smooth in the rotated angles.
    """
    primitive = surface.primitive
    t0, phi0, _ = angular_rule(surface.spec.refinement)
    s0 = np.sqrt(np.clip(1.0 - t0 * t0, 0.0, None))
    pole = np.stack([s0 * np.cos(phi0), s0 * np.sin(phi0), t0], axis=-1)
    e1, e2 = tangent_frame(pole)

    theta, w_theta = polar_angles()
    psi = TWO_PI * (np.arange(ANGULAR_POINTS) + 0.5) / ANGULAR_POINTS
    ct = np.repeat(np.cos(theta), ANGULAR_POINTS)
    sc = np.outer(np.sin(theta), np.cos(psi)).ravel()
    ss = np.outer(np.sin(theta), np.sin(psi)).ravel()
    polar_w = np.repeat(w_theta * np.sin(theta), ANGULAR_POINTS) * (TWO_PI / ANGULAR_POINTS)

    n, P = surface.size, len(polar_w)
    r = np.empty((n, P))
    ndot = np.empty((n, P))
    weights = np.empty((n, P))
    for start in range(0, n, POLAR_CHUNK):
        rows = slice(start, min(start + POLAR_CHUNK, n))
        u = (ct[None, :, None] * pole[rows, None, :]
             + sc[None, :, None] * e1[rows, None, :]
             + ss[None, :, None] * e2[rows, None, :])
        t = np.clip(u[..., 2], -1.0, 1.0)
        phi = np.arctan2(u[..., 1], u[..., 0])
        d = primitive.points(t, phi) - surface.nodes[rows, None, :]
        r[rows] = np.linalg.norm(d, axis=-1)
        ndot[rows] = np.einsum("ik,ijk->ij", surface.normals[rows], d)
        weights[rows] = polar_w[None, :] * primitive.area_element(t, phi)
    log.debug("%s: polar rule with %d points per node", surface.surface_id, P)
    return PolarPatch(r, ndot, weights)


@dataclass(frozen=True, eq=False)
class PairGeometry:
    r: np.ndarray      # (n_target, n_source)
    ndot: np.ndarray   # nu_target . (source - target)


@lru_cache(maxsize=32)
def pair_geometry(target: DiscretizedSurface, source: DiscretizedSurface) -> PairGeometry:
    d = source.nodes[None, :, :] - target.nodes[:, None, :]
    r = np.linalg.norm(d, axis=-1)
    ndot = np.einsum("ik,ijk->ij", target.normals, d)
    if target is source:
        np.fill_diagonal(r, 1.0)
    return PairGeometry(r, ndot)


def _self_block(surface: DiscretizedSurface, lam: complex, kind: str, rho: float = 0.0) -> np.ndarray:
    """
    Self block with singularity subtraction on the diagonal.

    Row sums equal the polar-rule integral of the kernel, so applying the block
    to f gives int K f_y + sum K w (f_z - f_y).
    """
    geo = pair_geometry(surface, surface)
    patch = polar_patch(surface)
    K = _kernel(kind, lam, geo.r, geo.ndot, rho)
    np.fill_diagonal(K, 0.0)
    A = K * surface.weights[None, :]
    rows = np.sum(_kernel(kind, lam, patch.r, patch.ndot, rho) * patch.weights, axis=1)
    np.fill_diagonal(A, rows - np.sum(A, axis=1))
    return A


def _cross_block(target: DiscretizedSurface, source: DiscretizedSurface, lam: complex,
                 kind: str, rho: float = 0.0) -> np.ndarray:
    geo = pair_geometry(target, source)
    return _kernel(kind, lam, geo.r, geo.ndot, rho) * source.weights[None, :]


def row_integrals(surface: DiscretizedSurface, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    """Integrals of fn(r, ndot) over the surface, one per node as target."""
    patch = polar_patch(surface)
    return np.sum(fn(patch.r, patch.ndot) * patch.weights, axis=1)


# =============================================================================
# Assembly
# =============================================================================

def _stack_cavity_blocks(scene: Scene, lam: complex, kind: str) -> np.ndarray:
    """Cavity-to-cavity operator for a K-type kernel, rho taken at the target."""
    n = int(scene.cavity_offsets[-1])
    A = np.zeros((n, n), dtype=complex)
    for i, target in enumerate(scene.cavities):
        rows = scene.cavity_slice(i)
        for j, source in enumerate(scene.cavities):
            cols = scene.cavity_slice(j)
            if i == j:
                A[rows, cols] = _self_block(target, lam, kind, scene.rho[i])
            else:
                A[rows, cols] = _cross_block(target, source, lam, kind, scene.rho[i])
    return A


def weighted_transpose(A: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Adjoint under the quadrature pairing: W^-1 A^T W."""
    return A.T * weights[None, :] / weights[:, None]


@dataclass(frozen=True, eq=False)
class SystemBlocks:
    """The four density-system blocks at one lambda, plus the cavity kernel split."""
    lam: complex
    A11: np.ndarray
    A12: np.ndarray
    A21: np.ndarray
    A22: np.ndarray
    A22_0: np.ndarray
    A22_1: np.ndarray


def assemble_system(scene: Scene, lam) -> SystemBlocks:
    lam = _check_lambda(lam)
    outer = scene.outer
    A11 = _self_block(outer, lam, "DT")
    if scene.n_cavities == 0:
        empty = np.zeros((0, 0), dtype=complex)
        return SystemBlocks(lam, A11, np.zeros((outer.size, 0), dtype=complex),
                            np.zeros((0, outer.size), dtype=complex), empty, empty, empty)
    A12 = np.hstack([_cross_block(outer, c, lam, "DT") for c in scene.cavities])
    A21 = np.vstack([_cross_block(c, outer, lam, "K", scene.rho[j])
                     for j, c in enumerate(scene.cavities)])
    A22_0 = _stack_cavity_blocks(scene, lam, "K0")
    A22_1 = _stack_cavity_blocks(scene, lam, "K1")
    return SystemBlocks(lam, A11, A12, A21, A22_0 + A22_1, A22_0, A22_1)


def single_layer_blocks(scene: Scene, lam) -> Tuple[np.ndarray, np.ndarray]:
    """Single-layer traces on the outer surface: V11 (self) and V12 (from cavities)."""
    lam = _check_lambda(lam)
    V11 = _self_block(scene.outer, lam, "E")
    if scene.n_cavities == 0:
        return V11, np.zeros((scene.outer.size, 0), dtype=complex)
    V12 = np.hstack([_cross_block(scene.outer, c, lam, "E") for c in scene.cavities])
    return V11, V12


def _operator(scene: Scene, matrix: np.ndarray, tag: str, lam: complex,
              target: str, source: str) -> BoundaryOperator:
    def side(which):
        if which == "outer":
            o = scene.outer
            return o.nodes, o.weights, ((o.surface_id, slice(0, o.size)),)
        blocks = tuple((c.surface_id, scene.cavity_slice(j)) for j, c in enumerate(scene.cavities))
        return scene.cavity_nodes, scene.cavity_weights, blocks

    tn, _, tb = side(target)
    sn, sw, sb = side(source)
    return BoundaryOperator(matrix, tag, lam, tn, sn, sw, tb, sb)


def assemble_block(scene: Scene, lam, tag: str) -> BoundaryOperator:
    """
    Assemble one named operator at lambda.

    Raises:
        UsageError: unknown tag or Re lambda <= 0
    """
    lam = _check_lambda(lam)
    if tag not in TAGS:
        raise UsageError(f"unsupported operator tag {tag!r}")
    if tag in ("V11", "V12"):
        V11, V12 = single_layer_blocks(scene, lam)
        return (_operator(scene, V11, tag, lam, "outer", "outer") if tag == "V11"
                else _operator(scene, V12, tag, lam, "outer", "cavity"))
    if tag in ("M", "M1"):
        split = resolvent_M(scene, lam)
        return _operator(scene, split.M if tag == "M" else split.M1, tag, lam, "cavity", "cavity")
    if tag in ("W", "Winf", "M_Dj"):
        bs = block_split_W(scene, lam)
        matrix = {"W": bs.W, "Winf": bs.W_inf, "M_Dj": bs.M_D}[tag]
        return _operator(scene, matrix, tag, lam, "cavity", "cavity")

    blocks = assemble_system(scene, lam)
    w = scene.cavity_weights
    matrix, target, source = {
        "Y11": (blocks.A11, "outer", "outer"),
        "Y12": (blocks.A12, "outer", "cavity"),
        "Y21": (blocks.A21, "cavity", "outer"),
        "Y22": (blocks.A22, "cavity", "cavity"),
        "tY22": (weighted_transpose(blocks.A22, w), "cavity", "cavity"),
        "M0": (weighted_transpose(blocks.A22_0, w), "cavity", "cavity"),
        "Mtilde": (weighted_transpose(blocks.A22_1, w), "cavity", "cavity"),
    }[tag]
    return _operator(scene, matrix, tag, lam, target, source)


# =============================================================================
# Dense solves
# =============================================================================

def factor(matrix: np.ndarray, what: str, lam=None):
    """LU factorization that reports singular matrices as SingularSystemError."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", LinAlgWarning)
        try:
            lu = lu_factor(matrix, check_finite=True)
        except (LinAlgWarning, ValueError, np.linalg.LinAlgError) as e:
            raise SingularSystemError(what, lam) from e
    if np.any(np.diag(lu[0]) == 0):
        raise SingularSystemError(what, lam)
    return lu


def operator_norm_Y22(scene: Scene, lam) -> float:
    """Sup-norm of Y22 as the largest row integral of |kernel|."""
    lam = _check_lambda(lam)
    best = 0.0
    for i, target in enumerate(scene.cavities):
        rho = scene.rho[i]
        rows = row_integrals(target, lambda r, nd: np.abs(_kernel("K", lam, r, nd, rho)))
        for j, source in enumerate(scene.cavities):
            if j != i:
                rows = rows + np.abs(_cross_block(target, source, lam, "K", rho)).sum(axis=1)
        best = max(best, float(rows.max()))
    return best


@dataclass(frozen=True, eq=False)
class ResolventSplit:
    """M = tY22 (I - tY22)^-1 with its leading part M0 and remainder M1."""
    lam: complex
    B: np.ndarray
    M: np.ndarray
    M0: np.ndarray
    Mtilde: np.ndarray
    M1: np.ndarray
    norm_estimate: float


def resolvent_M(scene: Scene, lam, blocks: SystemBlocks = None) -> ResolventSplit:
    """
    Neumann resolvent of the transposed cavity operator, by dense LU.

    Raises:
        SingularSystemError: I - tY22 is singular
    """
    lam = _check_lambda(lam)
    blocks = blocks if blocks is not None else assemble_system(scene, lam)
    w = scene.cavity_weights
    M0 = weighted_transpose(blocks.A22_0, w)
    Mtilde = weighted_transpose(blocks.A22_1, w)
    B = M0 + Mtilde
    norm = operator_norm_Y22(scene, lam) if scene.n_cavities else 0.0
    if norm >= 1.0:
        log.warning("lambda=%s: |Y22| estimate %.3g >= 1, Neumann series would not converge", lam, norm)
    n = B.shape[0]
    M = lu_solve(factor(np.eye(n) - B, "I - tY22", lam), B) if n else B.copy()
    return ResolventSplit(lam, B, M, M0, Mtilde, M - M0, norm)


def neumann_series(B: np.ndarray, terms: int) -> np.ndarray:
    """B (I + B + ... + B^terms), the truncated resolvent."""
    total = np.eye(B.shape[0], dtype=B.dtype)
    power = np.eye(B.shape[0], dtype=B.dtype)
    for _ in range(terms):
        power = power @ B
        total = total + power
    return B @ total


def resolvent_identity_residual(split: ResolventSplit) -> float:
    """|(I - tY22)(I + M) - I| relative to |M|, max-entry norms."""
    n = split.B.shape[0]
    if n == 0:
        return 0.0
    I = np.eye(n)
    R = (I - split.B) @ (I + split.M) - I
    return float(np.abs(R).max() / max(1.0, np.abs(split.M).max()))


@dataclass(frozen=True, eq=False)
class BlockSplit:
    """Block-diagonal part of tY22 and the off-diagonal machinery built from it."""
    lam: complex
    Y_D: np.ndarray
    W: np.ndarray
    W_inf: np.ndarray
    M_D: np.ndarray
    M_Dj: List[np.ndarray]
    M0_Dj: List[np.ndarray]
    M1_Dj: List[np.ndarray]
    slices: List[slice]

    def diagonal_difference(self, j: int) -> np.ndarray:
        """M^jj - M_Dj, from M = M_D + W_inf + M_D W_inf without cancellation."""
        s = self.slices[j]
        return self.W_inf[s, s] + self.M_Dj[j] @ self.W_inf[s, s]


def _right_solve(X: np.ndarray, lu) -> np.ndarray:
    """X A^-1 given the LU factors of A."""
    return lu_solve(lu, X.T, trans=1).T


def block_split_W(scene: Scene, lam, split: ResolventSplit = None) -> BlockSplit:
    """
    Y_D = blockdiag(tY22), W = (tY22 - Y_D)(I - Y_D)^-1, W_inf = W (I - W)^-1
    and the per-cavity resolvents M_Dj = Y_D^jj (I - Y_D^jj)^-1.

    Raises:
        SingularSystemError: some I - Y_D^jj or I - W is singular
    """
    lam = _check_lambda(lam)
    split = split if split is not None else resolvent_M(scene, lam)
    B = split.B
    n = B.shape[0]
    slices = [scene.cavity_slice(j) for j in range(scene.n_cavities)]
    Y_D = np.zeros_like(B)
    M_D = np.zeros_like(B)
    W = np.zeros_like(B)
    M_Dj, M0_Dj, M1_Dj = [], [], []
    for j, s in enumerate(slices):
        Bjj = B[s, s]
        Y_D[s, s] = Bjj
        lu = factor(np.eye(Bjj.shape[0]) - Bjj, f"I - Y_D[{j}]", lam)
        Mj = lu_solve(lu, Bjj)
        M_D[s, s] = Mj
        M_Dj.append(Mj)
        M0_Dj.append(split.M0[s, s])
        M1_Dj.append(Mj - split.M0[s, s])
        W[:, s] = _right_solve(B[:, s] - Y_D[:, s], lu)
    if scene.n_cavities > 1:
        W_inf = _right_solve(W, factor(np.eye(n) - W, "I - W", lam))
    else:
        W_inf = np.zeros_like(W)
    return BlockSplit(lam, Y_D, W, W_inf, M_D, M_Dj, M0_Dj, M1_Dj, slices)


def split_identity_residual(split: ResolventSplit, bs: BlockSplit) -> float:
    """Relative residual of M = M_D + W_inf + M_D W_inf."""
    R = bs.M_D + bs.W_inf + bs.M_D @ bs.W_inf - split.M
    return float(np.abs(R).max() / max(np.abs(split.M).max(), np.finfo(float).tiny))


# =============================================================================
# Decay audits
# =============================================================================

@dataclass
class DecayReport:
    """Envelope R(mu) = max |k(xi, zeta)| exp(c mu |xi - zeta|) and its fitted rate."""
    name: str
    mu: List[float]
    envelope: List[float]
    fitted_rate: float
    threshold: float
    passed: bool
    strictly_decreasing: bool

    def rows(self) -> List[dict]:
        return [{"mu": m, "max_envelope": e, "fitted_rate": self.fitted_rate}
                for m, e in zip(self.mu, self.envelope)]


def kernel_envelope(kernel: np.ndarray, targets: np.ndarray, sources: np.ndarray,
                    mu: float, factor_: float, exclude_diagonal: bool = False) -> float:
    d = np.linalg.norm(targets[:, None, :] - sources[None, :, :], axis=-1)
    vals = np.log(np.abs(kernel) + np.finfo(float).tiny) + factor_ * mu * d
    if exclude_diagonal:
        np.fill_diagonal(vals, -np.inf)
    return float(np.exp(np.max(vals)))


def decay_audit(blocks: Sequence[BoundaryOperator], delta: float = DEFAULT_TOLERANCES.audit_delta,
                d1: float = 1.0, diagonal: bool = False, extra_rate: float = 0.0,
                slack: float = DEFAULT_TOLERANCES.slack, name: str = None) -> DecayReport:
    """
    Fit the exponential decay rate of a kernel envelope across a mu grid.

    Off-diagonal blocks are weighted by exp((1 - delta) mu r) and compared with
    delta d1; diagonal differences are weighted by exp(mu r) and compared with
    delta d1 + extra_rate. The pass criterion applies the slack factor to the
    expected rate.

    Raises:
        FitError: fewer than 3 grid points
    """
    if len(blocks) < 3:
        raise FitError(f"decay audit needs at least 3 mu values, got {len(blocks)}")
    c = 1.0 if diagonal else 1.0 - delta
    mus = [float(np.real(b.lam)) for b in blocks]
    env = [kernel_envelope(b.kernel(), b.targets, b.sources, m, c, exclude_diagonal=diagonal)
           for b, m in zip(blocks, mus)]
    slope = float(np.polyfit(mus, np.log(env), 1)[0])
    expected = delta * d1 + (extra_rate if diagonal else 0.0)
    threshold = slack * expected
    decreasing = all(b < a for a, b in zip(env, env[1:]))
    report = DecayReport(name or blocks[0].tag, mus, env, -slope, threshold, -slope >= threshold, decreasing)
    log.info("decay audit %s: rate %.4g vs threshold %.4g (%s)", report.name, report.fitted_rate,
             threshold, "pass" if report.passed else "FAIL")
    return report


def diagonal_envelope_constant(M1_Dj: np.ndarray, nodes: np.ndarray, weights: np.ndarray,
                               mu: float) -> float:
    """Largest ratio of |M1_Dj| to exp(-mu r)(1 + 1/r + min{mu (mu r^3)^1/2, r^-3}) off the diagonal."""
    r = np.linalg.norm(nodes[:, None, :] - nodes[None, :, :], axis=-1)
    np.fill_diagonal(r, np.inf)
    k = np.abs(M1_Dj / weights[None, :])
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        log_env = -mu * r + np.log(1.0 + 1.0 / r + np.minimum(mu * np.sqrt(mu * r ** 3), r ** -3.0))
        ratio = np.log(k + np.finfo(float).tiny) - log_env
    np.fill_diagonal(ratio, -np.inf)
    return float(np.exp(np.max(ratio)))


def decay_integral_envelope(surface: DiscretizedSurface, mu_grid: Sequence[float], k: int) -> Dict[str, list]:
    """
    Constants C(mu) = max_xi int exp(-mu r) r^-k dS / mu^(k - 2) for k in {0, 1}.

    Integrals run over the whole surface, where the min in the bound is mu^(k-2).
    """
    if k not in (0, 1):
        raise UsageError("decay envelope exponent must be 0 or 1")
    constants = []
    for mu in mu_grid:
        rows = row_integrals(surface, lambda r, nd: np.exp(-mu * r) / r ** k)
        constants.append(float(rows.max() / mu ** (k - 2)))
    return {"mu": [float(m) for m in mu_grid], "C": constants}


def inverse_distance_integral(surface: DiscretizedSurface) -> float:
    """max_xi int dS / |xi - zeta| over the surface."""
    return float(row_integrals(surface, lambda r, nd: 1.0 / r).max())


def transposed_row_envelope(surface: DiscretizedSurface, mu_grid: Sequence[float]) -> List[float]:
    """max_xi int (mu + 1/r) exp(-mu r) dS for each mu."""
    return [float(row_integrals(surface, lambda r, nd: (mu + 1.0 / r) * np.exp(-mu * r)).max())
            for mu in mu_grid]


def norm_slope(scene: Scene, mu_grid: Sequence[float]) -> Dict[str, object]:
    """Log-log slope of |Y22(mu)| over a real mu grid."""
    norms = [operator_norm_Y22(scene, mu) for mu in mu_grid]
    slope = float(np.polyfit(np.log(mu_grid), np.log(norms), 1)[0])
    return {"mu": [float(m) for m in mu_grid], "norm": norms, "slope": slope}


def kernel_audit(scene: Scene, mu_grid: Sequence[float], delta: float = DEFAULT_TOLERANCES.audit_delta,
                 d1: float = None, tol: Tolerances = DEFAULT_TOLERANCES) -> Dict[str, object]:
    """
    Run the kernel decay audits on a scene over a real mu grid.

    Off-diagonal reports need at least two cavities.
    """
    from geometry import cavity_separation

    if d1 is None:
        d1 = cavity_separation(scene, tol)
    splits, bsplits = [], []
    for mu in mu_grid:
        split = resolvent_M(scene, mu)
        splits.append(split)
        bsplits.append(block_split_W(scene, mu, split))

    out: Dict[str, object] = {"d1": d1, "delta": delta}
    if scene.n_cavities >= 2:
        def off(matrix_of, tag):
            ops = []
            for split, bs in zip(splits, bsplits):
                op = _operator(scene, matrix_of(split, bs), tag, split.lam, "cavity", "cavity")
                ops.append(op.block(0, 1))
            return decay_audit(ops, delta, d1, slack=tol.slack, name=f"{tag}[0,1]")

        out["W"] = off(lambda s, b: b.W, "W")
        out["Winf"] = off(lambda s, b: b.W_inf, "Winf")
        out["M1_offdiag"] = off(lambda s, b: s.M1, "M1")
        diag_ops = []
        c0 = scene.cavities[0]
        for bs in bsplits:
            diag_ops.append(BoundaryOperator(bs.diagonal_difference(0), "M-M_D[0,0]", bs.lam,
                                             c0.nodes, c0.nodes, c0.weights))
        out["diag_difference"] = decay_audit(diag_ops, delta, d1, diagonal=True, slack=tol.slack,
                                             name="M-M_D[0,0]")

    if scene.n_cavities >= 1:
        c0 = scene.cavities[0]
        out["diag_envelope_C"] = [diagonal_envelope_constant(bs.M1_Dj[0], c0.nodes, c0.weights, mu)
                                  for bs, mu in zip(bsplits, mu_grid)]
        out["surface_envelopes"] = {
            "inverse_distance": inverse_distance_integral(c0),
            "decay_k0": decay_integral_envelope(c0, mu_grid, 0)["C"],
            "decay_k1": decay_integral_envelope(c0, mu_grid, 1)["C"],
            "transposed_rows": transposed_row_envelope(c0, mu_grid),
        }
        out["norm"] = norm_slope(scene, mu_grid)
        out["resolvent_residual"] = max(resolvent_identity_residual(s) for s in splits)
        out["split_residual"] = max(split_identity_residual(s, b) for s, b in zip(splits, bsplits))
    return out
