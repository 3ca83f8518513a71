"""
Path Oracle for Heat Enclosure
Ground-truth broken-path geometry. The length of the path probe -> cavity point
-> outer point is minimized over all cavity/outer surface pairs, the minimizers
are classified by which side of the tangent plane the probe and the outer point
fall, and the scene assumptions are checked.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.errors import (ChartError, CoincidentPointsError, GeometryError, NotStrictlyConvex,
                        OverlapError, ProbeError)
from app.tolerances import DEFAULT_TOLERANCES, Tolerances
from geometry import LocalChart, Scene, chart_at, convexity_audit, validate_scene
from run_logger import get_logger

log = get_logger("path_oracle")

M1 = "M1"
M2_PLUS = "M2plus"
M2_MINUS = "M2minus"
MG = "Mg"

MAX_SEEDS = 48
MAX_NEWTON_STEPS = 80


@dataclass
class PathCriticalPoint:
    """A refined minimizer (xi, y) of the broken-path length."""
    xi: np.ndarray
    y: np.ndarray
    cavity_index: int
    surface_id: str
    value: float
    nu_xi: np.ndarray
    nu_y: np.ndarray
    hessian_eigenvalues: np.ndarray
    grad_norm: float
    path_class: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "surface_id": self.surface_id,
            "xi": [float(c) for c in self.xi],
            "y": [float(c) for c in self.y],
            "value": float(self.value),
            "class": self.path_class,
            "hessian_eigenvalues": [float(e) for e in self.hessian_eigenvalues],
            "grad_norm": float(self.grad_norm),
        }


@dataclass
class PathReport:
    """Minimum broken-path length l(p, D) and every minimizer attaining it."""
    p: np.ndarray
    l_min: float
    minimizers: List[PathCriticalPoint]
    degenerate: bool = False
    assumption_I2_holds: Optional[bool] = None
    assumption_I3_holds: Optional[bool] = None
    tolerances: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "p": [float(c) for c in self.p],
            "l_min": float(self.l_min),
            "degenerate": self.degenerate,
            "I2": self.assumption_I2_holds,
            "I3": self.assumption_I3_holds,
            "minimizers": [m.to_dict() for m in self.minimizers],
            "tolerances": self.tolerances,
        }


# =============================================================================
# Path lengths
# =============================================================================

def broken_path_length(p, xi, y) -> np.ndarray:
    """|p - xi| + |xi - y|, broadcasting over leading axes."""
    p, xi, y = (np.asarray(a, dtype=float) for a in (p, xi, y))
    return np.linalg.norm(p - xi, axis=-1) + np.linalg.norm(xi - y, axis=-1)


def hplus(xi, y, p, nu_xi) -> float:
    """Amplitude H+ of the leading term at a pair (xi, y).

    Raises:
        CoincidentPointsError: xi coincides with p or y
    """
    xi, y, p, nu_xi = (np.asarray(a, dtype=float) for a in (xi, y, p, nu_xi))
    dp = np.linalg.norm(p - xi)
    dy = np.linalg.norm(y - xi)
    if dp == 0 or dy == 0:
        raise CoincidentPointsError("H+ needs xi distinct from p and y")
    return float(nu_xi @ ((p - xi) / dp + (y - xi) / dy) / (dp * dy))


def probe_outside(scene: Scene, p) -> np.ndarray:
    """Validate a probe point and return it as an array.

    Raises:
        ProbeError: p is on or inside the outer surface
    """
    p = np.asarray(p, dtype=float).reshape(3)
    if not np.all(np.isfinite(p)) or scene.outer.primitive.implicit(p) <= 0:
        raise ProbeError(f"probe {tuple(p)} is not strictly outside the outer surface")
    return p


def brute_force_minimum(scene: Scene, p) -> Tuple[float, int, int, int]:
    """
    Node-pair minimum of the path length.

    For a fixed cavity node the best outer node is its nearest neighbour, so
    the scan is one KD-tree query per cavity.

    Returns:
        (value, cavity index, cavity node, outer node)
    """
    p = probe_outside(scene, p)
    best = (float("inf"), -1, -1, -1)
    for j, cavity in enumerate(scene.cavities):
        d, idx = scene.outer.tree.query(cavity.nodes)
        f = np.linalg.norm(cavity.nodes - p, axis=1) + d
        i = int(np.argmin(f))
        if f[i] < best[0]:
            best = (float(f[i]), j, i, int(idx[i]))
    return best


def _seeds(scene: Scene, p: np.ndarray) -> List[Tuple[int, int, int, float]]:
    """Discrete local minima of the path length near the global node minimum."""
    candidates = []
    for j, cavity in enumerate(scene.cavities):
        d, idx = scene.outer.tree.query(cavity.nodes)
        f = np.linalg.norm(cavity.nodes - p, axis=1) + d
        k = min(9, cavity.size)
        _, nbrs = cavity.tree.query(cavity.nodes, k=k)
        local_min = f <= np.min(f[nbrs], axis=1)
        for i in np.flatnonzero(local_min):
            candidates.append((j, int(i), int(idx[i]), float(f[i])))
    if not candidates:
        return []
    fmin = min(c[3] for c in candidates)
    window = 0.05 * fmin
    candidates = [c for c in candidates if c[3] <= fmin + window]
    candidates.sort(key=lambda c: (c[3], c[0], c[1]))
    return candidates[:MAX_SEEDS]


# =============================================================================
# Newton refinement on re-centred charts
# =============================================================================

def _derivatives(p: np.ndarray, cx: LocalChart, cy: LocalChart) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian of l_p in chart coordinates at the chart centres."""
    xi, y = cx.base, cy.base
    E = cx.frame.T
    F = cy.frame.T
    rp = np.linalg.norm(xi - p)
    ry = np.linalg.norm(xi - y)
    u = (xi - p) / rp
    v = (xi - y) / ry
    Pu = np.eye(3) - np.outer(u, u)
    Pv = np.eye(3) - np.outer(v, v)

    grad = np.concatenate([E.T @ (u + v), -F.T @ v])

    H = np.empty((4, 4))
    H[:2, :2] = E.T @ Pu @ E / rp + E.T @ Pv @ E / ry - ((u + v) @ cx.normal) * cx.hessian()
    H[2:, 2:] = F.T @ Pv @ F / ry + (v @ cy.normal) * cy.hessian()
    H[:2, 2:] = -E.T @ Pv @ F / ry
    H[2:, :2] = H[:2, 2:].T
    return grad, H


def _refine(scene: Scene, j: int, p: np.ndarray, xi: np.ndarray, y: np.ndarray,
            tol: Tolerances) -> PathCriticalPoint:
    cavity_prim = scene.cavities[j].primitive
    outer_prim = scene.outer.primitive
    scale = scene.diameter
    stat_tol = tol.stationarity_factor * scale * 1e-3

    for _ in range(MAX_NEWTON_STEPS):
        cx = chart_at(cavity_prim, xi, tol)
        cy = chart_at(outer_prim, y, tol)
        grad, H = _derivatives(p, cx, cy)
        if np.linalg.norm(grad) <= stat_tol:
            break

        # Levenberg-Marquardt shift keeps the step a descent direction
        lowest = float(np.linalg.eigvalsh(H)[0])
        shift = 0.0 if lowest > 1e-10 else (1e-10 - lowest) + 1e-6 * float(np.abs(H).max())
        step = -np.linalg.solve(H + shift * np.eye(4), grad)
        reach = 0.5 * min(cx.radius, cy.radius)
        size = max(np.linalg.norm(step[:2]), np.linalg.norm(step[2:]))
        if size > reach:
            step *= reach / size

        value = float(broken_path_length(p, xi, y))
        slope = float(grad @ step)
        alpha = 1.0
        moved = False
        while alpha > 1e-12:
            xi_new = cx.lift(alpha * step[:2])
            y_new = cy.lift(alpha * step[2:])
            new_value = float(broken_path_length(p, xi_new, y_new))
            if np.isfinite(new_value) and new_value <= value + 1e-4 * alpha * slope:
                moved = True
                break
            alpha *= 0.5
        if not moved:
            break
        xi, y = xi_new, y_new

    cx = chart_at(cavity_prim, xi, tol)
    cy = chart_at(outer_prim, y, tol)
    grad, H = _derivatives(p, cx, cy)
    return PathCriticalPoint(
        xi=xi, y=y, cavity_index=j, surface_id=scene.cavities[j].surface_id,
        value=float(broken_path_length(p, xi, y)), nu_xi=cx.normal, nu_y=cy.normal,
        hessian_eigenvalues=np.linalg.eigvalsh(H), grad_norm=float(np.linalg.norm(grad)),
    )


def min_broken_path(scene: Scene, p, tol: Tolerances = DEFAULT_TOLERANCES) -> PathReport:
    """
    Minimum of l_p(xi, y) over cavity x outer surface pairs.

    Seeds come from a node-pair scan; each seed is refined by a damped Newton
    iteration in chart coordinates. Refined points that coincide within the
    merge radius are merged, and every point within rel_tol of the best value
    is kept.

    Raises:
        ProbeError: p not strictly outside the outer surface
    """
    p = probe_outside(scene, p)
    meta = {"rel_tol": tol.rel_tol, "merge_radius": tol.merge_radius(scene.diameter),
            "tol_g": tol.tol_g, "eig_tol": tol.eig_tol(scene.diameter)}
    if scene.n_cavities == 0:
        return PathReport(p, float("inf"), [], tolerances=meta)

    refined = []
    for j, i, k, _ in _seeds(scene, p):
        cavity = scene.cavities[j]
        try:
            refined.append(_refine(scene, j, p, cavity.nodes[i], scene.outer.nodes[k], tol))
        except (ChartError, np.linalg.LinAlgError) as e:
            log.warning("refinement from %s node %d failed: %s", cavity.surface_id, i, e)

    refined = [r for r in refined if np.isfinite(r.value)]
    if not refined:
        raise GeometryError(f"no refined minimizer for probe {tuple(p)}")
    l_min = min(r.value for r in refined)
    keep = [r for r in refined if r.value <= l_min * (1.0 + tol.rel_tol)]
    keep.sort(key=lambda r: (r.value, r.cavity_index, *np.round(r.xi, 12)))

    merge = tol.merge_radius(scene.diameter)
    distinct: List[PathCriticalPoint] = []
    for r in keep:
        if any(r.cavity_index == q.cavity_index and np.linalg.norm(r.xi - q.xi) <= merge
               and np.linalg.norm(r.y - q.y) <= merge for q in distinct):
            continue
        distinct.append(r)

    report = PathReport(p, l_min, distinct, degenerate=len(distinct) > tol.degenerate_count,
                        tolerances=meta)
    log.info("probe %s: l = %.12g with %d minimizer(s)%s", tuple(np.round(p, 6)), l_min,
             len(distinct), " (degenerate family)" if report.degenerate else "")
    return classify_minimizers(report, p, tol)


def classify_point(xi, y, p, nu_xi, tol_g: float = DEFAULT_TOLERANCES.tol_g) -> str:
    """Class of a minimizing pair by the sides of the tangent plane at xi."""
    xi, y, p, nu_xi = (np.asarray(a, dtype=float) for a in (xi, y, p, nu_xi))
    to_p = nu_xi @ (p - xi)
    if abs(to_p) <= tol_g * np.linalg.norm(p - xi):
        return MG
    if to_p < 0:
        return M2_MINUS
    return M1 if nu_xi @ (y - xi) > 0 else M2_PLUS


def classify_minimizers(report: PathReport, p, tol: Tolerances = DEFAULT_TOLERANCES) -> PathReport:
    """Fill in the class of every minimizer and the I2 flag."""
    p = np.asarray(p, dtype=float)
    for m in report.minimizers:
        m.path_class = classify_point(m.xi, m.y, p, m.nu_xi, tol.tol_g)
    report.assumption_I2_holds = all(m.path_class in (M1, M2_PLUS) for m in report.minimizers)
    return report


# =============================================================================
# Assumptions
# =============================================================================

@dataclass
class AssumptionReport:
    I1: bool
    I2: bool
    I3: bool
    d1: Optional[float]
    convexity: list
    reasons: List[str]
    path: Optional[PathReport]

    @property
    def all_hold(self) -> bool:
        return self.I1 and self.I2 and self.I3

    def to_dict(self) -> dict:
        return {
            "I1": self.I1, "I2": self.I2, "I3": self.I3,
            "d1": self.d1,
            "convexity": self.convexity,
            "reasons": self.reasons,
            "path": self.path.to_dict() if self.path is not None else None,
        }


def check_assumptions(scene: Scene, p, tol: Tolerances = DEFAULT_TOLERANCES) -> AssumptionReport:
    """
    Evaluate the scene assumptions for one probe.

    I1: every cavity strictly convex, cavities disjoint and inside the outer surface.
    I2: no grazing and no backward minimizers.
    I3: every minimizer is a non-degenerate critical point.
    """
    reasons: List[str] = []
    convexity = []
    I1 = True
    for cavity in scene.cavities:
        try:
            c = convexity_audit(cavity, tol)
            convexity.append({"surface_id": c.surface_id, "M0": c.M0, "M1": c.M1, "r0": c.r0})
        except (NotStrictlyConvex, ChartError) as e:
            I1 = False
            reasons.append(str(e))
    d1 = None
    try:
        d1 = validate_scene(scene, tol)
    except OverlapError as e:
        I1 = False
        reasons.append(str(e))

    report = min_broken_path(scene, p, tol)
    I2 = bool(report.assumption_I2_holds)
    if not I2:
        bad = sorted({m.path_class for m in report.minimizers if m.path_class in (MG, M2_MINUS)})
        reasons.append(f"minimizers in classes {bad}")

    eig_tol = tol.eig_tol(scene.diameter)
    flat = [m for m in report.minimizers if m.hessian_eigenvalues[0] < eig_tol]
    I3 = not report.degenerate and not flat and bool(report.minimizers)
    if report.degenerate:
        reasons.append(f"degenerate family: {len(report.minimizers)} distinct minimizers")
    if flat:
        reasons.append(f"{len(flat)} minimizer(s) with Hessian eigenvalue below {eig_tol:.3g}")
    report.assumption_I3_holds = I3

    if d1 is not None and np.isinf(d1):
        d1 = None
    return AssumptionReport(I1, I2, I3, d1, convexity, reasons, report)


def report_rows(report: PathReport) -> List[dict]:
    """Flat minimizer table for CSV output."""
    rows = []
    for m in report.minimizers:
        rows.append({
            "surface_id": m.surface_id, "class": m.path_class, "value": m.value,
            "xi_x": m.xi[0], "xi_y": m.xi[1], "xi_z": m.xi[2],
            "y_x": m.y[0], "y_y": m.y[1], "y_z": m.y[2],
            "hplus": hplus(m.xi, m.y, report.p, m.nu_xi),
            "eig_min": m.hessian_eigenvalues[0], "grad_norm": m.grad_norm,
        })
    return rows


def probes_on_sphere(center: Sequence[float], radius: float, count: int = 26) -> List[np.ndarray]:
    """Probe layout: cube face, edge and corner directions (26), or a prefix of them."""
    dirs = []
    for i in (-1, 0, 1):
        for j in (-1, 0, 1):
            for k in (-1, 0, 1):
                if (i, j, k) != (0, 0, 0):
                    dirs.append(np.array([i, j, k], dtype=float))
    # Faces first, then edges, then corners
    dirs.sort(key=lambda d: (int(np.abs(d).sum()), tuple(-d)))
    center = np.asarray(center, dtype=float)
    return [center + radius * d / np.linalg.norm(d) for d in dirs[:count]]
