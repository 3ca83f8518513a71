"""
Enclosure Reconstruction for Heat Enclosure
Carves a voxel lattice over the outer domain with recovered lengths.

Every cavity point xi satisfies |p - xi| + dist(xi, outer) >= l(p, D), so the
voxels where |p - x| + dist(x, outer) falls below the recovered length (less a
margin) cannot meet a cavity. What stays after carving with many probes
encloses the cavities.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from app.errors import GeometryError, UsageError
from geometry import Scene, chart_at
from run_logger import get_logger

log = get_logger("enclosure_recon")

OUTSIDE = 0
RETAINED = 1
CARVED = 2

DEFAULT_DIVISIONS = 64


# =============================================================================
# Distances
# =============================================================================

def _nearest_on_charts(surface, x: np.ndarray) -> np.ndarray:
    """Node scan followed by a chart refinement of the closest node."""
    d, idx = surface.tree.query(x)
    out = np.empty(len(x))
    for k, (xk, ik) in enumerate(zip(x, np.atleast_1d(idx))):
        chart = chart_at(surface.primitive, surface.nodes[ik])

        def objective(s):
            v = chart.lift(s) - xk
            return float(v @ v)

        res = minimize(objective, np.zeros(2), method="BFGS")
        s = res.x
        if np.linalg.norm(s) > chart.radius or not np.isfinite(res.fun):
            out[k] = np.atleast_1d(d)[k]
        else:
            out[k] = min(np.sqrt(res.fun), np.atleast_1d(d)[k])
    return out


def dist_to_outer(scene: Scene, x, method: str = "auto") -> np.ndarray:
    """
    Distance from interior points to the outer surface.

    method "auto" uses the closed form of the primitive when it has one,
    "nodes" the node scan with chart refinement.

    Raises:
        GeometryError: a point is not inside the outer surface
    """
    x = np.asarray(x, dtype=float)
    pts = np.atleast_2d(x)
    prim = scene.outer.primitive
    if np.any(prim.implicit(pts) >= 0):
        raise GeometryError("dist_to_outer needs points strictly inside the outer surface")
    d = prim.distance(pts) if method == "auto" else None
    if d is None:
        d = _nearest_on_charts(scene.outer, pts)
    d = np.asarray(d, dtype=float)
    return d if x.ndim > 1 else float(d[0])


# =============================================================================
# Grid
# =============================================================================

@dataclass(eq=False)
class EnclosureGrid:
    """Voxel lattice over the outer bounding box; origin is the first voxel center."""
    origin: np.ndarray
    spacing: float
    shape: Tuple[int, int, int]
    state: np.ndarray
    distance: np.ndarray

    @property
    def voxel_diameter(self) -> float:
        return float(np.sqrt(3.0) * self.spacing)

    def centers(self) -> np.ndarray:
        axes = [self.origin[k] + self.spacing * np.arange(self.shape[k]) for k in range(3)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def volume(self, which: int = RETAINED) -> float:
        return float(np.count_nonzero(self.state == which) * self.spacing ** 3)

    def index_of(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Voxel indices of points and a mask of points inside the lattice."""
        idx = np.floor((np.atleast_2d(points) - self.origin) / self.spacing + 0.5).astype(int)
        ok = np.all((idx >= 0) & (idx < np.asarray(self.shape)), axis=1)
        return idx, ok

    def state_at(self, points: np.ndarray) -> np.ndarray:
        idx, ok = self.index_of(points)
        out = np.full(len(idx), OUTSIDE, dtype=np.int8)
        out[ok] = self.state[idx[ok, 0], idx[ok, 1], idx[ok, 2]]
        return out


def make_grid(scene: Scene, resolution: float = None) -> EnclosureGrid:
    """Lattice covering the outer bounding box, voxels inside the outer surface retained."""
    prim = scene.outer.primitive
    half = prim.bounding_half_widths()
    lo = prim.center - half
    edge = float(np.max(2 * half))
    spacing = float(resolution) if resolution else edge / DEFAULT_DIVISIONS
    if spacing <= 0:
        raise UsageError("grid resolution must be positive")
    shape = tuple(int(np.ceil(2 * h / spacing)) for h in half)
    origin = lo + 0.5 * spacing
    grid = EnclosureGrid(origin, spacing, shape, np.zeros(shape, dtype=np.int8), np.full(shape, np.nan))
    centers = grid.centers()
    inside = prim.implicit(centers) < 0
    grid.state[inside] = RETAINED
    grid.distance[inside] = dist_to_outer(scene, centers[inside])
    log.info("grid %s at spacing %.4g: %d inside voxels", shape, spacing, int(inside.sum()))
    return grid


def default_margin(grid: EnclosureGrid, stderr: float = 0.0) -> float:
    return max(grid.voxel_diameter, 1.5 * float(stderr))


def carve(grid: EnclosureGrid, p, l_hat: float, margin: float = 0.0, guard: bool = True) -> int:
    """
    Carve retained voxels with |p - x| + dist(x) < l_hat - margin.

    With guard, the threshold also drops by the voxel diameter, so no voxel
    holding a point with |p - xi| + dist(xi) >= l_hat is carved (the left side
    is 2-Lipschitz in x). Returns the number of voxels carved.
    """
    if l_hat <= 0:
        return 0
    p = np.asarray(p, dtype=float)
    threshold = l_hat - margin - (grid.voxel_diameter if guard else 0.0)
    live = grid.state == RETAINED
    centers = grid.centers()[live]
    value = np.linalg.norm(centers - p, axis=-1) + grid.distance[live]
    hit = value < threshold
    flat = np.flatnonzero(live)[hit]
    grid.state.reshape(-1)[flat] = CARVED
    return int(hit.sum())


@dataclass
class EnclosureReport:
    volumes: List[float]
    carved_counts: List[int]
    violations: int
    violation_fraction: float
    truth_points: int
    monotone: bool
    probes: List[dict] = field(default_factory=list)

    @property
    def sound(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {"volumes": self.volumes, "carved_counts": self.carved_counts,
                "violations": self.violations, "violation_fraction": self.violation_fraction,
                "truth_points": self.truth_points, "monotone": self.monotone, "sound": self.sound,
                "probes": self.probes}


def soundness(grid: EnclosureGrid, truth_points: np.ndarray) -> Tuple[int, float]:
    """Number and fraction of true cavity points lying in carved voxels."""
    if len(truth_points) == 0:
        return 0, 0.0
    bad = int(np.count_nonzero(grid.state_at(truth_points) == CARVED))
    return bad, bad / len(truth_points)


def enclose(scene: Scene, probes: Sequence[Tuple[Sequence[float], float]], resolution: float = None,
            margin: Optional[float] = None, stderrs: Sequence[float] = None,
            guard: bool = True, grid: EnclosureGrid = None) -> Tuple[EnclosureGrid, EnclosureReport]:
    """
    Carve sequentially with (probe, l_hat) pairs and audit against the true cavities.

    margin None uses default_margin per probe with its stderr.

    Raises:
        UsageError: no probes, or stderrs not one per probe
    """
    if not probes:
        raise UsageError("enclose needs at least one probe")
    grid = grid if grid is not None else make_grid(scene, resolution)
    stderrs = list(stderrs) if stderrs is not None else [0.0] * len(probes)
    if len(stderrs) != len(probes):
        raise UsageError(f"enclose got {len(probes)} probes but {len(stderrs)} stderrs")
    volumes, counts, records = [grid.volume()], [], []
    for (p, l_hat), se in zip(probes, stderrs):
        m = default_margin(grid, se) if margin is None else float(margin)
        n = carve(grid, p, float(l_hat), m, guard)
        counts.append(n)
        volumes.append(grid.volume())
        records.append({"p": [float(c) for c in p], "l_hat": float(l_hat), "margin": m, "carved": n})
    truth = scene.cavity_nodes
    bad, frac = soundness(grid, truth)
    monotone = all(b <= a for a, b in zip(volumes, volumes[1:]))
    if bad:
        log.warning("enclosure carved %d of %d true cavity points", bad, len(truth))
    return grid, EnclosureReport(volumes, counts, bad, frac, len(truth), monotone, records)
