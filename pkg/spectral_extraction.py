"""
Spectral Extraction for Heat Enclosure
Lambda grids on the real axis, the sector Re lam >= delta0 |Im lam| and the
logarithmic region |Im lam| <= delta1 mu / log mu; indicator sweeps over a
grid; the regression that turns log|I0| into the length l(p, D); and
convergence tables against the path oracle.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.errors import FitError, NumericalError, SweepError, UsageError
from app.tolerances import DEFAULT_TOLERANCES, Tolerances
from bie_core import SpectralSample
from forward_indicator import IndicatorValue, evaluate_indicator, scene_flux
from path_oracle import min_broken_path, probe_outside
from run_logger import get_logger

log = get_logger("spectral_extraction")

REGIONS = ("real_axis", "sector", "logregion")
REGION_ALIASES = {"real": "real_axis", "sector": "sector", "log": "logregion"}
PROFILES = ("zero", "sector_edge", "log_edge")
DEFAULT_PROFILE = {"real_axis": "zero", "sector": "sector_edge", "logregion": "log_edge"}

MIN_FIT_SAMPLES = 4
MAX_FIT_CONDITION = 1e12


# =============================================================================
# Grids
# =============================================================================

@dataclass(frozen=True)
class LambdaGrid:
    samples: Tuple[SpectralSample, ...]
    region: str
    mu_min: float
    mu_max: float
    count: int
    im_profile: str

    @property
    def lams(self) -> List[complex]:
        return [s.lam for s in self.samples]


def lambda_grid(region: str, mu_range: Tuple[float, float], count: int, im_profile: str = None,
                delta0: float = DEFAULT_TOLERANCES.delta0,
                delta1: float = DEFAULT_TOLERANCES.delta1) -> LambdaGrid:
    """
    Geometrically spaced mu with imaginary parts from a profile.

    zero:         Im lam = 0
    sector_edge:  Im lam = mu / delta0, on the sector boundary
    log_edge:     Im lam = delta1 mu / log mu, on the logarithmic boundary

    Raises:
        UsageError: bad region, profile or range
    """
    region = REGION_ALIASES.get(region, region)
    if region not in REGIONS:
        raise UsageError(f"unknown region {region!r}")
    profile = im_profile or DEFAULT_PROFILE[region]
    if profile not in PROFILES:
        raise UsageError(f"unknown imaginary profile {profile!r}")
    mu_min, mu_max = (float(m) for m in mu_range)
    if count < 3:
        raise UsageError(f"a lambda grid needs at least 3 points, got {count}")
    if not 0 < mu_min < mu_max:
        raise UsageError(f"invalid mu range [{mu_min}, {mu_max}]")
    if region == "logregion" and mu_min < np.e:
        raise UsageError(f"logregion grids need mu_min >= e, got {mu_min}")
    if region == "real_axis" and profile != "zero":
        raise UsageError("real-axis grids have a zero imaginary profile")
    if profile == "sector_edge" and region != "sector":
        raise UsageError("the sector edge profile belongs to sector grids")
    if profile == "log_edge" and region == "real_axis":
        raise UsageError("the log edge profile needs a complex region")

    delta = {"real_axis": 0.0, "sector": delta0, "logregion": delta1}[region]
    if region != "real_axis" and delta <= 0:
        raise UsageError(f"region {region} needs a positive delta")
    mus = np.geomspace(mu_min, mu_max, count)
    if profile == "zero":
        ims = np.zeros(count)
    elif profile == "sector_edge":
        ims = mus / delta0
    else:
        ims = delta1 * mus / np.log(mus)
    samples = tuple(SpectralSample(complex(m, i), region, delta) for m, i in zip(mus, ims))
    if region == "sector" and profile == "log_edge":
        bad = [s for s in samples if not s.in_region()]
        if bad:
            raise UsageError(f"log edge samples leave the sector at mu={bad[0].mu:.4g}")
    assert all(s.in_region() for s in samples), "grid sample outside its region"
    return LambdaGrid(samples, region, mu_min, mu_max, count, profile)


# =============================================================================
# Sweeps
# =============================================================================

@dataclass
class FitResult:
    l_hat: float
    stderr: float
    a: float
    b: float
    residual: float
    n_samples: int


@dataclass
class IndicatorCurve:
    p: np.ndarray
    grid: LambdaGrid
    values: List[Optional[IndicatorValue]]
    failures: Dict[int, str] = field(default_factory=dict)
    oracle_l: Optional[float] = None
    fit: Optional[FitResult] = None

    def valid(self) -> List[IndicatorValue]:
        return [v for v in self.values if v is not None]

    def mu_log_abs(self) -> Tuple[np.ndarray, np.ndarray]:
        good = [v for v in self.valid() if v.I0_direct != 0]
        return (np.array([v.lam.real for v in good]),
                np.array([np.log(abs(v.I0_direct)) for v in good]))

    def rows(self) -> List[dict]:
        return [v.row() for v in self.valid()]

    def normalized_real_parts(self, l: float, beta0: float = 2.0) -> List[float]:
        """Re[lam^beta0 lam exp(lam l) I0] per valid sample."""
        return [float(np.real(v.lam ** beta0 * v.lam * np.exp(v.lam * l) * v.I0_direct))
                for v in self.valid()]


def mu_ceiling(scene) -> float:
    """Largest mu with exp(-mu h_min) above machine precision, h_min the finest node spacing."""
    spacings = [scene.outer.spacing] + [c.spacing for c in scene.cavities]
    return float(-np.log(np.finfo(float).eps) / min(spacings))


def sweep(scene, p, grid: LambdaGrid, workers: int = 1, kernel_route: bool = True,
          method: str = "cavity", noise: float = 0.0, seed: int = 0, check: bool = True,
          data_scene=None, tol: Tolerances = DEFAULT_TOLERANCES) -> IndicatorCurve:
    """
    Indicator values over a grid, samples evaluated concurrently.

    data_scene, when given, synthesizes the flux on a different discretization
    of the same outer surface (typically one refinement finer) and interpolates
    it onto the inversion nodes by nearest node.

    Raises:
        ProbeError: p is not outside the outer surface
        SweepError: every sample failed
    """
    p = probe_outside(scene, p)
    oracle_l = None
    if check and scene.n_cavities:
        report = min_broken_path(scene, p, tol)
        oracle_l = report.l_min
        if report.assumption_I2_holds is False:
            log.warning("probe %s: grazing or backward minimizers, no extraction guarantee", p.tolist())

    ceiling = mu_ceiling(scene)
    if grid.mu_max > ceiling:
        log.warning("mu_max=%.4g exceeds resolvable ceiling %.4g for this mesh", grid.mu_max, ceiling)

    def data_for(index: int, lam: complex) -> np.ndarray:
        source = data_scene if data_scene is not None else scene
        g = scene_flux(source, lam, noise, None if noise <= 0 else [seed, index])
        if data_scene is not None:
            _, nearest = data_scene.outer.tree.query(scene.outer.nodes)
            g = g[nearest]
        return g

    def job(index: int):
        lam = grid.samples[index].lam
        try:
            return evaluate_indicator(scene, p, lam, data_for(index, lam), method, kernel_route, tol), None
        except NumericalError as e:
            return None, str(e)

    indices = range(len(grid.samples))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, indices))
    else:
        results = [job(i) for i in indices]

    curve = IndicatorCurve(p, grid, [r[0] for r in results], oracle_l=oracle_l)
    for i, (_, err) in enumerate(results):
        if err is not None:
            curve.failures[i] = err
            log.warning("sample %d (lambda=%s) failed: %s", i, grid.samples[i].lam, err)
    if not curve.valid():
        raise SweepError(f"all {len(grid.samples)} samples failed for probe {p.tolist()}")
    return curve


# =============================================================================
# Extraction
# =============================================================================

def fit_log_indicator(mu: Sequence[float], log_abs: Sequence[float]) -> FitResult:
    """
    Least squares log|I0| = -l mu + a log mu + b.

    Raises:
        FitError: too few samples, a degenerate design, or l <= 0
    """
    mu = np.asarray(mu, dtype=float)
    y = np.asarray(log_abs, dtype=float)
    keep = np.isfinite(y)
    mu, y = mu[keep], y[keep]
    if len(mu) < MIN_FIT_SAMPLES:
        raise FitError(f"length fit needs at least {MIN_FIT_SAMPLES} samples, got {len(mu)}")
    X = np.column_stack([-mu, np.log(mu), np.ones_like(mu)])
    if np.linalg.cond(X) > MAX_FIT_CONDITION:
        raise FitError(f"ill-conditioned length fit over mu in [{mu.min():.4g}, {mu.max():.4g}]")
    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = len(mu) - 3
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    l_hat = float(coef[0])
    if l_hat <= 0:
        raise FitError(f"fitted length {l_hat:.4g} is not positive")
    return FitResult(l_hat, float(np.sqrt(max(cov[0, 0], 0.0))), float(coef[1]), float(coef[2]),
                     float(np.sqrt(np.mean(resid ** 2))), len(mu))


def extract_length(curve: IndicatorCurve) -> FitResult:
    mu, y = curve.mu_log_abs()
    curve.fit = fit_log_indicator(mu, y)
    log.info("probe %s: l_hat=%.6g +- %.2g over %d samples", curve.p.tolist(), curve.fit.l_hat,
             curve.fit.stderr, curve.fit.n_samples)
    return curve.fit


def extraction_record(curve: IndicatorCurve) -> dict:
    """Structured extraction result for one probe."""
    fit = curve.fit
    rel = None
    if fit is not None and curve.oracle_l is not None and np.isfinite(curve.oracle_l):
        rel = abs(fit.l_hat - curve.oracle_l) / curve.oracle_l
    return {
        "p": [float(c) for c in curve.p],
        "l_hat": fit.l_hat if fit else None,
        "stderr": fit.stderr if fit else None,
        "a": fit.a if fit else None,
        "b": fit.b if fit else None,
        "fit_residual": fit.residual if fit else None,
        "region": curve.grid.region,
        "im_profile": curve.grid.im_profile,
        "mu_range": [curve.grid.mu_min, curve.grid.mu_max],
        "oracle_value": curve.oracle_l,
        "rel_error": rel,
        "failures": {str(k): v for k, v in sorted(curve.failures.items())},
    }


@dataclass
class ConvergenceReport:
    rows: List[dict]
    oracle_l: float
    mu_trend: bool
    mesh_trend: bool
    quadrature_floor: Dict[int, bool]

    def to_dict(self) -> dict:
        return {"oracle_l": self.oracle_l, "mu_trend": self.mu_trend, "mesh_trend": self.mesh_trend,
                "quadrature_floor": {str(k): v for k, v in self.quadrature_floor.items()},
                "rows": self.rows}


def convergence_report(scene, p, refinements: Sequence[int], mu_ranges: Sequence[Tuple[float, float]],
                       count: int = 9, workers: int = 1, floor_ratio: float = 0.9,
                       tol: Tolerances = DEFAULT_TOLERANCES) -> ConvergenceReport:
    """
    Length error against mu range and mesh.

    mu_trend:  error at the finest mesh decreases from the first to the last mu range
    mesh_trend: error at the last mu range decreases from the coarsest to the finest mesh
    quadrature_floor[r]: raising mu_max stopped reducing the error at refinement r
    """
    refinements = sorted(set(int(r) for r in refinements))
    if len(refinements) < 2:
        raise UsageError("convergence report needs at least 2 refinement levels")
    finest = scene.with_refinement(refinements[-1] + 1)
    oracle = min_broken_path(finest, p, tol).l_min
    rows, errors = [], {}
    for r in refinements:
        sc = scene.with_refinement(r)
        for mu_range in mu_ranges:
            grid = lambda_grid("real_axis", mu_range, count)
            try:
                curve = sweep(sc, p, grid, workers, kernel_route=False, check=False, tol=tol)
                fit = extract_length(curve)
                err = abs(fit.l_hat - oracle)
                row = {"refinement": r, "mu_min": mu_range[0], "mu_max": mu_range[1],
                       "l_hat": fit.l_hat, "stderr": fit.stderr, "abs_error": err}
            except NumericalError as e:
                err = float("nan")
                row = {"refinement": r, "mu_min": mu_range[0], "mu_max": mu_range[1],
                       "l_hat": None, "stderr": None, "abs_error": None, "error": str(e)}
            errors[(r, tuple(mu_range))] = err
            rows.append(row)

    def seq(r):
        return [errors[(r, tuple(m))] for m in mu_ranges]

    last = tuple(mu_ranges[-1])
    finest_errors = seq(refinements[-1])
    mu_trend = len(mu_ranges) > 1 and finest_errors[-1] < finest_errors[0]
    mesh_trend = errors[(refinements[-1], last)] < errors[(refinements[0], last)]
    floors = {}
    for r in refinements:
        e = seq(r)
        floors[r] = len(e) > 1 and bool(np.isfinite(e[-1]) and np.isfinite(e[-2])
                                        and e[-1] >= floor_ratio * e[-2])
    return ConvergenceReport(rows, oracle, bool(mu_trend), bool(mesh_trend), floors)
