"""
Laplace Asymptotics for Heat Enclosure
Numerical Laplace integrals I(lam) = int_U exp(-lam S) phi h dsigma with a
complex parameter, the leading-order Laplace expansion at a non-degenerate
minimum, and the audits that compare both over lambda grids: the lower bound
for degenerate phases, the Holder-amplitude remainder and the Stieltjes form
of the integral in one dimension.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import gamma, roots_legendre

from app.errors import QuadratureError, SingularSystemError, UsageError
from bie_core import smooth_step
from run_logger import get_logger

log = get_logger("laplace_asymptotics")

GL_ORDER = 16
PLATEAU = 0.6          # cutoff is 1 on |s| <= PLATEAU * half_width
START_PANELS = 8
MAX_PANELS = 128

Field = Callable[[np.ndarray], np.ndarray]


def _zero(sigma: np.ndarray) -> np.ndarray:
    return np.zeros(sigma.shape[:-1])


def _one(sigma: np.ndarray) -> np.ndarray:
    return np.ones(sigma.shape[:-1])


@dataclass(frozen=True)
class LaplaceIntegralSpec:
    """
    Phase, amplitude and cutoff of a Laplace integral.

    Fields are functions of the offset sigma - center, so the minimum of the
    phase sits at the center. The amplitude is h1 + h1_tilde / lam and the
    cutoff a product of smooth one-dimensional bumps on the cube U of half
    width half_width around the center.
    """
    name: str
    n: int
    phase: Field
    h1: Field = _one
    h1_tilde: Field = _zero
    hessian: Optional[Tuple[Tuple[float, ...], ...]] = None
    half_width: float = 5.0
    center: Tuple[float, ...] = ()
    phase_scale: float = 1.0
    holder_alpha: Optional[float] = None
    description: str = ""

    def __post_init__(self):
        if self.n not in (1, 2):
            raise UsageError(f"Laplace integrals are supported in 1 or 2 dimensions, got {self.n}")
        if not self.center:
            object.__setattr__(self, "center", (0.0,) * self.n)
        if len(self.center) != self.n:
            raise UsageError("center dimension does not match n")

    @property
    def origin(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    def S(self, sigma) -> np.ndarray:
        return self.phase_scale * self.phase(np.asarray(sigma, dtype=float) - self.origin)

    def amplitude(self, sigma, lam) -> np.ndarray:
        s = np.asarray(sigma, dtype=float) - self.origin
        return self.h1(s) + self.h1_tilde(s) / lam

    def cutoff(self, sigma) -> np.ndarray:
        s = np.abs(np.asarray(sigma, dtype=float) - self.origin) / self.half_width
        bump = 1.0 - smooth_step((s - PLATEAU) / (1.0 - PLATEAU))
        return np.prod(bump, axis=-1)

    @property
    def tau(self) -> float:
        return float(self.S(self.origin))

    def translated(self, shift: Sequence[float]) -> "LaplaceIntegralSpec":
        return replace(self, center=tuple(self.origin + np.asarray(shift, dtype=float)))

    def scaled(self, factor: float) -> "LaplaceIntegralSpec":
        return replace(self, phase_scale=self.phase_scale * factor)

    def phase_hessian(self) -> np.ndarray:
        if self.hessian is not None:
            return self.phase_scale * np.asarray(self.hessian, dtype=float)
        h = 1e-4
        H = np.zeros((self.n, self.n))
        c = self.origin
        eye = np.eye(self.n) * h
        for i in range(self.n):
            for j in range(self.n):
                H[i, j] = (self.S(c + eye[i] + eye[j]) - self.S(c + eye[i] - eye[j])
                           - self.S(c - eye[i] + eye[j]) + self.S(c - eye[i] - eye[j])) / (4 * h * h)
        return H


# =============================================================================
# Hypotheses
# =============================================================================

def check_hypotheses(spec: LaplaceIntegralSpec, samples: int = 4001, seed: int = 0) -> Dict[str, object]:
    """Sample the phase and amplitude conditions on U."""
    rng = np.random.default_rng(seed)
    sigma = spec.origin + rng.uniform(-spec.half_width, spec.half_width, size=(samples, spec.n))
    S = spec.S(sigma)
    tau = spec.tau
    r2 = np.sum((sigma - spec.origin) ** 2, axis=-1)
    C0 = float(np.max((S - tau) / r2))
    re_h1 = float(np.min(np.real(spec.h1(sigma - spec.origin))))
    bound = float(np.max(np.abs(spec.h1(sigma - spec.origin)) + np.abs(spec.h1_tilde(sigma - spec.origin))))
    return {
        "minimum_at_center": bool(np.all(S >= tau - 1e-12 * max(1.0, abs(tau)))),
        "quadratic_upper_bound": C0,
        "amplitude_lower_bound": re_h1,
        "amplitude_upper_bound": bound,
        "passed": bool(np.all(S >= tau - 1e-12 * max(1.0, abs(tau))) and np.isfinite(C0) and re_h1 > 0),
    }


# =============================================================================
# Quadrature
# =============================================================================

def panel_edges(half_width: float, panels: int, levels: int) -> np.ndarray:
    """Uniform panels on [-L, L] merged with dyadic grading toward 0."""
    uniform = np.linspace(-half_width, half_width, panels + 1)
    graded = half_width * 2.0 ** -np.arange(1, levels + 1)
    return np.unique(np.concatenate([uniform, graded, -graded, [0.0]]))


def composite_rule(edges: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(GL_ORDER)
    a, b = edges[:-1, None], edges[1:, None]
    return (0.5 * (b - a) * x + 0.5 * (a + b)).ravel(), (0.5 * (b - a) * w).ravel()


@dataclass
class QuadratureResult:
    value: complex      # I(lam)
    reduced: complex    # exp(lam tau) I(lam)
    error: float        # estimate for reduced
    panels: int


def _tensor_value(spec: LaplaceIntegralSpec, lam: complex, panels: int, levels: int) -> complex:
    x, w = composite_rule(panel_edges(spec.half_width, panels, levels))
    if spec.n == 1:
        sigma = spec.origin + x[:, None]
        weights = w
    else:
        X, Y = np.meshgrid(x, x, indexing="ij")
        sigma = spec.origin + np.stack([X, Y], axis=-1)
        weights = np.outer(w, w)
    integrand = np.exp(-lam * (spec.S(sigma) - spec.tau)) * spec.cutoff(sigma) * spec.amplitude(sigma, lam)
    return complex(np.sum(weights * integrand))


def quadrature_value(spec: LaplaceIntegralSpec, lam, tol: float = 1e-11) -> QuadratureResult:
    """
    Tensor composite Gauss-Legendre with doubling refinement.

    Raises:
        UsageError: Re lam <= 0
        QuadratureError: no convergence within MAX_PANELS
    """
    lam = complex(lam)
    if lam.real <= 0:
        raise UsageError(f"Laplace integrals need Re lambda > 0, got {lam}")
    levels = int(np.ceil(np.log2(max(spec.half_width * np.sqrt(abs(lam) * spec.phase_scale), 2.0)))) + 6
    panels = START_PANELS
    prev = _tensor_value(spec, lam, panels, levels)
    while panels < MAX_PANELS:
        panels *= 2
        levels += 2
        cur = _tensor_value(spec, lam, panels, levels)
        err = abs(cur - prev)
        if err <= tol * abs(cur) + 1e-300:
            return QuadratureResult(complex(np.exp(-lam * spec.tau) * cur), cur, err, panels)
        prev = cur
    raise QuadratureError(f"{spec.name}: Laplace quadrature did not converge at lambda={lam} "
                          f"(last change {err:.3g})")


def nondegenerate_asymptotic(spec: LaplaceIntegralSpec, lam) -> complex:
    """
    (2 pi / lam)^(n/2) det(Hess S)^(-1/2) exp(-lam tau) h(center; lam), principal branch.

    Raises:
        SingularSystemError: the Hessian at the minimum is not positive definite
    """
    lam = complex(lam)
    H = spec.phase_hessian()
    eig = np.linalg.eigvalsh(0.5 * (H + H.T))
    if eig[0] <= 1e-10 * max(1.0, abs(eig[-1])):
        raise SingularSystemError(f"phase Hessian of {spec.name} (eigenvalues {eig.tolist()})", lam)
    h0 = complex(spec.amplitude(spec.origin, lam))
    return complex((2 * np.pi / lam) ** (spec.n / 2) / np.sqrt(np.prod(eig)) * np.exp(-lam * spec.tau) * h0)


# =============================================================================
# Audits
# =============================================================================

def asymptotic_rows(spec: LaplaceIntegralSpec, lams: Sequence[complex]) -> List[dict]:
    rows = []
    for lam in lams:
        q = quadrature_value(spec, lam).value
        a = nondegenerate_asymptotic(spec, lam)
        rows.append({"spec": spec.name, "mu": complex(lam).real, "im_lambda": complex(lam).imag,
                     "re_quadrature": q.real, "im_quadrature": q.imag,
                     "re_asymptotic": a.real, "im_asymptotic": a.imag,
                     "rel_error": abs(a - q) / abs(q)})
    return rows


def error_slope(spec: LaplaceIntegralSpec, lams: Sequence[complex]) -> Dict[str, object]:
    """Log-log slope of the relative asymptotic error against mu."""
    rows = asymptotic_rows(spec, lams)
    mu = np.array([r["mu"] for r in rows])
    err = np.array([r["rel_error"] for r in rows])
    slope = float(np.polyfit(np.log(mu), np.log(err), 1)[0])
    return {"spec": spec.name, "slope": slope, "rows": rows}


def degenerate_lower_bound_audit(spec: LaplaceIntegralSpec, lams: Sequence[complex],
                                 band: float = 2.0) -> Dict[str, object]:
    """
    mu^(n/2) Re[exp(lam tau) I(lam)] over a grid.

    Passes when every level is positive and the upper half of the grid stays
    within a factor `band`.
    """
    levels = []
    for lam in lams:
        lam = complex(lam)
        levels.append(float(lam.real ** (spec.n / 2) * quadrature_value(spec, lam).reduced.real))
    upper = levels[len(levels) // 2:]
    positive = min(levels) > 0
    stable = positive and max(upper) / min(upper) <= band
    return {"spec": spec.name, "mu": [complex(l).real for l in lams],
            "im_lambda": [complex(l).imag for l in lams], "levels": levels,
            "min_level": min(levels), "positive": positive, "stable": bool(stable),
            "passed": bool(positive and stable)}


def holder_remainder_audit(spec: LaplaceIntegralSpec, lams: Sequence[complex], alpha: float = None,
                           slack: float = 0.4, tol: float = 1e-9) -> Dict[str, object]:
    """Fitted decay exponent of |I / asymptotic - 1| against mu, passing at slack * alpha."""
    alpha = alpha if alpha is not None else spec.holder_alpha
    if alpha is None:
        raise UsageError(f"{spec.name}: no Holder exponent given")
    mu, rem = [], []
    for lam in lams:
        q = quadrature_value(spec, lam, tol).value
        a = nondegenerate_asymptotic(spec, lam)
        mu.append(complex(lam).real)
        rem.append(abs(q / a - 1.0))
    exponent = -float(np.polyfit(np.log(mu), np.log(rem), 1)[0])
    return {"spec": spec.name, "alpha": alpha, "mu": mu, "remainder": rem,
            "exponent": exponent, "passed": exponent >= slack * alpha}


def _sublevel_interval(spec: LaplaceIntegralSpec, tau: float) -> Tuple[float, float]:
    c, L = float(spec.origin[0]), spec.half_width

    def S1(s):
        return float(spec.S(np.array([s])))

    def side(sign):
        edge = c + sign * L
        if S1(edge) <= tau:
            return edge
        return brentq(lambda s: S1(s) - tau, min(c, edge), max(c, edge), xtol=1e-15)

    return side(-1.0), side(1.0)


def stieltjes_check(spec: LaplaceIntegralSpec, lam, panels: int = 32) -> Dict[str, complex]:
    """
    Compare the direct quadrature with lam int exp(-lam tau) beta(tau) dtau
    + exp(-lam tau_top) beta(tau_top), beta(tau) the integral of phi h over
    the sublevel set {S <= tau}. One dimension, phase increasing away from
    the center.
    """
    if spec.n != 1:
        raise UsageError("the Stieltjes form is implemented for one-dimensional specs")
    lam = complex(lam)
    c, L = float(spec.origin[0]), spec.half_width
    tau0 = spec.tau
    tau_top = float(max(spec.S(np.array([c - L])), spec.S(np.array([c + L]))))

    def beta(tau):
        lo, hi = _sublevel_interval(spec, tau)
        x, w = composite_rule(np.linspace(lo, hi, 9))
        s = x[:, None]
        return complex(np.sum(w * spec.cutoff(s) * spec.amplitude(s, lam)))

    # tau = tau0 + s^2 removes the square-root onset of beta
    s_edges = np.sqrt(tau_top - tau0) * np.concatenate([[0.0], np.geomspace(1e-4, 1.0, panels)])
    s, ws = composite_rule(s_edges)
    taus = tau0 + s ** 2
    betas = np.array([beta(t) for t in taus])
    stieltjes = lam * np.sum(ws * 2 * s * np.exp(-lam * (taus - tau0)) * betas) \
        + np.exp(-lam * (tau_top - tau0)) * beta(tau_top)
    direct = quadrature_value(spec, lam).reduced
    return {"direct": direct, "stieltjes": complex(stieltjes),
            "rel_difference": abs(stieltjes - direct) / abs(direct)}


# =============================================================================
# Shipped specs
# =============================================================================

def _norm2(s):
    return np.sum(s * s, axis=-1)


def _gaussian_1d():
    return LaplaceIntegralSpec("gaussian_1d", 1, _norm2, hessian=((2.0,),),
                               description="S = sigma^2, h = 1")


def _gaussian():
    return LaplaceIntegralSpec("gaussian", 2, _norm2, hessian=((2.0, 0.0), (0.0, 2.0)),
                               description="S = |sigma|^2, h = 1")


def _anisotropic():
    return LaplaceIntegralSpec(
        "anisotropic", 2, lambda s: s[..., 0] ** 2 + 4 * s[..., 1] ** 2,
        h1=lambda s: 1.0 + _norm2(s), hessian=((2.0, 0.0), (0.0, 8.0)),
        description="S = s1^2 + 4 s2^2, h = 1 + |sigma|^2")


def _degenerate():
    return LaplaceIntegralSpec(
        "degenerate", 2, lambda s: s[..., 0] ** 2 + s[..., 1] ** 4,
        hessian=((2.0, 0.0), (0.0, 0.0)),
        description="S = s1^2 + s2^4, singular Hessian")


def _holder():
    return LaplaceIntegralSpec(
        "holder", 2, _norm2, h1=lambda s: 1.0 + _norm2(s) ** 0.25,
        hessian=((2.0, 0.0), (0.0, 2.0)), holder_alpha=0.5,
        description="S = |sigma|^2, h = 1 + |sigma|^(1/2)")


def _oscillatory():
    return LaplaceIntegralSpec(
        "oscillatory", 2, _norm2, h1=lambda s: 1.0 + 0.5 * np.sin(3 * s[..., 0]),
        h1_tilde=lambda s: np.exp(5j * s[..., 1]), hessian=((2.0, 0.0), (0.0, 2.0)),
        description="S = |sigma|^2, h1 = 1 + sin(3 s1)/2, h1_tilde = exp(5i s2)")


def _shifted_quadratic(c: float = 1.0):
    return LaplaceIntegralSpec(
        "shifted_quadratic", 2, lambda s: c + c * _norm2(s),
        hessian=((2.0 * c, 0.0), (0.0, 2.0 * c)),
        description="S = c + c |sigma|^2")


SHIPPED_SPECS: Dict[str, Callable[[], LaplaceIntegralSpec]] = {
    "gaussian_1d": _gaussian_1d,
    "gaussian": _gaussian,
    "anisotropic": _anisotropic,
    "degenerate": _degenerate,
    "holder": _holder,
    "oscillatory": _oscillatory,
    "shifted_quadratic": _shifted_quadratic,
}


def shipped_spec(name: str) -> LaplaceIntegralSpec:
    if name not in SHIPPED_SPECS:
        raise UsageError(f"unknown Laplace spec {name!r}; choose from {sorted(SHIPPED_SPECS)}")
    return SHIPPED_SPECS[name]()


def laplace_audit(mu_grid: Sequence[float] = (8.0, 16.0, 32.0, 64.0),
                  log_grid: Sequence[complex] = None) -> Dict[str, object]:
    """Run every shipped audit; rows for CSV plus a pass/fail summary."""
    mu_grid = [float(m) for m in mu_grid]
    if log_grid is None:
        from spectral_extraction import lambda_grid
        log_grid = lambda_grid("logregion", (mu_grid[0], mu_grid[-1]), 7).lams
    gauss = shipped_spec("gaussian")
    top = mu_grid[-1]
    ratio = nondegenerate_asymptotic(gauss, top) / quadrature_value(gauss, top).value
    aniso = error_slope(shipped_spec("anisotropic"), mu_grid)
    degenerate = degenerate_lower_bound_audit(shipped_spec("degenerate"), log_grid)
    oscillatory = degenerate_lower_bound_audit(shipped_spec("oscillatory"), log_grid)
    holder = holder_remainder_audit(shipped_spec("holder"), mu_grid)
    rows = asymptotic_rows(gauss, mu_grid) + aniso["rows"]
    summary = {
        "gaussian_ratio": [ratio.real, ratio.imag],
        "gaussian_passed": abs(ratio - 1) <= 1e-6,
        "anisotropic_slope": aniso["slope"],
        "anisotropic_passed": aniso["slope"] <= -0.8,
        "degenerate": degenerate,
        "oscillatory": oscillatory,
        "holder": holder,
    }
    summary["passed"] = bool(summary["gaussian_passed"] and summary["anisotropic_passed"]
                             and degenerate["passed"] and oscillatory["positive"] and holder["passed"])
    return {"rows": rows, "summary": summary}


def gamma_holder_remainder(lam) -> complex:
    """Exact remainder Gamma(5/4) lam^(-1/4) of the shipped Holder spec."""
    return complex(gamma(1.25) * complex(lam) ** -0.25)
