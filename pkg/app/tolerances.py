"""
Tolerances - numerical thresholds shared across modules
"""
from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds.

    Scene-relative values (merge radius, eigenvalue floor) are stored as
    factors and scaled by the scene diameter where they are used.
    """
    # Minimizer classification
    tol_g: float = 1e-6
    merge_factor: float = 1e-6
    rel_tol: float = 1e-9
    eig_factor: float = 1e-6
    degenerate_count: int = 8
    stationarity_factor: float = 1e-8

    # Charts
    r0_factor: float = 0.3
    fd_factor: float = 1e-4
    chart_spacing_factor: float = 0.25

    # Solvers
    solver: float = 1e-12
    route: float = 1e-3

    # Spectral regions and audits
    delta0: float = 0.5
    delta1: float = 0.1
    audit_delta: float = 0.2
    slack: float = 0.5

    def with_overrides(self, overrides: dict = None) -> "Tolerances":
        """Return a copy with the given fields replaced.

        Unknown keys raise ``KeyError`` so typos in config files surface.
        """
        if not overrides:
            return self
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise KeyError(f"unknown tolerance keys: {sorted(unknown)}")
        cast = {k: type(getattr(self, k))(v) for k, v in overrides.items()}
        return replace(self, **cast)

    def merge_radius(self, diameter: float) -> float:
        return self.merge_factor * diameter

    def eig_tol(self, diameter: float) -> float:
        return self.eig_factor / diameter


DEFAULT_TOLERANCES = Tolerances()
