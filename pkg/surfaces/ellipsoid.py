"""
Ellipsoid - triaxial ellipsoid primitive
"""
import numpy as np
from scipy.special import elliprg

from surfaces.base import SurfacePrimitive

BISECTION_RTOL = 1e-15
BISECTION_STEPS = int(np.ceil(np.log2(1.0 / BISECTION_RTOL))) + 1


class Ellipsoid(SurfacePrimitive):
    """Ellipsoid with semi-axes ``radii`` along the rotated local axes."""

    @property
    def kind(self) -> str:
        return "ellipsoid"

    def local_points(self, t, phi):
        t = np.asarray(t, dtype=float)
        s = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
        a, b, c = self.radii
        return np.stack([a * s * np.cos(phi), b * s * np.sin(phi), c * t * np.ones_like(phi)], axis=-1)

    def local_implicit(self, u):
        return np.sum((u / self.radii) ** 2, axis=-1) - 1.0

    def local_gradient(self, u):
        return 2.0 * u / self.radii ** 2

    def area_element(self, t, phi):
        a, b, c = self.radii
        s2 = 1.0 - np.asarray(t, dtype=float) ** 2
        return np.sqrt(b * b * c * c * s2 * np.cos(phi) ** 2
                       + a * a * c * c * s2 * np.sin(phi) ** 2
                       + a * a * b * b * t * t)

    def area(self) -> float:
        a, b, c = self.radii
        return float(4.0 * np.pi * elliprg(a * a * b * b, b * b * c * c, a * a * c * c))

    @property
    def min_curvature_radius(self) -> float:
        return float(np.min(self.radii) ** 2 / np.max(self.radii))

    @property
    def max_curvature_radius(self) -> float:
        return float(np.max(self.radii) ** 2 / np.min(self.radii))

    def bounding_half_widths(self) -> np.ndarray:
        return np.sqrt(np.sum((self._matrix * self.radii) ** 2, axis=1))

    def line_offset(self, q, nu, reach=None):
        # Quadric root in scaled coordinates: |u - t v|^2 = 1
        q = np.asarray(q, dtype=float)
        nu = np.broadcast_to(np.asarray(nu, dtype=float), q.shape)
        u = self.to_local(q) / self.radii
        v = (nu @ self._matrix) / self.radii
        A = np.sum(v * v, axis=-1)
        B = np.sum(u * v, axis=-1)
        C = np.sum(u * u, axis=-1) - 1.0
        disc = B * B - A * C
        with np.errstate(invalid="ignore", divide="ignore"):
            root = np.sqrt(np.where(disc >= 0, disc, np.nan))
            t = C / (B + np.copysign(root, B))
        if reach is not None:
            t = np.where(np.abs(t) <= reach, t, np.nan)
        return t

    def distance(self, x):
        """Distance from interior points, by bisection on the closest-point equation."""
        u = np.abs(self.to_local(np.atleast_2d(x)))
        e = self.radii
        emin = float(np.min(e))
        # F(s) = sum (e_i u_i / (s + e_i^2))^2 - 1 decreases on (-emin^2, inf)
        lo = np.full(len(u), -emin ** 2)
        hi = np.zeros(len(u))

        def F(s):
            return np.sum((e * u / (s[:, None] + e * e)) ** 2, axis=-1) - 1.0

        lo_inner = lo + 1e-14 * emin ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            regular = F(lo_inner) > 0
        # the bracket starts emin^2 wide and halves each pass
        for _ in range(BISECTION_STEPS):
            if not np.any(regular) or np.max((hi - lo)[regular]) <= BISECTION_RTOL * emin ** 2:
                break
            mid = 0.5 * (lo + hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                pos = F(mid) > 0
            lo = np.where(pos & regular, mid, lo)
            hi = np.where(pos | ~regular, hi, mid)
        s = np.where(regular, 0.5 * (lo + hi), -emin ** 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = e * e * u / (s[:, None] + e * e)
        axis_min = np.isclose(e, emin)
        closest = np.where(axis_min[None, :] & ~regular[:, None], 0.0, scaled)
        # Degenerate branch: the point lies on the plane of the shortest axes
        if np.any(~regular):
            rest = 1.0 - np.sum(np.where(axis_min, 0.0, closest / e) ** 2, axis=-1)
            k = int(np.argmax(axis_min))
            fill = e[k] * np.sqrt(np.clip(rest, 0.0, None))
            closest[~regular, k] = fill[~regular]
        d = np.linalg.norm(closest - u, axis=-1)
        return d if np.ndim(x) > 1 else d[0]
