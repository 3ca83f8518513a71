"""
Peanut - two-lobed star-shaped primitive with a waist

In the local frame a point is f(t) * (a s cos phi, b s sin phi, c t) with
s = sqrt(1 - t^2) and f(t) = 1 - WAIST (1 - t^2): the lobes sit on the local
z axis and the surface narrows to 1 - WAIST of the ellipsoid at the equator.
For WAIST > 1/3 the meridians curve outward at the waist, so the surface is
smooth but not convex.
"""
import numpy as np

from surfaces.base import SurfacePrimitive

WAIST = 0.5


class Peanut(SurfacePrimitive):
    """Ellipsoid with semi-axes ``radii`` pinched at its equator."""

    @property
    def kind(self) -> str:
        return "peanut"

    @staticmethod
    def _shape(t):
        return 1.0 - WAIST * (1.0 - t * t)

    def local_points(self, t, phi):
        t = np.asarray(t, dtype=float)
        s = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
        a, b, c = self.radii
        f = self._shape(t)
        return np.stack([f * a * s * np.cos(phi), f * b * s * np.sin(phi), f * c * t * np.ones_like(phi)],
                        axis=-1)

    def local_implicit(self, u):
        q = np.asarray(u, dtype=float) / self.radii
        n = np.linalg.norm(q, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(n > 0, q[..., 2] / np.where(n > 0, n, 1.0), 0.0)
        return n - self._shape(t)

    def area_element(self, t, phi):
        # x_t x x_phi = f f' (P x P_phi) + f^2 (P_t x P_phi), P the ellipsoid point
        t = np.asarray(t, dtype=float)
        s = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
        a, b, c = self.radii
        f = self._shape(t)
        df = 2.0 * WAIST * t
        cp, sp = np.cos(phi), np.sin(phi)
        p_cross = np.stack([-b * c * t * s * cp, -a * c * t * s * sp, a * b * s * s * np.ones_like(phi)], axis=-1)
        t_cross = -np.stack([b * c * s * cp, a * c * s * sp, a * b * t * np.ones_like(phi)], axis=-1)
        return np.linalg.norm((f * df)[..., None] * p_cross + (f * f)[..., None] * t_cross, axis=-1)

    @property
    def min_curvature_radius(self) -> float:
        # both the poles and the waist of the round peanut have radius (1 - WAIST) a
        return float((1.0 - WAIST) * np.min(self.radii) ** 2 / np.max(self.radii))

    @property
    def max_curvature_radius(self) -> float:
        # meridians have inflection points between the lobes and the waist
        return float("inf")
