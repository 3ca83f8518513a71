"""
Sphere - round special case of the ellipsoid
"""
import numpy as np

from surfaces.ellipsoid import Ellipsoid


class Sphere(Ellipsoid):
    """Sphere of radius ``radii[0]``; all three radii must agree."""

    @property
    def kind(self) -> str:
        return "sphere"

    @property
    def radius(self) -> float:
        return float(self.radii[0])

    def local_gradient(self, u):
        return u / self.radius

    def area(self) -> float:
        return 4.0 * np.pi * self.radius ** 2

    @property
    def min_curvature_radius(self) -> float:
        return self.radius

    @property
    def max_curvature_radius(self) -> float:
        return self.radius

    def bounding_half_widths(self) -> np.ndarray:
        return np.full(3, self.radius)

    def distance(self, x):
        return np.abs(self.radius - np.linalg.norm(np.asarray(x, dtype=float) - self.center, axis=-1))
