"""
Surface Base - abstract base class for closed parametric surfaces

A primitive knows its shape analytically: a spherical-angle parametrization,
an implicit function that is negative inside, outward normals, curvature-radius
bounds and the line intersection used by local graph charts. Subclasses supply
the local-frame pieces; placement (center and rotation) lives here.
"""
from abc import ABC, abstractmethod
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.spatial.transform import Rotation


class SurfacePrimitive(ABC):
    """Abstract base class for closed C2 surfaces placed in space."""

    def __init__(self, center: Sequence[float], radii: Sequence[float],
                 rotation: Sequence[float] = (0.0, 0.0, 0.0)):
        self.center = np.asarray(center, dtype=float).reshape(3)
        self.radii = np.asarray(radii, dtype=float).reshape(3)
        self.rotation_deg = tuple(float(a) for a in rotation)
        self._rotation = Rotation.from_euler("xyz", self.rotation_deg, degrees=True)
        self._matrix = self._rotation.as_matrix()

    # =========================================================================
    # Shape (local frame)
    # =========================================================================

    @property
    @abstractmethod
    def kind(self) -> str:
        """Primitive name as used in scene files."""
        pass

    @abstractmethod
    def local_points(self, t: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Points for t = cos(theta) and azimuth phi, in the local frame."""
        pass

    @abstractmethod
    def local_implicit(self, u: np.ndarray) -> np.ndarray:
        """Implicit function in the local frame; negative inside."""
        pass

    @property
    @abstractmethod
    def min_curvature_radius(self) -> float:
        """Smallest principal radius of curvature over the surface."""
        pass

    @property
    @abstractmethod
    def max_curvature_radius(self) -> float:
        """Largest principal radius of curvature over the surface."""
        pass

    def local_gradient(self, u: np.ndarray) -> np.ndarray:
        """Gradient of the local implicit function, by central differences."""
        h = 1e-6 * float(np.max(self.radii))
        grad = np.empty_like(u)
        for k in range(3):
            step = np.zeros(3)
            step[k] = h
            grad[..., k] = (self.local_implicit(u + step) - self.local_implicit(u - step)) / (2 * h)
        return grad

    def area_element(self, t: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Surface element dS / (dt dphi), by differencing the parametrization."""
        h = 1e-6
        x_t = (self.local_points(t + h, phi) - self.local_points(t - h, phi)) / (2 * h)
        x_p = (self.local_points(t, phi + h) - self.local_points(t, phi - h)) / (2 * h)
        return np.linalg.norm(np.cross(x_t, x_p), axis=-1)

    def area(self) -> Optional[float]:
        """Closed-form area when one exists."""
        return None

    # =========================================================================
    # Placement
    # =========================================================================

    def to_local(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.center) @ self._matrix

    def to_world(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, dtype=float) @ self._matrix.T + self.center

    def points(self, t: np.ndarray, phi: np.ndarray) -> np.ndarray:
        return self.to_world(self.local_points(t, phi))

    def implicit(self, x: np.ndarray) -> np.ndarray:
        return self.local_implicit(self.to_local(x))

    def normals(self, x: np.ndarray) -> np.ndarray:
        """Outward unit normals at surface points."""
        grad = self.local_gradient(self.to_local(x)) @ self._matrix.T
        return grad / np.linalg.norm(grad, axis=-1, keepdims=True)

    def bounding_half_widths(self) -> np.ndarray:
        """Half widths of an axis-aligned box around the surface."""
        return np.full(3, float(np.max(self.radii)))

    @property
    def diameter(self) -> float:
        return 2.0 * float(np.max(self.radii))

    # =========================================================================
    # Charts and distances
    # =========================================================================

    def line_offset(self, q: np.ndarray, nu: np.ndarray, reach: float) -> np.ndarray:
        """
        Signed offsets t with q - t*nu on the surface, nearest to t = 0.

        Args:
            q: (..., 3) points on tangent planes
            nu: (..., 3) unit normals of those planes
            reach: search half-width for t

        Returns:
            offsets, NaN where the line misses the surface within reach
        """
        q = np.asarray(q, dtype=float)
        nu = np.broadcast_to(np.asarray(nu, dtype=float), q.shape)
        flat_q = q.reshape(-1, 3)
        flat_nu = nu.reshape(-1, 3)
        out = np.full(len(flat_q), np.nan)
        for k, (qk, nk) in enumerate(zip(flat_q, flat_nu)):
            f = lambda t: float(self.implicit(qk - t * nk))
            lo, hi = -reach, reach
            if f(lo) * f(hi) > 0:
                continue
            out[k] = brentq(f, lo, hi, xtol=1e-15, rtol=4e-16)
        return out.reshape(q.shape[:-1])

    def distance(self, x: np.ndarray) -> Optional[np.ndarray]:
        """Distance from interior points to the surface, when available in closed form."""
        return None
