"""
Surfaces Module - factory for parametric surface primitives

Usage:
    from surfaces import get_primitive

    primitive = get_primitive("ellipsoid", (0, 0, 0), (2, 1, 1))
    primitive.implicit(points)
"""
from functools import lru_cache
from typing import Tuple

from surfaces.base import SurfacePrimitive

SUPPORTED_KINDS = ("sphere", "ellipsoid", "peanut")


@lru_cache(maxsize=64)
def get_primitive(kind: str, center: Tuple[float, float, float],
                  radii: Tuple[float, float, float],
                  rotation: Tuple[float, float, float] = (0.0, 0.0, 0.0)) -> SurfacePrimitive:
    """
    Get the primitive for a surface kind.

    Instances are cached per placement; they hold no mutable state.
    """
    if kind == "sphere":
        from surfaces.sphere import Sphere
        return Sphere(center, radii, rotation)
    if kind == "ellipsoid":
        from surfaces.ellipsoid import Ellipsoid
        return Ellipsoid(center, radii, rotation)
    if kind == "peanut":
        from surfaces.peanut import Peanut
        return Peanut(center, radii, rotation)
    raise ValueError(f"unsupported surface kind: {kind!r} (expected one of {SUPPORTED_KINDS})")


__all__ = [
    "get_primitive",
    "SUPPORTED_KINDS",
    "SurfacePrimitive",
]
