"""Prism obstacles and exact ray/segment occlusion tests.

Frame: receiver R at the origin, transmitter T at (0, r, 0), ground plane
z = 0.  Points and directions are plain ``numpy`` arrays of shape ``(3,)`` or
``(N, 3)``.

A prism is the vertical extrusion of a regular (or rectangular) polygon from
the ground up to its height.  Its solid is the intersection of half-spaces
``n . x <= d`` -- one per lateral face, plus the top (z <= height) and the
bottom (z >= 0).  All tests use an absolute tolerance of ``TOL`` metres and
count grazing contact as an intersection.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

TOL = 1e-9


class ShapeKind(str, enum.Enum):
    RTP = "RTP"  # regular triangular prism
    RP = "RP"  # rectangular prism
    RPP = "RPP"  # regular pentagonal prism


# Angular offsets of the top-face vertices, in label order.
_RTP_OFFSETS = (math.pi / 6, 5 * math.pi / 6, 3 * math.pi / 2)
_RPP_OFFSETS = (3 * math.pi / 10, 7 * math.pi / 10, 11 * math.pi / 10,
                3 * math.pi / 2, 19 * math.pi / 10)

# Symmetry-reduced orientation interval per shape.
ORIENTATION_RANGE = {
    ShapeKind.RTP: (0.0, 2 * math.pi / 3),
    ShapeKind.RP: (0.0, math.pi),
    ShapeKind.RPP: (0.0, 2 * math.pi / 5),
}

_LABEL_LETTER = {ShapeKind.RTP: "B", ShapeKind.RP: "C", ShapeKind.RPP: "D"}


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class PrismShape:
    """Cross-section and height of a prism.

    ``side`` is the length of edge 1-2 (B1B2, C1C2 or D1D2); ``depth`` is the
    RP's second side C2C3 and is ignored for the regular shapes.
    """

    kind: ShapeKind
    side: float
    height: float
    depth: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ShapeKind(self.kind))
        if not self.side > 0:
            raise GeometryError(f"prism side must be > 0, got {self.side}")
        if not self.height > 0:
            raise GeometryError(f"prism height must be > 0, got {self.height}")
        if self.kind is ShapeKind.RP:
            if self.depth is None or not self.depth > 0:
                raise GeometryError(f"RP depth must be > 0, got {self.depth}")

    @classmethod
    def from_radius(cls, kind, radius: float, height: float) -> "PrismShape":
        """Regular prism whose cross-section has circumradius ``radius``."""
        kind = ShapeKind(kind)
        if kind is ShapeKind.RTP:
            return cls(kind, radius * math.sqrt(3.0), height)
        if kind is ShapeKind.RPP:
            return cls(kind, radius * math.sin(2 * math.pi / 5) / math.sin(3 * math.pi / 10), height)
        raise GeometryError("an RP needs both sides; it cannot be built from a radius")

    def offsets(self) -> tuple[float, ...]:
        if self.kind is ShapeKind.RTP:
            return _RTP_OFFSETS
        if self.kind is ShapeKind.RPP:
            return _RPP_OFFSETS
        a = math.atan(self.depth / self.side)
        return (a, math.pi - a, math.pi + a, 2 * math.pi - a)


def rotation_radius(shape: PrismShape) -> float:
    """Circumradius of the prism cross-section."""
    if shape.kind is ShapeKind.RTP:
        return shape.side / math.sqrt(3.0)
    if shape.kind is ShapeKind.RP:
        return math.hypot(shape.side, shape.depth) / 2.0
    return shape.side * math.sin(3 * math.pi / 10) / math.sin(2 * math.pi / 5)


@dataclass(frozen=True)
class Reflectance:
    """Surface reflection parameters: total reflectance, diffuse fraction and
    directivity of the specular lobe."""

    coefficient: float = 0.1
    diffuse_fraction: float = 0.5
    specular_exponent: float = 5.0

    def __post_init__(self):
        if not 0.0 <= self.coefficient <= 1.0:
            raise GeometryError(f"reflectance must lie in [0, 1], got {self.coefficient}")
        if not 0.0 <= self.diffuse_fraction <= 1.0:
            raise GeometryError(f"diffuse fraction must lie in [0, 1], got {self.diffuse_fraction}")
        if not self.specular_exponent > 0:
            raise GeometryError(f"specular exponent must be > 0, got {self.specular_exponent}")


@dataclass(frozen=True)
class PrismObstacle:
    """A prism standing on the ground with top-face centre
    ``(center_x, center_y, shape.height)`` rotated clockwise by ``orientation``.

    ``strict=False`` skips the orientation-interval check (used for mirrored
    scenes in symmetry tests).
    """

    shape: PrismShape
    center_x: float
    center_y: float
    orientation: float = 0.0
    reflection: Reflectance = Reflectance()
    strict: bool = True

    def __post_init__(self):
        if self.strict:
            lo, hi = ORIENTATION_RANGE[self.shape.kind]
            if not lo - TOL <= self.orientation <= hi + TOL:
                raise GeometryError(
                    f"{self.shape.kind.value} orientation {self.orientation:.6g} rad outside "
                    f"[{lo:.6g}, {hi:.6g}]")

    @property
    def height(self) -> float:
        return self.shape.height

    @property
    def center(self) -> np.ndarray:
        return np.array([self.center_x, self.center_y, self.shape.height])

    @cached_property
    def radius(self) -> float:
        return rotation_radius(self.shape)

    @cached_property
    def vertices_xy(self) -> np.ndarray:
        """(k, 2) polygon vertices in label order (clockwise seen from above)."""
        rad = self.radius
        ang = self.orientation + np.asarray(self.shape.offsets())
        xy = np.column_stack([-rad * np.sin(ang) + self.center_x,
                              -rad * np.cos(ang) + self.center_y])
        xy.setflags(write=False)
        return xy

    @cached_property
    def planes(self) -> tuple[np.ndarray, np.ndarray]:
        """Half-space normals ``(k+2, 3)`` and offsets ``(k+2,)``.

        Rows 0..k-1 are lateral faces (face i joins vertex i and vertex i+1),
        row k is the top, row k+1 the bottom.
        """
        xy = self.vertices_xy
        nxt = np.roll(xy, -1, axis=0)
        edge = nxt - xy
        normal = np.column_stack([edge[:, 1], -edge[:, 0]])
        normal /= np.linalg.norm(normal, axis=1, keepdims=True)
        mid = 0.5 * (xy + nxt)
        # orient outward regardless of the winding
        flip = np.einsum("ij,ij->i", normal, mid - [self.center_x, self.center_y]) < 0
        normal[flip] *= -1
        k = len(xy)
        n = np.zeros((k + 2, 3))
        n[:k, :2] = normal
        n[k] = (0.0, 0.0, 1.0)
        n[k + 1] = (0.0, 0.0, -1.0)
        d = np.empty(k + 2)
        d[:k] = np.einsum("ij,ij->i", normal, xy)
        d[k] = self.shape.height
        d[k + 1] = 0.0
        n.setflags(write=False)
        d.setflags(write=False)
        return n, d

    @property
    def n_lateral(self) -> int:
        return len(self.vertices_xy)

    def face_label(self, face: int) -> str:
        """Conventional vertex-list label for a face index, e.g. ``C433'4'`` style names."""
        k = self.n_lateral
        if face == k:
            return "top"
        if face == k + 1:
            return "bottom"
        a, b = face + 1, (face + 1) % k + 1
        letter = _LABEL_LETTER[self.shape.kind]
        return f"{letter}{a}{b}{b}'{a}'"


def check_active_area(obstacle: PrismObstacle, r: float) -> None:
    """Raise unless the obstacle centre lies in the region where the
    boundary approximation is set up: x < -radius, radius < y < r - radius."""
    rad = obstacle.radius
    if not obstacle.center_x < -rad:
        raise GeometryError(
            f"obstacle centre x = {obstacle.center_x:.6g} m must be < -radius = {-rad:.6g} m")
    if not rad < obstacle.center_y < r - rad:
        raise GeometryError(
            f"obstacle centre y = {obstacle.center_y:.6g} m must lie in "
            f"({rad:.6g}, {r - rad:.6g}) m for range r = {r:.6g} m")


def base_vertices(obstacle: PrismObstacle) -> list[np.ndarray]:
    """Top-face vertices in label order; bottom vertices share x, y at z = 0."""
    h = obstacle.height
    return [np.array([x, y, h]) for x, y in obstacle.vertices_xy]


def contains(points, obstacle: PrismObstacle, tol: float = TOL) -> np.ndarray:
    """Closed-solid membership for an ``(N, 3)`` array of points."""
    pts = np.atleast_2d(points)
    n, d = obstacle.planes
    return np.all(pts @ n.T <= d + tol, axis=-1)


def segments_intersect(p0, p1, obstacle: PrismObstacle, tol: float = TOL) -> np.ndarray:
    """Vectorised segment/solid test for ``(N, 3)`` endpoint arrays.

    Clips the parameter interval [0, 1] against every half-space.
    """
    p0 = np.atleast_2d(np.asarray(p0, dtype=float))
    p1 = np.atleast_2d(np.asarray(p1, dtype=float))
    n, d = obstacle.planes
    f0 = p0 @ n.T - d - tol
    f1 = p1 @ n.T - d - tol
    outside = np.any((f0 > 0) & (f1 > 0), axis=-1)
    denom = f0 - f1
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(denom != 0, f0 / denom, 0.0)
    entering = (f0 > 0) & (f1 <= 0)
    exiting = (f0 <= 0) & (f1 > 0)
    t_in = np.max(np.where(entering, t, 0.0), axis=-1)
    t_out = np.min(np.where(exiting, t, 1.0), axis=-1)
    return ~outside & (t_in <= t_out)


def segment_intersects_prism(p0, p1, obstacle: PrismObstacle) -> bool:
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    if np.array_equal(p0, p1):
        raise GeometryError("segment endpoints coincide")
    return bool(segments_intersect(p0, p1, obstacle)[0])


@dataclass(frozen=True)
class Hit:
    distance: float
    face: int
    normal: np.ndarray


def first_hits(origins, dirs, obstacle: PrismObstacle, tol: float = TOL):
    """Vectorised nearest hit of unit-direction rays with the prism.

    Returns ``(distance, face)`` arrays; ``distance`` is ``inf`` and ``face``
    is -1 where the ray misses, starts inside, or would enter through the
    bottom face.
    """
    o = np.atleast_2d(origins)
    v = np.atleast_2d(dirs)
    n, d = obstacle.planes
    f0 = o @ n.T - d
    slope = v @ n.T
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = -f0 / slope
    parallel = slope == 0
    miss = np.any(parallel & (f0 > tol), axis=-1)
    entering = slope < 0
    t_enter = np.where(entering, t, -np.inf)
    face = np.argmax(t_enter, axis=-1)
    t_in = np.take_along_axis(t_enter, face[:, None], axis=-1)[:, 0]
    t_out = np.min(np.where(slope > 0, t, np.inf), axis=-1)
    ok = ~miss & (t_in <= t_out + tol) & (t_in > tol) & np.isfinite(t_in)
    ok &= face != obstacle.n_lateral + 1
    dist = np.where(ok, t_in, np.inf)
    return dist, np.where(ok, face, -1)


def first_hit(p0, direction, obstacle: PrismObstacle) -> Hit | None:
    """Nearest intersection of a ray with a lateral or top face, or None."""
    dist, face = first_hits(np.asarray(p0, dtype=float), np.asarray(direction, dtype=float), obstacle)
    if face[0] < 0:
        return None
    normal = np.array(obstacle.planes[0][face[0]])
    return Hit(float(dist[0]), int(face[0]), normal)
