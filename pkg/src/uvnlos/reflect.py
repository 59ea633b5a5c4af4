"""Single-bounce energy reflected by the prism's lateral faces."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .atmosphere import extinction
from .geometry import PrismObstacle, ShapeKind, TOL
from .scene import Scene
from .source import density_from_cos

# (i, j) vertex pairs (1-based) of the candidate faces and the orientation
# interval over which each one faces the transceivers; flags mark closed ends.
_CANDIDATES = {
    ShapeKind.RTP: [((1, 3), 0.0, math.pi / 6, True, False),
                    ((3, 2), 0.0, 2 * math.pi / 3, True, True),
                    ((2, 1), math.pi / 2, 2 * math.pi / 3, False, True)],
    ShapeKind.RP: [((4, 3), 0.0, math.pi / 2, True, False),
                   ((3, 2), 0.0, math.pi, False, False),
                   ((2, 1), math.pi / 2, math.pi, False, True)],
    ShapeKind.RPP: [((5, 4), 0.0, 3 * math.pi / 10, True, False),
                    ((4, 3), 0.0, 2 * math.pi / 5, True, True),
                    ((3, 2), math.pi / 10, 2 * math.pi / 5, False, True)],
}


@dataclass(frozen=True)
class ReflectionSurface:
    label: str
    y_range: tuple[float, float]
    x_of_y: Callable
    height: float
    normal: np.ndarray
    ds_jacobian: float


def _in_interval(a, lo, hi, closed_lo, closed_hi, tol=1e-12):
    above = a >= lo - tol if closed_lo else a > lo + tol
    below = a <= hi + tol if closed_hi else a < hi - tol
    return above and below


def active_surfaces(obstacle: PrismObstacle) -> list[ReflectionSurface]:
    """Lateral faces that can reflect towards the transceivers for the
    obstacle's orientation, parametrised over (y, z)."""
    out = []
    xy = obstacle.vertices_xy
    letter = {ShapeKind.RTP: "B", ShapeKind.RP: "C", ShapeKind.RPP: "D"}[obstacle.shape.kind]
    for (i, j), lo, hi, clo, chi in _CANDIDATES[obstacle.shape.kind]:
        if not _in_interval(obstacle.orientation, lo, hi, clo, chi):
            continue
        (xi, yi), (xj, yj) = xy[i - 1], xy[j - 1]
        dy = yi - yj
        length = math.hypot(xi - xj, dy)
        if abs(dy) <= TOL * max(1.0, length):
            continue  # edge-on to the y axis: no (y, z) parametrisation
        n = np.array([yj - yi, xi - xj, 0.0])
        n /= np.linalg.norm(n)

        def x_of_y(y, xi=xi, xj=xj, yi=yi, yj=yj):
            return (xi - xj) * (np.asarray(y) - yj) / (yi - yj) + xj

        out.append(ReflectionSurface(f"{letter}{i}{j}{j}'{i}'", (min(yi, yj), max(yi, yj)),
                                     x_of_y, obstacle.height, n, length / abs(dy)))
    return out


def reflection_pattern(cos_1, cos_2, diffuse: float, exponent: float):
    """Diffuse + specular-lobe reflection density per steradian, given the
    cosines of the angle to the normal and to the mirror direction."""
    c1 = np.clip(cos_1, 0.0, 1.0)
    c2 = np.clip(cos_2, 0.0, 1.0)
    return diffuse * c1 / math.pi + (1.0 - diffuse) * (exponent + 1.0) / (2 * math.pi) * c2 ** exponent


@dataclass(frozen=True)
class ReflectResult:
    energy: float
    rel_change: float
    faces: tuple[str, ...]


def _face_energy(scene: Scene, face: ReflectionSurface, n_y: int, n_z: int) -> float:
    g, atm, obs = scene.geom, scene.atmosphere, scene.obstacle
    t = g.tx_position
    y0, y1 = face.y_range
    ys = y0 + (np.arange(n_y) + 0.5) * (y1 - y0) / n_y
    zs = (np.arange(n_z) + 0.5) * face.height / n_z
    n = face.normal
    # transmitter behind the face plane: nothing is lit
    if (t - np.array([face.x_of_y(ys[0]), ys[0], 0.0])) @ n <= 0:
        return 0.0
    Y, Z = np.meshgrid(ys, zs, indexing="ij")
    P = np.stack([face.x_of_y(Y), Y, Z], axis=-1)
    eps_vec = P - t
    eps = np.linalg.norm(eps_vec, axis=-1)
    nu_vec = -P
    nu = np.linalg.norm(nu_vec, axis=-1)
    cos_emit = (eps_vec @ g.tx_axis) / eps
    cos_i = -(eps_vec @ n) / eps
    cos_1 = (nu_vec @ n) / nu
    cos_delta = (P @ g.rx_axis) / nu
    spec = eps_vec - 2.0 * (eps_vec @ n)[..., None] * n
    cos_2 = np.einsum("...i,...i->...", nu_vec, spec) / (nu * eps)
    ok = (eps_vec @ g.tx_axis >= 0) & (cos_delta >= math.cos(g.rx_half_fov)) & (cos_i > 0) & (cos_1 > 0)
    rp = obs.reflection
    val = (density_from_cos(cos_emit, scene.source) * cos_i * cos_delta
           * reflection_pattern(cos_1, cos_2, rp.diffuse_fraction, rp.specular_exponent)
           * np.exp(-extinction(atm) * (eps + nu)) / (eps ** 2 * nu ** 2))
    cell = (y1 - y0) / n_y * face.height / n_z * face.ds_jacobian
    return float(np.sum(np.where(ok, val, 0.0)) * cell)


def _reflected(scene: Scene, n_y: int, n_z: int) -> float:
    if scene.obstacle is None or scene.obstacle.reflection.coefficient == 0:
        return 0.0
    g = scene.geom
    total = sum(_face_energy(scene, f, n_y, n_z) for f in active_surfaces(scene.obstacle))
    return g.pulse_energy * g.aperture * scene.obstacle.reflection.coefficient * total


def reflected_energy(scene: Scene, n_y: int = 256, n_z: int = 256, check: bool = True) -> ReflectResult:
    if min(n_y, n_z) < 16:
        raise ValueError("reflection quadrature needs >= 16 nodes per axis")
    q = _reflected(scene, n_y, n_z)
    rel = 0.0
    if check and q > 0:
        rel = abs(q - _reflected(scene, n_y // 2, n_z // 2)) / q
    faces = tuple(f.label for f in active_surfaces(scene.obstacle)) if scene.obstacle else ()
    return ReflectResult(q, rel, faces)
