"""Single-scattering received energy with prism occlusion.

The receiver field of view is swept by planes ``E_theta`` that contain the
horizontal line through R perpendicular to the receiver azimuth and are
tilted to elevation ``phi = rx_elevation + theta``.  Inside each plane a
scattering point sits at in-plane angle ``psi`` from the central ray and
distance ``nu`` from R, so the volume element is ``nu**2 cos(psi)``.

Occlusion by the prism is decided either exactly (segment tests against the
solid) or by the boundary approximation: the prism is summarised by critical
angles of its top vertices and vertical edges as seen in the receiver plane
``E_theta`` and in the transmitter plane ``F_sigma``, and each scattering
point is classified by comparing its own angles against them.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .atmosphere import extinction, phase_function
from .geometry import PrismObstacle, segments_intersect
from .scene import Scene, TransceiverGeometry
from .source import density_from_cos

PLANE_TOL = 1e-12


class ScatterError(ValueError):
    pass


class Weighting(str, enum.Enum):
    APPROX = "approx"
    EXACT = "exact"
    NONE = "none"


class Branch(enum.IntEnum):
    """Which clause of the weighting decision tree produced a value."""

    STEP1_BACKWARD = 0
    NO_OBSTACLE = 1
    STEP2_CLEAR = 2
    STEP2_TX_OUTSIDE = 3
    STEP2_TX_NEAR = 4
    STEP2_TX_BLOCKED = 5
    STEP3_RX_OUTSIDE = 6
    STEP3_RX_SHADOW_NEAR = 7
    STEP3_RX_SHADOW_BLOCKED = 8
    STEP3_RX_BEYOND_TX_CLEAR = 9
    STEP3_RX_BEYOND_TX_WIDE = 10
    STEP3_RX_BEYOND_TX_BLOCKED = 11
    FALLBACK_ORDERING = 12
    FALLBACK_DEGENERATE = 13


_BRANCH_VALUE = {
    Branch.STEP1_BACKWARD: 0, Branch.NO_OBSTACLE: 1, Branch.STEP2_CLEAR: 1,
    Branch.STEP2_TX_OUTSIDE: 1, Branch.STEP2_TX_NEAR: 1, Branch.STEP2_TX_BLOCKED: 0,
    Branch.STEP3_RX_OUTSIDE: 1, Branch.STEP3_RX_SHADOW_NEAR: 1,
    Branch.STEP3_RX_SHADOW_BLOCKED: 0, Branch.STEP3_RX_BEYOND_TX_CLEAR: 1,
    Branch.STEP3_RX_BEYOND_TX_WIDE: 1, Branch.STEP3_RX_BEYOND_TX_BLOCKED: 0,
}


@dataclass(frozen=True)
class WeightDecision:
    value: int
    branch: Branch


@dataclass(frozen=True)
class QuadratureSpec:
    n_theta: int = 128
    n_psi: int = 128
    n_nu: int = 256
    nu_mapping: bool = True  # exponential stretch; False uses nu = r u / (1 - u)
    rel_tol: float = 1e-2

    def __post_init__(self):
        if min(self.n_theta, self.n_psi, self.n_nu) < 8:
            raise ScatterError("quadrature node counts must be >= 8")
        if not self.rel_tol > 0:
            raise ScatterError("rel_tol must be > 0")

    def scaled(self, factor: float) -> "QuadratureSpec":
        return QuadratureSpec(max(8, int(self.n_theta * factor)), max(8, int(self.n_psi * factor)),
                              max(8, int(self.n_nu * factor)), self.nu_mapping, self.rel_tol)


@dataclass(frozen=True)
class Bounds:
    theta_min: float
    theta_max: float
    psi_max: float
    nu_min: float = 0.0
    nu_max: float = math.inf

    @property
    def psi_min(self) -> float:
        return -self.psi_max


def psi_limit(theta, half_fov: float):
    """Half-width in psi of the field-of-view cone inside plane E_theta."""
    t = np.asarray(theta, dtype=float)
    rad = np.cos(t) ** 2 * math.tan(half_fov) ** 2 - np.sin(t) ** 2
    return np.arctan(np.sqrt(np.maximum(rad, 0.0)))


def integration_bounds(theta: float, geom: TransceiverGeometry) -> Bounds:
    b = geom.rx_half_fov
    if abs(theta) > b + 1e-12:
        raise ScatterError(f"|theta| = {abs(theta):.6g} exceeds the half field of view {b:.6g}")
    return Bounds(-b, b, float(psi_limit(theta, b)))


def scatter_point(nu, psi, theta, geom: TransceiverGeometry) -> np.ndarray:
    """Cartesian scattering point(s); broadcasts its arguments, returns (..., 3)."""
    nu, psi, theta = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (nu, psi, theta)))
    phi = geom.rx_elevation + theta
    omega = np.arctan(np.tan(psi) / np.cos(phi))
    base = nu * np.cos(psi) * np.cos(phi) / np.cos(omega)
    a = geom.rx_azimuth + omega
    return np.stack([base * np.cos(a), base * np.sin(a), nu * np.cos(psi) * np.sin(phi)], axis=-1)


def forward_halfspace(P, geom: TransceiverGeometry):
    """True where the point lies in the transmitter's forward half-space."""
    eps = np.asarray(P, dtype=float) - geom.tx_position
    out = eps @ geom.tx_axis >= 0
    return bool(out) if out.ndim == 0 else out


def kernel(P, psi, geom: TransceiverGeometry, atmosphere, source):
    """Geometric kernel of the scattering integral (per d nu d psi d theta,
    without the constant Q_t k_s A)."""
    P = np.asarray(P, dtype=float)
    eps_vec = P - geom.tx_position
    eps = np.linalg.norm(eps_vec, axis=-1)
    nu = np.linalg.norm(P, axis=-1)
    if np.any(eps == 0) or np.any(nu == 0):
        raise ScatterError("scattering point coincides with a transceiver")
    cos_emit = (eps_vec @ geom.tx_axis) / eps
    cos_beta = -np.einsum("...i,...i->...", eps_vec, P) / (eps * nu)
    cos_delta = (P @ geom.rx_axis) / nu
    g = (density_from_cos(cos_emit, source) / eps ** 2
         * phase_function(np.clip(cos_beta, -1.0, 1.0), atmosphere)
         * cos_delta * np.exp(-extinction(atmosphere) * (eps + nu)) * np.cos(psi))
    return np.maximum(g, 0.0)


def _wrap(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


def _horizontal_distance(P, x0, y0):
    P = np.asarray(P, dtype=float)
    return np.hypot(P[..., 0] - x0, P[..., 1] - y0)


def sigma_of_point(P, geom: TransceiverGeometry):
    """Tilt of the transmitter plane F_sigma passing through ``P``."""
    P = np.asarray(P, dtype=float)
    x, y, z = P[..., 0], P[..., 1], P[..., 2]
    cot = 1.0 / math.tan(geom.tx_azimuth)
    gamma_t = math.sqrt(cot * cot + 1.0)
    proj = y + x * cot
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.arctan(z * gamma_t / np.abs(x * cot + y - geom.r))
    sigma = np.where(proj < geom.r, phi, np.where(proj > geom.r, math.pi - phi, math.pi / 2))
    return float(sigma) if sigma.ndim == 0 else sigma


@dataclass(frozen=True)
class CriticalAngles:
    rx_upper: float
    tx_upper: float
    rx_min: float | None = None
    rx_max: float | None = None
    tx_min: np.ndarray | float | None = None
    tx_max: np.ndarray | float | None = None


class BoundaryApproximation:
    """Critical angles of one obstacle for one link geometry.

    In-plane angles are signed: zero along RG (or TH), positive towards the
    side the receiver (transmitter) azimuth points to.  On that side they
    coincide with the unsigned angle between the two rays.
    """

    def __init__(self, geom: TransceiverGeometry, obstacle: PrismObstacle):
        self.geom = geom
        self.obstacle = obstacle
        xy = obstacle.vertices_xy
        self.edge_x = xy[:, 0]
        self.edge_y = xy[:, 1]
        h = obstacle.height
        ar, at = geom.rx_azimuth, geom.tx_azimuth
        cot_r, cot_t = 1.0 / math.tan(ar), 1.0 / math.tan(at)
        gamma_r, gamma_t = math.sqrt(cot_r ** 2 + 1.0), math.sqrt(cot_t ** 2 + 1.0)
        with np.errstate(divide="ignore"):
            self.rx_upper = float(np.max(np.arctan(h * gamma_r / np.abs(xy[:, 0] * cot_r + xy[:, 1]))))
            self.tx_upper = float(np.max(np.arctan(
                h * gamma_t / np.abs(xy[:, 0] * cot_t + xy[:, 1] - geom.r))))
        # in-plane bases; W and L are flipped so positive angles open towards
        # the side each azimuth points to
        self._w = np.array([-math.sin(ar), math.cos(ar), 0.0])
        if self._w[0] * math.cos(ar) < 0:
            self._w = -self._w
        self._l = np.array([-math.sin(at), math.cos(at), 0.0])
        if self._l[0] * math.cos(at) < 0:
            self._l = -self._l
        self._a_t = np.array([math.cos(at), math.sin(at), 0.0])
        self.axis_x, self.axis_y = obstacle.center_x, obstacle.center_y
        self.rx_axis_distance = math.hypot(self.axis_x, self.axis_y)
        self.tx_axis_distance = math.hypot(self.axis_x, self.axis_y - geom.r)

    # receiver side -------------------------------------------------------
    def rx_plane(self, theta: float):
        """Coefficients (G1, G2, G3) of plane E_theta: G1 x + G2 y + G3 z = 0."""
        g = self.geom
        phi = g.rx_elevation + theta
        rad = max(math.tan(g.rx_half_fov) ** 2 - math.tan(theta) ** 2, 0.0)
        tan_pl = math.tan(math.atan(math.sqrt(rad) * math.cos(theta) / math.cos(phi)))
        sec2 = 1.0 / math.cos(theta) ** 2
        g1 = -math.cos(g.rx_azimuth) * sec2 * math.sin(2 * phi) * tan_pl
        g2 = -math.sin(g.rx_azimuth) * sec2 * math.sin(2 * phi) * tan_pl
        g3 = 2.0 * sec2 * math.cos(phi) ** 2 * tan_pl
        return g1, g2, g3

    def _rx_frame(self, theta):
        phi = self.geom.rx_elevation + theta
        ar = self.geom.rx_azimuth
        n = np.array([math.cos(phi) * math.cos(ar), math.cos(phi) * math.sin(ar), math.sin(phi)])
        return n, self._w

    def _rx_ref_angle(self, theta, g2, g3):
        n, w = self._rx_frame(theta)
        rg = np.array([0.0, g3, -g2])
        return math.atan2(rg @ w, rg @ n)

    def rx_angle(self, P, theta: float):
        """Signed in-plane angle between RG and RP."""
        g1, g2, g3 = self.rx_plane(theta)
        n, w = self._rx_frame(theta)
        P = np.asarray(P, dtype=float)
        return _wrap(np.arctan2(P @ w, P @ n) - self._rx_ref_angle(theta, g2, g3))

    def rx_bounds(self, theta: float):
        """(min, max, degenerate) of the vertical-edge angles in E_theta."""
        g1, g2, g3 = self.rx_plane(theta)
        if abs(g3) < PLANE_TOL:
            return math.nan, math.nan, True
        z = -(g1 * self.edge_x + g2 * self.edge_y) / g3
        q = np.column_stack([self.edge_x, self.edge_y, z])
        ang = self.rx_angle(q, theta)
        return float(ang.min()), float(ang.max()), False

    def rx_fov_span(self, theta: float):
        """Signed in-plane angles of the two field-of-view boundary rays."""
        g1, g2, g3 = self.rx_plane(theta)
        pm = float(psi_limit(theta, self.geom.rx_half_fov))
        ref = self._rx_ref_angle(theta, g2, g3) if abs(g3) >= PLANE_TOL else 0.0
        return -pm - ref, pm - ref

    # transmitter side ----------------------------------------------------
    def _tx_frame(self, sigma):
        s = np.asarray(sigma, dtype=float)[..., None]
        d = np.cos(s) * self._a_t + np.sin(s) * np.array([0.0, 0.0, 1.0])
        return d, self._l

    def _tx_ref_angle(self, sigma):
        at = self.geom.tx_azimuth
        s = np.asarray(sigma, dtype=float)
        th = np.stack([np.zeros_like(s), -np.cos(s), -math.sin(at) * np.sin(s)], axis=-1)
        d, l = self._tx_frame(s)
        return np.arctan2(th @ l, np.einsum("...i,...i->...", th, d))

    def tx_angle(self, P, sigma):
        """Signed in-plane angle between TH and TP in plane F_sigma."""
        v = np.asarray(P, dtype=float) - self.geom.tx_position
        d, l = self._tx_frame(sigma)
        ang = np.arctan2(v @ l, np.einsum("...i,...i->...", v, d))
        return _wrap(ang - self._tx_ref_angle(sigma))

    def tx_bounds(self, sigma):
        """Per-sigma (min, max, degenerate) of the vertical-edge angles in F_sigma."""
        s = np.asarray(sigma, dtype=float)
        at, r = self.geom.tx_azimuth, self.geom.r
        cs = np.cos(s)
        degenerate = np.abs(cs) < PLANE_TOL
        safe = np.where(degenerate, 1.0, cs)
        xs, ys = self.edge_x, self.edge_y
        z = (np.sin(s)[..., None] * (math.cos(at) * xs + math.sin(at) * (ys - r))) / safe[..., None]
        v = np.stack([np.broadcast_to(xs, z.shape), np.broadcast_to(ys - r, z.shape), z], axis=-1)
        d, l = self._tx_frame(s)
        ang = np.arctan2(v @ l, np.einsum("...ki,...i->...k", v, d))
        ang = _wrap(ang - self._tx_ref_angle(s)[..., None])
        return ang.min(axis=-1), ang.max(axis=-1), degenerate

    def critical_angles(self, theta=None, sigma=None) -> CriticalAngles:
        rx_min = rx_max = tx_min = tx_max = None
        if theta is not None:
            rx_min, rx_max, deg = self.rx_bounds(theta)
            if deg:
                raise ScatterError("plane E_theta is degenerate (vertical)")
        if sigma is not None:
            tx_min, tx_max, deg = self.tx_bounds(sigma)
            if np.any(deg):
                raise ScatterError("plane F_sigma is degenerate (vertical)")
        return CriticalAngles(self.rx_upper, self.tx_upper, rx_min, rx_max, tx_min, tx_max)

    # decision tree -------------------------------------------------------
    def classify(self, P, theta: float):
        """Branch codes for points ``P`` (N, 3) lying in plane E_theta.

        Fallback branches mark points whose value must come from the exact
        occlusion test.
        """
        g = self.geom
        P = np.atleast_2d(np.asarray(P, dtype=float))
        branch = np.full(len(P), Branch.STEP1_BACKWARD, dtype=np.int8)
        fwd = (P - g.tx_position) @ g.tx_axis >= 0
        if not fwd.any():
            return branch
        sigma = sigma_of_point(P, g)
        tx_clear = sigma >= self.tx_upper
        tx_lo, tx_hi, tx_deg = self.tx_bounds(sigma)
        psi_t = self.tx_angle(P, sigma)
        tx_need = ~tx_clear
        outside_cyl = _horizontal_distance(P, self.axis_x, self.axis_y) > self.obstacle.radius
        phi = g.rx_elevation + theta
        if phi >= self.rx_upper:
            outside = (psi_t < tx_lo) | (psi_t > tx_hi)
            near = (_horizontal_distance(P, 0.0, g.r) < self.tx_axis_distance) & outside_cyl
            b = np.select([tx_clear, outside, near],
                          [Branch.STEP2_CLEAR, Branch.STEP2_TX_OUTSIDE, Branch.STEP2_TX_NEAR],
                          Branch.STEP2_TX_BLOCKED)
            b = np.where(tx_need & tx_deg, Branch.FALLBACK_DEGENERATE, b)
            branch[fwd] = b[fwd]
            return branch
        rx_lo, rx_hi, rx_deg = self.rx_bounds(theta)
        if rx_deg:
            branch[fwd] = Branch.FALLBACK_DEGENERATE
            return branch
        fov_lo, fov_hi = self.rx_fov_span(theta)
        if not fov_hi > rx_hi > rx_lo > fov_lo:
            branch[fwd] = Branch.FALLBACK_ORDERING
            return branch
        psi_r = self.rx_angle(P, theta)
        tx_ok = tx_clear | (psi_t < tx_lo)
        rx_out = psi_r < rx_lo
        beyond = psi_r > rx_hi
        near_r = (_horizontal_distance(P, 0.0, 0.0) < self.rx_axis_distance) & outside_cyl
        b = np.select(
            [rx_out,
             ~beyond & near_r & tx_ok,
             ~beyond,
             beyond & tx_ok,
             beyond & (psi_t > tx_hi)],
            [Branch.STEP3_RX_OUTSIDE, Branch.STEP3_RX_SHADOW_NEAR, Branch.STEP3_RX_SHADOW_BLOCKED,
             Branch.STEP3_RX_BEYOND_TX_CLEAR, Branch.STEP3_RX_BEYOND_TX_WIDE],
            Branch.STEP3_RX_BEYOND_TX_BLOCKED)
        b = np.where(~rx_out & tx_need & tx_deg, Branch.FALLBACK_DEGENERATE, b)
        branch[fwd] = b[fwd]
        return branch


def exact_weights(P, geom: TransceiverGeometry, obstacle: PrismObstacle | None):
    """1 where both T->P and P->R clear the prism and P is forward of T."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    ok = (P - geom.tx_position) @ geom.tx_axis >= 0
    if obstacle is None or not ok.any():
        return ok.astype(np.int8)
    idx = np.nonzero(ok)[0]
    sub = P[idx]
    t = np.broadcast_to(geom.tx_position, sub.shape)
    blocked = segments_intersect(t, sub, obstacle)
    blocked |= segments_intersect(sub, np.zeros_like(sub), obstacle)
    ok[idx] = ~blocked
    return ok.astype(np.int8)


def exact_weight_factor(P, geom: TransceiverGeometry, obstacle: PrismObstacle | None) -> int:
    return int(exact_weights(P, geom, obstacle)[0])


_VALUE_LUT = np.array([_BRANCH_VALUE.get(Branch(i), 0) for i in range(len(Branch))], dtype=np.int8)


def weight_field(P, theta: float, geom: TransceiverGeometry, obstacle: PrismObstacle | None,
                 approx: BoundaryApproximation | None = None):
    """Vectorised weighting factor for points in plane E_theta.

    Returns ``(values, branches)``; fallback nodes take the exact value.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if obstacle is None:
        fwd = (P - geom.tx_position) @ geom.tx_axis >= 0
        branch = np.where(fwd, Branch.NO_OBSTACLE, Branch.STEP1_BACKWARD).astype(np.int8)
        return fwd.astype(np.int8), branch
    approx = approx or BoundaryApproximation(geom, obstacle)
    branch = approx.classify(P, theta)
    values = _VALUE_LUT[branch]
    fb = branch >= Branch.FALLBACK_ORDERING
    if fb.any():
        values = values.copy()
        values[fb] = exact_weights(P[fb], geom, obstacle)
    return values, branch


def weight_factor(P, theta: float, psi: float, geom: TransceiverGeometry,
                  obstacle: PrismObstacle | None) -> WeightDecision:
    """Weighting factor of a single scattering point with its branch label.

    ``psi`` is implied by ``P`` and ``theta``; it is accepted for symmetry with
    the integration variables.
    """
    values, branch = weight_field(np.asarray(P, dtype=float)[None, :], theta, geom, obstacle)
    return WeightDecision(int(values[0]), Branch(int(branch[0])))


@dataclass(frozen=True)
class ScatterResult:
    energy: float
    rel_change: float  # relative change against a half-resolution pass
    fallback_nodes: int
    nodes: int
    converged: bool


def _nu_nodes(n: int, ke: float, r: float, exponential: bool):
    u = (np.arange(n) + 0.5) / n
    if exponential:
        return -np.log1p(-u) / ke, 1.0 / (ke * (1.0 - u) * n)
    return r * u / (1.0 - u), r / ((1.0 - u) ** 2 * n)


def _integrate(scene: Scene, quad: QuadratureSpec, weighting: Weighting):
    g, atm = scene.geom, scene.atmosphere
    ke = extinction(atm)
    obstacle = scene.obstacle if weighting is not Weighting.NONE else None
    approx = BoundaryApproximation(g, obstacle) if (obstacle is not None and weighting is Weighting.APPROX) else None
    b = g.rx_half_fov
    d_theta = 2 * b / quad.n_theta
    thetas = -b + (np.arange(quad.n_theta) + 0.5) * d_theta
    nu, w_nu = _nu_nodes(quad.n_nu, ke, g.r, quad.nu_mapping)
    frac = (np.arange(quad.n_psi) + 0.5) / quad.n_psi
    slices = np.zeros(quad.n_theta)
    fallback = 0
    for i, th in enumerate(thetas):
        pm = float(psi_limit(th, b))
        if pm <= 0:
            continue
        psi = -pm + 2 * pm * frac
        P = scatter_point(nu[None, :], psi[:, None], th, g)
        G = kernel(P, psi[:, None], g, atm, scene.source)
        if obstacle is not None:
            flat = P.reshape(-1, 3)
            if approx is not None:
                w, branch = weight_field(flat, th, g, obstacle, approx)
                fallback += int(np.count_nonzero(branch >= Branch.FALLBACK_ORDERING))
            else:
                w = exact_weights(flat, g, obstacle)
        else:
            w = (P.reshape(-1, 3) - g.tx_position) @ g.tx_axis >= 0
        G = G * w.reshape(G.shape)
        slices[i] = np.sum(G * w_nu[None, :]) * (2 * pm / quad.n_psi)
    total = np.sum(slices) * d_theta
    return g.pulse_energy * atm.scattering * g.aperture * total, fallback


def scattered_energy(scene: Scene, quadrature: QuadratureSpec = QuadratureSpec(),
                     weighting: Weighting | str = Weighting.APPROX, check: bool = True) -> ScatterResult:
    """Received pulse energy from single scattering.

    With ``check`` a half-resolution pass supplies the convergence diagnostic.
    """
    weighting = Weighting(weighting)
    q, fb = _integrate(scene, quadrature, weighting)
    rel = 0.0
    if check:
        q_half, _ = _integrate(scene, quadrature.scaled(0.5), weighting)
        rel = abs(q - q_half) / q if q > 0 else 0.0
    n = quadrature.n_theta * quadrature.n_psi * quadrature.n_nu
    return ScatterResult(float(q), float(rel), fb, n, rel <= quadrature.rel_tol)
