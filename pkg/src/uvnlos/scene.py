"""Transceiver geometry and the full scenario description."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .atmosphere import AtmosphereParams
from .geometry import PrismObstacle, check_active_area
from .source import SourceModel


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class TransceiverGeometry:
    """Link geometry.  Angles in radians, lengths in metres.

    Elevations are measured up from the ground; azimuths counter-clockwise
    from +x (the transmitter's from the direction T -> X').  ``strict=False``
    skips the interval checks (mirrored scenes in symmetry tests).
    """

    r: float
    tx_elevation: float
    rx_elevation: float
    tx_azimuth: float
    rx_azimuth: float
    rx_half_fov: float
    aperture: float
    pulse_energy: float = 1.0
    strict: bool = True

    def __post_init__(self):
        if not (self.r > 0 and self.aperture > 0 and self.pulse_energy > 0):
            raise SceneError("range, aperture and pulse energy must all be > 0")
        if not self.strict:
            return
        half_pi = math.pi / 2
        for name in ("tx_elevation", "rx_elevation", "rx_half_fov"):
            v = getattr(self, name)
            if not 0 < v < half_pi:
                raise SceneError(f"{name} = {v:.6g} rad must lie in (0, pi/2)")
        if not -math.pi < self.tx_azimuth < -half_pi:
            raise SceneError(f"tx_azimuth = {self.tx_azimuth:.6g} rad must lie in (-pi, -pi/2)")
        if not half_pi < self.rx_azimuth < math.pi:
            raise SceneError(f"rx_azimuth = {self.rx_azimuth:.6g} rad must lie in (pi/2, pi)")
        if not (self.rx_elevation - self.rx_half_fov > -half_pi
                and self.rx_elevation + self.rx_half_fov < half_pi):
            raise SceneError("receiver field of view must stay within (-pi/2, pi/2) of elevation")

    @property
    def tx_position(self) -> np.ndarray:
        return np.array([0.0, self.r, 0.0])

    @property
    def tx_axis(self) -> np.ndarray:
        ce = math.cos(self.tx_elevation)
        return np.array([ce * math.cos(self.tx_azimuth), ce * math.sin(self.tx_azimuth),
                         math.sin(self.tx_elevation)])

    @property
    def rx_axis(self) -> np.ndarray:
        ce = math.cos(self.rx_elevation)
        return np.array([ce * math.cos(self.rx_azimuth), ce * math.sin(self.rx_azimuth),
                         math.sin(self.rx_elevation)])

    def mirrored(self) -> "TransceiverGeometry":
        """Reflection of the link across the plane x = 0."""
        return replace(self, tx_azimuth=-math.pi - self.tx_azimuth,
                       rx_azimuth=math.pi - self.rx_azimuth, strict=False)


@dataclass(frozen=True)
class Scene:
    geom: TransceiverGeometry
    source: SourceModel
    atmosphere: AtmosphereParams
    obstacle: PrismObstacle | None = None
    check_area: bool = True

    def __post_init__(self):
        if self.obstacle is not None and self.check_area:
            check_active_area(self.obstacle, self.geom.r)

    def without_obstacle(self) -> "Scene":
        return replace(self, obstacle=None)
