"""Transmitter radiation patterns.

Both patterns emit only into the front hemisphere about the beam axis and
are normalised to unit total energy.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class SourceError(ValueError):
    pass


class SourceKind(str, enum.Enum):
    LAMBERTIAN = "lambertian"
    UNIFORM = "uniform"


def lambertian_order(half_width: float) -> float:
    """Order of Lambertian emission from the full width at half illuminance."""
    if not 0 < half_width < math.pi:
        raise SourceError(f"half-illuminance width must lie in (0, pi), got {half_width}")
    return -math.log(2.0) / math.log(math.cos(half_width / 2.0))


@dataclass(frozen=True)
class SourceModel:
    """``half_width`` is the Lambertian full width at half illuminance;
    ``cone`` the half-angle of the uniform model (defaults to ``half_width``)."""

    kind: SourceKind = SourceKind.LAMBERTIAN
    half_width: float = math.pi / 6
    cone: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SourceKind(self.kind))
        if self.kind is SourceKind.LAMBERTIAN:
            lambertian_order(self.half_width)
        else:
            if self.cone is None:
                object.__setattr__(self, "cone", self.half_width)
            if not 0 < self.cone <= math.pi / 2:
                raise SourceError(f"uniform cone half-angle must lie in (0, pi/2], got {self.cone}")

    @property
    def order(self) -> float:
        return lambertian_order(self.half_width)


def emission_density(angle, model: SourceModel):
    """Radiant density per steradian at ``angle`` off the beam axis."""
    a = np.asarray(angle, dtype=float)
    return _density_from_cos(np.cos(a), model, a)


def density_from_cos(cos_angle, model: SourceModel):
    """Same as :func:`emission_density` but takes the cosine directly."""
    c = np.asarray(cos_angle, dtype=float)
    return _density_from_cos(c, model, None)


def _density_from_cos(c, model, angle):
    if model.kind is SourceKind.LAMBERTIAN:
        k = model.order
        out = np.where(c > 0, (k + 1) / (2 * math.pi) * np.clip(c, 0.0, 1.0) ** k, 0.0)
    else:
        inside = (angle <= model.cone) if angle is not None else (c >= math.cos(model.cone))
        out = np.where(inside, 1.0 / (2 * math.pi * (1.0 - math.cos(model.cone))), 0.0)
    return float(out) if out.ndim == 0 else out


def sample_cos_angle(u, model: SourceModel):
    """Map uniform variates to cosines of the emission angle."""
    u = np.asarray(u, dtype=float)
    if model.kind is SourceKind.LAMBERTIAN:
        return u ** (1.0 / (model.order + 1.0))
    c0 = math.cos(model.cone)
    return 1.0 - u * (1.0 - c0)
