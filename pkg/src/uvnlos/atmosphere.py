"""Atmospheric coefficients and the Rayleigh + Mie scattering phase function.

Coefficients are stored in 1/m.  The phase function is a density per
steradian over the scattering angle ``beta`` (``beta = 0`` is forward):

    P(x) = (k_ray / k_s) * P_ray(x) + (k_mie / k_s) * P_mie(x),  x = cos(beta)

with a generalised Rayleigh term and a Henyey-Greenstein term carrying an
extra forward/backward correction weighted by ``f``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class AtmosphereError(ValueError):
    pass


@dataclass(frozen=True)
class AtmosphereParams:
    rayleigh: float  # Rayleigh scattering coefficient, 1/m
    mie: float  # Mie scattering coefficient, 1/m
    absorption: float  # 1/m
    mie_g: float = 0.72
    mie_f: float = 0.5
    rayleigh_gamma: float = 0.017

    def __post_init__(self):
        for name in ("rayleigh", "mie", "absorption"):
            if not getattr(self, name) >= 0:
                raise AtmosphereError(f"{name} coefficient must be >= 0, got {getattr(self, name)}")
        if not self.scattering > 0:
            raise AtmosphereError("total scattering coefficient must be > 0")
        if not 0 <= self.mie_g < 1:
            raise AtmosphereError(f"Mie asymmetry g must lie in [0, 1), got {self.mie_g}")
        if not 0 <= self.mie_f <= 1:
            raise AtmosphereError(f"Mie correction f must lie in [0, 1], got {self.mie_f}")
        if not self.rayleigh_gamma >= 0:
            raise AtmosphereError(f"Rayleigh gamma must be >= 0, got {self.rayleigh_gamma}")

    @property
    def scattering(self) -> float:
        return self.rayleigh + self.mie

    @property
    def albedo(self) -> float:
        return self.scattering / extinction(self)

    @cached_property
    def _cdf_table(self):
        x = np.linspace(-1.0, 1.0, 4097)
        c = phase_cdf(x, self)
        c[0], c[-1] = 0.0, 1.0
        return c, x


# Reference atmosphere, converted from 1/km.
TABLE1 = AtmosphereParams(rayleigh=0.24e-3, mie=0.25e-3, absorption=0.90e-3,
                          mie_g=0.72, mie_f=0.5, rayleigh_gamma=0.017)


def extinction(params: AtmosphereParams) -> float:
    return params.rayleigh + params.mie + params.absorption


def rayleigh_phase(x, gamma):
    return 3.0 * (1.0 + 3.0 * gamma + (1.0 - gamma) * x * x) / (16.0 * math.pi * (1.0 + 2.0 * gamma))


def mie_phase(x, g, f):
    g2 = 1.0 + g * g
    hg = (g2 - 2.0 * g * x) ** -1.5
    corr = f * (3.0 * x * x - 1.0) / (2.0 * g2 ** 1.5)
    return (1.0 - g * g) / (4.0 * math.pi) * (hg + corr)


def phase_function(cos_beta, params: AtmosphereParams):
    """Composite phase function, vectorised over ``cos_beta``."""
    x = np.asarray(cos_beta, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-9):
        raise AtmosphereError("cos(beta) outside [-1, 1]")
    x = np.clip(x, -1.0, 1.0)
    ks = params.scattering
    p = (params.rayleigh / ks) * rayleigh_phase(x, params.rayleigh_gamma)
    p = p + (params.mie / ks) * mie_phase(x, params.mie_g, params.mie_f)
    p = np.maximum(p, 0.0)
    return float(p) if p.ndim == 0 else p


def phase_cdf(cos_beta, params: AtmosphereParams):
    """Closed-form cumulative distribution of ``cos(beta)`` from -1 up to
    ``cos_beta`` (the integral of 2*pi*P over that range)."""
    x = np.asarray(cos_beta, dtype=float)
    gam = params.rayleigh_gamma
    ray = 3.0 / (8.0 * (1.0 + 2.0 * gam)) * (
        (1.0 + 3.0 * gam) * (x + 1.0) + (1.0 - gam) * (x ** 3 + 1.0) / 3.0)
    g, f = params.mie_g, params.mie_f
    g2 = 1.0 + g * g
    if g == 0.0:
        hg = (x + 1.0) / 2.0
    else:
        hg = (1.0 - g * g) / (2.0 * g) * ((g2 - 2.0 * g * x) ** -0.5 - 1.0 / (1.0 + g))
    corr = (1.0 - g * g) * f * (x ** 3 - x) / (4.0 * g2 ** 1.5)
    ks = params.scattering
    return (params.rayleigh * ray + params.mie * (hg + corr)) / ks


def sample_cos_beta(u, params: AtmosphereParams):
    """Inverse-CDF lookup on a 4096-bin table with linear interpolation."""
    cdf, x = params._cdf_table
    return np.interp(u, cdf, x)
