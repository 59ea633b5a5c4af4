"""Path loss of non-line-of-sight ultraviolet links with prism obstacles.

Single-scattering and reflection integrals with an obstacle-boundary
weighting, plus a Monte-Carlo photon tracer used to check them.
"""
from .atmosphere import TABLE1, AtmosphereParams, phase_function
from .geometry import PrismObstacle, PrismShape, Reflectance, ShapeKind
from .mcpt import McptEstimate, McptSettings
from .pathloss import Model, PathLossBreakdown, PathLossSettings, path_loss, sweep
from .reflect import reflected_energy
from .scatter import QuadratureSpec, Weighting, scattered_energy
from .scene import Scene, TransceiverGeometry
from .source import SourceKind, SourceModel

__all__ = [
    "TABLE1", "AtmosphereParams", "phase_function",
    "PrismObstacle", "PrismShape", "Reflectance", "ShapeKind",
    "McptEstimate", "McptSettings",
    "Model", "PathLossBreakdown", "PathLossSettings", "path_loss", "sweep",
    "reflected_energy", "QuadratureSpec", "Weighting", "scattered_energy",
    "Scene", "TransceiverGeometry", "SourceKind", "SourceModel",
]
