"""Path loss from the analytic and Monte-Carlo models, and range sweeps."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from . import mcpt
from .reflect import reflected_energy
from .scatter import QuadratureSpec, Weighting, scattered_energy
from .scene import Scene

DB = 10.0 / math.log(10.0)


class Model(str, enum.Enum):
    ANALYTIC_APPROX = "analytic_approx"
    ANALYTIC_EXACT = "analytic_exact"
    MCPT = "mcpt"


@dataclass(frozen=True)
class PathLossSettings:
    quadrature: QuadratureSpec = QuadratureSpec()
    reflection_nodes: tuple[int, int] = (256, 256)
    mcpt: mcpt.McptSettings = mcpt.McptSettings()
    check: bool = True  # run the half-resolution residual pass
    scatter_only: bool = False  # drop the reflected term


@dataclass(frozen=True)
class PathLossBreakdown:
    q_sca: float
    q_ref: float
    l_db: float
    err_db: float | None = None  # MC standard error or quadrature residual
    diagnostics: dict = field(default_factory=dict)


def loss_db(q_received: float, q_t: float = 1.0) -> float:
    if q_received <= 0:
        return math.inf
    return 10.0 * math.log10(q_t / q_received)


def path_loss(scene: Scene, model: Model | str = Model.ANALYTIC_APPROX,
              settings: PathLossSettings = PathLossSettings()) -> PathLossBreakdown:
    model = Model(model)
    qt = scene.geom.pulse_energy
    if model is Model.MCPT:
        est = mcpt.run(scene, settings.mcpt)
        q_sca, q_ref = est.q_scatter, 0.0 if settings.scatter_only else est.q_reflect
        total = q_sca + q_ref
        se = est.std_err_scatter if settings.scatter_only else est.std_err
        err = DB * se / total if total > 0 else None
        return PathLossBreakdown(q_sca, q_ref, loss_db(total, qt), err,
                                 {"std_err_J": est.std_err, "mean_order": est.mean_order,
                                  "n_photons": est.n_photons})
    weighting = Weighting.APPROX if model is Model.ANALYTIC_APPROX else Weighting.EXACT
    sca = scattered_energy(scene, settings.quadrature, weighting, check=settings.check)
    q_ref, rel_ref = 0.0, 0.0
    if not settings.scatter_only:
        ref = reflected_energy(scene, *settings.reflection_nodes, check=settings.check)
        q_ref, rel_ref = ref.energy, ref.rel_change
    total = sca.energy + q_ref
    err = None
    if settings.check and total > 0:
        err = DB * (sca.energy * sca.rel_change + q_ref * rel_ref) / total
    return PathLossBreakdown(sca.energy, q_ref, loss_db(total, qt), err,
                             {"fallback_nodes": sca.fallback_nodes, "scatter_rel_change": sca.rel_change,
                              "reflect_rel_change": rel_ref})


@dataclass(frozen=True)
class SweepRow:
    r: float
    model: Model
    result: PathLossBreakdown | None
    error: str | None = None


def sweep(make_scene: Callable[[float], Scene], r_values: Sequence[float],
          models: Iterable[Model | str], settings: PathLossSettings = PathLossSettings()) -> list[SweepRow]:
    """Evaluate every model at every range.

    ``make_scene`` builds the scene for one range, so range-relative obstacle
    dimensions are resolved per row.  A failing row records its error and
    the sweep carries on.  Rows come out range-major in the order given.
    """
    r_values = [float(r) for r in r_values]
    if not r_values or r_values[0] <= 0 or any(b <= a for a, b in zip(r_values, r_values[1:])):
        raise ValueError("ranges must be positive and strictly increasing")
    models = [Model(m) for m in models]
    rows = []
    for r in r_values:
        try:
            scene = make_scene(r)
        except ValueError as exc:
            rows.extend(SweepRow(r, m, None, str(exc)) for m in models)
            continue
        for m in models:
            try:
                rows.append(SweepRow(r, m, path_loss(scene, m, settings)))
            except ValueError as exc:
                rows.append(SweepRow(r, m, None, str(exc)))
    return rows


def linspace_ranges(rmin: float, rmax: float, steps: int) -> list[float]:
    """``steps`` evenly spaced ranges from ``rmin`` to ``rmax`` inclusive."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if steps == 1:
        return [float(rmin)]
    return [rmin + (rmax - rmin) * i / (steps - 1) for i in range(steps)]
