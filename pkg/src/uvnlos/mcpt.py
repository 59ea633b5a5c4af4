"""Monte-Carlo photon tracing with local (shadow-ray) estimation.

Photons leave the transmitter, fly exponential free paths, scatter with the
composite phase function and reflect off the prism.  At every scattering or
reflection event the analytic probability of reaching the receiver aperture
directly is added to the photon's tally.  The ground does not interact.

Photons are traced in fixed-size blocks.  Each block draws from its own
Philox stream keyed by ``(seed, block index)``, so results do not depend on
how blocks are scheduled across workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .atmosphere import extinction, phase_function, sample_cos_beta
from .geometry import first_hits, segments_intersect
from .reflect import reflection_pattern
from .scene import Scene
from .source import sample_cos_angle

SURFACE_OFFSET = 1e-7  # metres; lifts reflection points off the face
MAX_RESAMPLE = 64


class McptError(ValueError):
    pass


@dataclass
class Photon:
    """Single photon state; the tracer itself works on arrays of these fields."""

    position: np.ndarray
    direction: np.ndarray
    weight: float = 1.0
    order: int = 0

    def __post_init__(self):
        if not 0 < self.weight <= 1:
            raise McptError("photon weight must lie in (0, 1]")
        if abs(np.linalg.norm(self.direction) - 1.0) > 1e-12:
            raise McptError("photon direction must be a unit vector")


@dataclass(frozen=True)
class McptSettings:
    n_photons: int = 1_000_000
    survival_threshold: float = 1e-10
    max_order: int | None = None  # 1 gives the single-scatter estimate
    seed: int = 1
    workers: int = 1
    block_size: int = 16384

    def __post_init__(self):
        if self.n_photons < 1:
            raise McptError("n_photons must be >= 1")
        if not 0 < self.survival_threshold < 1:
            raise McptError("survival_threshold must lie in (0, 1)")
        if self.max_order is not None and self.max_order < 1:
            raise McptError("max_order must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise McptError("seed must be an unsigned 64-bit integer")
        if self.workers < 1 or self.block_size < 1:
            raise McptError("workers and block_size must be >= 1")


@dataclass(frozen=True)
class McptEstimate:
    q_hat: float
    std_err: float
    n_photons: int
    mean_order: float
    q_scatter: float = 0.0
    q_reflect: float = 0.0
    std_err_scatter: float = 0.0


def orient(axis, cos_t, phi):
    """Unit vectors at polar cosine ``cos_t`` and azimuth ``phi`` about ``axis``."""
    a = np.atleast_2d(axis)
    helper = np.where(np.abs(a[:, 2:3]) < 0.9, [[0.0, 0.0, 1.0]], [[1.0, 0.0, 0.0]])
    u = np.cross(helper, a)
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v = np.cross(a, u)
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t * cos_t))
    d = (sin_t * np.cos(phi))[:, None] * u + (sin_t * np.sin(phi))[:, None] * v + cos_t[:, None] * a
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def sample_emission(source, geom, rng, n: int):
    """Emission directions about the transmitter axis."""
    cos_t = sample_cos_angle(rng.random(n), source)
    phi = 2 * math.pi * rng.random(n)
    return orient(np.broadcast_to(geom.tx_axis, (n, 3)), cos_t, phi)


def sample_scatter_direction(incoming, atmosphere, rng):
    """New directions after scattering, drawn from the phase function."""
    incoming = np.atleast_2d(incoming)
    n = len(incoming)
    cos_b = sample_cos_beta(rng.random(n), atmosphere)
    phi = 2 * math.pi * rng.random(n)
    return orient(incoming, cos_b, phi)


def sample_reflection(incoming, normal, reflection, rng):
    """Outgoing directions drawn from the diffuse + specular mixture.

    Returns ``(directions, ok)``; ``ok`` is False where no direction above the
    surface was found within the resampling budget.
    """
    n = len(incoming)
    mirror = incoming - 2.0 * np.einsum("ij,ij->i", incoming, normal)[:, None] * normal
    out = np.empty_like(incoming)
    ok = np.zeros(n, dtype=bool)
    diffuse = rng.random(n) < reflection.diffuse_fraction
    idx = np.nonzero(diffuse)[0]
    if len(idx):
        out[idx] = orient(normal[idx], np.sqrt(rng.random(len(idx))), 2 * math.pi * rng.random(len(idx)))
        ok[idx] = True
    pending = np.nonzero(~diffuse)[0]
    expo = 1.0 / (reflection.specular_exponent + 1.0)
    for _ in range(MAX_RESAMPLE):
        if not len(pending):
            break
        d = orient(mirror[pending], rng.random(len(pending)) ** expo,
                   2 * math.pi * rng.random(len(pending)))
        good = np.einsum("ij,ij->i", d, normal[pending]) > 0
        out[pending[good]] = d[good]
        ok[pending[good]] = True
        pending = pending[~good]
    return out, ok


def _detect(pos, d_in, scene: Scene, normal=None):
    """Probability of direct flight to the aperture from each event point."""
    g = scene.geom
    dist = np.linalg.norm(pos, axis=1)
    to_rx = -pos / dist[:, None]
    cos_delta = (pos @ g.rx_axis) / dist
    ok = cos_delta >= math.cos(g.rx_half_fov)
    if normal is not None:
        cos_1 = np.einsum("ij,ij->i", normal, to_rx)
        ok &= cos_1 > 0
    out = np.zeros(len(pos))
    idx = np.nonzero(ok)[0]
    if not len(idx):
        return out
    if scene.obstacle is not None:
        clear = ~segments_intersect(pos[idx], np.zeros((len(idx), 3)), scene.obstacle)
        idx = idx[clear]
        if not len(idx):
            return out
    u = to_rx[idx]
    if normal is None:
        dens = phase_function(np.clip(np.einsum("ij,ij->i", d_in[idx], u), -1.0, 1.0), scene.atmosphere)
    else:
        nrm = normal[idx]
        d = d_in[idx]
        mirror = d - 2.0 * np.einsum("ij,ij->i", d, nrm)[:, None] * nrm
        rp = scene.obstacle.reflection
        dens = reflection_pattern(np.einsum("ij,ij->i", nrm, u), np.einsum("ij,ij->i", mirror, u),
                                  rp.diffuse_fraction, rp.specular_exponent)
    nu = dist[idx]
    out[idx] = dens * g.aperture * cos_delta[idx] / nu ** 2 * np.exp(-extinction(scene.atmosphere) * nu)
    return out


def trace_block(scene: Scene, settings: McptSettings, block: int, n: int):
    """Trace ``n`` photons of block ``block``.

    Returns per-photon tallies from scattering and from reflection events,
    and the number of events each photon went through.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(settings.seed, spawn_key=(block,))))
    g, atm, obs = scene.geom, scene.atmosphere, scene.obstacle
    ke = extinction(atm)
    albedo = atm.scattering / ke
    v_r = obs.reflection.coefficient if obs is not None else 0.0
    max_order = settings.max_order or np.iinfo(np.int64).max

    pos = np.broadcast_to(g.tx_position, (n, 3)).copy()
    d = sample_emission(scene.source, g, rng, n)
    w = np.ones(n)
    order = np.zeros(n, dtype=np.int64)
    tally_s = np.zeros(n)
    tally_r = np.zeros(n)
    alive = np.ones(n, dtype=bool)

    while True:
        idx = np.nonzero(alive)[0]
        if not len(idx):
            break
        p, dd = pos[idx], d[idx]
        step = rng.exponential(1.0 / ke, len(idx))
        if obs is not None:
            hit_dist, face = first_hits(p, dd, obs)
        else:
            hit_dist, face = np.full(len(idx), np.inf), np.full(len(idx), -1)
        reflects = hit_dist < step

        # scattering events
        s_loc = np.nonzero(~reflects)[0]
        s_idx = idx[s_loc]
        new_p = p[s_loc] + step[s_loc, None] * dd[s_loc]
        pos[s_idx] = new_p
        w[s_idx] *= albedo
        order[s_idx] += 1
        tally_s[s_idx] += w[s_idx] * _detect(new_p, dd[s_loc], scene)
        d[s_idx] = sample_scatter_direction(dd[s_loc], atm, rng)

        # reflection events
        r_loc = np.nonzero(reflects)[0]
        if len(r_loc):
            r_idx = idx[r_loc]
            normal = np.asarray(obs.planes[0])[face[r_loc]]
            hit_p = p[r_loc] + hit_dist[r_loc, None] * dd[r_loc] + SURFACE_OFFSET * normal
            pos[r_idx] = hit_p
            w[r_idx] *= v_r
            order[r_idx] += 1
            tally_r[r_idx] += w[r_idx] * _detect(hit_p, dd[r_loc], scene, normal)
            new_d, ok = sample_reflection(dd[r_loc], normal, obs.reflection, rng)
            d[r_idx] = new_d
            alive[r_idx[~ok]] = False

        alive &= (w >= settings.survival_threshold) & (order < max_order)
    return tally_s, tally_r, order


def _run_block(args):
    scene, settings, block, n = args
    return trace_block(scene, settings, block, n)


def run(scene: Scene, settings: McptSettings = McptSettings()) -> McptEstimate:
    """Estimate the received pulse energy."""
    bs = settings.block_size
    sizes = [min(bs, settings.n_photons - i) for i in range(0, settings.n_photons, bs)]
    jobs = [(scene, settings, b, n) for b, n in enumerate(sizes)]
    if settings.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=settings.workers) as pool:
            parts = list(pool.map(_run_block, jobs))
    else:
        parts = [_run_block(j) for j in jobs]
    ts = np.concatenate([p[0] for p in parts])
    tr = np.concatenate([p[1] for p in parts])
    orders = np.concatenate([p[2] for p in parts])
    total = ts + tr
    n = settings.n_photons
    qt = scene.geom.pulse_energy
    def se(x):
        return qt * float(np.std(x, ddof=1)) / math.sqrt(n) if n > 1 else 0.0

    return McptEstimate(q_hat=qt * float(np.mean(total)), std_err=se(total),
                        n_photons=n, mean_order=float(np.mean(orders)),
                        q_scatter=qt * float(np.mean(ts)), q_reflect=qt * float(np.mean(tr)),
                        std_err_scatter=se(ts))


def estimate_path_loss(scene: Scene, settings: McptSettings = McptSettings()):
    """Path loss in dB and its standard error from an MCPT run."""
    est = run(scene, settings)
    return path_loss_from_estimate(est, scene.geom.pulse_energy)


def path_loss_from_estimate(est: McptEstimate, pulse_energy: float = 1.0):
    if est.q_hat <= 0:
        raise McptError("no photon reached the receiver")
    loss = 10.0 * math.log10(pulse_energy / est.q_hat)
    return loss, 10.0 / math.log(10.0) * est.std_err / est.q_hat
