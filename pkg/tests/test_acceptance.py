"""Acceptance criteria.  Each test records one PASS/FAIL line, printed in the
pytest terminal summary under "acceptance criteria"."""
import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate

from uvnlos import mcpt
from uvnlos.atmosphere import TABLE1, extinction, phase_function
from uvnlos.config import parse_config, preset_names, preset_text
from uvnlos.geometry import PrismObstacle, Reflectance
from uvnlos.pathloss import PathLossSettings, path_loss
from uvnlos.reflect import reflected_energy, reflection_pattern
from uvnlos.scatter import (
    BoundaryApproximation, exact_weights, psi_limit, scatter_point, scattered_energy, weight_field,
)
from uvnlos.scene import Scene
from uvnlos.source import SourceKind, SourceModel, emission_density

from conftest import preset_scene, record, table1_scene

SWEEP = [60.0, 80.0, 100.0, 120.0, 140.0, 160.0, 180.0, 200.0]
ANALYTIC = PathLossSettings(check=False)


def l_db(q):
    return 10 * math.log10(1.0 / q)


def test_criterion_1_wall_analytic_vs_mcpt():
    settings = replace(ANALYTIC, mcpt=mcpt.McptSettings(n_photons=10 ** 6, seed=2024))
    diffs = []
    for r in (60.0, 100.0, 140.0, 200.0):
        sc = preset_scene("table1_fig4", r)
        a = path_loss(sc, "analytic_approx", settings).l_db
        m = path_loss(sc, "mcpt", settings).l_db
        diffs.append(a - m)
    worst = max(abs(d) for d in diffs)
    ok = record("CRITERION 1", worst <= 2.0,
                "|L_analytic - L_mcpt| per r = " + ", ".join(f"{d:+.3f}" for d in diffs)
                + f" dB; max {worst:.3f} <= 2.0")
    assert ok


def test_criterion_2_obstacle_benefit():
    settings = replace(ANALYTIC, mcpt=mcpt.McptSettings(n_photons=2 * 10 ** 5, seed=99))
    gains = {"analytic_approx": [], "mcpt": []}
    for r in SWEEP:
        sc = preset_scene("table1_fig4", r)
        for model in gains:
            with_obs = path_loss(sc, model, settings).l_db
            without = path_loss(sc.without_obstacle(), model, settings).l_db
            gains[model].append(without - with_obs)
    ok = all(g > 0 for v in gains.values() for g in v)
    detail = "; ".join(f"{m} min gain {min(v):.3f} dB" for m, v in gains.items())
    assert record("CRITERION 2", ok, detail)


@pytest.mark.parametrize("preset,limit", [("fig5_alpha0", 1.35), ("fig5_alpha5", 1.30)])
def test_criterion_3_boundary_approximation(preset, limit):
    diffs = []
    for r in SWEEP:
        sc = preset_scene(preset, r)
        a = scattered_energy(sc, weighting="approx", check=False).energy
        e = scattered_energy(sc, weighting="exact", check=False).energy
        diffs.append(l_db(a) - l_db(e))
    worst = max(abs(d) for d in diffs)
    ok = record(f"CRITERION 3 ({preset})", worst <= limit,
                "L_approx - L_exact per r = " + ", ".join(f"{d:+.3f}" for d in diffs)
                + f" dB; max {worst:.3f} vs limit {limit}")
    assert ok


def test_criterion_4_ud_ld_offset():
    d = []
    for r in SWEEP:
        ld = scattered_energy(preset_scene("table2_free", r), weighting="none", check=False).energy
        ud = scattered_energy(preset_scene("table2_free_ud", r), weighting="none", check=False).energy
        d.append(l_db(ud) - l_db(ld))
    mean, std = float(np.mean(d)), float(np.std(d))
    flat, in_band = std < 0.2, 0.5 <= mean <= 1.5
    ok = record("CRITERION 4", flat and in_band,
                f"L_UD - L_LD mean {mean:.3f} dB (band [0.5, 1.5]: {'in' if in_band else 'out'}), "
                f"std {std:.3f} dB (< 0.2: {'yes' if flat else 'no'})")
    assert ok


def test_criterion_5_contour_ordering():
    out = {}
    for r in (SWEEP[0], SWEEP[-1]):
        out[r] = {name: path_loss(preset_scene(f"fig6_{name}", r), "analytic_approx", ANALYTIC).l_db
                  for name in ("rtp", "rp", "rpp")}
    short_best = min(out[SWEEP[0]], key=out[SWEEP[0]].get)
    long_best = min(out[SWEEP[-1]], key=out[SWEEP[-1]].get)
    detail = "; ".join(f"r={r:g}: " + ", ".join(f"{k.upper()} {v:.2f}" for k, v in losses.items())
                       for r, losses in out.items())
    assert record("CRITERION 5", short_best == "rpp" and long_best == "rtp",
                  f"min at short range {short_best.upper()}, at long range {long_best.upper()} ({detail})")


# criterion 6: property suites ------------------------------------------------

def test_criterion_6_normalisations():
    phase = 2 * math.pi * integrate.quad(lambda x: phase_function(x, TABLE1), -1, 1, epsabs=1e-13, limit=200)[0]
    worst = abs(phase - 1)
    for src in (SourceModel(half_width=math.pi / 6), SourceModel(half_width=math.pi / 12),
                SourceModel(SourceKind.UNIFORM, math.pi / 12)):
        val = 2 * math.pi * integrate.quad(lambda a: emission_density(a, src) * math.sin(a), 0, math.pi / 2,
                                           epsabs=1e-13, limit=200, points=[src.cone] if src.cone else None)[0]
        worst = max(worst, abs(val - 1))
    assert record("CRITERION 6.1 normalisations", worst <= 1e-6, f"max |integral - 1| = {worst:.2e}")


def test_criterion_6_quadrature_nodes():
    worst_norm = worst_fov = 0.0
    rng = np.random.default_rng(1)
    for name in ("table1_free", "table2_free"):
        g = preset_scene(name, 100.0).geom
        b = g.rx_half_fov
        th = rng.uniform(-b, b, 10 ** 4)
        psi = rng.uniform(-1, 1, 10 ** 4) * psi_limit(th, b)
        nu = rng.exponential(700.0, 10 ** 4)
        P = scatter_point(nu, psi, th, g)
        worst_norm = max(worst_norm, float(np.max(np.abs(np.linalg.norm(P, axis=1) - nu) / nu)))
        delta = np.arccos(np.clip(P @ g.rx_axis / nu, -1, 1))
        worst_fov = max(worst_fov, float(np.max(delta - b)))
    ok = worst_norm < 1e-12 and worst_fov <= 1e-12
    assert record("CRITERION 6.2 nodes", ok, f"max rel | |P| - nu | = {worst_norm:.1e}, "
                  f"max (delta - beta_r) = {worst_fov:.1e} rad on 2x10^4 nodes")


def test_criterion_6_reflection_normalisation():
    val = integrate.dblquad(lambda t, p: reflection_pattern(math.cos(t), 0.0, 1.0, 5.0) * math.sin(t),
                            0, 2 * math.pi, 0, math.pi / 2, epsabs=1e-12)[0]
    assert record("CRITERION 6.3 reflection pattern", abs(val - 1) <= 1e-6, f"|integral - 1| = {abs(val - 1):.2e}")


def test_criterion_6_reflection_limits():
    sc = preset_scene("table1_fig4", 100.0)
    o = sc.obstacle
    dark = Scene(sc.geom, sc.source, sc.atmosphere,
                 PrismObstacle(o.shape, o.center_x, o.center_y, o.orientation, Reflectance(0.0)), check_area=False)
    q_dark = reflected_energy(dark).energy
    free = path_loss(sc.without_obstacle(), "analytic_approx", ANALYTIC).l_db
    far = Scene(sc.geom, sc.source, sc.atmosphere, replace(o, center_x=o.center_x - 1e4), check_area=False)
    d = abs(path_loss(far, "analytic_approx", ANALYTIC).l_db - free)
    assert record("CRITERION 6.4 reflection limits", q_dark == 0.0 and d < 0.01,
                  f"v_r = 0 gives Q_ref = {q_dark!r}; obstacle 10^4 m away |dL| = {d:.2e} dB")


@pytest.mark.parametrize("preset", ["fig5_alpha0", "fig5_alpha5"])
def test_criterion_6_weighting_vs_exact(preset):
    rng = np.random.default_rng(17)
    n_slices, per_slice = 200, 500
    agree = total = confined = 0
    disagreements = 0
    for r in (100.0, 200.0):
        sc = preset_scene(preset, r)
        g, obs = sc.geom, sc.obstacle
        ba = BoundaryApproximation(g, obs)
        ke = extinction(sc.atmosphere)
        for th in rng.uniform(-g.rx_half_fov, g.rx_half_fov, n_slices // 2):
            pm = float(psi_limit(th, g.rx_half_fov))
            P = scatter_point(rng.exponential(1 / ke, per_slice), rng.uniform(-pm, pm, per_slice), th, g)
            w, _ = weight_field(P, th, g, obs, ba)
            ex = exact_weights(P, g, obs)
            bad = np.nonzero(w != ex)[0]
            agree += len(P) - len(bad)
            total += len(P)
            disagreements += len(bad)
            # boundary neighbourhood: the exact value flips within 5% of |P|
            for i in bad:
                jitter = P[i] + rng.normal(size=(64, 3)) * 0.05 * np.linalg.norm(P[i])
                confined += bool(np.any(exact_weights(jitter, g, obs) != ex[i]))
    rate = agree / total
    ok = rate >= 0.95 and confined == disagreements
    assert record(f"CRITERION 6.5 weighting vs exact ({preset})", ok,
                  f"agreement {rate:.4%} on {total} nodes; {confined}/{disagreements} disagreements "
                  "inside boundary neighbourhoods")


def test_criterion_6_single_scatter_mcpt():
    sc = table1_scene(100.0)
    q = scattered_energy(sc, weighting="none", check=False).energy
    est = mcpt.run(sc, mcpt.McptSettings(n_photons=10 ** 6, max_order=1, seed=31))
    z = (est.q_hat - q) / est.std_err
    assert record("CRITERION 6.6 single-scatter MCPT", abs(z) <= 3, f"(Q_mc - Q_int)/sigma = {z:+.2f}")


def test_criterion_6_determinism():
    sc = preset_scene("table1_fig4", 100.0)
    runs = [mcpt.run(sc, mcpt.McptSettings(n_photons=50000, seed=5, workers=w, block_size=8192))
            for w in (1, 2, 3)]
    ok = runs[0] == runs[1] == runs[2]
    assert record("CRITERION 6.7 determinism", ok, f"workers 1/2/3 give Q_hat = {runs[0].q_hat!r} "
                  + ("bit-identical" if ok else "differing"))


def test_criterion_6_grid_doubling():
    worst, where = 0.0, ""
    for name in preset_names():
        cfg = parse_config(preset_text(name))
        base = replace(cfg.settings(), check=False)
        fine = replace(base, quadrature=base.quadrature.scaled(2),
                       reflection_nodes=tuple(2 * n for n in base.reflection_nodes))
        for r in (cfg.ranges()[0], cfg.ranges()[-1]):
            sc = cfg.scene(r)
            d = abs(path_loss(sc, "analytic_approx", base).l_db - path_loss(sc, "analytic_approx", fine).l_db)
            if d >= worst:
                worst, where = d, f"{name} r={r:g}"
    assert record("CRITERION 6.8 grid doubling", worst < 0.05,
                  f"max |dL| = {worst:.4f} dB at {where} over {len(preset_names())} presets at both range ends")
