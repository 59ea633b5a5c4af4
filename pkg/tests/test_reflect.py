import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from uvnlos.atmosphere import extinction
from uvnlos.geometry import PrismObstacle, PrismShape, Reflectance
from uvnlos.reflect import active_surfaces, reflected_energy, reflection_pattern
from uvnlos.scene import Scene
from uvnlos.source import density_from_cos

from conftest import preset_scene, table1_scene


def hemisphere_integral(f):
    return integrate.dblquad(lambda t, p: f(t, p) * math.sin(t), 0.0, 2 * math.pi, 0.0, math.pi / 2,
                             epsabs=1e-12, epsrel=1e-10)[0]


def test_diffuse_pattern_normalised():
    val = hemisphere_integral(lambda t, p: reflection_pattern(math.cos(t), 0.0, 1.0, 5.0))
    assert val == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("m", [1.0, 5.0, 20.0])
def test_specular_lobe_normalised_about_normal(m):
    # mirror direction along the normal: the lobe lies entirely in the hemisphere
    val = hemisphere_integral(lambda t, p: reflection_pattern(math.cos(t), math.cos(t), 0.0, m))
    assert val == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["RTP", "RP", "RPP"]), st.floats(0.0, 1.0))
def test_ds_jacobian_matches_finite_difference(kind, frac):
    shape = PrismShape("RP", 40.0, 80.0, 30.0) if kind == "RP" else PrismShape.from_radius(kind, 25.0, 80.0)
    hi = {"RTP": 2 * math.pi / 3, "RP": math.pi, "RPP": 2 * math.pi / 5}[kind]
    obs = PrismObstacle(shape, -46.7, 50.0, frac * hi)
    for face in active_surfaces(obs):
        y0, y1 = face.y_range
        h = (y1 - y0) * 1e-3
        y = 0.5 * (y0 + y1)
        slope = (face.x_of_y(y + h) - face.x_of_y(y - h)) / (2 * h)
        assert face.ds_jacobian == pytest.approx(math.sqrt(1 + slope ** 2), rel=1e-6)
        # the parametrised face lies in its own plane
        p = np.array([face.x_of_y(y), y, 10.0])
        n, d = obs.planes
        assert np.isclose(np.abs(n[:, :2] @ p[:2] - d), 0.0, atol=1e-9).any()


def test_zero_reflectance_gives_exact_zero():
    sc = preset_scene("table1_fig4", 100.0)
    obs = sc.obstacle
    dark = PrismObstacle(obs.shape, obs.center_x, obs.center_y, obs.orientation, Reflectance(0.0, 0.5, 5.0))
    res = reflected_energy(Scene(sc.geom, sc.source, sc.atmosphere, dark, check_area=False))
    assert res.energy == 0.0


def _face_oracle(scene, label, n, rng):
    """Uniform-area Monte Carlo over one lateral face."""
    g, obs = scene.geom, scene.obstacle
    i, j = int(label[1]), int(label[2])
    (xi, yi), (xj, yj) = obs.vertices_xy[i - 1], obs.vertices_xy[j - 1]
    t, z = rng.random(n), rng.random(n) * obs.height
    P = np.column_stack([xi + t * (xj - xi), yi + t * (yj - yi), z])
    area = math.hypot(xj - xi, yj - yi) * obs.height
    nrm = np.array([yj - yi, xi - xj, 0.0])
    nrm /= np.linalg.norm(nrm)
    if nrm @ (np.array([obs.center_x, obs.center_y, 0.0]) - P[0]) > 0:
        nrm = -nrm
    T = g.tx_position
    inc = P - T
    eps = np.linalg.norm(inc, axis=1)
    out = -P
    nu = np.linalg.norm(out, axis=1)
    cos_i = -(inc @ nrm) / eps
    cos_1 = (out @ nrm) / nu
    mirror = inc / eps[:, None] - 2 * ((inc @ nrm) / eps)[:, None] * nrm
    cos_2 = np.einsum("ij,ij->i", mirror, out) / nu
    cos_emit = inc @ g.tx_axis / eps
    cos_delta = P @ g.rx_axis / nu
    rp = obs.reflection
    ok = (cos_emit >= 0) & (cos_i > 0) & (cos_1 > 0) & (cos_delta >= math.cos(g.rx_half_fov))
    f = (density_from_cos(cos_emit, scene.source) * cos_i / eps ** 2
         * reflection_pattern(cos_1, cos_2, rp.diffuse_fraction, rp.specular_exponent)
         * cos_delta / nu ** 2 * np.exp(-extinction(scene.atmosphere) * (eps + nu)))
    s = np.where(ok, f, 0.0) * area * g.aperture * rp.coefficient * g.pulse_energy
    return s.mean(), s.std() / math.sqrt(n)


@pytest.mark.parametrize("name,r", [("table1_fig4", 100.0), ("fig6_rtp", 120.0), ("fig6_rpp", 80.0)])
def test_reflected_energy_matches_area_monte_carlo(name, r):
    sc = preset_scene(name, r)
    rng = np.random.default_rng(21)
    mc, se = 0.0, 0.0
    for face in active_surfaces(sc.obstacle):
        m, s = _face_oracle(sc, face.label, 2 * 10 ** 6, rng)
        mc += m
        se = math.hypot(se, s)
    q = reflected_energy(sc, check=False).energy
    assert q > 0
    assert abs(q - mc) < 4 * se + 2e-3 * q


def test_distant_obstacle_has_no_effect():
    base = table1_scene(100.0)
    far = PrismObstacle(PrismShape("RP", 40.0, 80.0, 30.0), -1e4, 50.0)
    sc = Scene(base.geom, base.source, base.atmosphere, far)
    assert reflected_energy(sc, check=False).energy < 1e-20
