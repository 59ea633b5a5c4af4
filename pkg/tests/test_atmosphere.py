import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from uvnlos.atmosphere import (
    TABLE1, AtmosphereError, AtmosphereParams, extinction, mie_phase, phase_cdf, phase_function,
    rayleigh_phase, sample_cos_beta,
)


def norm(f):
    return 2 * math.pi * integrate.quad(f, -1.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)[0]


def test_table1_values():
    assert TABLE1.rayleigh == pytest.approx(0.24e-3)
    assert TABLE1.mie == pytest.approx(0.25e-3)
    assert extinction(TABLE1) == pytest.approx(1.39e-3)


def test_phase_normalisation_table1():
    assert norm(lambda x: phase_function(x, TABLE1)) == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 0.95), st.floats(0.0, 1.0), st.floats(0.0, 0.1), st.floats(0.01, 1.0))
def test_phase_normalisation_property(g, f, gamma, mie_share):
    atm = AtmosphereParams(1.0 - mie_share, mie_share, 0.1, g, f, gamma)
    assert norm(lambda x: phase_function(x, atm)) == pytest.approx(1.0, abs=1e-6)


def test_components_normalised():
    assert norm(lambda x: rayleigh_phase(x, 0.017)) == pytest.approx(1.0, abs=1e-9)
    assert norm(lambda x: mie_phase(x, 0.72, 0.5)) == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("x", [-1.0, -0.6, 0.0, 0.3, 0.9, 0.99, 1.0])
def test_cdf_closed_form_matches_quadrature(x):
    ref = 2 * math.pi * integrate.quad(lambda t: phase_function(t, TABLE1), -1.0, x,
                                       epsabs=1e-13, limit=200)[0]
    assert float(phase_cdf(x, TABLE1)) == pytest.approx(ref, abs=1e-9)


def test_phase_rejects_out_of_range():
    with pytest.raises(AtmosphereError):
        phase_function(1.1, TABLE1)


def test_invalid_params():
    with pytest.raises(AtmosphereError):
        AtmosphereParams(-1.0, 1.0, 0.0)
    with pytest.raises(AtmosphereError):
        AtmosphereParams(0.0, 0.0, 1.0)
    with pytest.raises(AtmosphereError):
        AtmosphereParams(1.0, 1.0, 0.0, mie_g=1.0)


def test_sampled_histogram_chi_square():
    rng = np.random.default_rng(11)
    x = sample_cos_beta(rng.random(10 ** 6), TABLE1)
    edges = np.linspace(-1.0, 1.0, 65)
    obs, _ = np.histogram(x, edges)
    expected = np.diff(phase_cdf(edges, TABLE1)) * len(x)
    _, p = stats.chisquare(obs, expected * obs.sum() / expected.sum())
    assert p > 1e-3


def test_isotropic_limit_mean_zero():
    atm = AtmosphereParams(0.0, 1.0, 0.0, mie_g=0.0, mie_f=0.0)
    rng = np.random.default_rng(5)
    x = sample_cos_beta(rng.random(10 ** 6), atm)
    assert abs(x.mean()) < 3 * x.std() / math.sqrt(len(x))


def test_table1_forward_peaked():
    analytic = 2 * math.pi * integrate.quad(lambda t: t * phase_function(t, TABLE1), -1, 1)[0]
    assert analytic > 0
    rng = np.random.default_rng(6)
    x = sample_cos_beta(rng.random(10 ** 6), TABLE1)
    assert x.mean() > 0
    assert x.mean() == pytest.approx(analytic, abs=4 * x.std() / 1e3)
