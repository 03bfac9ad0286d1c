import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mwlab import constants as const, fringelab as fl, luttinger as lt
from mwlab.errors import DegenerateInputError, FitError, ValidationError

import oracles

X = np.linspace(-80e-6, 80e-6, 321)
TRUE = dict(A=1.0, x0=0.0, sigma=25e-6, C=0.42, lambda_F=10e-6, phi=0.7)


@pytest.fixture(scope="module")
def system():
    return lt.LuttingerSystem(const.mass("Rb-87"), 5.2e-9, 2 * math.pi * 2e3, 35e6, 27e-9, 1e-3)


def test_noiseless_round_trip_exact():
    y = fl.synthesize_profile(X, **TRUE)
    fit = fl.fit_fringe(X, y, 8e-6)
    for key, value in TRUE.items():
        assert getattr(fit, key) == pytest.approx(value, abs=1e-6 * max(1.0, abs(value)))
    assert fit.residual_rms < 1e-9 and not fit.clamped


@settings(max_examples=25, deadline=None)
@given(C=st.floats(0.1, 0.9), phi=st.floats(-3.0, 3.0), x0=st.floats(-5e-6, 5e-6),
       lam=st.floats(6e-6, 14e-6))
def test_noiseless_round_trip_property(C, phi, x0, lam):
    y = fl.synthesize_profile(X, 2.0, x0, 20e-6, C, lam, phi)
    fit = fl.fit_fringe(X, y, lam * 0.9)
    assert fit.C == pytest.approx(C, abs=1e-6)
    assert fit.lambda_F == pytest.approx(lam, rel=1e-6)
    assert abs(math.remainder(fit.phi - phi, 2 * math.pi)) < 1e-5


def test_noisy_round_trip_few_seeds():
    for seed in range(5):
        y = fl.synthesize_profile(X, **TRUE, noise_sigma=1 / 20, seed=seed)
        fit = fl.fit_fringe(X, y, 8e-6)
        assert abs(fit.C - 0.42) < 0.03
        assert abs(math.remainder(fit.phi_origin - 0.7, 2 * math.pi)) < 0.1


def test_fit_failure_reports_last_iterate():
    with pytest.raises((FitError, ValidationError)):
        fl.fit_fringe(X[:4], np.zeros(4), 8e-6)


def test_image_geometry_and_aliasing():
    prof = lt.PhaseProfile(np.arange(40) * 0.5e-6, np.zeros(40), 0)
    img = fl.synthesize_image(prof, math.pi / 10e-6, 25e-6, 0.5, 1e-6)
    assert img.pixels.shape[0] == 20 and img.x[img.x.size // 2] == 0.0
    assert img.lambda_F == pytest.approx(10e-6)
    with pytest.raises(ValidationError):
        fl.synthesize_image(prof, math.pi / 10e-6, 25e-6, 0.5, 5e-6)
    with pytest.raises(ValidationError):
        fl.Interferogram(np.zeros((4, 20)), 1e-6, 0.0, 1.0, 1.0)


def test_psf_reduces_contrast_monotonically():
    prof = lt.PhaseProfile(np.arange(80) * 0.25e-6, np.zeros(80), 0)
    contrasts = []
    for psf in (0.0, 1e-6, 2e-6, 3e-6):
        img = fl.synthesize_image(prof, math.pi / 10e-6, 25e-6, 0.8, 0.25e-6, psf_sigma=psf)
        x, y = fl.integrate_profile(img, 10e-6, 10e-6)
        contrasts.append(fl.fit_fringe(x, y, 10e-6).C)
    assert contrasts[0] == pytest.approx(0.8, abs=1e-3)
    assert all(a > b for a, b in zip(contrasts, contrasts[1:]))


def test_integrated_profile_window():
    prof = lt.PhaseProfile(np.arange(20) * 1e-6, np.zeros(20), 0)
    img = fl.synthesize_image(prof, math.pi / 10e-6, 25e-6, 0.5, 1e-6)
    x, y = fl.integrate_profile(img, 10e-6, 4e-6)
    np.testing.assert_allclose(y, img.pixels[8:12].sum(axis=0))
    with pytest.raises(ValidationError):
        fl.integrate_profile(img, 1e-6, 10e-6)


def test_contrast_operator_limits():
    z = np.arange(0, 40e-6, 0.1e-6)
    const_phase = lt.PhaseProfile(z, np.full(z.size, 1.3), 0)
    c, p = fl.contrast_operator(const_phase, 10e-6)
    assert c == pytest.approx(1.0, abs=1e-15) and p == pytest.approx(1.3)
    q = 2 * math.pi / 10e-6
    ramp = lt.PhaseProfile(z, q * (z - 20e-6), 0)
    c, _ = fl.contrast_operator(ramp, 10e-6)
    assert c == pytest.approx(0.0, abs=0.02)
    c, _ = fl.contrast_operator(ramp, 5e-6)
    assert c == pytest.approx(2 / math.pi, abs=0.02)
    with pytest.raises(ValidationError):
        fl.contrast_operator(ramp, 80e-6)


def test_mean_squared_contrast_double_integral(system):
    th = lt.initial_covariance(system, "thermal")
    L = 20e-6
    z = np.arange(0, L, 0.05e-6)
    grid = fl.mean_squared_contrast(th, system, z)
    cont = oracles.double_integral_contrast(
        lambda u: lt.correlation_analytic(u, th, system), L)
    assert grid == pytest.approx(cont, rel=0.01)


def test_mean_squared_contrast_matches_samples(system):
    th = lt.initial_covariance(system, "thermal")
    z = np.arange(0, 30e-6, 0.25e-6)
    phis = lt.sample_phase_matrix(th, system, z, 3000, seed=3)
    samples = fl.contrast_samples_from_phases(phis, z, 30e-6)
    exact = fl.mean_squared_contrast(th, system, z)
    sem = np.std(samples.values * samples.mean_c2, ddof=1) / math.sqrt(3000)
    assert abs(samples.mean_c2 - exact) < 4 * sem


def test_vectorized_samples_match_loop(system):
    th = lt.initial_covariance(system, "thermal")
    z = np.arange(0, 10e-6, 0.25e-6)
    profs = lt.sample_profiles(th, system, z, 20, seed=9)
    a = fl.contrast_samples(profs, 5e-6)
    b = fl.contrast_samples_from_phases(np.array([p.phi for p in profs]), z, 5e-6)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-12)


def test_coherent_fdf_moments_are_one():
    samples = fl.contrast_samples_from_c2(np.full(500, 0.7), 10e-6)
    mom = fl.fdf_moments(samples)
    np.testing.assert_allclose(mom.moments, 1.0, rtol=1e-12)
    assert mom.density is not None
    with pytest.raises(DegenerateInputError):
        fl.contrast_samples_from_c2(np.zeros(3), 1e-6)


def test_exponential_samples_pass_ks():
    rng = np.random.default_rng(0)
    s = fl.contrast_samples_from_c2(rng.exponential(size=4000), 1.0)
    assert fl.ks_exponential(s).pvalue > 0.01
    mom = fl.fdf_moments(s, m_max=3)
    np.testing.assert_allclose(mom.moments, [1, 2, 6], rtol=0.15)


def test_circular_std():
    assert fl.circular_std([0.3, 0.3, 0.3]) == pytest.approx(0.0, abs=1e-7)
    assert fl.circular_std([0.0, math.pi]) == math.inf
    rng = np.random.default_rng(1)
    phases = rng.normal(0.0, 0.2, 20000) + 3.0
    assert fl.circular_std(phases) == pytest.approx(0.2, rel=0.02)
    with pytest.raises(ValidationError):
        fl.circular_std([1.0])


def test_scalar_contrast_helpers():
    assert fl.visibility(3.0, 1.0) == 0.5 and fl.visibility(0.0, 0.0) is None
    assert fl.two_beam_contrast(1.0, 1.0) == 1.0 and fl.two_beam_contrast(0, 0) is None
    assert fl.contrast_from_intensity_ratio(1e-2) == pytest.approx(0.198, abs=1e-3)
    assert fl.contrast_from_intensity_ratio(1e-4) == pytest.approx(0.0200, abs=1e-4)
    r = 0.37
    assert fl.two_beam_contrast(1.0, math.sqrt(r)) == pytest.approx(
        fl.contrast_from_intensity_ratio(r), rel=1e-14)
