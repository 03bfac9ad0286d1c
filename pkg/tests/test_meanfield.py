import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mwlab import meanfield as mf
from mwlab.errors import NumericalError, PoleError, UnsupportedConfigurationError, ValidationError
from mwlab.twomode import BoseHubbardParams

import oracles


def junction(gamma_n, N=100, delta=0.0):
    # J = 1/2 gives Omega_R = 1, so times are in units of 1/Omega_R
    return BoseHubbardParams.from_gamma(N, gamma_n / N, J=0.5, delta=delta)


def test_rhs_examples():
    p = junction(0.0)
    assert mf.josephson_rhs(mf.MeanFieldState(0.0, 0.0), p) == (0.0, 0.0)
    dz, dp = mf.josephson_rhs(mf.MeanFieldState(0.0, math.pi), junction(3.0))
    assert dz == pytest.approx(0.0, abs=1e-15) and dp == pytest.approx(0.0, abs=1e-15)
    dz, dp = mf.josephson_rhs(mf.MeanFieldState(0.5, math.pi / 2), p)
    assert dz == pytest.approx(-math.sqrt(0.75)) and dp == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(PoleError):
        mf.josephson_rhs(mf.MeanFieldState(1.0, 0.0), p)


def test_energy_examples():
    p = junction(2.0)
    assert mf.energy((0.0, 0.0), p) == pytest.approx(-1.0)
    assert mf.energy((0.0, math.pi), p) == pytest.approx(1.0)


def test_constant_trajectory_at_origin():
    traj = mf.integrate((0.0, 0.0), junction(3.0), 20.0)
    assert np.all(traj.z == 0.0) and np.all(traj.phi == 0.0)


def test_matches_rk4_oracle():
    p = junction(5.0)
    z0, phi0, t_end = 0.4, 0.3, 15.0
    t_ref, z_ref, p_ref = oracles.rk4_josephson(z0, phi0, t_end, 1.0, 5.0, 0.0, 60000)
    traj = mf.integrate((z0, phi0), p, t_end, tol=1e-11, t_eval=t_ref[6000::6000])
    np.testing.assert_allclose(traj.z[1:], z_ref[6000::6000], atol=1e-8)
    np.testing.assert_allclose(traj.phi[1:], p_ref[6000::6000], atol=1e-8)


def test_t_eval_landing_is_exact():
    te = np.array([0.1, 0.7, 2.0, 3.3])
    traj = mf.integrate((0.2, 0.1), junction(1.0), 3.3, t_eval=te)
    assert traj.times.tolist() == [0.0, *te.tolist()]


@pytest.mark.parametrize("backend", ["python", None])
def test_energy_drift_bound(backend):
    p = junction(4.0)
    t_end = 100 * 2 * math.pi
    tol = 1e-9
    traj = mf.integrate((0.5, 0.4), p, t_end, tol=tol, backend=backend)
    h0 = abs(traj.energy[0])
    assert traj.energy_drift <= 100 * tol * h0 + 1e-12


def test_unprojected_integrator_still_converges():
    p = junction(2.0)
    a = mf.integrate((0.3, 0.0), p, 10.0, tol=1e-10, t_eval=[10.0], project_energy=False)
    b = mf.integrate((0.3, 0.0), p, 10.0, tol=1e-10, t_eval=[10.0])
    assert a.z[-1] == pytest.approx(b.z[-1], abs=1e-8)


def test_pole_error_carries_partial_trajectory():
    p = BoseHubbardParams(0.5, 0.0, 10)
    with pytest.raises(PoleError) as info:
        mf.integrate((1 - 1e-9, -math.pi / 2), p, 5.0)
    partial = info.value.partial
    assert partial is not None and partial.truncated and partial.times.size >= 1


def test_step_budget_exhausted():
    with pytest.raises(NumericalError):
        mf.integrate((0.3, 0.0), junction(2.0), 1e4, max_steps=10)


def test_start_margin_validation():
    with pytest.raises(ValidationError):
        mf.integrate((1 - 1e-10, 0.0), junction(1.0), 1.0)


def test_oscillation_and_self_trapping():
    z0 = 0.6
    assert mf.separatrix_lambda(z0, 0.0) == pytest.approx(10.0)
    osc = mf.integrate((z0, 0.0), junction(8.0), 60.0, t_eval=np.linspace(0, 60, 3001)[1:])
    assert mf.zero_crossings(osc.times, osc.z).size > 2
    trap = mf.integrate((z0, 0.0), junction(12.0), 60.0, t_eval=np.linspace(0, 60, 3001)[1:])
    assert np.all(trap.z > 0)
    assert np.all(np.diff(trap.phi) > 0)


def test_bifurcation_boundary_bracket():
    z0 = 0.6
    te = np.linspace(0, 200, 8001)[1:]
    lam = np.linspace(9.0, 11.0, 21)
    trapped = [np.all(mf.integrate((z0, 0.0), junction(L), 200.0, t_eval=te).z > 0) for L in lam]
    first = lam[np.argmax(trapped)]
    assert any(trapped) and not trapped[0]
    assert 9.5 <= first <= 10.5
    assert all(trapped[np.argmax(trapped):])


@settings(max_examples=15, deadline=None)
@given(z0=st.floats(-0.9, 0.9), phi0=st.floats(-3.0, 3.0), gn=st.floats(0.0, 20.0))
def test_time_reversal(z0, phi0, gn):
    p = junction(gn)
    tol = 1e-10
    fwd = mf.integrate((z0, phi0), p, 5.0, tol=tol, t_eval=[5.0])
    back = mf.integrate((fwd.z[-1], -fwd.phi[-1]), p, 5.0, tol=tol, t_eval=[5.0])
    assert back.z[-1] == pytest.approx(z0, abs=10 * tol * 100)
    assert -back.phi[-1] == pytest.approx(phi0, abs=10 * tol * 100)


def test_z_max_bounds_oscillation_from_equator():
    for gn in (1.5, 2.0, 4.0):
        zm = mf.z_max(gn)
        for phi0 in np.linspace(-1.5, 1.5, 7):
            traj = mf.integrate((0.0, phi0), junction(gn), 30.0)
            assert np.max(np.abs(traj.z)) <= zm + 1e-6


def test_z_max_values():
    assert mf.z_max(2.0) == pytest.approx(1.0)
    assert mf.z_max(4.0) == pytest.approx(math.sqrt(3) / 2)
    assert mf.z_max(math.inf) == 0.0
    assert mf.z_max(0.5) is None


def test_plasma_frequency_small_oscillation():
    p = junction(3.0)
    te = np.linspace(0, 60, 6001)[1:]
    traj = mf.integrate((0.01, 0.0), p, 60.0, t_eval=te)
    w = mf.oscillation_frequency(traj.times, traj.z)
    assert w == pytest.approx(mf.characteristic_frequencies(p).plasma, rel=0.01)


def test_characteristic_frequencies():
    f = mf.characteristic_frequencies(junction(3.0))
    assert f.rabi == pytest.approx(1.0) and f.plasma == pytest.approx(2.0)
    assert f.pi_minus is None and f.pi_plus == pytest.approx(math.sqrt(1 - 1 / 9))
    assert mf.characteristic_frequencies(junction(0.0)).plasma == pytest.approx(1.0)
    assert mf.characteristic_frequencies(junction(1.0)).pi_minus == pytest.approx(0.0)
    with pytest.raises(ValidationError):
        mf.characteristic_frequencies(BoseHubbardParams(0.0, 1.0, 10))


def test_fixed_points():
    pts = mf.fixed_points(junction(0.5))
    assert [(q.z, q.phi, q.stability) for q in pts] == [(0.0, 0.0, "stable"),
                                                         (0.0, math.pi, "stable")]
    pts = mf.fixed_points(junction(2.0))
    zs = sorted(q.z for q in pts if q.phi == math.pi and q.z != 0)
    assert zs == pytest.approx([-math.sqrt(0.75), math.sqrt(0.75)])
    assert mf.pi_mode_imbalance(1.0) == pytest.approx(0.0)
    with pytest.raises(UnsupportedConfigurationError):
        mf.fixed_points(junction(1.0, delta=0.1))


def test_portrait_tags():
    grid = [(0.3, 0.0), (0.7, 1.0), (-0.5, 2.0)]
    for o in mf.phase_portrait(junction(0.0), grid, 20.0):
        assert o.tag == "rabi-like"
    running = mf.phase_portrait(junction(5.0), [(0.9, 0.0)], 30.0)[0]
    assert running.tag == "self-trapped"
    pi_orbit = mf.phase_portrait(junction(1.5), [(0.05, math.pi)], 30.0)[0]
    assert pi_orbit.tag == "pi-mode"


def test_portrait_grid_bounds():
    g = mf.portrait_grid(5, 4)
    assert len(g) == 20 and max(abs(z) for z, _ in g) <= 0.99
    with pytest.raises(ValidationError):
        mf.portrait_grid(3, 3, z_limit=0.995)
