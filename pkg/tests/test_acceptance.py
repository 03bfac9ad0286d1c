"""Acceptance suite: one test per criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v``; a summary line per
criterion is printed at the end of the session.
"""

import math
import time
import warnings

import numpy as np
import pytest

from mwlab import beamoptics as bo
from mwlab import cli
from mwlab import constants as const
from mwlab import fringelab as fl
from mwlab import luttinger as lt
from mwlab import meanfield as mf
from mwlab import tofexpand as tof
from mwlab import twomode as tm
from mwlab.errors import DivergenceError, ValidityWarning

import oracles

RB = const.mass("Rb-87")
NA = const.mass("Na")


def junction(gamma_n, N=100):
    # J = 1/2 sets Omega_R = 1
    return tm.BoseHubbardParams.from_gamma(N, gamma_n / N, J=0.5)


@pytest.mark.criterion(1, "eikonal phase benchmark")
def test_c01_eikonal(record_property):
    beam = bo.BeamParams(NA, 1000.0)
    V = 6.6e-12 * const.E_CHARGE
    phase = abs(bo.eikonal_phase(V, 0.10, beam))
    dev = bo.index_deviation(V, beam.kinetic_energy)
    record_property("measured", f"|dphi|={phase:.4f} rad, |1-n|={dev:.3e}")
    assert abs(phase - 1.00) <= 0.01 * 1.00
    assert abs(dev - 2.7e-11) <= 0.05 * 2.7e-11


@pytest.mark.criterion(2, "contrast-ratio benchmark")
def test_c02_contrast_ratio(record_property):
    c2 = fl.contrast_from_intensity_ratio(1e-2)
    c4 = fl.contrast_from_intensity_ratio(1e-4)
    record_property("measured", f"C(1e-2)={c2:.6f}, C(1e-4)={c4:.6f}")
    assert abs(c2 - 2 * 0.1 / 1.01) <= 1e-12 and round(c2, 3) == 0.198
    assert abs(c4 - 2 * 0.01 / 1.0001) <= 1e-12 and round(c4, 4) == 0.0200


@pytest.mark.criterion(3, "two-mode oracle equivalence")
def test_c03_two_mode_oracle(record_property):
    worst = 0.0
    for N in (1, 2, 3):
        for J, U, delta in [(1.0, 0.0, 0.0), (1.0, 1.3, 0.0), (0.7, -0.4, 0.9), (0.2, 2.0, -1.1)]:
            w = tm.spectrum(tm.BoseHubbardParams(J, U, N, delta))
            worst = max(worst, np.max(np.abs(w - oracles.dense_spectrum(N, J, U, delta))))
    _, e = tm.ground_state(tm.BoseHubbardParams(1.0, 1.0, 2))
    worst = max(worst, abs(e - oracles.n2_ground_energy(1.0, 1.0)))
    exact_n1 = True
    for J, delta in [(1.0, 0.0), (0.7, 0.9), (0.25, -2.0)]:
        w = tm.spectrum(tm.BoseHubbardParams(J, 0.0, 1, delta))
        e_g, e_e, _ = tm.split_eigensystem(J, delta)
        exact_n1 &= abs(w[0] - e_g) <= 1e-15 and abs(w[1] - e_e) <= 1e-15
    record_property("measured", f"max |dE| = {worst:.2e}")
    assert worst <= 1e-12
    assert exact_n1
    assert tm.spectrum(tm.BoseHubbardParams(1.0, 0.0, 1)).tolist() == [-1.0, 1.0]


@pytest.mark.criterion(4, "linear-dynamics equivalence")
def test_c04_linear_dynamics(record_property):
    N = 50
    p = junction(0.0, N)
    theta, phi = 1.1, 0.4
    times = np.linspace(0.0, 5 * 2 * math.pi, 201)
    states = tm.evolve_series(tm.coherent_state(tm.BlochAngle(theta, phi), N), p, times)
    sz = np.array([tm.spin_observables(s).sz for s in states])
    traj = mf.integrate((math.cos(theta), phi), p, times[-1], tol=1e-12, t_eval=times[1:])
    rel = np.max(np.abs(sz - traj.z * N / 2)) / (N / 2)
    record_property("measured", f"max |dSz|/(N/2) = {rel:.2e}")
    assert rel <= 1e-8


@pytest.mark.criterion(5, "harmonic-approximation agreement")
def test_c05_harmonic(record_property):
    N = 100
    scan = tm.ground_scan(N, np.linspace(1.0, 30.0, 59) / N)
    rel = np.max(np.abs(scan["sz_std"] / scan["harmonic_sz_std"] - 1))
    record_property("measured", f"max rel dev = {rel:.3%}")
    assert rel <= 0.05


@pytest.mark.criterion(6, "spin-squeezing floor")
def test_c06_squeezing_floor(record_property):
    N = 100
    gammas = np.logspace(-4, 4, 161)
    scan = tm.ground_scan(N, gammas)
    xi = scan["xi_s"]
    i = int(np.nanargmin(xi))
    target = math.sqrt(2 / N)
    record_property("measured", f"min xi_S = {xi[i]:.4f} at gamma = {gammas[i]:.3g}")
    assert target / 1.5 <= xi[i] <= 1.5 * target
    assert 1 / N < gammas[i] < N


@pytest.mark.criterion(7, "mean-field conservation and bifurcation")
def test_c07_meanfield(record_property):
    traj = mf.integrate((0.5, 0.4), junction(4.0), 100 * 2 * math.pi)
    drift = traj.energy_drift / abs(traj.energy[0])
    te = np.linspace(0, 100, 5001)[1:]
    osc = mf.integrate((0.6, 0.0), junction(8.0), 100.0, t_eval=te)
    trap = mf.integrate((0.6, 0.0), junction(12.0), 100.0, t_eval=te)
    n_osc = mf.zero_crossings(osc.times, osc.z).size
    n_trap = mf.zero_crossings(trap.times, trap.z).size
    record_property("measured", f"drift {drift:.1e}; crossings {n_osc} (L=8), {n_trap} (L=12)")
    assert drift < 1e-8
    assert n_osc > 2 and n_trap == 0
    assert mf.separatrix_lambda(0.6, 0.0) == pytest.approx(10.0)


@pytest.mark.criterion(8, "plasma frequency")
def test_c08_plasma(record_property):
    p = junction(3.0)
    te = np.linspace(0, 100, 10001)[1:]
    traj = mf.integrate((0.01, 0.0), p, 100.0, t_eval=te)
    w = mf.oscillation_frequency(traj.times, traj.z)
    expected = 2 * p.J * math.sqrt(1 + 3.0)
    record_property("measured", f"omega = {w:.5f}, expected {expected:.5f}")
    assert abs(w / expected - 1) <= 0.01


@pytest.mark.criterion(9, "time-of-flight fringes")
def test_c09_tof(record_property):
    params = tof.TofParams(RB, 2 * math.pi * 500.0, 5e-6)
    t = 50.0 / params.omega
    sigma = tof.gaussian_width(t, params)
    x = np.linspace(-1.5 * sigma, 1.5 * sigma, 60001)
    diff = tof.density_pattern(x, t, 0.0, params) - tof.density_pattern(x, t, math.pi, params)
    measured = 2.0 * float(np.mean(np.diff(mf.zero_crossings(x, diff))))
    expected = math.pi / tof.fringe_wavevector(t, params).k
    t_long = 5000.0 / params.omega
    lt_rel = tof.fringe_spacing(t_long, params) / tof.long_time_fringe_spacing(t_long, RB, 5e-6) - 1
    record_property("measured", f"spacing rel {measured / expected - 1:.2e}, long-time {lt_rel:.2e}")
    assert abs(measured / expected - 1) <= 0.005
    assert abs(lt_rel) <= 0.005


@pytest.mark.criterion(10, "Luttinger thermal stationarity")
def test_c10_stationarity(record_property):
    s = lt.LuttingerSystem(RB, 5.2e-9, 2 * math.pi * 2e3, 35e6, 27e-9, 1e-3)
    th = lt.initial_covariance(s, "thermal")
    worst = 0.0
    for t in (1e-5, 1e-3, 7.3e-3, 0.25):
        ev = lt.evolve_covariance(th, s, t)
        worst = max(worst, np.max(np.abs(ev.var_phi / th.var_phi - 1)),
                    np.max(np.abs(ev.var_nu / th.var_nu - 1)),
                    np.max(np.abs(ev.cov_nu_phi) / np.sqrt(th.var_nu * th.var_phi)))
    record_property("measured", f"max rel change {worst:.1e}")
    assert worst <= 1e-12


@pytest.mark.criterion(11, "equilibrium correlation")
def test_c11_equilibrium(record_property):
    s = lt.LuttingerSystem(RB, 5.2e-9, 2 * math.pi * 2e3, 35e6, 27e-9, 4e-3)
    th = lt.initial_covariance(s, "thermal")
    z = np.linspace(1e-6, 20e-6, 20)
    exact = lt.correlation_analytic(z, th, s)
    shape = np.max(np.abs(exact / np.exp(-2 * z / s.lambda_T) - 1))
    t0 = time.perf_counter()
    est = lt.correlation_monte_carlo(th, s, z, 10_000, seed=2024)
    elapsed = time.perf_counter() - t0
    zmax = float(np.max(np.abs(est.C - exact) / est.stderr))
    record_property("measured", f"lambda_T={s.lambda_T * 1e6:.2f} um, shape {shape:.2%}, "
                                f"max z-score {zmax:.2f}, {elapsed:.1f} s")
    assert abs(s.lambda_T - 14.5e-6) <= 0.01 * 14.5e-6
    assert shape <= 0.03
    assert zmax <= 3.0
    assert elapsed <= 300.0


@pytest.mark.criterion(12, "light cone")
def test_c12_lightcone(record_property):
    s = lt.LuttingerSystem.from_sound_speed(RB, 1.2e-3, 35e6, 27e-9, 1e-3, 5.2e-9)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        cone = lt.lightcone(s, np.arange(1, 10) * 1e-3, np.arange(400) * 0.1e-6)
    ratio = cone.slope / (2 * s.c)
    t_eff = lt.LuttingerSystem(RB, 5.2e-9, 2 * math.pi * 2e3, 35e6, 27e-9, 1e-3).T_eff
    record_property("measured", f"slope/2c = {ratio:.3f}, T_eff = {t_eff * 1e9:.1f} nK")
    assert abs(ratio - 1) <= 0.15
    assert 10e-9 <= t_eff <= 25e-9


@pytest.mark.criterion(13, "FDF limits")
def test_c13_fdf(record_property):
    s = lt.LuttingerSystem(RB, 5.2e-9, 2 * math.pi * 2e3, 35e6, 27e-9, 1e-3)
    L = 5 * s.lambda_T
    dz = 0.25e-6
    z = np.arange(int(round(L / dz)) + 1) * dz
    th = lt.initial_covariance(s, "thermal")
    phis = lt.sample_phase_matrix(th, s, z, 5000, seed=13)
    thermal = fl.contrast_samples_from_phases(phis, z, L)
    p_value = fl.ks_exponential(thermal).pvalue
    coh = lt.initial_covariance(s, "coherent")
    coherent = fl.contrast_samples_from_phases(lt.sample_phase_matrix(coh, s, z, 5000, seed=13), z, L)
    mom = fl.fdf_moments(coherent)
    coherent_ok = bool(np.all(np.abs(mom.moments - 1) <= 3 * mom.stderr + 1e-12))
    m2 = fl.fdf_moments(thermal).moments[1]
    record_property("measured", f"thermal KS p = {p_value:.1e} (<a^2> = {m2:.3f}); "
                                f"coherent moments {np.round(mom.moments, 12).tolist()}")
    assert coherent_ok
    assert p_value > 0.01


@pytest.mark.criterion(14, "fringe-fit round trip")
def test_c14_fringe_fit(record_property):
    x = np.linspace(-80e-6, 80e-6, 321)
    true = dict(A=1.0, x0=0.0, sigma=25e-6, C=0.42, lambda_F=10e-6, phi=0.7)
    clean = fl.fit_fringe(x, fl.synthesize_profile(x, **true), 8e-6)
    clean_err = max(abs(clean.C - 0.42), abs(clean.phi - 0.7), abs(clean.x0) / 1e-6,
                    abs(clean.lambda_F - 10e-6) / 10e-6)
    good = 0
    for seed in range(100):
        y = fl.synthesize_profile(x, **true, noise_sigma=1 / 20, seed=seed)
        fit = fl.fit_fringe(x, y, 8e-6)
        dphi = abs(math.remainder(fit.phi_origin - 0.7, 2 * math.pi))
        good += abs(fit.C - 0.42) <= 0.02 and dphi <= 0.05
    record_property("measured", f"{good}/100 within tolerance; noiseless err {clean_err:.1e}")
    assert clean_err <= 1e-6
    assert good >= 95


@pytest.mark.criterion(15, "Talbot-Lau identities")
def test_c15_talbot_lau(record_property):
    d = 100e-9
    L_T = bo.talbot_lengths(bo.BeamParams(NA, 1000.0).lambda_dB, d).L_T
    g = bo.talbot_lau(L_T / 2, L_T, 1, 2, d)
    record_property("measured", f"L2 - L_T/2 = {g.L2 - L_T / 2:.1e}, d' - d = {g.d_prime - d:.1e}")
    assert g.L2 == L_T / 2 and g.d_prime == d
    with pytest.raises(DivergenceError):
        bo.talbot_lau(L_T / 4, L_T, 1, 2, d)


@pytest.mark.criterion(16, "phase-diffusion identity")
def test_c16_phase_diffusion(record_property):
    rng = np.random.default_rng(16)
    worst = 0.0
    for _ in range(1000):
        t, xi, U, var0 = rng.uniform(0, 100), rng.uniform(0, 3), rng.uniform(-1, 1), rng.uniform(0, 1)
        N = int(rng.integers(1, 10**5))
        a = tm.phase_diffusion_variance(t, xi, N, U, var0)
        b = tm.phase_diffusion_variance_from_number(t, xi * math.sqrt(N) / 2, U, var0)
        worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    record_property("measured", f"max rel diff {worst:.1e}")
    assert worst <= 1e-12


DETERMINISM_RUNS = [
    ("twomode", "spectrum", "--N", 20, "--U", 0.05),
    ("twomode", "ground", "--N", 20, "--U", 0.05),
    ("twomode", "ground-scan", "--N", 20, "--n-gamma", 7),
    ("twomode", "evolve", "--N", 20, "--U", 0.05, "--t-grid", "0:2:0.5"),
    ("twomode", "husimi", "--N", 20, "--n-theta", 9, "--n-phi", 12),
    ("meanfield", "integrate", "--N", 100, "--U", 0.05, "--z0", 0.6, "--t-end", 20),
    ("meanfield", "portrait", "--N", 100, "--U", 0.05, "--n-z", 3, "--n-phi", 3),
    ("meanfield", "frequencies", "--N", 100, "--U", 0.05),
    ("tof", "pattern", "--species", "Rb-87", "--t", "10ms"),
    ("tof", "fringe-k", "--species", "Rb-87", "--t-grid", "1:5:1ms"),
    ("luttinger", "params",),
    ("luttinger", "equilibrium", "--n-real", 200),
    ("luttinger", "quench", "--t-grid", "1:3:1ms"),
    ("luttinger", "lightcone", "--t-grid", "1:3:1ms"),
    ("fringes", "synthesize", "--L", "20um", "--noise-sigma", 0.05),
    ("fringes", "fit", "--n-seeds", 5),
    ("fringes", "fdf", "--n", 300, "--L", "30um"),
    ("optics", "table",),
    ("optics", "calc", "eikonal", "--V", "6.6e-12eV", "--L", "10cm"),
]


@pytest.mark.criterion(17, "CLI determinism")
def test_c17_determinism(tmp_path, record_property):
    mismatched = []
    for i, argv in enumerate(DETERMINISM_RUNS):
        dirs = [tmp_path / f"{i}{tag}" for tag in "ab"]
        for d in dirs:
            code = cli.main([str(a) for a in argv] + ["--seed", "4242", "--output-dir", str(d)])
            assert code == 0, argv
        # run.json carries the wall-clock duration; every data file must match byte for byte
        files = [{p.name: p.read_bytes() for p in d.iterdir() if p.name != "run.json"} for d in dirs]
        if not files[0] or files[0] != files[1]:
            mismatched.append(" ".join(map(str, argv[:2])))
    record_property("measured", f"{len(DETERMINISM_RUNS) - len(mismatched)}/{len(DETERMINISM_RUNS)} "
                                "commands byte-identical")
    assert not mismatched, mismatched
