"""Pairs of one-dimensional quasicondensates as Luttinger liquids (SI units).

Only the relative (antisymmetric) sector is modelled. Modes live on a ring
of length ``L_sys`` with ``k_j = 2 pi j/L_sys`` for ``j = 1..n_modes``; the
``k = 0`` mode is excluded. Each mode is a harmonic oscillator with
frequency ``c k`` whose density (``nu``) and phase (``phi``) quadratures
are Gaussian with covariance ``(var_nu, var_phi, cov_nu_phi)``.

The relative-phase correlation ``C(z) = <exp(i[phi(z) - phi(0)])>`` is::

    C(z) = exp(-sum_j (2/L_sys) var_phi(k_j) (1 - cos(k_j z)))
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from mwlab import constants as const
from mwlab.errors import NoCrossoverError, ValidationError, ValidityWarning

DEFAULT_CUTOFF = 2.0 * math.pi  # k_max = DEFAULT_CUTOFF / xi_h
_CHUNK = 64  # realizations per BLAS batch


@dataclass(frozen=True)
class LuttingerSystem:
    """Physical parameters of a split 1D gas.

    Parameters
    ----------
    m : float
        Atomic mass (kg).
    a_s : float
        s-wave scattering length (m).
    omega_perp : float
        Transverse trap frequency (rad/s).
    n1d : float
        Line density of each gas (1/m).
    T : float
        Temperature (K).
    L_sys : float
        Ring length (m).
    n_modes : int, optional
        Number of modes; defaults to all modes below ``k_max``.
    cutoff_factor : float, optional
        ``k_max = cutoff_factor / xi_h``.
    """

    m: float
    a_s: float
    omega_perp: float
    n1d: float
    T: float
    L_sys: float
    n_modes: int | None = None
    cutoff_factor: float = DEFAULT_CUTOFF

    def __post_init__(self):
        for name in ("m", "a_s", "omega_perp", "n1d", "T", "L_sys", "cutoff_factor"):
            value = float(getattr(self, name))
            if not (value > 0 and math.isfinite(value)):
                raise ValidationError(f"{name} must be positive and finite, got {value!r}")
            object.__setattr__(self, name, value)
        j_max = math.floor(self.k_max * self.L_sys / (2.0 * math.pi) * (1 + 1e-12))
        if self.n_modes is None:
            n = j_max
        else:
            n = int(self.n_modes)
            if n > j_max:
                raise ValidationError(
                    f"n_modes = {n} exceeds the cutoff k_max = {self.k_max:.6g} rad/m "
                    f"({j_max} modes)"
                )
        if n < 1:
            raise ValidationError("the ring holds no mode below the cutoff; increase L_sys")
        object.__setattr__(self, "n_modes", n)

    @classmethod
    def from_sound_speed(cls, m: float, c: float, n1d: float, T: float, L_sys: float,
                         a_s: float, n_modes: int | None = None,
                         cutoff_factor: float = DEFAULT_CUTOFF) -> "LuttingerSystem":
        """Choose ``omega_perp`` so that the speed of sound equals `c`."""
        g = m * c * c / n1d
        omega_perp = g / (2.0 * const.HBAR * a_s)
        return cls(m, a_s, omega_perp, n1d, T, L_sys, n_modes, cutoff_factor)

    @property
    def g(self) -> float:
        """1D coupling ``2 hbar a_s omega_perp`` (J m)."""
        return 2.0 * const.HBAR * self.a_s * self.omega_perp

    @property
    def c(self) -> float:
        """Speed of sound ``sqrt(g n/m)``."""
        return math.sqrt(self.g * self.n1d / self.m)

    @property
    def K(self) -> float:
        """Luttinger parameter ``pi hbar sqrt(n/(m g))``."""
        return math.pi * const.HBAR * math.sqrt(self.n1d / (self.m * self.g))

    @property
    def xi_h(self) -> float:
        """Healing length ``hbar/(m c)``."""
        return const.HBAR / (self.m * self.c)

    @property
    def k_max(self) -> float:
        return self.cutoff_factor / self.xi_h

    @property
    def lambda_T(self) -> float:
        """Thermal coherence length ``2 hbar^2 n/(m k_B T)``."""
        return thermal_length(self, self.T)

    @property
    def gamma_LL(self) -> float:
        """Lieb-Liniger parameter ``m g/(hbar^2 n)``."""
        return self.m * self.g / (const.HBAR ** 2 * self.n1d)

    @property
    def T_D(self) -> float:
        """Degeneracy temperature ``hbar^2 n^2/(2 m k_B)``."""
        return const.HBAR ** 2 * self.n1d ** 2 / (2.0 * self.m * const.K_B)

    @property
    def T_eff(self) -> float:
        """Prethermal temperature with ``k_B T_eff = g n/2``."""
        return self.g * self.n1d / (2.0 * const.K_B)

    @property
    def k_values(self) -> np.ndarray:
        return 2.0 * math.pi / self.L_sys * np.arange(1, self.n_modes + 1)


def thermal_length(system: LuttingerSystem, T: float) -> float:
    """``2 hbar^2 n/(m k_B T)``; the thermal correlation decays as ``exp(-2z/lambda)``."""
    return 2.0 * const.HBAR ** 2 * system.n1d / (system.m * const.K_B * T)


def luttinger_parameter(gamma_ll: float) -> float:
    """``K = pi gamma^(-1/2)``."""
    if gamma_ll <= 0:
        raise ValidationError("gamma_LL must be > 0")
    return math.pi / math.sqrt(gamma_ll)


class LuttingerParams(NamedTuple):
    g: float
    c: float
    K: float
    xi_h: float
    lambda_T: float
    gamma_LL: float
    T_D: float
    T_eff: float
    one_d_valid: bool  # k_B T and g n below hbar omega_perp
    weak_scattering: bool  # a_s small against the transverse oscillator length


def derive_params(system: LuttingerSystem) -> LuttingerParams:
    """Derived gas parameters with 1D-validity flags.

    Emits :class:`ValidityWarning` when a flag is false.
    """
    e_perp = const.HBAR * system.omega_perp
    one_d = const.K_B * system.T <= e_perp and system.g * system.n1d <= e_perp
    a_perp = math.sqrt(const.HBAR / (system.m * system.omega_perp))
    weak = system.a_s < 0.1 * a_perp
    if not one_d:
        warnings.warn("k_B T or g n exceeds hbar omega_perp: gas is not one-dimensional",
                      ValidityWarning, stacklevel=2)
    if not weak:
        warnings.warn("a_s is not small against sqrt(hbar/(m omega_perp))",
                      ValidityWarning, stacklevel=2)
    return LuttingerParams(system.g, system.c, system.K, system.xi_h, system.lambda_T,
                           system.gamma_LL, system.T_D, system.T_eff, one_d, weak)


@dataclass(frozen=True, eq=False)
class ModeEnsemble:
    """Per-mode Gaussian quadrature covariances at time ``t``."""

    k_values: np.ndarray
    omega_values: np.ndarray
    var_nu: np.ndarray
    var_phi: np.ndarray
    cov_nu_phi: np.ndarray
    kind: str
    t: float = 0.0

    @property
    def determinant(self) -> np.ndarray:
        """Symplectic invariant ``var_nu var_phi - cov^2`` per mode."""
        return self.var_nu * self.var_phi - self.cov_nu_phi ** 2


@dataclass(frozen=True, eq=False)
class PhaseProfile:
    """One realization of the relative phase on a uniform grid."""

    z_grid: np.ndarray
    phi: np.ndarray
    seed: int
    t: float = 0.0


def initial_covariance(system: LuttingerSystem, kind: str) -> ModeEnsemble:
    """Thermal or post-splitting (quench) mode covariances.

    thermal: ``var_nu = k_B T/(2g)``, ``var_phi = 2 m k_B T/(hbar^2 n k^2)``.
    quench: ``var_nu = n/2``, ``var_phi = 1/(2n)`` for every mode.
    """
    k = system.k_values
    ones = np.ones_like(k)
    if kind == "thermal":
        kt = const.K_B * system.T
        var_nu = ones * (kt / (2.0 * system.g))
        var_phi = 2.0 * system.m * kt / (const.HBAR ** 2 * system.n1d * k * k)
    elif kind == "quench":
        var_nu = ones * (0.5 * system.n1d)
        var_phi = ones * (0.5 / system.n1d)
    elif kind == "coherent":
        var_nu = np.zeros_like(k)
        var_phi = np.zeros_like(k)
    else:
        raise ValidationError(f"kind must be 'thermal', 'quench' or 'coherent', got {kind!r}")
    return ModeEnsemble(k, system.c * k, var_nu, var_phi, np.zeros_like(k), kind, 0.0)


def _exchange_factor(system: LuttingerSystem, k: np.ndarray) -> np.ndarray:
    # s_F with s_F^2 = 4 m^2 c^2/(hbar^2 k^2 n^2)
    return 2.0 * system.m * system.c / (const.HBAR * k * system.n1d)


def evolve_covariance(ensemble: ModeEnsemble, system: LuttingerSystem, t: float) -> ModeEnsemble:
    """Free evolution of the covariances by a further time `t`.

    ``var_phi(t) = s^2 var_nu sin^2(ckt) + var_phi cos^2(ckt) + 2 s cov sin cos``
    with ``s^2 = 4 m^2 c^2/(hbar^2 k^2 n^2)``; ``var_nu`` and the covariance
    follow from the same phase-space rotation.
    """
    t = float(t)
    if not (t >= 0 and math.isfinite(t)):
        raise ValidationError(f"t must be finite and >= 0, got {t!r}")
    if t == 0:
        return ensemble
    sf = _exchange_factor(system, ensemble.k_values)
    theta = system.c * ensemble.k_values * t
    c, s = np.cos(theta), np.sin(theta)
    vn, vp, cv = ensemble.var_nu, ensemble.var_phi, ensemble.cov_nu_phi
    var_phi = c * c * vp + s * s * sf * sf * vn + 2.0 * c * s * sf * cv
    var_nu = c * c * vn + s * s * vp / (sf * sf) - 2.0 * c * s * cv / sf
    cov = c * s * (sf * vn - vp / sf) + (c * c - s * s) * cv
    return replace(ensemble, var_nu=var_nu, var_phi=var_phi, cov_nu_phi=cov,
                   t=ensemble.t + t)


def time_averaged_covariance(ensemble: ModeEnsemble, system: LuttingerSystem) -> ModeEnsemble:
    """Covariances averaged over a revival period ``L_sys/(2c)``.

    On the ring every mode frequency is a multiple of ``2 pi c/L_sys``, so
    this average equals the long-time average of :func:`evolve_covariance`.
    """
    sf = _exchange_factor(system, ensemble.k_values)
    var_phi = 0.5 * (ensemble.var_phi + sf * sf * ensemble.var_nu)
    var_nu = 0.5 * (ensemble.var_nu + ensemble.var_phi / (sf * sf))
    return replace(ensemble, var_nu=var_nu, var_phi=var_phi,
                   cov_nu_phi=np.zeros_like(var_nu), kind=ensemble.kind + "-averaged")


def phase_exponent(z_sep, ensemble: ModeEnsemble, system: LuttingerSystem) -> np.ndarray:
    """``sum_j (2/L) var_phi_j (1 - cos(k_j z))``, half the variance of ``phi(z) - phi(0)``."""
    z = np.atleast_1d(np.asarray(z_sep, dtype=float))
    if np.any(z < 0):
        raise ValidationError("z_sep must be >= 0")
    w = 2.0 / system.L_sys * ensemble.var_phi
    out = np.empty(z.size)
    for i in range(0, z.size, 256):
        zc = z[i:i + 256]
        out[i:i + 256] = (1.0 - np.cos(np.outer(zc, ensemble.k_values))) @ w
    return out


def correlation_analytic(z_sep, ensemble: ModeEnsemble, system: LuttingerSystem):
    """Phase correlation ``C(z) = exp(-phase_exponent)`` as a discrete mode sum."""
    out = np.exp(-phase_exponent(z_sep, ensemble, system))
    return float(out[0]) if np.ndim(z_sep) == 0 else out


def periodic_thermal_correlation(z_sep, lambda_T: float, L_sys: float):
    """Continuum-limit thermal correlation on a ring, ``exp(-(2z/lambda)(1 - z/L))``.

    Reduces to ``exp(-2z/lambda_T)`` for ``z << L_sys``.
    """
    z = np.asarray(z_sep, dtype=float)
    return np.exp(-2.0 * z / lambda_T * (1.0 - z / L_sys))


def _check_grid(grid, system: LuttingerSystem) -> np.ndarray:
    z = np.asarray(grid, dtype=float).ravel()
    if z.size < 1:
        raise ValidationError("grid must not be empty")
    if z.size > 2:
        dz = np.diff(z)
        if np.any(dz <= 0) or np.max(np.abs(dz - dz[0])) > 1e-9 * abs(dz[0]):
            raise ValidationError("grid must be uniform and increasing")
        if dz[0] > system.xi_h:
            warnings.warn(f"grid spacing {dz[0]:.3g} m exceeds the healing length "
                          f"{system.xi_h:.3g} m", ValidityWarning, stacklevel=3)
    return z


def realization_rng(seed: int, r: int) -> np.random.Generator:
    """Counter-based generator of realization `r`.

    The 128-bit Philox key holds ``seed XOR r`` in its low word and ``seed`` in
    its high word, so each realization is reproducible on its own and nearby
    seeds (e.g. 1 and 2) never share a set of streams.
    """
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | (int(seed) ^ int(r))))


def sample_phase_matrix(
    ensemble: ModeEnsemble,
    system: LuttingerSystem,
    grid,
    n_realizations: int,
    seed: int,
) -> np.ndarray:
    """Gaussian phase realizations, shape ``(n_realizations, len(grid))``.

    ``phi(z) = sum_j sqrt(2/L)[a_j cos(k_j z) + b_j sin(k_j z)]`` with
    independent ``a_j, b_j ~ N(0, var_phi_j)``. Realization ``r`` draws from
    :func:`realization_rng`, so any subset of realizations is reproducible
    independently of the others.
    """
    n_realizations = int(n_realizations)
    if n_realizations < 1:
        raise ValidationError("n_realizations must be >= 1")
    seed = int(seed)
    if seed < 0 or seed >= 2 ** 64:
        raise ValidationError("seed must be a 64-bit unsigned integer")
    z = _check_grid(grid, system)
    k = ensemble.k_values
    sd = np.sqrt(np.maximum(ensemble.var_phi, 0.0))
    pref = math.sqrt(2.0 / system.L_sys)
    basis = np.concatenate([np.cos(np.outer(k, z)), np.sin(np.outer(k, z))]) * pref
    sd2 = np.concatenate([sd, sd])
    out = np.empty((n_realizations, z.size))
    m = k.size
    for start in range(0, n_realizations, _CHUNK):
        stop = min(start + _CHUNK, n_realizations)
        coeff = np.empty((stop - start, 2 * m))
        for r in range(start, stop):
            rng = realization_rng(seed, r)
            coeff[r - start] = rng.standard_normal(2 * m)
        out[start:stop] = (coeff * sd2) @ basis
    return out


def sample_profiles(
    ensemble: ModeEnsemble,
    system: LuttingerSystem,
    grid,
    n_realizations: int,
    seed: int,
) -> list[PhaseProfile]:
    """Sample phase profiles; see :func:`sample_phase_matrix`."""
    z = np.asarray(grid, dtype=float).ravel()
    phis = sample_phase_matrix(ensemble, system, z, n_realizations, seed)
    return [PhaseProfile(z, phis[r], int(seed) ^ r, ensemble.t) for r in range(phis.shape[0])]


class CorrelationEstimate(NamedTuple):
    z_sep: np.ndarray
    C: np.ndarray
    stderr: np.ndarray


def correlation_monte_carlo(
    ensemble: ModeEnsemble,
    system: LuttingerSystem,
    z_sep,
    n_realizations: int,
    seed: int,
) -> CorrelationEstimate:
    """Monte-Carlo estimate of ``<cos(phi(z) - phi(0))>`` with standard errors.

    `z_sep` must be a uniform grid starting at a multiple of its spacing, or
    any grid of separations; profiles are sampled at ``[0] + z_sep``.
    """
    z = np.asarray(z_sep, dtype=float).ravel()
    pts = np.concatenate([[0.0], z])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        k = ensemble.k_values
        sd = np.sqrt(np.maximum(ensemble.var_phi, 0.0))
        pref = math.sqrt(2.0 / system.L_sys)
        basis = np.concatenate([np.cos(np.outer(k, pts)), np.sin(np.outer(k, pts))]) * pref
    seed = int(seed)
    sd2 = np.concatenate([sd, sd])
    m = k.size
    vals = np.empty((int(n_realizations), z.size))
    for start in range(0, vals.shape[0], _CHUNK):
        stop = min(start + _CHUNK, vals.shape[0])
        coeff = np.empty((stop - start, 2 * m))
        for r in range(start, stop):
            rng = realization_rng(seed, r)
            coeff[r - start] = rng.standard_normal(2 * m)
        phi = (coeff * sd2) @ basis
        vals[start:stop] = np.cos(phi[:, 1:] - phi[:, :1])
    n = vals.shape[0]
    mean = vals.mean(axis=0)
    stderr = vals.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(z.size, np.inf)
    return CorrelationEstimate(z, mean, stderr)


def crossover_distance(z_sep, corr, plateau_band: float = 0.02) -> float:
    """Distance beyond which the correlation stays within a band of its plateau.

    The plateau is the mean over the last quartile of the curve.

    Raises
    ------
    NoCrossoverError
        If the curve does not end inside the band.
    """
    z = np.asarray(z_sep, dtype=float)
    c = np.asarray(corr, dtype=float)
    if z.size != c.size or z.size < 4:
        raise ValidationError("need matching z and C arrays with at least 4 points")
    if np.any(np.diff(z) <= 0):
        raise ValidationError("z_sep must be increasing")
    plateau = float(np.mean(c[-max(1, z.size // 4):]))
    inside = np.abs(c - plateau) <= plateau_band
    if not inside[-1]:
        raise NoCrossoverError("correlation curve never settles into the plateau band")
    outside = np.nonzero(~inside)[0]
    first = 0 if outside.size == 0 else outside[-1] + 1
    return float(z[first])


def quench_correlation(system: LuttingerSystem, t: float, z_sep) -> np.ndarray:
    """Analytic phase correlation a time `t` after an instantaneous split."""
    ens = evolve_covariance(initial_covariance(system, "quench"), system, t)
    return correlation_analytic(z_sep, ens, system)


class LightCone(NamedTuple):
    times: np.ndarray
    z_c: np.ndarray
    slope: float
    intercept: float


def lightcone(system: LuttingerSystem, times: Sequence[float], z_sep,
              plateau_band: float = 0.02) -> LightCone:
    """Crossover distance ``z_c(t)`` after a quench and its linear fit."""
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        raise ValidationError("need at least two times for a light-cone fit")
    zc = np.array([crossover_distance(z_sep, quench_correlation(system, t, z_sep), plateau_band)
                   for t in times])
    slope, intercept = np.polyfit(times, zc, 1)
    return LightCone(times, zc, float(slope), float(intercept))
