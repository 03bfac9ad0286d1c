"""Closed-form design calculators for atom and molecule beam interferometers.

All functions take and return SI quantities. Potentials and energies are in
joules; use :data:`EV` to convert from electron volts.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from mwlab import constants as const
from mwlab.errors import (
    DegenerateInputError,
    DivergenceError,
    ValidationError,
    ValidityWarning,
)

SMALL_ANGLE_LIMIT = 0.1  # rad


EV = const.E_CHARGE  # joules per electron volt


def _positive(name: str, value) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ValidationError(f"{name} must be positive and finite, got {value!r}")
    return value


@dataclass(frozen=True)
class BeamParams:
    """Mono-energetic beam with an rms velocity spread.

    Parameters
    ----------
    m : float
        Particle mass (kg).
    v : float
        Mean speed (m/s).
    sigma_v : float
        Rms speed spread (m/s), ``>= 0``.
    """

    m: float
    v: float
    sigma_v: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "m", _positive("m", self.m))
        object.__setattr__(self, "v", _positive("v", self.v))
        sv = float(self.sigma_v)
        if not (sv >= 0 and math.isfinite(sv)):
            raise ValidationError(f"sigma_v must be >= 0, got {sv!r}")
        object.__setattr__(self, "sigma_v", sv)

    @classmethod
    def from_wavelength(cls, m: float, lambda_dB: float, sigma_v: float = 0.0):
        """Beam whose de Broglie wavelength equals `lambda_dB`."""
        return cls(m, const.H / (m * _positive("lambda_dB", lambda_dB)), sigma_v)

    @property
    def lambda_dB(self) -> float:
        """De Broglie wavelength ``h/(m v)``."""
        return const.H / (self.m * self.v)

    @property
    def kinetic_energy(self) -> float:
        return 0.5 * self.m * self.v * self.v


@dataclass(frozen=True)
class GratingParams:
    """Grating with period ``d`` and optional open width ``w3``."""

    d: float
    w3: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "d", _positive("d", self.d))
        if self.w3 is not None:
            w3 = float(self.w3)
            if not (0 <= w3 <= self.d):
                raise ValidationError(f"w3 must lie in [0, d], got {w3!r}")
            object.__setattr__(self, "w3", w3)

    @property
    def G(self) -> float:
        """Reciprocal lattice vector ``2 pi/d``."""
        return 2.0 * math.pi / self.d


class DiffractionOrder(NamedTuple):
    n: int
    dp: float  # momentum transfer n hbar G
    theta: float  # small-angle deflection n lambda/d
    small_angle_ok: bool


def diffraction_orders(
    beam: BeamParams, grating: GratingParams, n_list: Sequence[int]
) -> list[DiffractionOrder]:
    """Momentum transfer and deflection angle of each diffraction order."""
    out = []
    for n in n_list:
        n = int(n)
        theta = n * beam.lambda_dB / grating.d
        out.append(DiffractionOrder(n, n * const.HBAR * grating.G, theta,
                                    abs(theta) <= SMALL_ANGLE_LIMIT))
    return out


class TalbotLengths(NamedTuple):
    L_talbot: float  # d^2 / lambda
    L_T: float  # 2 d^2 / lambda, Talbot-Lau convention


def talbot_lengths(lambda_dB: float, d: float) -> TalbotLengths:
    """Return both Talbot-length conventions."""
    lam = _positive("lambda_dB", lambda_dB)
    d = _positive("d", d)
    lt = d * d / lam
    return TalbotLengths(lt, 2.0 * lt)


class TalbotLauGeometry(NamedTuple):
    L2: float
    d_prime: float
    physical: bool  # False for a negative L2


def talbot_lau(L1: float, L_T: float, n: int, m_order: int, d: float) -> TalbotLauGeometry:
    """Second grating distance and fringe period of a Talbot-Lau interferometer.

    ``L2 = L1 q/(L1 - q)`` with ``q = L_T n/(2m)`` and
    ``d' = d (L2 + L1)/(m L1)``.

    Raises
    ------
    DivergenceError
        At the pole ``L1 = q``.
    """
    L1 = _positive("L1", L1)
    L_T = _positive("L_T", L_T)
    d = _positive("d", d)
    if int(m_order) == 0:
        raise ValidationError("m_order must be non-zero")
    q = L_T * n / (2.0 * m_order)
    if L1 == q or abs(L1 - q) <= 1e-12 * abs(q):
        raise DivergenceError(f"L1 = L_T n/(2m) = {q!r} is a pole of the Talbot-Lau relation")
    L2 = L1 / (L1 / q - 1.0)
    d_prime = d * ((L2 + L1) / (m_order * L1))
    return TalbotLauGeometry(L2, d_prime, L2 > 0)


def bragg_angle(lambda_dB: float, lambda_ph: float, order: int = 1) -> float:
    """Bragg angle ``arcsin(N lambda_dB/lambda_ph)``.

    Raises
    ------
    ValidationError
        When ``|N lambda_dB/lambda_ph| > 1`` and no solution exists.
    """
    arg = order * _positive("lambda_dB", lambda_dB) / _positive("lambda_ph", lambda_ph)
    if abs(arg) > 1.0:
        raise ValidationError(f"no Bragg solution: N lambda_dB/lambda_ph = {arg!r} > 1")
    return math.asin(arg)


class RecoilEnergy(NamedTuple):
    E_G: float
    omega_rec: float


def grating_recoil_energy(grating: GratingParams, m: float) -> RecoilEnergy:
    """Grating energy ``E_G = hbar^2 G^2/(2m) = 4 hbar omega_rec``."""
    m = _positive("m", m)
    e_g = (const.HBAR * grating.G) ** 2 / (2.0 * m)
    return RecoilEnergy(e_g, e_g / (4.0 * const.HBAR))


def diffraction_regime(U: float, E_G: float, ratio: float = 10.0) -> str:
    """Coarse regime tag: ``"bragg"`` when ``U < E_G/ratio``, ``"channeling"``
    when ``U > ratio E_G``, ``"intermediate"`` otherwise."""
    u = abs(float(U))
    e = _positive("E_G", E_G)
    if u < e / ratio:
        return "bragg"
    if u > ratio * e:
        return "channeling"
    return "intermediate"


def three_grating_phase(x1, x2, x3, G: float, delta_phi_int: float = 0.0):
    """Phase ``G (x1 - 2 x2 + x3) + delta_phi_int`` of a three-grating interferometer."""
    phi = G * (np.asarray(x1) - 2.0 * np.asarray(x2) + np.asarray(x3)) + delta_phi_int
    return float(phi) if np.ndim(phi) == 0 else phi


class MoireFactors(NamedTuple):
    intensity: float  # w3/d
    contrast: float  # sinc(G w3/2)
    zero_transmission: bool


def moire_mask(w3: float, d: float) -> MoireFactors:
    """Mean transmission and contrast factor of a masking grating."""
    d = _positive("d", d)
    w3 = float(w3)
    if not (0 <= w3 <= d):
        raise ValidationError(f"w3 must lie in [0, d], got {w3!r}")
    if w3 == 0:
        return MoireFactors(0.0, 1.0, True)
    x = math.pi * w3 / d  # G w3 / 2
    return MoireFactors(w3 / d, math.sin(x) / x, False)


def _warn_strong(V: float, beam: BeamParams) -> None:
    if abs(V) >= 0.01 * beam.kinetic_energy:
        warnings.warn(
            f"|V| = {abs(V):.3g} J is not small against E_kin = {beam.kinetic_energy:.3g} J; "
            "eikonal phase is inaccurate",
            ValidityWarning,
            stacklevel=3,
        )


def eikonal_phase(V: float, L_int: float, beam: BeamParams) -> float:
    """Eikonal phase ``-V L_int/(hbar v)`` of a uniform potential region.

    Warns with :class:`ValidityWarning` when ``V`` is not small compared with
    the kinetic energy.
    """
    _warn_strong(V, beam)
    return -V * L_int / (const.HBAR * beam.v)


def stark_phase(alpha_pol: float, E_field: float, L_int: float, beam: BeamParams) -> float:
    """Eikonal phase of the Stark potential ``V = -alpha E^2/2``.

    Parameters
    ----------
    alpha_pol : float
        Static polarizability in SI units (C m^2/V).
    """
    V = -0.5 * alpha_pol * E_field * E_field
    _warn_strong(V, beam)
    return -V * L_int / (const.HBAR * beam.v)


def refractive_index_from_potential(V: float, E_kin: float) -> float:
    """Matter-wave refractive index ``sqrt(1 - V/E_kin)``."""
    E_kin = _positive("E_kin", E_kin)
    ratio = V / E_kin
    if ratio >= 1:
        raise ValidationError("V >= E_kin: classically forbidden region")
    return math.exp(0.5 * math.log1p(-ratio))


def index_deviation(V: float, E_kin: float) -> float:
    """``|1 - n|`` evaluated without cancellation."""
    E_kin = _positive("E_kin", E_kin)
    ratio = V / E_kin
    if ratio >= 1:
        raise ValidationError("V >= E_kin: classically forbidden region")
    return abs(math.expm1(0.5 * math.log1p(-ratio)))


class Polarizability(NamedTuple):
    si: float  # C m^2 / V
    cgs_cm3: float  # alpha/(4 pi eps0) in cm^3


def polarizability_from_phase(
    phi: float, V_volt: float, D: float, L_eff: float, v: float
) -> Polarizability:
    """Static polarizability from a measured Stark phase.

    ``alpha = (phi/V^2)(D^2/L_eff)(2 hbar v)`` for plate voltage ``V`` across a
    gap ``D`` and effective interaction length ``L_eff``.
    """
    if V_volt == 0:
        raise DegenerateInputError("V = 0: polarizability is undetermined")
    D = _positive("D", D)
    L_eff = _positive("L_eff", L_eff)
    v = _positive("v", v)
    alpha = (phi / (V_volt * V_volt)) * (D * D / L_eff) * (2.0 * const.HBAR * v)
    return Polarizability(alpha, alpha / (4.0 * math.pi * const.EPS0) * 1e6)


def phase_from_polarizability(
    alpha_si: float, V_volt: float, D: float, L_eff: float, v: float
) -> float:
    """Inverse of :func:`polarizability_from_phase`."""
    D = _positive("D", D)
    L_eff = _positive("L_eff", L_eff)
    v = _positive("v", v)
    return alpha_si * V_volt * V_volt * L_eff / (D * D * 2.0 * const.HBAR * v)


def polarizability_si_from_cgs(alpha_cm3: float) -> float:
    return alpha_cm3 * 1e-6 * 4.0 * math.pi * const.EPS0


class GasIndex(NamedTuple):
    n: complex
    sigma_tot: float
    rho: float | None  # undefined for f_im = 0


def gas_index(N: float, f_re: float, f_im: float, k_lab: float, k_cm: float) -> GasIndex:
    """Complex index of a dilute gas and the optical-theorem cross section.

    ``n = 1 + (2 pi/(k_lab k_cm)) N (f_re + i f_im)``,
    ``sigma_tot = (4 pi/k_cm) f_im``, ``rho = f_re/f_im``.

    Parameters
    ----------
    N : float
        Number density of the gas (1/m^3).
    f_re, f_im : float
        Forward scattering amplitude (m) in the centre-of-mass frame.
    """
    k_lab = _positive("k_lab", k_lab)
    k_cm = _positive("k_cm", k_cm)
    n = 1.0 + (2.0 * math.pi / (k_lab * k_cm)) * N * complex(f_re, f_im)
    rho = f_re / f_im if f_im != 0 else None
    return GasIndex(n, 4.0 * math.pi / k_cm * f_im, rho)


def propagate_in_gas(x, N: float, f_re: float, f_im: float, k_lab: float, k_cm: float,
                     psi0: complex = 1.0):
    """Wave amplitude after a path ``x`` through the gas.

    ``psi(x) = psi0 exp(-i k_lab x) exp(i (2 pi/k_cm) N x f_re) exp(-(2 pi/k_cm) N x f_im)``.
    """
    x = np.asarray(x, dtype=float)
    k_lab = _positive("k_lab", k_lab)
    k_cm = _positive("k_cm", k_cm)
    c = 2.0 * math.pi / k_cm * N * x
    return psi0 * np.exp(-1j * k_lab * x) * np.exp(1j * c * f_re) * np.exp(-c * f_im)


def s_wave_amplitude(a: float, k: float) -> complex:
    """Low-energy forward amplitude ``-a (1 - i k a)``."""
    return -a * complex(1.0, -k * a)


class CoherenceLengths(NamedTuple):
    longitudinal: float  # (lambda/2 pi)(v/sigma_v); inf when sigma_v = 0
    transverse_angle: float | None  # lambda/(2 alpha)
    transverse_source: float | None  # (lambda/2)(z/w)
    transverse_footnote: float | None  # lambda/theta convention


def coherence_lengths(
    beam: BeamParams,
    collimation_angle: float | None = None,
    source: tuple[float, float] | None = None,
) -> CoherenceLengths:
    """Longitudinal and transverse coherence lengths.

    Parameters
    ----------
    collimation_angle : float, optional
        Full collimation angle ``alpha`` (rad).
    source : (z, w), optional
        Distance ``z`` from a source of width ``w``.
    """
    lam = beam.lambda_dB
    ell_c = math.inf if beam.sigma_v == 0 else lam / (2.0 * math.pi) * beam.v / beam.sigma_v
    t_angle = t_foot = t_src = None
    if collimation_angle is not None:
        a = _positive("collimation_angle", collimation_angle)
        t_angle = lam / (2.0 * a)
        t_foot = lam / a
    if source is not None:
        z, w = source
        t_src = 0.5 * lam * _positive("z", z) / _positive("w", w)
    return CoherenceLengths(ell_c, t_angle, t_src, t_foot)


def wavepacket_spread(t, sigma_x0: float, sigma_k0: float, m: float):
    """Free-particle width ``sqrt(sigma_x0^2 + (hbar t/m)^2 sigma_k0^2)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValidationError("t must be >= 0")
    m = _positive("m", m)
    s = np.sqrt(sigma_x0 ** 2 + (const.HBAR * t / m) ** 2 * sigma_k0 ** 2)
    return float(s) if s.ndim == 0 else s


class Velocities(NamedTuple):
    phase: float
    group: float


def velocities(v: float, n_index: float = 1.0) -> Velocities:
    """Phase velocity ``v/(2n)`` and group velocity ``v/n`` of a matter wave."""
    v = _positive("v", v)
    n_index = _positive("n_index", n_index)
    return Velocities(v / (2.0 * n_index), v / n_index)


def diffraction_table(
    m: float, velocities_: Sequence[float], d: float, orders: Sequence[int] = (1,)
) -> dict[str, np.ndarray]:
    """Batch table of wavelength, Talbot lengths and deflection angles over speeds."""
    vs = np.asarray(velocities_, dtype=float)
    if np.any(vs <= 0):
        raise ValidationError("velocities must be positive")
    d = _positive("d", d)
    lam = const.H / (m * vs)
    table = {
        "v": vs,
        "lambda_dB": lam,
        "L_talbot": d * d / lam,
        "L_T": 2.0 * d * d / lam,
    }
    for n in orders:
        table[f"theta_{int(n)}"] = int(n) * lam / d
    return table
