"""Mean-field bosonic Josephson junction.

State variables are the population imbalance ``z = (N_l - N_r)/N`` and the
relative phase ``phi``. With ``Omega_R = 2J`` (hbar = 1)::

    dz/dt   = -Omega_R sqrt(1 - z^2) sin(phi)
    dphi/dt = -delta + U N z + Omega_R z cos(phi) / sqrt(1 - z^2)

generated by ``H = -delta z + (UN/2) z^2 - Omega_R sqrt(1 - z^2) cos(phi)``
through ``dz/dt = -dH/dphi`` and ``dphi/dt = dH/dz``. The phase is kept
unwrapped during integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from mwlab import _kernels
from mwlab.errors import (
    NumericalError,
    PoleError,
    UnsupportedConfigurationError,
    ValidationError,
)
from mwlab.twomode import BoseHubbardParams, classify_regime, wrap_phase

POLE_TOL = 1e-12
START_MARGIN = 1e-9
DEFAULT_TOL = 1e-9
DEFAULT_MAX_STEPS = 10_000_000


class MeanFieldState(NamedTuple):
    z: float
    phi: float

    @property
    def phi_wrapped(self) -> float:
        return wrap_phase(self.phi)


@dataclass(frozen=True, eq=False)
class MeanFieldTrajectory:
    """Sampled mean-field solution.

    Attributes
    ----------
    times, z, phi, energy : ndarray
        Sample times, imbalance, unwrapped phase and ``H_MF`` per sample.
    n_rejected : int
        Rejected steps of the adaptive integrator.
    """

    times: np.ndarray
    z: np.ndarray
    phi: np.ndarray
    energy: np.ndarray
    n_accepted: int = 0
    n_rejected: int = 0
    truncated: bool = False

    @property
    def states(self) -> list[MeanFieldState]:
        return [MeanFieldState(float(a), float(b)) for a, b in zip(self.z, self.phi)]

    @property
    def phi_wrapped(self) -> np.ndarray:
        return wrap_phase(self.phi)

    @property
    def energy_drift(self) -> float:
        """Maximal ``|H(t) - H(0)|`` over the samples."""
        return float(np.max(np.abs(self.energy - self.energy[0])))


def _coefficients(params: BoseHubbardParams) -> tuple[float, float, float]:
    return params.rabi_frequency, params.U * params.N, params.delta


def josephson_rhs(state: MeanFieldState, params: BoseHubbardParams) -> tuple[float, float]:
    """Right-hand side ``(dz/dt, dphi/dt)`` of the Josephson equations.

    Raises
    ------
    PoleError
        If ``|z| >= 1`` where ``dphi/dt`` is singular.
    """
    z, phi = float(state[0]), float(state[1])
    if abs(z) >= 1.0:
        raise PoleError(f"|z| = {abs(z)!r} >= 1: phase equation is singular")
    omega, un, delta = _coefficients(params)
    s = math.sqrt(1.0 - z * z)
    return -omega * s * math.sin(phi), -delta + un * z + omega * z * math.cos(phi) / s


def energy(state, params: BoseHubbardParams):
    """Mean-field energy ``H_MF``; accepts scalars or arrays for ``z, phi``."""
    z = np.asarray(state[0], dtype=float)
    phi = np.asarray(state[1], dtype=float)
    if np.any(np.abs(z) > 1.0):
        raise ValidationError("|z| must be <= 1")
    omega, un, delta = _coefficients(params)
    h = -delta * z + 0.5 * un * z * z - omega * np.sqrt(1.0 - z * z) * np.cos(phi)
    return float(h) if h.ndim == 0 else h


def integrate(
    initial: MeanFieldState | Sequence[float],
    params: BoseHubbardParams,
    t_end: float,
    tol: float = DEFAULT_TOL,
    t_eval: Sequence[float] | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
    backend: str | None = None,
    project_energy: bool = True,
) -> MeanFieldTrajectory:
    """Integrate the Josephson equations with adaptive Dormand-Prince 5(4).

    Parameters
    ----------
    initial : (z0, phi0)
        Start point with ``|z0| <= 1 - 1e-9``.
    t_end : float
        Final time in units of ``1/J``.
    tol : float
        Relative and absolute local error tolerance.
    t_eval : sequence of float, optional
        Output times in (0, t_end]; steps land on them exactly. By default
        every accepted step is recorded.
    backend : {"cython", "python"}, optional
        Kernel override; defaults to the compiled kernel when available.
    project_energy : bool
        Project each accepted step back onto the initial energy surface, which
        keeps ``|H(t) - H(0)|`` at round-off level over long runs.

    Raises
    ------
    PoleError
        Trajectory reached ``|z| >= 1 - 1e-12``; the partial trajectory is
        attached as ``exc.partial``.
    NumericalError
        Step budget exhausted or step size underflow.
    """
    z0, phi0 = float(initial[0]), float(initial[1])
    if not (math.isfinite(z0) and math.isfinite(phi0)):
        raise ValidationError("initial state must be finite")
    if abs(z0) > 1.0 - START_MARGIN:
        raise ValidationError(f"|z0| must be <= 1 - {START_MARGIN:g}, got {z0!r}")
    t_end = float(t_end)
    if not (t_end >= 0 and math.isfinite(t_end)):
        raise ValidationError(f"t_end must be finite and >= 0, got {t_end!r}")
    if not (0 < tol < 1):
        raise ValidationError(f"tol must lie in (0, 1), got {tol!r}")
    if t_eval is None:
        te = np.empty(0)
    else:
        te = np.asarray(t_eval, dtype=float).ravel()
        te = te[te > 0]
        if te.size == 0:
            raise ValidationError("t_eval must contain positive times")
        if np.any(np.diff(te) <= 0) or te[-1] > t_end * (1 + 1e-15):
            raise ValidationError("t_eval must be strictly increasing within (0, t_end]")
    omega, un, delta = _coefficients(params)
    kernel = _kernels.get_integrator(backend)
    ts, zs, ps, status, n_acc, n_rej = kernel(
        z0, phi0, t_end, omega, un, delta, tol, tol, te, int(max_steps), POLE_TOL,
        bool(project_energy),
    )
    traj = MeanFieldTrajectory(
        times=ts, z=zs, phi=ps,
        energy=energy((np.clip(zs, -1.0, 1.0), ps), params) if zs.size else zs,
        n_accepted=int(n_acc), n_rejected=int(n_rej), truncated=status != 0,
    )
    if status == 1:
        raise PoleError(
            f"trajectory reached |z| >= 1 - {POLE_TOL:g} at t = {ts[-1]!r}", partial=traj
        )
    if status == 2:
        raise NumericalError(f"step budget of {max_steps} exhausted at t = {ts[-1]!r}")
    if status == 3:
        raise NumericalError(f"step size underflow at t = {ts[-1]!r}")
    return traj


class Frequencies(NamedTuple):
    rabi: float
    plasma: float
    pi_minus: float | None  # undefined for gamma N > 1
    pi_plus: float | None  # undefined for gamma N < 1


def characteristic_frequencies(params: BoseHubbardParams) -> Frequencies:
    """Rabi, plasma and pi-mode small-oscillation frequencies."""
    if params.J <= 0:
        raise ValidationError("characteristic frequencies require J > 0")
    om = params.rabi_frequency
    gn = params.gamma_n
    if 1.0 + gn < 0:
        raise ValidationError(f"1 + gamma N must be >= 0, got {1.0 + gn!r}")
    plasma = om * math.sqrt(1.0 + gn)
    pi_minus = om * math.sqrt(1.0 - gn) if gn <= 1.0 else None
    pi_plus = om * math.sqrt(1.0 - gn ** -2) if gn >= 1.0 else None
    return Frequencies(om, plasma, pi_minus, pi_plus)


class FixedPoint(NamedTuple):
    z: float
    phi: float
    stability: str  # "stable", "unstable" or "marginal"


def pi_mode_imbalance(gamma_n: float) -> float | None:
    """Imbalance ``sqrt(1 - (gamma N)^-2)`` of the pi fixed points, ``None`` for gamma N < 1."""
    if gamma_n < 1.0:
        return None
    return math.sqrt(1.0 - gamma_n ** -2)


def fixed_points(params: BoseHubbardParams) -> list[FixedPoint]:
    """Fixed points of the unbiased junction.

    Raises
    ------
    UnsupportedConfigurationError
        For ``delta != 0``.
    """
    if params.delta != 0:
        raise UnsupportedConfigurationError("fixed points are implemented for delta = 0 only")
    gn = params.gamma_n
    points = [FixedPoint(0.0, 0.0, "stable" if gn > -1.0 else "unstable")]
    if gn < 1.0:
        points.append(FixedPoint(0.0, math.pi, "stable"))
    elif gn == 1.0:
        points.append(FixedPoint(0.0, math.pi, "marginal"))
    else:
        points.append(FixedPoint(0.0, math.pi, "unstable"))
        zp = pi_mode_imbalance(gn)
        points.append(FixedPoint(zp, math.pi, "stable"))
        points.append(FixedPoint(-zp, math.pi, "stable"))
    return points


def z_max(gamma_n: float) -> float | None:
    """Largest Josephson-oscillation amplitude ``2 sqrt(gN - 1)/gN``.

    Returns ``None`` in the Rabi regime ``gamma N < 1`` where it is undefined,
    and ``0`` in the limit ``gamma N -> inf``.
    """
    if gamma_n < 1.0:
        return None
    if math.isinf(gamma_n):
        return 0.0
    return 2.0 * math.sqrt(gamma_n - 1.0) / gamma_n


def separatrix_lambda(z0: float, phi0: float) -> float:
    """Critical ``Lambda = gamma N`` above which ``(z0, phi0)`` self-traps."""
    if z0 == 0:
        return math.inf
    return 2.0 * (1.0 + math.sqrt(1.0 - z0 * z0) * math.cos(phi0)) / (z0 * z0)


def zero_crossings(times: np.ndarray, signal: np.ndarray) -> np.ndarray:
    """Linearly interpolated times where `signal` changes sign."""
    s = np.asarray(signal, dtype=float)
    t = np.asarray(times, dtype=float)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    frac = s[idx] / (s[idx] - s[idx + 1])
    return t[idx] + frac * (t[idx + 1] - t[idx])


def oscillation_frequency(times: np.ndarray, signal: np.ndarray) -> float:
    """Angular frequency from the mean spacing of zero crossings.

    Raises
    ------
    NumericalError
        With fewer than three crossings.
    """
    tc = zero_crossings(times, np.asarray(signal) - np.mean(signal))
    if tc.size < 3:
        raise NumericalError("need at least three zero crossings to measure a frequency")
    half_period = (tc[-1] - tc[0]) / (tc.size - 1)
    return math.pi / half_period


def classify_orbit(traj: MeanFieldTrajectory, params: BoseHubbardParams) -> str:
    """Tag a trajectory as rabi-like, josephson-oscillation, pi-mode or self-trapped.

    A running phase (unwrapped span above 2 pi) marks self-trapping. Bounded
    orbits are rabi-like in the Rabi regime; otherwise pi-mode when they circle
    ``phi = pi`` (mean ``cos(phi) < 0``) and josephson-oscillation when
    ``z`` crosses zero around ``phi = 0``.
    """
    span = float(np.max(traj.phi) - np.min(traj.phi))
    if span > 2.0 * math.pi:
        return "self-trapped"
    rabi = params.J > 0 and classify_regime(params) == "Rabi"
    if params.U == 0 or rabi:
        return "rabi-like"
    if float(np.mean(np.cos(traj.phi))) < 0:
        return "pi-mode"
    return "josephson-oscillation"


@dataclass(frozen=True, eq=False)
class Orbit:
    z0: float
    phi0: float
    trajectory: MeanFieldTrajectory
    tag: str
    truncated: bool = False
    crosses_zero: bool = field(default=False)


def portrait_grid(n_z: int, n_phi: int, z_limit: float = 0.99) -> list[tuple[float, float]]:
    """Rectangular grid of initial conditions ``|z| <= z_limit``, ``phi`` in (-pi, pi]."""
    if n_z < 1 or n_phi < 1:
        raise ValidationError("grid sizes must be >= 1")
    if not (0 <= z_limit <= 0.99):
        raise ValidationError("z_limit must lie in [0, 0.99]")
    zs = np.linspace(-z_limit, z_limit, n_z) if n_z > 1 else np.array([0.0])
    ps = -math.pi + 2.0 * math.pi * (np.arange(n_phi) + 1) / n_phi
    return [(float(z), float(p)) for z in zs for p in ps]


def phase_portrait(
    params: BoseHubbardParams,
    grid: Iterable[tuple[float, float]],
    t_end: float,
    tol: float = DEFAULT_TOL,
    n_samples: int = 400,
) -> list[Orbit]:
    """Integrate and tag one orbit per initial condition.

    Orbits that hit the pole keep their partial polyline and are marked
    ``truncated``.
    """
    orbits = []
    t_eval = np.linspace(0.0, t_end, n_samples + 1)[1:]
    for z0, phi0 in grid:
        if abs(z0) > 0.99:
            raise ValidationError(f"grid point z0 = {z0!r} outside |z| <= 0.99")
        truncated = False
        try:
            traj = integrate((z0, phi0), params, t_end, tol=tol, t_eval=t_eval)
        except PoleError as exc:
            traj = exc.partial
            truncated = True
        tag = classify_orbit(traj, params)
        crosses = bool(np.any(traj.z[:-1] * traj.z[1:] < 0))
        orbits.append(Orbit(z0, phi0, traj, tag, truncated, crosses))
    return orbits
