"""Exact two-site Bose-Hubbard model.

Units: hbar = 1 throughout this module, so ``J``, ``U`` and ``delta`` are
angular frequencies and times are their inverses.

The Fock basis is ``|N-k, k>`` for ``k = 0..N`` where ``k`` counts atoms in
the right mode. The spin operators are::

    S_z = (n_l - n_r)/2            (eigenvalue N/2 - k)
    S_x = (l^+ r + r^+ l)/2
    S_y = (l^+ r - r^+ l)/(2i)

so that ``H = -2J S_x + U S_z^2 - delta S_z`` up to a constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg
from scipy.special import gammaln

from mwlab.errors import CapacityError, DegenerateInputError, ValidationError

DEFAULT_CAP = 4097  # maximal Hilbert-space dimension N + 1
NORM_TOL = 1e-10


def _is_integer(value) -> bool:
    if isinstance(value, bool):
        return False
    if isinstance(value, (int, np.integer)):
        return True
    return isinstance(value, float) and value.is_integer()


def _finite(name: str, value) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class BoseHubbardParams:
    """Parameters of the two-site Bose-Hubbard Hamiltonian.

    Parameters
    ----------
    J : float
        Tunnelling energy, ``J >= 0``.
    U : float
        On-site interaction; any sign.
    N : int
        Total atom number, ``N >= 1``.
    delta : float, optional
        Energy bias between the wells.
    """

    J: float
    U: float
    N: int
    delta: float = 0.0

    def __post_init__(self):
        if not _is_integer(self.N):
            raise ValidationError(f"N must be an integer, got {self.N!r}")
        if int(self.N) < 1:
            raise ValidationError(f"N must be >= 1, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        J = _finite("J", self.J)
        if J < 0:
            raise ValidationError(f"J must be >= 0, got {J!r}")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "U", _finite("U", self.U))
        object.__setattr__(self, "delta", _finite("delta", self.delta))

    @classmethod
    def from_gamma(cls, N: int, gamma: float, J: float = 1.0, delta: float = 0.0):
        """Build parameters from the interaction ratio ``gamma = U/(2J)``."""
        return cls(J=J, U=2.0 * J * gamma, N=N, delta=delta)

    @property
    def gamma(self) -> float:
        """Interaction ratio ``U/(2J)``; requires ``J > 0``."""
        if self.J == 0:
            raise ValidationError("gamma = U/(2J) is undefined for J = 0")
        return self.U / (2.0 * self.J)

    @property
    def gamma_n(self) -> float:
        """Dimensionless interaction ``Lambda = gamma N``."""
        return self.gamma * self.N

    @property
    def rabi_frequency(self) -> float:
        """Single-particle Rabi frequency ``Omega_R = 2J``."""
        return 2.0 * self.J

    @property
    def plasma_frequency(self) -> float:
        """Small-oscillation frequency ``Omega_R sqrt(1 + gamma N)``."""
        return self.rabi_frequency * math.sqrt(1.0 + self.gamma_n)


@dataclass(frozen=True, eq=False)
class TwoModeState:
    """Amplitude vector over the Fock basis ``|N-k, k>``."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=np.complex128, copy=True).ravel()
        if amp.size < 2:
            raise ValidationError("a two-mode state needs at least two amplitudes")
        if not np.all(np.isfinite(amp)):
            raise ValidationError("state amplitudes must be finite")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def normalized(cls, amplitudes) -> "TwoModeState":
        amp = np.asarray(amplitudes, dtype=np.complex128)
        norm = np.linalg.norm(amp)
        if norm == 0:
            raise ValidationError("cannot normalize the zero vector")
        return cls(amp / norm)

    @classmethod
    def fock(cls, N: int, k: int) -> "TwoModeState":
        """Fock state ``|N-k, k>``."""
        if not (0 <= k <= N):
            raise ValidationError(f"k must lie in [0, {N}], got {k}")
        amp = np.zeros(N + 1, dtype=np.complex128)
        amp[k] = 1.0
        return cls(amp)

    @property
    def N(self) -> int:
        return self.amplitudes.size - 1

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class BlochAngle:
    """Direction on the Bloch sphere with ``theta`` in [0, pi], ``phi`` in (-pi, pi]."""

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        theta = _finite("theta", self.theta)
        phi = _finite("phi", self.phi)
        if not (0.0 <= theta <= math.pi):
            raise ValidationError(f"theta must lie in [0, pi], got {theta!r}")
        if not (-math.pi < phi <= math.pi):
            raise ValidationError(f"phi must lie in (-pi, pi], got {phi!r}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def wrapped(cls, theta: float, phi: float) -> "BlochAngle":
        """Construct with ``phi`` wrapped into (-pi, pi]."""
        return cls(theta, wrap_phase(phi))


def wrap_phase(phi):
    """Wrap angles into (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2.0 * np.pi)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class SpinObservables:
    """Spin expectation values, variances and squeezing factors.

    ``xi_s`` is ``None`` when ``<S_x>`` vanishes and the spin squeezing
    factor is undefined.
    """

    N: int
    sx: float
    sy: float
    sz: float
    var_sx: float
    var_sy: float
    var_sz: float
    xi_n: float
    xi_phi: float
    xi_s: float | None
    coherence: float

    @property
    def xi_s_defined(self) -> bool:
        return self.xi_s is not None


def _check_cap(dim: int, cap: int) -> None:
    if dim > cap:
        raise CapacityError(
            f"Hilbert-space dimension {dim} exceeds the cap {cap}; raise `cap` explicitly"
        )


def _require_normalized(state: TwoModeState) -> None:
    if abs(state.norm - 1.0) > NORM_TOL:
        raise ValidationError(f"state is not normalized (norm = {state.norm!r})")


def _link_amplitudes(N: int) -> np.ndarray:
    k = np.arange(N, dtype=float)
    return np.sqrt((N - k) * (k + 1.0))


def hamiltonian_bands(params: BoseHubbardParams) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and first off-diagonal of the tridiagonal Hamiltonian."""
    N = params.N
    k = np.arange(N + 1, dtype=float)
    diag = 0.5 * params.U * ((N - k) * (N - k - 1.0) + k * (k - 1.0))
    diag = diag + 0.5 * params.delta * (2.0 * k - N)
    off = -params.J * _link_amplitudes(N)
    return diag, off


def build_hamiltonian(params: BoseHubbardParams) -> np.ndarray:
    """Dense real symmetric Hamiltonian of dimension ``N + 1``."""
    diag, off = hamiltonian_bands(params)
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def spectrum(params: BoseHubbardParams, cap: int = DEFAULT_CAP) -> np.ndarray:
    """All eigenvalues in ascending order."""
    _check_cap(params.N + 1, cap)
    diag, off = hamiltonian_bands(params)
    return linalg.eigh_tridiagonal(diag, off, eigvals_only=True)


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    # argmax returns the lowest index among ties
    i = int(np.argmax(np.abs(vec)))
    return vec * (np.conj(vec[i]) / abs(vec[i]))


def ground_state(
    params: BoseHubbardParams, cap: int = DEFAULT_CAP
) -> tuple[TwoModeState, float]:
    """Lowest eigenstate and its energy.

    The global phase makes the largest-magnitude amplitude real positive.
    For an exactly diagonal Hamiltonian (``J = 0``) degenerate minima are
    resolved in favour of the lowest Fock index.

    Raises
    ------
    CapacityError
        If ``N + 1`` exceeds `cap`.
    """
    _check_cap(params.N + 1, cap)
    diag, off = hamiltonian_bands(params)
    if params.J == 0:
        k = int(np.argmin(diag))
        return TwoModeState.fock(params.N, k), float(diag[k])
    w, v = linalg.eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    vec = v[:, 0].astype(np.complex128)
    vec /= np.linalg.norm(vec)
    return TwoModeState(_fix_phase(vec)), float(w[0])


def split_eigensystem(J: float, delta: float) -> tuple[float, float, float]:
    """Eigenvalues and mixing angle of a biased two-level system.

    Returns
    -------
    (E_g, E_e, theta_mix)
        ``E_{e,g} = +-sqrt(J^2 + delta^2/4)`` and ``tan(theta_mix) = -2J/delta``
        on the principal branch, with ``theta_mix = pi/2`` at ``delta = 0``.
    """
    J = _finite("J", J)
    delta = _finite("delta", delta)
    if J == 0 and delta == 0:
        raise DegenerateInputError("J = delta = 0: the two levels are degenerate")
    e = math.hypot(J, 0.5 * delta)
    theta = math.pi / 2 if delta == 0 else math.atan(-2.0 * J / delta)
    return -e, e, theta


def _eigensystem(params: BoseHubbardParams, cap: int):
    _check_cap(params.N + 1, cap)
    diag, off = hamiltonian_bands(params)
    return linalg.eigh_tridiagonal(diag, off)


def _crank_nicolson(psi, params, t, dt_max):
    n_steps = max(1, math.ceil(t / dt_max))
    dt = t / n_steps
    diag, off = hamiltonian_bands(params)
    n = diag.size
    # banded form of (1 + i H dt/2)
    ab = np.zeros((3, n), dtype=np.complex128)
    ab[0, 1:] = 0.5j * dt * off
    ab[1, :] = 1.0 + 0.5j * dt * diag
    ab[2, :-1] = 0.5j * dt * off
    for _ in range(n_steps):
        rhs = (1.0 - 0.5j * dt * diag) * psi
        rhs[:-1] -= 0.5j * dt * off * psi[1:]
        rhs[1:] -= 0.5j * dt * off * psi[:-1]
        psi = linalg.solve_banded((1, 1), ab, rhs)
    return psi


def evolve(
    state: TwoModeState,
    params: BoseHubbardParams,
    t: float,
    dt_max: float | None = None,
    method: str = "spectral",
    cap: int = DEFAULT_CAP,
) -> TwoModeState:
    """Propagate ``exp(-iHt)|psi>``.

    Parameters
    ----------
    method : {"spectral", "crank-nicolson"}
        Full spectral decomposition (default) or norm-preserving
        Crank-Nicolson stepping with step at most `dt_max`.
    """
    _require_normalized(state)
    if state.N != params.N:
        raise ValidationError(f"state has N={state.N} but params have N={params.N}")
    t = _finite("t", t)
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t!r}")
    psi = state.amplitudes
    if method == "spectral":
        w, v = _eigensystem(params, cap)
        out = v @ (np.exp(-1j * w * t) * (v.T @ psi))
    elif method == "crank-nicolson":
        _check_cap(params.N + 1, cap)
        if t == 0:
            return state
        if dt_max is None:
            dt_max = t / 1000.0
        if not dt_max > 0:
            raise ValidationError(f"dt_max must be > 0, got {dt_max!r}")
        out = _crank_nicolson(psi.copy(), params, t, dt_max)
    else:
        raise ValidationError(f"unknown evolution method {method!r}")
    return TwoModeState(out)


def evolve_series(
    state: TwoModeState,
    params: BoseHubbardParams,
    times: Sequence[float],
    cap: int = DEFAULT_CAP,
) -> list[TwoModeState]:
    """Spectral evolution to several times sharing one diagonalization."""
    _require_normalized(state)
    if state.N != params.N:
        raise ValidationError(f"state has N={state.N} but params have N={params.N}")
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or not np.all(np.isfinite(times)):
        raise ValidationError("times must be finite and >= 0")
    w, v = _eigensystem(params, cap)
    coeff = v.T @ state.amplitudes
    return [TwoModeState(v @ (np.exp(-1j * w * t) * coeff)) for t in times]


def energy_expectation(state: TwoModeState, params: BoseHubbardParams) -> float:
    """``<psi|H|psi>`` without forming the dense matrix."""
    diag, off = hamiltonian_bands(params)
    c = state.amplitudes
    hc = diag * c
    hc[:-1] += off * c[1:]
    hc[1:] += off * c[:-1]
    return float(np.real(np.vdot(c, hc)))


def _coherent_amplitudes(theta: float, phi: float, N: int) -> np.ndarray:
    k = np.arange(N + 1, dtype=float)
    c = math.cos(0.5 * theta)
    s = math.sin(0.5 * theta)
    if s == 0.0:
        mag = np.zeros(N + 1)
        mag[0] = 1.0
    elif c <= 0.0:
        mag = np.zeros(N + 1)
        mag[N] = 1.0
    else:
        logbin = gammaln(N + 1.0) - gammaln(k + 1.0) - gammaln(N - k + 1.0)
        mag = np.exp(0.5 * logbin + (N - k) * math.log(c) + k * math.log(s))
        mag /= np.linalg.norm(mag)
    return mag * np.exp(1j * k * phi)


def coherent_state(angle: BlochAngle, N: int) -> TwoModeState:
    """Coherent spin state ``|theta, phi>`` of ``N`` atoms.

    Amplitudes ``c_k = sqrt(C(N,k)) cos^(N-k)(theta/2) sin^k(theta/2) e^(ik phi)``,
    evaluated in log space so that large ``N`` does not overflow.
    """
    if not _is_integer(N) or int(N) < 1:
        raise ValidationError(f"N must be an integer >= 1, got {N!r}")
    return TwoModeState(_coherent_amplitudes(angle.theta, angle.phi, int(N)))


def _apply_sx(c: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(c)
    out[:-1] += 0.5 * t * c[1:]
    out[1:] += 0.5 * t * c[:-1]
    return out


def _apply_sy(c: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(c)
    out[:-1] += (-0.5j) * t * c[1:]
    out[1:] += 0.5j * t * c[:-1]
    return out


def spin_observables(state: TwoModeState) -> SpinObservables:
    """Spin moments and squeezing factors of a normalized state.

    ``xi_N^2 = var(S_z)/(N/4)``, ``xi_phi^2 = 4 var(S_y)/N`` and the reduced
    spin squeezing factor ``xi_S = sqrt(N) dS_z/|<S_x>|``.
    """
    _require_normalized(state)
    c = state.amplitudes
    N = state.N
    k = np.arange(N + 1, dtype=float)
    p = np.abs(c) ** 2
    sz_vals = 0.5 * N - k
    sz = float(np.dot(p, sz_vals))
    var_sz = max(float(np.dot(p, sz_vals**2)) - sz * sz, 0.0)
    t = _link_amplitudes(N)
    lr = complex(np.sum(np.conj(c[:-1]) * c[1:] * t))
    sx, sy = lr.real, lr.imag
    var_sx = max(float(np.sum(np.abs(_apply_sx(c, t)) ** 2)) - sx * sx, 0.0)
    var_sy = max(float(np.sum(np.abs(_apply_sy(c, t)) ** 2)) - sy * sy, 0.0)
    xi_n = math.sqrt(var_sz / (0.25 * N))
    xi_phi = math.sqrt(4.0 * var_sy / N)
    if abs(sx) > 1e-12 * N:
        xi_s = math.sqrt(N) * math.sqrt(var_sz) / abs(sx)
    else:
        xi_s = None
    return SpinObservables(
        N=N, sx=sx, sy=sy, sz=sz, var_sx=var_sx, var_sy=var_sy, var_sz=var_sz,
        xi_n=xi_n, xi_phi=xi_phi, xi_s=xi_s, coherence=2.0 * sx / N,
    )


def husimi_q(state: TwoModeState, angle: BlochAngle) -> float:
    """Husimi distribution ``|<theta, phi|psi>|^2``."""
    a = _coherent_amplitudes(angle.theta, angle.phi, state.N)
    q = abs(np.vdot(a, state.amplitudes)) ** 2
    return float(min(max(q, 0.0), 1.0))


def husimi_grid(state: TwoModeState, thetas, phis) -> np.ndarray:
    """Husimi distribution on the outer grid ``thetas x phis``.

    Returns an array of shape ``(len(thetas), len(phis))``.
    """
    N = state.N
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    mags = np.array([_coherent_amplitudes(th, 0.0, N).real for th in thetas])
    k = np.arange(N + 1)
    phase = np.exp(-1j * np.outer(k, phis))
    amp = (mags * state.amplitudes[None, :]) @ phase
    return np.clip(np.abs(amp) ** 2, 0.0, 1.0)


def phase_distribution(state: TwoModeState, phis) -> np.ndarray:
    """Operational relative-phase density from equatorial coherent states.

    ``P(phi) = Q(pi/2, phi) / int Q(pi/2, phi') dphi'``; the normalization is
    evaluated in closed form, so ``P`` integrates to one over (-pi, pi].
    """
    _require_normalized(state)
    N = state.N
    b = _coherent_amplitudes(0.5 * math.pi, 0.0, N).real
    weights = b * state.amplitudes
    norm = 2.0 * math.pi * float(np.sum(np.abs(weights) ** 2))
    k = np.arange(N + 1)
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    amp = np.exp(-1j * np.outer(phis, k)) @ weights
    return np.abs(amp) ** 2 / norm


def fock_energy(n_diff: int, params: BoseHubbardParams) -> float:
    """Energy of the Fock state with imbalance ``n = n_l - n_r``.

    ``E(n) = E(0) - (delta/2) n + (U/4) n^2`` with ``E(0) = U N (N - 2)/4``,
    identical to the diagonal of :func:`build_hamiltonian`.
    """
    N = params.N
    if not _is_integer(n_diff):
        raise ValidationError(f"n_diff must be an integer, got {n_diff!r}")
    n = int(n_diff)
    if abs(n) > N:
        raise ValidationError(f"|n_diff| must be <= N = {N}, got {n}")
    if (N - n) % 2:
        raise ValidationError(f"n_diff = {n} must have the parity of N = {N}")
    e0 = 0.25 * params.U * N * (N - 2)
    return e0 - 0.5 * params.delta * n + 0.25 * params.U * n * n


def phase_diffusion_rate(xi_n: float, N: int, U: float) -> float:
    """Phase diffusion rate ``R = xi_N sqrt(N) U``."""
    return xi_n * math.sqrt(N) * U


def phase_diffusion_variance(
    t: float, xi_n: float, N: int, U: float, var0: float = 0.0
) -> float:
    """Relative-phase variance ``var0 + R^2 t^2`` under interactions."""
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t!r}")
    r = phase_diffusion_rate(xi_n, N, U)
    return var0 + r * r * t * t


def phase_diffusion_variance_from_number(
    t: float, delta_sz: float, U: float, var0: float = 0.0
) -> float:
    """Phase variance from the number spread: ``var0 + 4 dS_z^2 U^2 t^2``.

    For ``H = U S_z^2`` the phase runs at ``dphi/dt = 2 U S_z``, so a spread
    ``dS_z`` in ``S_z`` dephases at rate ``2 U dS_z``. With
    ``dS_z = xi_N sqrt(N)/2`` this equals :func:`phase_diffusion_variance`.
    """
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t!r}")
    return var0 + 4.0 * delta_sz * delta_sz * U * U * t * t


class HarmonicFluctuations(NamedTuple):
    delta_sz: float
    delta_phi: float
    coherence: float
    valid: bool  # False once gamma >= N (outside the harmonic regime)


def harmonic_ground_fluctuations(params: BoseHubbardParams) -> HarmonicFluctuations:
    """Ground-state number and phase spreads in the harmonic approximation.

    ``dS_z = (sqrt(N)/2)(1 + gamma N)^(-1/4)``,
    ``dphi = (1 + gamma N)^(1/4)/sqrt(N)`` and coherence ``1 - dphi^2/2``.
    """
    if params.J <= 0:
        raise ValidationError("harmonic approximation requires J > 0")
    N = params.N
    gn = params.gamma_n
    if 1.0 + gn <= 0:
        raise ValidationError(f"1 + gamma N must be > 0, got {1.0 + gn!r}")
    q = (1.0 + gn) ** 0.25
    root_n = math.sqrt(N)
    dsz = 0.5 * root_n / q
    dphi = q / root_n
    return HarmonicFluctuations(dsz, dphi, 1.0 - 0.5 * dphi * dphi, params.gamma < N)


def adiabaticity_margin(J: float, delta: float, dJ_dt: float, ddelta_dt: float) -> float:
    """Adiabaticity ratio ``|dJ/dt + (d delta/dt)/2| / (4J^2 + delta^2)``.

    Values well below one indicate adiabatic following of the eigenstates.
    """
    denom = 4.0 * J * J + delta * delta
    if denom == 0:
        raise DegenerateInputError("J = delta = 0: adiabaticity margin is singular")
    return abs(dJ_dt + 0.5 * ddelta_dt) / denom


def classify_regime(params: BoseHubbardParams) -> str:
    """``"Rabi"``, ``"Josephson"`` or ``"Fock"`` by ``gamma`` against ``1/N`` and ``N``.

    Boundaries belong to the Josephson regime.
    """
    if params.J <= 0:
        raise ValidationError("regime classification requires J > 0")
    g = params.gamma
    N = params.N
    if g < 1.0 / N:
        return "Rabi"
    if g > N:
        return "Fock"
    return "Josephson"


def ground_scan(
    N: int,
    gammas: Sequence[float],
    J: float = 1.0,
    delta: float = 0.0,
    cap: int = DEFAULT_CAP,
) -> dict[str, np.ndarray]:
    """Ground-state observables over a list of ``gamma`` values.

    Returns
    -------
    dict
        Arrays keyed by ``gamma, energy, sz_std, xi_n, xi_phi, xi_s,
        coherence, harmonic_sz_std``; undefined ``xi_s`` entries are NaN.
    """
    gammas = np.asarray(gammas, dtype=float)
    cols = {key: np.empty(gammas.size) for key in
            ("energy", "sz_std", "xi_n", "xi_phi", "xi_s", "coherence", "harmonic_sz_std")}
    for i, g in enumerate(gammas):
        params = BoseHubbardParams.from_gamma(N, g, J=J, delta=delta)
        state, e = ground_state(params, cap=cap)
        obs = spin_observables(state)
        cols["energy"][i] = e
        cols["sz_std"][i] = math.sqrt(obs.var_sz)
        cols["xi_n"][i] = obs.xi_n
        cols["xi_phi"][i] = obs.xi_phi
        cols["xi_s"][i] = math.nan if obs.xi_s is None else obs.xi_s
        cols["coherence"][i] = obs.coherence
        if 1.0 + g * N > 0:
            cols["harmonic_sz_std"][i] = harmonic_ground_fluctuations(params).delta_sz
        else:
            cols["harmonic_sz_std"][i] = math.nan
    return {"gamma": gammas, **cols}
