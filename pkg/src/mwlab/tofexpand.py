"""Time-of-flight expansion of a double-well condensate (SI units).

A ground-state packet of a harmonic trap with frequency ``omega`` has width
``sigma0 = sqrt(hbar/(m omega))`` and expands freely as
``sigma(t) = sigma0 sqrt(1 + (omega t)^2)``. Two packets released from wells
at ``x = -d/2`` and ``x = +d/2`` overlap and produce fringes with wave
vector ``k(t) = hbar t d / (2 m sigma0^2 sigma(t)^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from mwlab import constants as const
from mwlab.errors import ValidationError


@dataclass(frozen=True)
class TofParams:
    """Trap and release parameters.

    Parameters
    ----------
    m : float
        Atomic mass (kg).
    omega : float
        Trap angular frequency before release (rad/s).
    d : float
        Well separation (m).
    x_offset : float, optional
        Rigid shift of the whole pattern (m), for plotting only.
    """

    m: float
    omega: float
    d: float
    x_offset: float = 0.0

    def __post_init__(self):
        for name in ("m", "omega"):
            value = float(getattr(self, name))
            if not (value > 0 and math.isfinite(value)):
                raise ValidationError(f"{name} must be positive and finite, got {value!r}")
            object.__setattr__(self, name, value)
        d = float(self.d)
        if not (d >= 0 and math.isfinite(d)):
            raise ValidationError(f"d must be >= 0 and finite, got {d!r}")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "x_offset", float(self.x_offset))
        object.__setattr__(self, "_sigma0", math.sqrt(const.HBAR / (self.m * self.omega)))

    @property
    def sigma0(self) -> float:
        """Initial width ``sqrt(hbar/(m omega))`` (m)."""
        return self._sigma0


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise ValidationError("t must be finite and >= 0")
    return t


def _scalar_or_array(a):
    return float(a) if np.ndim(a) == 0 else a


def gaussian_width(t, params: TofParams):
    """Packet width ``sigma0 sqrt(1 + omega^2 t^2)``."""
    t = _check_time(t)
    return _scalar_or_array(params.sigma0 * np.sqrt(1.0 + (params.omega * t) ** 2))


class FringeWavevector(NamedTuple):
    k: float
    has_fringes: bool  # False at t = 0 or for a single packet (d = 0)


def fringe_wavevector(t: float, params: TofParams) -> FringeWavevector:
    """Fringe wave vector ``k(t)`` (rad/m).

    Returns ``k = 0`` with ``has_fringes = False`` at ``t = 0``.
    """
    t = float(_check_time(t))
    if t == 0:
        return FringeWavevector(0.0, False)
    sigma = gaussian_width(t, params)
    k = const.HBAR * t * params.d / (2.0 * params.m * params.sigma0 ** 2 * sigma ** 2)
    return FringeWavevector(k, k > 0)


def fringe_spacing(t: float, params: TofParams) -> float:
    """Fringe period ``pi/k(t)``; infinite when there are no fringes."""
    fk = fringe_wavevector(t, params)
    return math.pi / fk.k if fk.has_fringes else math.inf


def long_time_fringe_spacing(t: float, m: float, d: float) -> float:
    """Far-field fringe period ``h t/(m d)``."""
    if d <= 0:
        raise ValidationError("d must be > 0 for a far-field fringe spacing")
    return const.H * t / (m * d)


def long_time_threshold(params: TofParams) -> float:
    """Value that ``omega t`` must exceed for the far-field limit.

    ``sqrt(d^2/(4 sigma0^2) - 1)``, guarded to be non-negative.
    """
    return math.sqrt(max(params.d ** 2 / (4.0 * params.sigma0 ** 2) - 1.0, 0.0))


def overlap_reached(t: float, params: TofParams) -> bool:
    """True once the packets overlap, ``sigma(t) > d``."""
    return gaussian_width(t, params) > params.d


def _packet(x, t, center, params: TofParams):
    sigma = params.sigma0 * math.sqrt(1.0 + (params.omega * t) ** 2)
    u = (x - center) / sigma
    chirp = 0.5 * params.omega * t * (u * u - 1.0)
    amp = (math.pi * sigma * sigma) ** -0.25 * np.exp(-0.5 * u * u)
    return amp * np.exp(1j * chirp)


def density_pattern(x_grid, t: float, phi: float, params: TofParams, imbalance: float = 0.0):
    """Normalized density of two expanding packets.

    ``|sqrt(p_l) f_l(x) + sqrt(p_r) e^(i phi) f_r(x)|^2`` with exact complex
    Gaussians centred at ``-d/2`` and ``+d/2``, ``p_{l,r} = (1 +- z)/2`` and
    ``z = imbalance``. The overlap term is normalized in closed form so the
    density integrates to one. Fringe maxima satisfy ``2 k(t) x = phi``.

    Parameters
    ----------
    x_grid : array_like
        Positions (m).
    imbalance : float
        Population imbalance ``z = p_l - p_r`` in [-1, 1].
    """
    x = np.asarray(x_grid, dtype=float)
    if x.size == 0:
        raise ValidationError("x_grid must not be empty")
    t = float(_check_time(t))
    z = float(imbalance)
    if not (-1.0 <= z <= 1.0):
        raise ValidationError(f"imbalance must lie in [-1, 1], got {z!r}")
    pl, pr = 0.5 * (1.0 + z), 0.5 * (1.0 - z)
    x0 = params.x_offset
    half = 0.5 * params.d
    psi = math.sqrt(pl) * _packet(x, t, x0 - half, params)
    psi = psi + math.sqrt(pr) * np.exp(1j * phi) * _packet(x, t, x0 + half, params)
    overlap = math.exp(-params.d ** 2 / (4.0 * params.sigma0 ** 2))
    norm = 1.0 + 2.0 * math.sqrt(pl * pr) * math.cos(phi) * overlap
    return np.abs(psi) ** 2 / norm


def contrast_from_populations(pl: float, pr: float) -> float:
    """Fringe contrast ``2 sqrt(p_l p_r)/(p_l + p_r)`` of two overlapping packets."""
    if pl < 0 or pr < 0 or pl + pr == 0:
        raise ValidationError("populations must be >= 0 and not both zero")
    return 2.0 * math.sqrt(pl * pr) / (pl + pr)


def recombination_imbalance(contrast: float, phi):
    """In-trap recombination readout ``z = C sin(phi)``."""
    if not (0.0 <= contrast <= 1.0):
        raise ValidationError(f"contrast must lie in [0, 1], got {contrast!r}")
    return _scalar_or_array(contrast * np.sin(np.asarray(phi, dtype=float)))


def accumulated_phase(F: float, d: float, t, delta_omega: float = 0.0):
    """Relative phase ``F d t/hbar + delta_omega t/2`` after holding for ``t``.

    Parameters
    ----------
    F : float
        Force difference along the double-well axis (N).
    d : float
        Well separation (m).
    delta_omega : float
        Trap-frequency asymmetry (rad/s).
    """
    t = _check_time(t)
    return _scalar_or_array(F * d * t / const.HBAR + 0.5 * delta_omega * t)
