"""Interference-pattern synthesis, fringe fitting and contrast statistics.

Images are stored as ``pixels[iz, ix]``: rows run along the longitudinal
axis ``z`` and columns along the fringe direction ``x``, which is centred on
zero. A row at position ``z`` has density::

    exp(-x^2/(2 sigma_env^2)) [1 + C0 cos(2 k x + phi(z))]

so the fringe spacing is ``lambda_F = pi/k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import ndimage, optimize, stats

from mwlab.errors import DegenerateInputError, FitError, ValidationError
from mwlab.luttinger import LuttingerSystem, ModeEnsemble, PhaseProfile, correlation_analytic

CONTRAST_SLACK = 1.05
FIT_FTOL = 1e-10
FIT_MAX_NFEV = 200
_R_ZERO = 1e-12


@dataclass(frozen=True, eq=False)
class Interferogram:
    """A 2D interference image.

    Parameters
    ----------
    pixels : ndarray, shape (n_z, n_x)
        Non-negative density.
    pixel_size : float
        Square pixel edge (m).
    psf_sigma : float
        Gaussian optical resolution applied during synthesis (m).
    fringe_k : float
        Fringe wave vector ``k`` (rad/m); the density varies as ``cos(2kx)``.
    envelope_sigma : float
        rms width of the Gaussian envelope along ``x`` (m).
    z_origin : float
        ``z`` coordinate of the first row (m).
    """

    pixels: np.ndarray
    pixel_size: float
    psf_sigma: float
    fringe_k: float
    envelope_sigma: float
    z_origin: float = 0.0

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim != 2 or min(px.shape) < 8:
            raise ValidationError("pixels must be 2D with both axes of length >= 8")
        if np.any(px < 0) or not np.all(np.isfinite(px)):
            raise ValidationError("pixels must be finite and >= 0")
        if not self.pixel_size > 0:
            raise ValidationError("pixel_size must be > 0")
        object.__setattr__(self, "pixels", px)

    @property
    def x(self) -> np.ndarray:
        n = self.pixels.shape[1]
        return (np.arange(n) - 0.5 * (n - 1)) * self.pixel_size

    @property
    def z(self) -> np.ndarray:
        return self.z_origin + np.arange(self.pixels.shape[0]) * self.pixel_size

    @property
    def lambda_F(self) -> float:
        return math.pi / self.fringe_k


def _check_aliasing(pixel_size: float, lambda_F: float):
    if pixel_size >= 0.5 * lambda_F:
        raise ValidationError(
            f"pixel_size {pixel_size:.4g} m must be below half the fringe spacing "
            f"{lambda_F:.4g} m (aliasing)"
        )


def fringe_model(x, A, x0, sigma, C, lambda_F, phi):
    """``A exp(-(x-x0)^2/(2 sigma^2)) [1 + C cos(2 pi (x-x0)/lambda_F + phi)]``."""
    x = np.asarray(x, dtype=float)
    u = x - x0
    return A * np.exp(-0.5 * (u / sigma) ** 2) * (1.0 + C * np.cos(2.0 * math.pi * u / lambda_F + phi))


def synthesize_profile(x, A, x0, sigma, C, lambda_F, phi, noise_sigma=0.0, seed=0):
    """A 1D fringe profile with optional additive Gaussian noise (not clamped)."""
    y = fringe_model(x, A, x0, sigma, C, lambda_F, phi)
    if noise_sigma > 0:
        rng = np.random.Generator(np.random.Philox(key=int(seed)))
        y = y + rng.normal(0.0, noise_sigma, size=y.shape)
    return y


def synthesize_image(
    profile: PhaseProfile,
    fringe_k: float,
    envelope_sigma: float,
    base_contrast: float,
    pixel_size: float,
    psf_sigma: float = 0.0,
    noise_sigma: float = 0.0,
    seed: int = 0,
    n_x: int | None = None,
) -> Interferogram:
    """Render an interferogram from a relative-phase profile.

    Rows are spaced by `pixel_size` and span the profile grid; ``phi(z)`` is
    linearly interpolated between grid points. The peak envelope density is
    one, so the signal-to-noise ratio is ``1/noise_sigma``.

    Parameters
    ----------
    n_x : int, optional
        Number of columns; defaults to covering ``+-4 envelope_sigma``.

    Raises
    ------
    ValidationError
        If ``pixel_size >= lambda_F/2`` (aliasing) or the image would be
        smaller than 8 x 8.
    """
    if not (fringe_k > 0 and envelope_sigma > 0 and pixel_size > 0):
        raise ValidationError("fringe_k, envelope_sigma and pixel_size must be > 0")
    if not (0.0 <= base_contrast <= 1.0):
        raise ValidationError("base_contrast must lie in [0, 1]")
    if psf_sigma < 0 or noise_sigma < 0:
        raise ValidationError("psf_sigma and noise_sigma must be >= 0")
    _check_aliasing(pixel_size, math.pi / fringe_k)
    zg = np.asarray(profile.z_grid, dtype=float)
    n_z = int(math.floor((zg[-1] - zg[0]) / pixel_size * (1 + 1e-12))) + 1
    if n_x is None:
        n_x = 2 * int(math.ceil(4.0 * envelope_sigma / pixel_size)) + 1
    z = zg[0] + np.arange(n_z) * pixel_size
    phi = np.interp(z, zg, profile.phi) if zg.size > 1 else np.full(n_z, profile.phi[0])
    x = (np.arange(n_x) - 0.5 * (n_x - 1)) * pixel_size
    env = np.exp(-0.5 * (x / envelope_sigma) ** 2)
    pixels = env[None, :] * (1.0 + base_contrast * np.cos(2.0 * fringe_k * x[None, :] + phi[:, None]))
    if psf_sigma > 0:
        pixels = ndimage.gaussian_filter(pixels, psf_sigma / pixel_size, mode="nearest")
    if noise_sigma > 0:
        rng = np.random.Generator(np.random.Philox(key=int(seed)))
        pixels = pixels + rng.normal(0.0, noise_sigma, size=pixels.shape)
    pixels = np.maximum(pixels, 0.0)
    return Interferogram(pixels, float(pixel_size), float(psf_sigma), float(fringe_k),
                         float(envelope_sigma), float(zg[0]))


def integrate_profile(image: Interferogram, z_center: float, L: float):
    """Sum the rows whose centres lie in ``[z_center - L/2, z_center + L/2)``.

    Returns
    -------
    (x, value) : tuple of ndarray
    """
    if not L > 0:
        raise ValidationError("L must be > 0")
    z = image.z
    ps = image.pixel_size
    tol = 1e-9 * ps
    lo, hi = z_center - 0.5 * L, z_center + 0.5 * L
    if lo < z[0] - 0.5 * ps - tol or hi > z[-1] + 0.5 * ps + tol:
        raise ValidationError("integration window exceeds the image")
    rows = (z >= lo - tol) & (z < hi - tol)
    if not np.any(rows):
        raise ValidationError("integration window contains no pixel row")
    return image.x, image.pixels[rows].sum(axis=0)


@dataclass(frozen=True)
class FringeFit:
    """Fitted parameters of the cosine-modulated Gaussian model."""

    A: float
    x0: float
    sigma: float
    C: float
    lambda_F: float
    phi: float
    residual_rms: float
    clamped: bool = False  # raw contrast exceeded the slack bound
    n_evaluations: int = 0

    @property
    def phi_origin(self) -> float:
        """Fringe phase referenced to ``x = 0`` rather than to ``x0``.

        The model equals ``cos(2 pi x/lambda_F + phi_origin)`` times the
        envelope; this is the phase a synthesized image encodes, and it is
        insensitive to noise in the fitted envelope centre.
        """
        return _wrap(self.phi - 2.0 * math.pi * self.x0 / self.lambda_F)


def _wrap(phi: float) -> float:
    w = math.remainder(phi, 2.0 * math.pi)
    return math.pi if w <= -math.pi else w


def _fix_signs(p):
    A, x0, sigma, C, lam, phi = (float(v) for v in p)
    sigma = abs(sigma)
    if lam < 0:
        lam, phi = -lam, -phi
    if C < 0:
        C, phi = -C, phi + math.pi
    return A, x0, sigma, C, lam, _wrap(phi)


def _initial_guess(x, y, lambda_hint):
    w = np.clip(y, 0.0, None)
    total = w.sum()
    if total <= 0:
        raise DegenerateInputError("profile has no positive signal")
    x0 = float((w * x).sum() / total)
    sigma = float(math.sqrt(max((w * (x - x0) ** 2).sum() / total, 1e-300)))
    dx = x[1] - x[0]
    g = np.exp(-0.5 * ((x - x0) / sigma) ** 2)
    a0 = float((y * g).sum() / (g * g).sum())
    resid = y - a0 * g
    n_pad = 8 * x.size
    amp = np.abs(np.fft.rfft(resid, n_pad))
    freqs = np.fft.rfftfreq(n_pad, dx)
    f_hint = 1.0 / lambda_hint
    band = (freqs >= 0.5 * f_hint) & (freqs <= 2.0 * f_hint)
    if not np.any(band):
        lam = lambda_hint
    else:
        idx = np.nonzero(band)[0]
        i = idx[np.argmax(amp[idx])]
        if 0 < i < amp.size - 1:
            a, b, c = amp[i - 1], amp[i], amp[i + 1]
            den = a - 2 * b + c
            shift = 0.5 * (a - c) / den if den != 0 else 0.0
        else:
            shift = 0.0
        f = freqs[i] + shift * (freqs[1] - freqs[0])
        lam = 1.0 / f if f > 0 else lambda_hint
    u = 2.0 * math.pi * (x - x0) / lam
    basis = np.column_stack([g, g * np.cos(u), g * np.sin(u)])
    (a, b, c), *_ = np.linalg.lstsq(basis, y, rcond=None)
    if a == 0:
        raise DegenerateInputError("envelope amplitude vanished during initialization")
    C = math.hypot(b, c) / a
    phi = math.atan2(-c, b)
    return np.array([a, x0, sigma, C, lam, phi])


def _residual_jac(p, x, y):
    A, x0, sigma, C, lam, phi = p
    u = x - x0
    g = np.exp(-0.5 * (u / sigma) ** 2)
    arg = 2.0 * math.pi * u / lam + phi
    cs, sn = np.cos(arg), np.sin(arg)
    mod = 1.0 + C * cs
    f = A * g * mod
    J = np.empty((x.size, 6))
    J[:, 0] = g * mod
    J[:, 1] = f * u / sigma ** 2 + A * g * C * sn * (2.0 * math.pi / lam)
    J[:, 2] = f * u * u / sigma ** 3
    J[:, 3] = A * g * cs
    J[:, 4] = A * g * C * sn * (2.0 * math.pi * u / lam ** 2)
    J[:, 5] = -A * g * C * sn
    return f - y, J


def fit_fringe(x, y, lambda_F_hint: float) -> FringeFit:
    """Levenberg-Marquardt fit of the cosine-modulated Gaussian.

    Initialization: centroid and rms width of the clipped profile, fringe
    period from the spectral peak within a factor two of the hint, then a
    linear least-squares projection for amplitude, contrast and phase.

    Raises
    ------
    FitError
        If the optimizer does not converge within the evaluation budget;
        the exception carries the last iterate.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or x.size < 8:
        raise ValidationError("x and y must be 1D arrays of equal length >= 8")
    if not np.all(np.isfinite(y)):
        raise ValidationError("profile contains non-finite values")
    dx = np.diff(x)
    if np.any(dx <= 0):
        raise ValidationError("x must be increasing")
    if not lambda_F_hint > 0:
        raise ValidationError("lambda_F_hint must be > 0")
    _check_aliasing(float(dx.max()), lambda_F_hint)
    p0 = _initial_guess(x, y, lambda_F_hint)
    cache = {}

    def fun(p):
        r, J = _residual_jac(p, x, y)
        cache["J"] = (p.copy(), J)
        return r

    def jac(p):
        key, J = cache.get("J", (None, None))
        if key is not None and np.array_equal(key, p):
            return J
        return _residual_jac(p, x, y)[1]

    scale = np.abs(p0) + np.array([0.0, p0[2], 0.0, 0.0, 0.0, 0.0])
    scale[scale == 0] = 1.0
    res = optimize.least_squares(fun, p0, jac=jac, method="lm", ftol=FIT_FTOL,
                                 xtol=1e-12, gtol=1e-12, max_nfev=FIT_MAX_NFEV,
                                 x_scale=scale)
    A, x0, sigma, C, lam, phi = _fix_signs(res.x)
    rms = float(math.sqrt(np.mean(res.fun ** 2)))
    if res.status <= 0:
        last = FringeFit(A, x0, sigma, C, lam, phi, rms, False, int(res.nfev))
        raise FitError(f"fringe fit did not converge: {res.message}", last=last)
    clamped = C > CONTRAST_SLACK
    if clamped:
        C = CONTRAST_SLACK
    return FringeFit(A, x0, sigma, C, lam, phi, rms, clamped, int(res.nfev))


def contrast_operator(profile: PhaseProfile, L: float, n1d: float | None = None,
                      z_center: float | None = None):
    """Integrated contrast and phase over a window of length `L`.

    ``A = int exp(i phi(z)) dz`` over ``|z - z_center| <= L/2`` (midpoint rule
    on the profile grid, uniform density, so `n1d` drops out);
    ``C_L = |A|/L`` and ``Phi_L = arg A``.

    Returns
    -------
    (C_L, Phi_L) : tuple of float
    """
    z, phi = _window(profile, L, z_center)
    s = np.exp(1j * phi).sum()
    return float(abs(s) / phi.size), float(np.angle(s))


def _window(profile: PhaseProfile, L: float, z_center: float | None):
    z = np.asarray(profile.z_grid, dtype=float)
    phi = np.asarray(profile.phi, dtype=float)
    if not L > 0:
        raise ValidationError("L must be > 0")
    if z_center is None:
        z_center = 0.5 * (z[0] + z[-1])
    dz = z[1] - z[0] if z.size > 1 else L
    tol = 1e-9 * dz
    if z_center - 0.5 * L < z[0] - 0.5 * dz - tol or z_center + 0.5 * L > z[-1] + 0.5 * dz + tol:
        raise ValidationError("contrast window exceeds the profile extent")
    sel = np.abs(z - z_center) <= 0.5 * L + tol
    if not np.any(sel):
        raise ValidationError("contrast window contains no grid point")
    return z[sel], phi[sel]


@dataclass(frozen=True, eq=False)
class ContrastSamples:
    """Normalized squared contrasts ``alpha = C^2/<C^2>`` at length ``L``."""

    values: np.ndarray
    L: float
    mean_c2: float


def contrast_samples(profiles: Sequence[PhaseProfile], L: float,
                     z_center: float | None = None) -> ContrastSamples:
    """Evaluate :func:`contrast_operator` on every profile and normalize."""
    if len(profiles) == 0:
        raise ValidationError("no profiles given")
    c2 = np.array([contrast_operator(p, L, z_center=z_center)[0] ** 2 for p in profiles])
    return contrast_samples_from_c2(c2, L)


def contrast_samples_from_phases(phis: np.ndarray, z_grid, L: float,
                                 z_center: float | None = None) -> ContrastSamples:
    """Vectorized :func:`contrast_samples` for a ``(n, n_z)`` phase matrix."""
    phis = np.atleast_2d(np.asarray(phis, dtype=float))
    tmpl = PhaseProfile(np.asarray(z_grid, dtype=float), phis[0], 0, 0.0)
    z = tmpl.z_grid
    zw, _ = _window(tmpl, L, z_center)
    sel = np.isin(z, zw)
    s = np.exp(1j * phis[:, sel]).sum(axis=1)
    c2 = (np.abs(s) / sel.sum()) ** 2
    return contrast_samples_from_c2(c2, L)


def contrast_samples_from_c2(c2, L: float) -> ContrastSamples:
    c2 = np.asarray(c2, dtype=float)
    mean = float(c2.mean())
    if not mean > 0:
        raise DegenerateInputError("mean squared contrast vanishes")
    return ContrastSamples(c2 / mean, float(L), mean)


def mean_squared_contrast(ensemble: ModeEnsemble, system: LuttingerSystem, z_window) -> float:
    """Ensemble ``<C_L^2>`` for the discrete window ``z_window``.

    ``(1/n^2) sum_ij C(|z_i - z_j|)``, the grid form of the double integral of
    the two-point correlation function; matches :func:`contrast_operator`.
    """
    z = np.asarray(z_window, dtype=float)
    n = z.size
    dz = z[1] - z[0] if n > 1 else 0.0
    lags = np.arange(n) * dz
    c = np.atleast_1d(correlation_analytic(lags, ensemble, system))
    weights = np.where(np.arange(n) == 0, n, 2 * (n - np.arange(n)))
    return float((weights * c).sum() / n ** 2)


class FdfMoments(NamedTuple):
    orders: np.ndarray
    moments: np.ndarray
    stderr: np.ndarray
    density: np.ndarray | None
    edges: np.ndarray | None


def fdf_moments(samples: ContrastSamples, m_max: int = 4) -> FdfMoments:
    """Moments ``<alpha^m>`` for ``m = 1..m_max`` and a density histogram.

    The histogram uses Freedman-Diaconis bins and is returned only for at
    least 100 samples.
    """
    a = np.asarray(samples.values, dtype=float)
    if a.size == 0:
        raise ValidationError("no contrast samples")
    if m_max < 1:
        raise ValidationError("m_max must be >= 1")
    orders = np.arange(1, int(m_max) + 1)
    powers = a[None, :] ** orders[:, None]
    moments = powers.mean(axis=1)
    if a.size > 1:
        stderr = powers.std(axis=1, ddof=1) / math.sqrt(a.size)
    else:
        stderr = np.full(orders.size, np.inf)
    density = edges = None
    if a.size >= 100:
        if np.ptp(a) > 0:
            density, edges = np.histogram(a, bins="fd", density=True)
        else:
            edges = np.array([a[0] - 0.5, a[0] + 0.5])
            density = np.array([1.0])
    return FdfMoments(orders, moments, stderr, density, edges)


def ks_exponential(samples: ContrastSamples):
    """Kolmogorov-Smirnov test of ``alpha`` against the unit exponential."""
    return stats.kstest(np.asarray(samples.values, dtype=float), "expon")


def circular_std(phases) -> float:
    """``sqrt(-2 ln R)`` with ``R = |<exp(i phi)>|``; ``inf`` when ``R`` vanishes."""
    p = np.asarray(phases, dtype=float).ravel()
    if p.size < 2:
        raise ValidationError("need at least two phases")
    r = abs(np.exp(1j * p).mean())
    if r < _R_ZERO:
        return math.inf
    return math.sqrt(max(-2.0 * math.log(min(r, 1.0)), 0.0))


def visibility(i_max: float, i_min: float) -> float | None:
    """``(I_max - I_min)/(I_max + I_min)``; ``None`` when both vanish."""
    if not (i_max >= i_min >= 0):
        raise ValidationError("need I_max >= I_min >= 0")
    total = i_max + i_min
    return None if total == 0 else (i_max - i_min) / total


def two_beam_contrast(a1: float, a2: float) -> float | None:
    """``2 A1 A2/(A1^2 + A2^2)``; ``None`` when both amplitudes vanish."""
    if a1 < 0 or a2 < 0:
        raise ValidationError("amplitudes must be >= 0")
    den = a1 * a1 + a2 * a2
    return None if den == 0 else 2.0 * a1 * a2 / den


def contrast_from_intensity_ratio(ratio: float) -> float:
    """Two-beam contrast for an intensity ratio ``A2^2/A1^2``."""
    if ratio < 0:
        raise ValidationError("ratio must be >= 0")
    return 2.0 * math.sqrt(ratio) / (1.0 + ratio)
