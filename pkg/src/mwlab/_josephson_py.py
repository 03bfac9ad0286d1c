"""Pure-Python Dormand-Prince 5(4) integrator for the Josephson equations.

Reference implementation of the compiled kernel in ``_josephson.pyx``; both
follow the same arithmetic step for step. Status codes returned by
:func:`integrate_dp54`:

0  reached ``t_end``
1  pole: ``|z| >= 1 - pole_tol``
2  ``max_steps`` exhausted
3  step size underflow
"""

import math

import numpy as np

# Dormand-Prince tableau
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (
    9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0,
)
A71, A73, A74, A75, A76 = (
    35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0,
)
# error coefficients: 5th-order minus embedded 4th-order weights
E1 = 71.0 / 57600.0
E3 = -71.0 / 16695.0
E4 = 71.0 / 1920.0
E5 = -17253.0 / 339200.0
E6 = 22.0 / 525.0
E7 = -1.0 / 40.0

SAFE = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
BETA = 0.04
EXPO1 = 0.2 - BETA * 0.75


def _rhs(z, phi, omega, un, delta):
    """Return (dz/dt, dphi/dt) or None when |z| >= 1."""
    q = 1.0 - z * z
    if q <= 0.0:
        return None
    s = math.sqrt(q)
    return (-omega * s * math.sin(phi), -delta + un * z + omega * z * math.cos(phi) / s)


def _energy(z, phi, omega, un, delta):
    return -delta * z + 0.5 * un * z * z - omega * math.sqrt(1.0 - z * z) * math.cos(phi)


def _initial_step(z, phi, fz, fp, omega, un, delta, rtol, atol, span):
    sz = atol + rtol * abs(z)
    sp = atol + rtol * abs(phi)
    d0 = math.sqrt(0.5 * ((z / sz) ** 2 + (phi / sp) ** 2))
    d1 = math.sqrt(0.5 * ((fz / sz) ** 2 + (fp / sp) ** 2))
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = _rhs(z + h0 * fz, phi + h0 * fp, omega, un, delta)
    if f1 is None:
        return h0 * 1e-3
    d2 = math.sqrt(0.5 * (((f1[0] - fz) / sz) ** 2 + ((f1[1] - fp) / sp) ** 2)) / h0
    dm = max(d1, d2)
    if dm <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / dm) ** 0.2
    return min(100.0 * h0, h1, span)


def integrate_dp54(
    z0, phi0, t_end, omega, un, delta, rtol, atol, t_eval, max_steps, pole_tol,
    project=True,
):
    """Integrate the Josephson equations from ``t = 0`` to ``t_end``.

    Parameters
    ----------
    t_eval : ndarray
        Increasing output times in (0, t_end]. Steps are clipped to land on
        them exactly. When empty every accepted step is recorded.

    Returns
    -------
    (t, z, phi, status, n_accepted, n_rejected)
    """
    t_eval = np.ascontiguousarray(t_eval, dtype=np.float64)
    record_all = t_eval.shape[0] == 0
    ts = [0.0]
    zs = [float(z0)]
    ps = [float(phi0)]

    t = 0.0
    z = float(z0)
    phi = float(phi0)
    status = 0
    n_acc = 0
    n_rej = 0
    if abs(z) >= 1.0 - pole_tol:
        return (np.array(ts), np.array(zs), np.array(ps), 1, 0, 0)
    if t_end <= 0.0:
        return (np.array(ts), np.array(zs), np.array(ps), 0, 0, 0)

    k1z, k1p = _rhs(z, phi, omega, un, delta)
    h0_energy = _energy(z, phi, omega, un, delta)
    h = _initial_step(z, phi, k1z, k1p, omega, un, delta, rtol, atol, t_end)
    facold = 1e-4
    i_eval = 0
    n_eval = t_eval.shape[0]
    last_rejected = False

    while True:
        t_target = t_end if record_all else t_eval[i_eval]
        if n_acc + n_rej >= max_steps:
            status = 2
            break
        if h < 1e-14 * max(1.0, abs(t)):
            status = 3
            break
        land = False
        if t + h >= t_target - 1e-13 * max(1.0, abs(t_target)):
            h = t_target - t
            land = True

        f = _rhs(z + h * A21 * k1z, phi + h * A21 * k1p, omega, un, delta)
        ok = f is not None
        if ok:
            k2z, k2p = f
            f = _rhs(z + h * (A31 * k1z + A32 * k2z),
                     phi + h * (A31 * k1p + A32 * k2p), omega, un, delta)
            ok = f is not None
        if ok:
            k3z, k3p = f
            f = _rhs(z + h * (A41 * k1z + A42 * k2z + A43 * k3z),
                     phi + h * (A41 * k1p + A42 * k2p + A43 * k3p), omega, un, delta)
            ok = f is not None
        if ok:
            k4z, k4p = f
            f = _rhs(z + h * (A51 * k1z + A52 * k2z + A53 * k3z + A54 * k4z),
                     phi + h * (A51 * k1p + A52 * k2p + A53 * k3p + A54 * k4p),
                     omega, un, delta)
            ok = f is not None
        if ok:
            k5z, k5p = f
            f = _rhs(z + h * (A61 * k1z + A62 * k2z + A63 * k3z + A64 * k4z + A65 * k5z),
                     phi + h * (A61 * k1p + A62 * k2p + A63 * k3p + A64 * k4p + A65 * k5p),
                     omega, un, delta)
            ok = f is not None
        if ok:
            k6z, k6p = f
            zn = z + h * (A71 * k1z + A73 * k3z + A74 * k4z + A75 * k5z + A76 * k6z)
            pn = phi + h * (A71 * k1p + A73 * k3p + A74 * k4p + A75 * k5p + A76 * k6p)
            f = _rhs(zn, pn, omega, un, delta)
            ok = f is not None
        if not ok:
            # a stage left the physical domain: shrink and retry
            n_rej += 1
            h *= 0.25
            last_rejected = True
            continue
        k7z, k7p = f

        ez = h * (E1 * k1z + E3 * k3z + E4 * k4z + E5 * k5z + E6 * k6z + E7 * k7z)
        ep = h * (E1 * k1p + E3 * k3p + E4 * k4p + E5 * k5p + E6 * k6p + E7 * k7p)
        sz = atol + rtol * max(abs(z), abs(zn))
        sp = atol + rtol * max(abs(phi), abs(pn))
        err = math.sqrt(0.5 * ((ez / sz) ** 2 + (ep / sp) ** 2))

        fac11 = err ** EXPO1
        fac = fac11 / facold ** BETA
        fac = max(1.0 / FAC_MAX, min(1.0 / FAC_MIN, fac / SAFE))
        h_new = h / fac

        if err <= 1.0:
            facold = max(err, 1e-4)
            n_acc += 1
            t = t_target if land else t + h
            if project:
                # grad H = (dphi/dt, -dz/dt)
                g2 = k7p * k7p + k7z * k7z
                if g2 > 0.0:
                    de = _energy(zn, pn, omega, un, delta) - h0_energy
                    cz = de * k7p / g2
                    cp = -de * k7z / g2
                    if abs(cz) + abs(cp) <= 1e-4 and abs(zn - cz) < 1.0 - pole_tol:
                        f = _rhs(zn - cz, pn - cp, omega, un, delta)
                        if f is not None:
                            zn -= cz
                            pn -= cp
                            k7z, k7p = f
            z = zn
            phi = pn
            k1z, k1p = k7z, k7p
            if last_rejected:
                h_new = min(h_new, h)
            last_rejected = False
            if record_all or land:
                ts.append(t)
                zs.append(z)
                ps.append(phi)
            if abs(z) >= 1.0 - pole_tol:
                status = 1
                break
            if land:
                if record_all:
                    break
                i_eval += 1
                if i_eval >= n_eval:
                    break
            h = h_new
        else:
            n_rej += 1
            h = h / min(1.0 / FAC_MIN, fac11 / SAFE)
            last_rejected = True

    return (np.array(ts), np.array(zs), np.array(ps), status, n_acc, n_rej)
