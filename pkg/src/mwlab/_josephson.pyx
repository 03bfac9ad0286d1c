# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Dormand-Prince 5(4) kernel for the Josephson equations.

Arithmetic mirrors ``_josephson_py`` operation for operation; see that
module for the meaning of arguments and status codes.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, sin, cos, fabs, pow

cnp.import_array()

cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0
cdef double A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0
cdef double A42 = -56.0 / 15.0
cdef double A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0
cdef double A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0
cdef double A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0
cdef double A62 = -355.0 / 33.0
cdef double A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0
cdef double A65 = -5103.0 / 18656.0
cdef double A71 = 35.0 / 384.0
cdef double A73 = 500.0 / 1113.0
cdef double A74 = 125.0 / 192.0
cdef double A75 = -2187.0 / 6784.0
cdef double A76 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0
cdef double E3 = -71.0 / 16695.0
cdef double E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0
cdef double E6 = 22.0 / 525.0
cdef double E7 = -1.0 / 40.0

cdef double SAFE = 0.9
cdef double FAC_MIN = 0.2
cdef double FAC_MAX = 10.0
cdef double BETA = 0.04
cdef double EXPO1 = 0.2 - 0.04 * 0.75


cdef inline bint _rhs(double z, double phi, double omega, double un, double delta,
                      double *fz, double *fp) nogil:
    cdef double q = 1.0 - z * z
    cdef double s
    if q <= 0.0:
        return 0
    s = sqrt(q)
    fz[0] = -omega * s * sin(phi)
    fp[0] = -delta + un * z + omega * z * cos(phi) / s
    return 1


cdef inline double _energy(double z, double phi, double omega, double un,
                          double delta) nogil:
    return -delta * z + 0.5 * un * z * z - omega * sqrt(1.0 - z * z) * cos(phi)


cdef double _initial_step(double z, double phi, double fz, double fp, double omega,
                          double un, double delta, double rtol, double atol,
                          double span):
    cdef double sz = atol + rtol * fabs(z)
    cdef double sp = atol + rtol * fabs(phi)
    cdef double d0 = sqrt(0.5 * ((z / sz) ** 2 + (phi / sp) ** 2))
    cdef double d1 = sqrt(0.5 * ((fz / sz) ** 2 + (fp / sp) ** 2))
    cdef double h0, h1, d2, dm, f1z, f1p
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, span)
    if not _rhs(z + h0 * fz, phi + h0 * fp, omega, un, delta, &f1z, &f1p):
        return h0 * 1e-3
    d2 = sqrt(0.5 * (((f1z - fz) / sz) ** 2 + ((f1p - fp) / sp) ** 2)) / h0
    dm = max(d1, d2)
    if dm <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = pow(0.01 / dm, 0.2)
    return min(100.0 * h0, min(h1, span))


def integrate_dp54(double z0, double phi0, double t_end, double omega, double un,
                   double delta, double rtol, double atol, t_eval, long max_steps,
                   double pole_tol, bint project=True):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] te = np.ascontiguousarray(t_eval, dtype=np.float64)
    cdef Py_ssize_t n_eval = te.shape[0]
    cdef bint record_all = n_eval == 0
    cdef Py_ssize_t cap = n_eval + 1 if not record_all else 1024
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ts = np.empty(cap)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] zs = np.empty(cap)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ps = np.empty(cap)
    cdef Py_ssize_t n_out = 1
    cdef double t = 0.0, z = z0, phi = phi0
    cdef int status = 0
    cdef long n_acc = 0, n_rej = 0
    cdef double k1z, k1p, k2z, k2p, k3z, k3p, k4z, k4p, k5z, k5p, k6z, k6p, k7z, k7p
    cdef double zn, pn, ez, ep, sz, sp, err, fac11, fac, h_new, h, t_target
    cdef double facold = 1e-4
    cdef Py_ssize_t i_eval = 0
    cdef bint land, ok, last_rejected = 0
    cdef double h0_energy, g2, de, cz, cp, fz, fp

    ts[0] = 0.0
    zs[0] = z0
    ps[0] = phi0
    if fabs(z) >= 1.0 - pole_tol:
        return (ts[:1].copy(), zs[:1].copy(), ps[:1].copy(), 1, 0, 0)
    if t_end <= 0.0:
        return (ts[:1].copy(), zs[:1].copy(), ps[:1].copy(), 0, 0, 0)

    _rhs(z, phi, omega, un, delta, &k1z, &k1p)
    h0_energy = _energy(z, phi, omega, un, delta)
    h = _initial_step(z, phi, k1z, k1p, omega, un, delta, rtol, atol, t_end)

    while True:
        t_target = t_end if record_all else te[i_eval]
        if n_acc + n_rej >= max_steps:
            status = 2
            break
        if h < 1e-14 * max(1.0, fabs(t)):
            status = 3
            break
        land = 0
        if t + h >= t_target - 1e-13 * max(1.0, fabs(t_target)):
            h = t_target - t
            land = 1

        ok = _rhs(z + h * A21 * k1z, phi + h * A21 * k1p, omega, un, delta, &k2z, &k2p)
        if ok:
            ok = _rhs(z + h * (A31 * k1z + A32 * k2z),
                      phi + h * (A31 * k1p + A32 * k2p), omega, un, delta, &k3z, &k3p)
        if ok:
            ok = _rhs(z + h * (A41 * k1z + A42 * k2z + A43 * k3z),
                      phi + h * (A41 * k1p + A42 * k2p + A43 * k3p), omega, un, delta,
                      &k4z, &k4p)
        if ok:
            ok = _rhs(z + h * (A51 * k1z + A52 * k2z + A53 * k3z + A54 * k4z),
                      phi + h * (A51 * k1p + A52 * k2p + A53 * k3p + A54 * k4p),
                      omega, un, delta, &k5z, &k5p)
        if ok:
            ok = _rhs(z + h * (A61 * k1z + A62 * k2z + A63 * k3z + A64 * k4z + A65 * k5z),
                      phi + h * (A61 * k1p + A62 * k2p + A63 * k3p + A64 * k4p + A65 * k5p),
                      omega, un, delta, &k6z, &k6p)
        if ok:
            zn = z + h * (A71 * k1z + A73 * k3z + A74 * k4z + A75 * k5z + A76 * k6z)
            pn = phi + h * (A71 * k1p + A73 * k3p + A74 * k4p + A75 * k5p + A76 * k6p)
            ok = _rhs(zn, pn, omega, un, delta, &k7z, &k7p)
        if not ok:
            n_rej += 1
            h *= 0.25
            last_rejected = 1
            continue

        ez = h * (E1 * k1z + E3 * k3z + E4 * k4z + E5 * k5z + E6 * k6z + E7 * k7z)
        ep = h * (E1 * k1p + E3 * k3p + E4 * k4p + E5 * k5p + E6 * k6p + E7 * k7p)
        sz = atol + rtol * max(fabs(z), fabs(zn))
        sp = atol + rtol * max(fabs(phi), fabs(pn))
        err = sqrt(0.5 * ((ez / sz) ** 2 + (ep / sp) ** 2))

        fac11 = pow(err, EXPO1)
        fac = fac11 / pow(facold, BETA)
        fac = max(1.0 / FAC_MAX, min(1.0 / FAC_MIN, fac / SAFE))
        h_new = h / fac

        if err <= 1.0:
            facold = max(err, 1e-4)
            n_acc += 1
            if land:
                t = t_target
            else:
                t = t + h
            if project:
                g2 = k7p * k7p + k7z * k7z
                if g2 > 0.0:
                    de = _energy(zn, pn, omega, un, delta) - h0_energy
                    cz = de * k7p / g2
                    cp = -de * k7z / g2
                    if fabs(cz) + fabs(cp) <= 1e-4 and fabs(zn - cz) < 1.0 - pole_tol:
                        if _rhs(zn - cz, pn - cp, omega, un, delta, &fz, &fp):
                            zn -= cz
                            pn -= cp
                            k7z = fz
                            k7p = fp
            z = zn
            phi = pn
            k1z = k7z
            k1p = k7p
            if last_rejected:
                h_new = min(h_new, h)
            last_rejected = 0
            if record_all or land:
                if n_out >= cap:
                    cap *= 2
                    ts = np.resize(ts, cap)
                    zs = np.resize(zs, cap)
                    ps = np.resize(ps, cap)
                ts[n_out] = t
                zs[n_out] = z
                ps[n_out] = phi
                n_out += 1
            if fabs(z) >= 1.0 - pole_tol:
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
            last_rejected = 1

    return (ts[:n_out].copy(), zs[:n_out].copy(), ps[:n_out].copy(), status, n_acc, n_rej)
