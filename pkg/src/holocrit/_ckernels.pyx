# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the Monte Carlo integrands and the CP^1 Newton polish.

Signatures mirror ``_pykernels``; dimensions above two fall back to it.
"""
import numpy as np

from libc.math cimport fabs, sqrt, isfinite

from . import _pykernels


cdef inline double cabs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline double cabs(double complex z) nogil:
    return sqrt(z.real * z.real + z.imag * z.imag)


def mc_normalized_sums(y, int m):
    if m > 2:
        return _pykernels.mc_normalized_sums(y, m)
    cdef double complex[:, ::1] v = np.ascontiguousarray(y, dtype=np.complex128)
    out = np.zeros(m + 1)
    cdef double[::1] acc = out
    cdef Py_ssize_t i, S = v.shape[0]
    cdef double x2, d, fro, dt, half, root, s1, s2, val
    cdef double complex h11, h12, h22
    cdef int k
    with nogil:
        if m == 1:
            for i in range(S):
                d = cabs2(v[i, 0]) - cabs2(v[i, 1])
                if d < 0:
                    acc[1] -= d
                else:
                    acc[0] += d
        else:
            for i in range(S):
                h11 = v[i, 0]
                h12 = v[i, 1]
                h22 = v[i, 2]
                x2 = cabs2(v[i, 3])
                fro = cabs2(h11) + 2 * cabs2(h12) + cabs2(h22)
                dt = cabs2(h11 * h22 - h12 * h12)
                half = 0.5 * fro
                root = half * half - dt
                root = sqrt(root) if root > 0 else 0.0
                s1 = half + root
                s2 = dt / s1 if s1 > 0 else 0.0
                val = fabs((s1 - x2) * (s2 - x2))
                k = (s1 < x2) + (s2 < x2)
                acc[k] += val
    return out


cdef double cdet_abs(double complex* a, int n) nogil:
    """|det| of an n x n row-major matrix by partial-pivot elimination (destroys a)."""
    cdef int i, j, r, piv
    cdef double best, mag, det = 1.0
    cdef double complex t, factor
    for i in range(n):
        piv = i
        best = cabs2(a[i * n + i])
        for r in range(i + 1, n):
            mag = cabs2(a[r * n + i])
            if mag > best:
                best = mag
                piv = r
        if best == 0:
            return 0.0
        if piv != i:
            for j in range(n):
                t = a[i * n + j]
                a[i * n + j] = a[piv * n + j]
                a[piv * n + j] = t
        det *= sqrt(best)
        for r in range(i + 1, n):
            factor = a[r * n + i] / a[i * n + i]
            for j in range(i, n):
                a[r * n + j] -= factor * a[i * n + j]
    return det


def mc_theta_sum(y, int m, theta):
    if m > 2:
        return _pykernels.mc_theta_sum(y, m, theta)
    cdef double complex[:, ::1] v = np.ascontiguousarray(y, dtype=np.complex128)
    cdef double complex[:, ::1] th = np.ascontiguousarray(
        np.asarray(theta, dtype=np.complex128).reshape(m, m))
    cdef Py_ssize_t i, S = v.shape[0]
    cdef double total = 0.0
    cdef double complex x, h11, h12, h22
    cdef double complex buf[16]
    cdef int p, q
    with nogil:
        if m == 1:
            for i in range(S):
                total += fabs(cabs2(v[i, 0]) - cabs2(v[i, 1]) * cabs2(th[0, 0]))
        else:
            for i in range(S):
                h11 = v[i, 0]
                h12 = v[i, 1]
                h22 = v[i, 2]
                x = v[i, 3]
                buf[0] = h11
                buf[1] = h12
                buf[4] = h12
                buf[5] = h22
                for p in range(2):
                    for q in range(2):
                        buf[p * 4 + q + 2] = -x * th[p, q]
                        buf[(p + 2) * 4 + q] = (-x * th[p, q]).conjugate()
                buf[10] = h11.conjugate()
                buf[11] = h12.conjugate()
                buf[14] = h12.conjugate()
                buf[15] = h22.conjugate()
                total += cdet_abs(buf, 4)
    return total


def polish_cp1(a, int degree, z, int maxiter=50, double tol=1e-14):
    cdef double complex[::1] coef = np.ascontiguousarray(a, dtype=np.complex128)
    zout = np.array(z, dtype=np.complex128, copy=True).reshape(-1)
    conv = np.zeros(zout.shape[0], dtype=bool)
    res = np.zeros(zout.shape[0])
    cdef double complex[::1] zz = zout
    cdef double[::1] rr = res
    cdef Py_ssize_t i, c, nc = coef.shape[0], nz = zout.shape[0]
    cdef int it
    cdef double n = degree, s, den
    cdef double complex w, zb, f, d1, d2, g, gz, gzb, step
    cdef bint ok
    for i in range(nz):
        w = zz[i]
        ok = False
        for it in range(maxiter):
            f = 0
            d1 = 0
            d2 = 0
            for c in range(nc - 1, -1, -1):
                d2 = d2 * w + 2 * d1
                d1 = d1 * w + f
                f = f * w + coef[c]
            zb = w.conjugate()
            s = 1.0 + cabs2(w)
            g = d1 * s - n * zb * f
            gz = d2 * s + d1 * zb - n * zb * d1
            gzb = d1 * w - n * f
            den = cabs2(gz) - cabs2(gzb)
            if den == 0 or not isfinite(den):
                break
            step = (-g * gz.conjugate() + gzb * g.conjugate()) / den
            w = w + step
            if not (isfinite(w.real) and isfinite(w.imag)):
                break
            if cabs(step) <= tol * (1.0 + cabs(w)):
                ok = True
                break
        f = 0
        d1 = 0
        for c in range(nc - 1, -1, -1):
            d1 = d1 * w + f
            f = f * w + coef[c]
        s = 1.0 + cabs2(w)
        zz[i] = w
        conv[i] = ok
        rr[i] = cabs(d1 * s - n * w.conjugate() * f) / s
    return zout.reshape(np.shape(z)), conv.reshape(np.shape(z)), res.reshape(np.shape(z))
