"""Reference numpy implementations of the hot loops.

Every function here has a twin in ``_ckernels.pyx`` with the same
signature; the compiled versions are used when available.
"""
import numpy as np


def mc_normalized_sums(y, m):
    """Sums of ``|det(H H^* - |x|^2 I)|`` split by the number of negative eigenvalues.

    Parameters
    ----------
    y : ndarray, shape (S, n)
        Packed ``(H', x)`` samples, symmetric pairs then ``x``.
    m : int
        Dimension.

    Returns
    -------
    ndarray, shape (m + 1,)
        Entry ``k`` sums the integrand over samples with ``k`` negative
        eigenvalues.
    """
    y = np.asarray(y, dtype=complex)
    out = np.zeros(m + 1)
    x2 = np.abs(y[:, -1]) ** 2
    if m == 1:
        d = np.abs(y[:, 0]) ** 2 - x2
        neg = d < 0
        out[0] = np.abs(d[~neg]).sum()
        out[1] = np.abs(d[neg]).sum()
        return out
    if m == 2:
        h11, h12, h22 = y[:, 0], y[:, 1], y[:, 2]
        fro = np.abs(h11) ** 2 + 2 * np.abs(h12) ** 2 + np.abs(h22) ** 2
        dt = np.abs(h11 * h22 - h12 * h12) ** 2
        half = 0.5 * fro
        root = np.sqrt(np.maximum(half * half - dt, 0.0))
        s1 = half + root
        # smaller squared singular value from the product, avoids cancellation
        s2 = np.where(s1 > 0, dt / np.where(s1 > 0, s1, 1.0), 0.0)
        val = np.abs((s1 - x2) * (s2 - x2))
        k = (s1 < x2).astype(int) + (s2 < x2).astype(int)
        for q in range(3):
            out[q] = val[k == q].sum()
        return out
    hmat = unpack_symmetric(y[:, :-1], m)
    herm = hmat @ np.conj(np.swapaxes(hmat, 1, 2)) - x2[:, None, None] * np.eye(m)
    ev = np.linalg.eigvalsh(herm)
    val = np.abs(np.prod(ev, axis=1))
    k = (ev < 0).sum(axis=1)
    for q in range(m + 1):
        out[q] = val[k == q].sum()
    return out


def unpack_symmetric(packed, m):
    """``(S, m(m+1)/2)`` packed upper triangles to ``(S, m, m)`` symmetric matrices."""
    packed = np.asarray(packed)
    out = np.zeros((packed.shape[0], m, m), dtype=complex)
    r = 0
    for j in range(m):
        for q in range(j, m):
            out[:, j, q] = packed[:, r]
            out[:, q, j] = packed[:, r]
            r += 1
    return out


def mc_theta_sum(y, m, theta):
    """Sum over samples of ``|det [[H', -x Theta], [-conj(x Theta), conj(H')]]|``."""
    y = np.asarray(y, dtype=complex)
    theta = np.asarray(theta, dtype=complex).reshape(m, m)
    x = y[:, -1]
    hmat = unpack_symmetric(y[:, :-1], m)
    off = -x[:, None, None] * theta
    top = np.concatenate([hmat, off], axis=2)
    bot = np.concatenate([np.conj(off), np.conj(hmat)], axis=2)
    return float(np.abs(np.linalg.det(np.concatenate([top, bot], axis=1))).sum())


def _horner3(a, z):
    """``f, f', f''`` of the polynomial with ascending coefficients ``a``."""
    f = np.zeros_like(z)
    d1 = np.zeros_like(z)
    d2 = np.zeros_like(z)
    for c in a[::-1]:
        d2 = d2 * z + 2 * d1
        d1 = d1 * z + f
        f = f * z + c
    return f, d1, d2


def polish_cp1(a, degree, z, maxiter=50, tol=1e-14):
    """Newton iteration for ``G = f'(1 + |z|^2) - N conj(z) f = 0``.

    ``G`` is not holomorphic, so each step solves the real 2x2 system
    ``G + G_z d + G_zbar conj(d) = 0``.

    Returns
    -------
    z : ndarray
        Polished points.
    converged : ndarray of bool
    residual : ndarray
        ``|G| / (1 + |z|^2)``, the gradient magnitude in the frame.
    """
    a = np.asarray(a, dtype=complex)
    z = np.array(z, dtype=complex, copy=True)
    conv = np.zeros(z.shape, dtype=bool)
    active = np.ones(z.shape, dtype=bool)
    n = float(degree)
    for _ in range(maxiter):
        if not active.any():
            break
        za = z[active]
        f, d1, d2 = _horner3(a, za)
        zb = np.conj(za)
        s = 1.0 + (za * zb).real
        g = d1 * s - n * zb * f
        gz = d2 * s + d1 * zb - n * zb * d1
        gzb = d1 * za - n * f
        den = np.abs(gz) ** 2 - np.abs(gzb) ** 2
        bad = (den == 0) | ~np.isfinite(den)
        den = np.where(bad, 1.0, den)
        step = (-g * np.conj(gz) + gzb * np.conj(g)) / den
        step = np.where(bad, 0.0, step)
        za = za + step
        z[active] = za
        done = (np.abs(step) <= tol * (1.0 + np.abs(za))) & ~bad
        idx = np.flatnonzero(active)
        conv[idx[done]] = True
        active[idx[done | bad | ~np.isfinite(za)]] = False
    f, d1, _ = _horner3(a, z)
    s = 1.0 + np.abs(z) ** 2
    res = np.abs(d1 * s - n * np.conj(z) * f) / s
    return z, conv, res
