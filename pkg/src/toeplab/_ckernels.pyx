# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops.

Every function here has a NumPy twin in :mod:`toeplab._pykernels` with the
same signature; :mod:`toeplab._backend` picks one at import time.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, floor, fabs, sqrt
from libc.stdint cimport uint64_t

cnp.import_array()

cdef double TWO_PI = 6.283185307179586
cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t _mix(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def splitmix_uniforms(uint64_t key, uint64_t start, Py_ssize_t count):
    """Uniforms in (0, 1) at stream positions ``start .. start+count-1``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(count, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef uint64_t z
    with nogil:
        for i in range(count):
            z = _mix(key + (start + <uint64_t>i + 1) * GOLDEN)
            o[i] = (<double>(z >> 11) + 0.5) * 1.1102230246251565e-16
    return out


def cosine_series(const double[::1] c, const double[::1] t):
    """Evaluate ``sum_j c[j] * cos(2*pi*j*t)`` at every point of ``t``.

    The phase ``j*t`` is reduced mod 1 before scaling so that dyadic grid
    points keep an exact argument.
    """
    cdef Py_ssize_t m = c.shape[0], k = t.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(k, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t p, j
    cdef double tp, x, acc
    with nogil:
        for p in range(k):
            tp = t[p]
            acc = c[0]
            for j in range(1, m):
                x = j * tp
                x = x - floor(x)
                acc = acc + c[j] * cos(TWO_PI * x)
            o[p] = acc
    return out


cdef void _rotate(double[:, ::1] a, Py_ssize_t n, Py_ssize_t p, Py_ssize_t q,
                  double c, double s) nogil:
    cdef Py_ssize_t k
    cdef double x, y
    for k in range(n):
        x = a[p, k]
        y = a[q, k]
        a[p, k] = c * x - s * y
        a[q, k] = s * x + c * y
    for k in range(n):
        x = a[k, p]
        y = a[k, q]
        a[k, p] = c * x - s * y
        a[k, q] = s * x + c * y


def jacobi_eigvalsh(double[:, ::1] a, int max_sweeps=60):
    """Eigenvalues of a symmetric matrix by round-robin cyclic Jacobi.

    ``a`` is overwritten. Returns ``(eigenvalues_sorted, sweeps)``. The
    pair ordering (circle method) matches the vectorised fallback, so both
    backends apply the same rotations.
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = n + (n % 2)
    cdef Py_ssize_t r, i, p, q, tmp
    cdef int sweep = 0
    cdef double off, frob, apq, theta, tt, c, s, thresh
    cdef cnp.ndarray[cnp.intp_t, ndim=1] players = np.arange(m, dtype=np.intp)
    cdef Py_ssize_t[::1] pl = players

    if n <= 1:
        return np.asarray(a).diagonal().copy(), 0

    frob = 0.0
    for i in range(n):
        for p in range(n):
            frob += a[i, p] * a[i, p]
    frob = sqrt(frob)
    if frob == 0.0:
        return np.zeros(n), 0
    thresh = 1e-300

    with nogil:
        while sweep < max_sweeps:
            off = 0.0
            for i in range(n):
                for p in range(i + 1, n):
                    off += a[i, p] * a[i, p]
            off = sqrt(2.0 * off)
            if off <= 2.220446049250313e-16 * sqrt(<double>n) * frob:
                break
            sweep += 1
            for r in range(m - 1):
                for i in range(m // 2):
                    p = pl[i]
                    q = pl[m - 1 - i]
                    if p > q:
                        tmp = p
                        p = q
                        q = tmp
                    if q >= n:
                        continue
                    apq = a[p, q]
                    if fabs(apq) <= thresh:
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    if theta >= 0:
                        tt = 1.0 / (theta + sqrt(theta * theta + 1.0))
                    else:
                        tt = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                    c = 1.0 / sqrt(tt * tt + 1.0)
                    s = tt * c
                    _rotate(a, n, p, q, c, s)
                # circle method: keep player 0 fixed, rotate the rest
                tmp = pl[m - 1]
                for i in range(m - 1, 1, -1):
                    pl[i] = pl[i - 1]
                pl[1] = tmp

    return np.sort(np.asarray(a).diagonal().copy()), sweep
