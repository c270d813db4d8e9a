"""Pure NumPy versions of the compiled kernels in ``_ckernels.pyx``.

Signatures and results match the Cython module; the Jacobi solver applies
the same rotations, vectorised over each round of disjoint pairs.
"""

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_PI = 6.283185307179586
_EPS = np.finfo(float).eps
_CHUNK = 1 << 16


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def splitmix_uniforms(key, start, count):
    """Uniforms in (0, 1) at stream positions ``start .. start+count-1``."""
    # position j reads the (j+1)-th splitmix64 state, as in the reference generator
    pos = np.arange(count, dtype=np.uint64) + np.uint64((start + 1) & _MASK)
    with np.errstate(over="ignore"):
        z = _mix(np.uint64(key & _MASK) + pos * _GOLDEN)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def cosine_series(c, t):
    """Evaluate ``sum_j c[j] * cos(2*pi*j*t)`` at every point of ``t``."""
    c = np.ascontiguousarray(c, dtype=np.float64)
    t = np.ascontiguousarray(t, dtype=np.float64)
    m = c.shape[0]
    out = np.empty(t.shape[0])
    if m == 0:
        out[:] = 0.0
        return out
    j = np.arange(1, m, dtype=np.float64)
    rows = max(1, _CHUNK // max(m, 1))
    for lo in range(0, t.shape[0], rows):
        x = np.multiply.outer(t[lo:lo + rows], j)
        x -= np.floor(x)
        out[lo:lo + rows] = c[0] + np.cos(_TWO_PI * x) @ c[1:]
    return out


def _schedule(n):
    """Round-robin pairings (circle method); rounds of disjoint (p, q), p < q."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        ps, qs = [], []
        for i in range(m // 2):
            p, q = players[i], players[m - 1 - i]
            if p > q:
                p, q = q, p
            if q < n:
                ps.append(p)
                qs.append(q)
        rounds.append((np.array(ps, dtype=np.intp), np.array(qs, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_eigvalsh(a, max_sweeps=60):
    """Eigenvalues of a symmetric matrix by round-robin cyclic Jacobi.

    ``a`` is overwritten. Returns ``(eigenvalues_sorted, sweeps)``.
    """
    n = a.shape[0]
    if n <= 1:
        return a.diagonal().copy(), 0
    frob = np.sqrt(np.sum(a * a))
    if frob == 0.0:
        return np.zeros(n), 0
    rounds = _schedule(n)
    sweep = 0
    iu = np.triu_indices(n, 1)
    while sweep < max_sweeps:
        off = np.sqrt(2.0 * np.sum(a[iu] ** 2))
        if off <= _EPS * np.sqrt(n) * frob:
            break
        sweep += 1
        for p, q in rounds:
            apq = a[p, q]
            keep = np.abs(apq) > 1e-300
            if not keep.any():
                continue
            p, q, apq = p[keep], q[keep], apq[keep]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            root = np.sqrt(theta * theta + 1.0)
            tt = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + root)
            c = 1.0 / np.sqrt(tt * tt + 1.0)
            s = tt * c
            x, y = a[p, :], a[q, :]
            a[p, :], a[q, :] = c[:, None] * x - s[:, None] * y, s[:, None] * x + c[:, None] * y
            x, y = a[:, p], a[:, q]
            a[:, p], a[:, q] = x * c - y * s, x * s + y * c
    return np.sort(a.diagonal().copy()), sweep
