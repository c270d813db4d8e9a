"""Symmetric Toeplitz and Hankel matrices: construction, fast matvec, norms.

A symmetric Toeplitz matrix of order ``n`` is fixed by its first row
``x[0..n-1]``; entry ``(j, l)`` is ``x[|j - l|]``. Products are computed by
embedding the matrix in a circulant whose size is the least power of two
``>= 2n - 1`` and diagonalising with a real FFT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft

from toeplab import _backend

DENSE_CAP = 2048
DEFAULT_START_SEED = 20240611


class DimensionError(ValueError):
    """Vector length does not match the matrix order."""


class DenseCapExceeded(ValueError):
    """A dense computation was requested above the configured size cap."""


def _as_finite_array(values, what="sequence"):
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{what} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CoeffSeq:
    """First row ``x_0 .. x_{n-1}`` of a symmetric Toeplitz matrix."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _as_finite_array(self.entries, "CoeffSeq"))

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    def prefix(self, m: int) -> "CoeffSeq":
        if not 1 <= m <= self.n:
            raise ValueError(f"prefix length {m} outside [1, {self.n}]")
        return CoeffSeq(self.entries[:m])

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, CoeffSeq):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    __hash__ = None


def as_coeffs(x) -> CoeffSeq:
    return x if isinstance(x, CoeffSeq) else CoeffSeq(x)


def embedding_size(n: int) -> int:
    """Least power of two that is ``>= 2n - 1``."""
    need = max(1, 2 * n - 1)
    return 1 << (need - 1).bit_length()


@dataclass(frozen=True, eq=False)
class SymmetricToeplitz:
    """Matrix-free symmetric Toeplitz operator.

    The circulant spectrum is computed on first use and cached; after that
    the object is read-only and can be shared between threads.
    """

    coeffs: CoeffSeq

    @property
    def n(self) -> int:
        return self.coeffs.n

    @property
    def x(self) -> np.ndarray:
        return self.coeffs.entries

    @property
    def shape(self):
        return (self.n, self.n)

    @cached_property
    def embedded_spectrum(self) -> np.ndarray:
        n, size = self.n, embedding_size(self.n)
        col = np.zeros(size)
        col[:n] = self.x
        if n > 1:
            col[size - n + 1:] = self.x[:0:-1]
        spec = scipy.fft.rfft(col)
        spec.setflags(write=False)
        return spec

    def matvec(self, v) -> np.ndarray:
        return matvec(self, v)

    def todense(self) -> np.ndarray:
        idx = np.arange(self.n)
        return self.x[np.abs(idx[:, None] - idx[None, :])]


def toeplitz_from_coeffs(x) -> SymmetricToeplitz:
    """Wrap a coefficient sequence; no transform is computed yet."""
    return SymmetricToeplitz(as_coeffs(x))


def matvec(T: SymmetricToeplitz, v) -> np.ndarray:
    """``T @ v`` in O(n log n) through the circulant embedding.

    ``v`` may also be a 2-D array of shape ``(n, k)``; columns are
    multiplied independently.
    """
    v = np.asarray(v, dtype=np.float64)
    n = T.n
    if v.shape[0] != n or v.ndim > 2:
        raise DimensionError(f"expected leading dimension {n}, got shape {v.shape}")
    if n == 1:
        return T.x[0] * v
    size = embedding_size(n)
    spec = T.embedded_spectrum if v.ndim == 1 else T.embedded_spectrum[:, None]
    fv = scipy.fft.rfft(v, n=size, axis=0)
    return scipy.fft.irfft(spec * fv, n=size, axis=0)[:n]


@dataclass(frozen=True)
class NormEstimate:
    """Operator norm with a certified bracket ``rayleigh_lower <= ||T|| <= upper_cert``."""

    value: float
    rayleigh_lower: float
    upper_cert: float
    iterations: int
    converged: bool
    residual: float
    seed: int | None = None
    method: str = "lanczos"
    ritz_min: float = field(default=float("nan"), repr=False)
    ritz_max: float = field(default=float("nan"), repr=False)


def a_basis_norm(n: int, i: int) -> float:
    """Exact spectral norm of the 0/1 matrix with ones where ``|j - l| = i``.

    For ``i >= 1`` the matrix is the adjacency matrix of ``i`` disjoint
    paths; the longest has ``ceil(n / i)`` vertices.
    """
    if n < 1 or not 0 <= i <= n - 1:
        raise ValueError(f"index {i} out of range for n={n}")
    if i == 0:
        return 1.0
    length = -(-n // i)
    return 2.0 * math.cos(math.pi / (length + 1))


def a_basis_matrix(n: int, i: int) -> np.ndarray:
    if n < 1 or not 0 <= i <= n - 1:
        raise ValueError(f"index {i} out of range for n={n}")
    idx = np.arange(n)
    return (np.abs(idx[:, None] - idx[None, :]) == i).astype(np.float64)


def a_basis_norms(n: int) -> np.ndarray:
    """``a_basis_norm(n, i)`` for every ``i`` in ``0 .. n-1``."""
    i = np.arange(1, n)
    out = np.empty(n)
    out[0] = 1.0
    if n > 1:
        lengths = -(-n // i)
        out[1:] = 2.0 * np.cos(np.pi / (lengths + 1))
    return out


def triangle_upper_bound(x) -> float:
    """``|x_0| + sum_i ||A_i|| |x_i|``, an upper bound on ``||T||``."""
    x = as_coeffs(x).entries
    return float(np.dot(a_basis_norms(x.size), np.abs(x)))


def frobenius_norm(x) -> float:
    x = as_coeffs(x).entries
    n = x.size
    mult = np.full(n, 2.0 * n) - 2.0 * np.arange(n)
    mult[0] = n
    return float(math.sqrt(np.dot(mult, x * x)))


def upper_certificate(x) -> float:
    return min(triangle_upper_bound(x), frobenius_norm(x))


def _check_cap(n, cap):
    cap = DENSE_CAP if cap is None else cap
    if n > cap:
        raise DenseCapExceeded(f"n={n} exceeds dense cap {cap}")


def dense_eigvalsh(a, backend=None) -> tuple[np.ndarray, int]:
    """Sorted eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    kern = _backend.kernels if backend is None else _backend.get(backend)
    work = np.array(a, dtype=np.float64, order="C", copy=True)
    return kern.jacobi_eigvalsh(work)


def operator_norm_dense(T: SymmetricToeplitz, cap: int | None = None, backend=None) -> NormEstimate:
    """Reference norm: materialise and run the Jacobi eigensolver."""
    _check_cap(T.n, cap)
    eigs, sweeps = dense_eigvalsh(T.todense(), backend=backend)
    value = float(np.max(np.abs(eigs)))
    return NormEstimate(
        value=value,
        rayleigh_lower=value,
        upper_cert=upper_certificate(T.coeffs),
        iterations=int(sweeps),
        converged=True,
        residual=0.0,
        seed=None,
        method="jacobi",
        ritz_min=float(eigs[0]),
        ritz_max=float(eigs[-1]),
    )


def _orthogonalize(w, V):
    for _ in range(2):
        w = w - V.T @ (V @ w)
    return w


def _lanczos(T, tol, max_iter, seed, max_basis, keep):
    """Thick-restart Lanczos with full reorthogonalisation.

    Returns ``(theta_min, y_min, theta_max, y_max, matvecs, converged)``
    where the ``y`` are unit Ritz vectors.
    """
    n = T.n
    kmax = max(2, min(n, max_basis))
    keep = max(2, min(keep, kmax - 2)) if kmax > 3 else 1
    rng = np.random.default_rng(seed)
    V = np.empty((kmax, n))
    W = np.empty((kmax, n))
    H = np.zeros((kmax, kmax))

    v = rng.standard_normal(n)
    V[0] = v / np.linalg.norm(v)
    W[0] = matvec(T, V[0])
    H[0, 0] = V[0] @ W[0]
    k, its = 1, 1
    scale = max(upper_certificate(T.coeffs), np.finfo(float).tiny)
    next_check = 1
    converged = False

    while True:
        exhausted = its >= max_iter
        if k >= next_check or k == n or k == kmax or exhausted:
            theta, S = np.linalg.eigh(H[:k, :k])
            ends = (0, k - 1)
            ritz = [(theta[e], S[:, e] @ V[:k], S[:, e] @ W[:k]) for e in ends]
            res = [np.linalg.norm(tw - th * y) for th, y, tw in ritz]
            value = max(abs(theta[0]), abs(theta[-1]))
            if k == n or max(res) <= tol * value:
                converged = True
            if converged or exhausted:
                (tmin, ymin, _), (tmax, ymax, _) = ritz
                return tmin, ymin, tmax, ymax, its, converged
            next_check = k + max(1, k // 8)

        w = W[k - 1]
        q = _orthogonalize(w, V[:k])
        nq = np.linalg.norm(q)
        if nq <= 1e-10 * max(np.linalg.norm(w), 1e-300) or nq <= 1e-14 * scale:
            # invariant subspace: continue from a fresh direction
            q = _orthogonalize(rng.standard_normal(n), V[:k])
            nq = np.linalg.norm(q)
        q /= nq

        if k == kmax:
            theta, S = np.linalg.eigh(H[:k, :k])
            lo = keep // 2
            sel = np.r_[np.arange(lo), np.arange(k - (keep - lo), k)]
            Ssel = S[:, sel]
            V[:keep] = Ssel.T @ V[:k]
            W[:keep] = Ssel.T @ W[:k]
            H[:] = 0.0
            H[np.arange(keep), np.arange(keep)] = theta[sel]
            k = keep
            q = _orthogonalize(q, V[:k])
            q /= np.linalg.norm(q)
            next_check = k + 1

        V[k] = q
        W[k] = matvec(T, q)
        its += 1
        col = V[: k + 1] @ W[k]
        H[: k + 1, k] = col
        H[k, : k + 1] = col
        k += 1


def operator_norm_iterative(
    T: SymmetricToeplitz,
    tol: float = 1e-7,
    max_iter: int | None = None,
    seed: int = DEFAULT_START_SEED,
    max_basis: int = 160,
    keep: int = 24,
) -> NormEstimate:
    """Spectral norm from matvecs only.

    Runs one Krylov process on ``T`` and returns the larger of
    ``|theta_min|`` and ``|theta_max|``. Convergence means both extreme Ritz
    residuals are at most ``tol * value``. Hitting ``max_iter`` is not an
    error; the estimate is returned with ``converged=False``.

    Parameters
    ----------
    tol : float
        Relative residual tolerance, must be positive.
    max_iter : int, optional
        Matvec budget. Defaults to ``4 n``.
    seed : int
        Seed of the random unit start vector; recorded in the result.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    n = T.n
    max_iter = 4 * n if max_iter is None else int(max_iter)
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    upper = upper_certificate(T.coeffs)
    if upper == 0.0:
        return NormEstimate(0.0, 0.0, 0.0, 0, True, 0.0, seed, "lanczos", 0.0, 0.0)
    if n == 1:
        val = abs(float(T.x[0]))
        return NormEstimate(val, val, upper, 1, True, 0.0, seed, "lanczos", T.x[0], T.x[0])

    tmin, ymin, tmax, ymax, its, converged = _lanczos(T, tol, max_iter, seed, max_basis, keep)
    y = ymax if abs(tmax) >= abs(tmin) else ymin
    ty = matvec(T, y)
    rq = float(y @ ty) / float(y @ y)
    residual = float(np.linalg.norm(ty - rq * y) / np.linalg.norm(y))
    lower = abs(rq)
    value = max(abs(float(tmin)), abs(float(tmax)), lower)
    return NormEstimate(
        value=value,
        rayleigh_lower=lower,
        upper_cert=upper,
        iterations=its + 1,
        converged=bool(converged),
        residual=residual,
        seed=seed,
        method="lanczos",
        ritz_min=float(tmin),
        ritz_max=float(tmax),
    )


def operator_norm(x, tol: float = 1e-7, **kwargs) -> NormEstimate:
    """Convenience wrapper: norm of the Toeplitz matrix with first row ``x``."""
    return operator_norm_iterative(toeplitz_from_coeffs(x), tol=tol, **kwargs)


@dataclass(frozen=True, eq=False)
class HankelSeq:
    """Entries ``y_1 .. y_{2n-1}`` of an ``n x n`` Hankel matrix (stored 0-based)."""

    entries: np.ndarray

    def __post_init__(self):
        arr = _as_finite_array(self.entries, "HankelSeq")
        if arr.size % 2 == 0:
            raise ValueError(f"Hankel sequence needs odd length 2n-1, got {arr.size}")
        object.__setattr__(self, "entries", arr)

    @property
    def n(self) -> int:
        return (self.entries.size + 1) // 2


def hankel_from_seq(y, n: int | None = None) -> np.ndarray:
    """Dense Hankel matrix ``H[j, k] = y[j + k]`` (0-based)."""
    y = y if isinstance(y, HankelSeq) else HankelSeq(y)
    if n is not None and y.entries.size != 2 * n - 1:
        raise ValueError(f"expected {2 * n - 1} entries for n={n}, got {y.entries.size}")
    idx = np.arange(y.n)
    return y.entries[idx[:, None] + idx[None, :]]


@dataclass(frozen=True)
class HankelReport:
    hankel_svals: np.ndarray
    reversed_toeplitz_svals: np.ndarray
    max_abs_gap: float
    scale: float


def hankel_toeplitz_singular_check(y, cap: int | None = None) -> HankelReport:
    """Compare singular values of ``H`` with those of ``H`` with its rows reversed.

    The row-reversed matrix is a (nonsymmetric) Toeplitz matrix.
    """
    y = y if isinstance(y, HankelSeq) else HankelSeq(y)
    _check_cap(y.n, cap)
    H = hankel_from_seq(y)
    R = H[::-1]
    sh = np.sort(np.linalg.svd(H, compute_uv=False))[::-1]
    sr = np.sort(np.linalg.svd(R, compute_uv=False))[::-1]
    gap = float(np.max(np.abs(sh - sr)))
    scale = max(1.0, float(sh[0]))
    return HankelReport(sh, sr, gap, scale)
