"""Cosine-polynomial symbols of Toeplitz matrices and their certified sup norms.

For a first row ``x`` of length ``n``:

* the Laurent symbol ``f(t) = x_0 + 2 sum_j x_j cos(2 pi j t)`` has
  ``sup |f| >= ||T_n||``;
* the Fejer-weighted symbol, with ``x_j`` damped by ``(1 - j/n)``, is the
  Rayleigh quotient of ``T_n`` at a normalised Fourier vector, so
  ``sup |g| <= ||T_n||``.

Sup norms are bracketed rigorously: every grid value is a value of ``|g|``
(minus a floating-point allowance), and between grid points ``|g|`` is
bounded with the Lipschitz constant ``2 pi sum j |c_j|`` or the curvature
bound ``4 pi^2 sum j^2 |c_j|``, whichever is smaller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft

from toeplab import _backend
from toeplab.matrix_core import (
    NormEstimate,
    as_coeffs,
    operator_norm_iterative,
    toeplitz_from_coeffs,
)

_EPS = np.finfo(float).eps
MAX_REFINEMENTS = 24


class NormNotConverged(RuntimeError):
    def __init__(self, estimate: NormEstimate):
        super().__init__(f"norm estimate did not converge (residual {estimate.residual:.3g})")
        self.estimate = estimate


class SandwichViolation(AssertionError):
    pass


@dataclass(frozen=True, eq=False)
class SymbolPoly:
    """``g(t) = c_0 + sum_{j>=1} c_j cos(2 pi j t)`` on ``[0, 1]``."""

    c: np.ndarray

    def __post_init__(self):
        arr = np.array(self.c, dtype=np.float64).reshape(-1)
        if arr.size == 0 or not np.all(np.isfinite(arr)):
            raise ValueError("symbol coefficients must be finite and non-empty")
        arr.setflags(write=False)
        object.__setattr__(self, "c", arr)

    @property
    def degree(self) -> int:
        return self.c.size - 1

    def lipschitz(self) -> float:
        j = np.arange(self.c.size)
        return float(2 * math.pi * np.dot(j, np.abs(self.c)))

    def curvature(self) -> float:
        j = np.arange(self.c.size, dtype=np.float64)
        return float(4 * math.pi**2 * np.dot(j * j, np.abs(self.c)))

    def __call__(self, t, backend=None):
        return evaluate(self, t, backend=backend)


def laurent_symbol(x) -> SymbolPoly:
    x = as_coeffs(x).entries
    c = 2.0 * x
    c[0] = x[0]
    return SymbolPoly(c)


def fejer_symbol(x) -> SymbolPoly:
    x = as_coeffs(x).entries
    n = x.size
    c = 2.0 * (1.0 - np.arange(n) / n) * x
    c[0] = x[0]
    return SymbolPoly(c)


def evaluate(g: SymbolPoly, t, backend=None) -> np.ndarray:
    kern = _backend.kernels if backend is None else _backend.get(backend)
    t = np.ascontiguousarray(np.atleast_1d(np.asarray(t, dtype=np.float64)))
    return kern.cosine_series(g.c, t)


@dataclass(frozen=True)
class SupNormCert:
    """``lo <= sup |g| <= hi``; ``certified`` when ``hi - lo <= tol``."""

    lo: float
    hi: float
    grid_points: int
    refinements: int
    certified: bool = True
    argmax: float = 0.0

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _grid_values(c, intervals):
    """``g(k / (2 * intervals))`` for ``k = 0 .. intervals`` via one real FFT."""
    size = 2 * intervals
    pad = np.zeros(size)
    pad[: c.size] = c
    return scipy.fft.rfft(pad).real


def sup_norm_certified(
    g: SymbolPoly,
    tol: float = 1e-9,
    max_refinements: int = MAX_REFINEMENTS,
    backend=None,
) -> SupNormCert:
    """Certified bracket for ``sup_{t in [0, 1]} |g(t)|``.

    Evaluates on a dyadic grid over ``[0, 1/2]`` (enough, ``g`` is even and
    1-periodic) of at least ``4 m`` cells, then bisects only the cells whose
    upper bound still exceeds ``lo + tol``. If the refinement cap is hit the
    bracket is still valid, just wider than ``tol``, and ``certified`` is
    False.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    c = g.c
    m = c.size
    abs_sum = float(np.sum(np.abs(c)))
    if m == 1 or abs_sum == 0.0:
        v = abs(float(c[0]))
        return SupNormCert(v, v, 1, 0, True, 0.0)

    kern = _backend.kernels if backend is None else _backend.get(backend)
    lip = g.lipschitz()
    curv = g.curvature()
    intervals = 1 << (max(8, 4 * m) - 1).bit_length()
    size = 2 * intervals
    # floating-point error of one evaluation (FFT or direct summation)
    slack = 8.0 * _EPS * abs_sum * (m + 8 + math.log2(size) * math.sqrt(size))

    vals = _grid_values(c, intervals)
    absvals = np.abs(vals)
    k_best = int(np.argmax(absvals))
    best = float(absvals[k_best])
    argmax = k_best / size
    h = 1.0 / size
    left_t = np.arange(intervals) * h
    left_v = vals[:-1]
    right_v = vals[1:]
    points = intervals + 1
    hi_dropped = -np.inf
    level = 0

    while True:
        a, b = np.abs(left_v), np.abs(right_v)
        bound = np.minimum(0.5 * (a + b + lip * h), np.maximum(a, b) + curv * h * h / 8.0) + slack
        lo = float(best - slack)
        active = bound > lo + tol
        if (~active).any():
            hi_dropped = max(hi_dropped, float(bound[~active].max()))
        if not active.any():
            hi = max(hi_dropped, best + slack)
            return SupNormCert(lo, float(hi), int(points), level, bool(hi - lo <= tol), float(argmax))
        if level >= max_refinements:
            hi = max(hi_dropped, float(bound[active].max()), best + slack)
            return SupNormCert(lo, float(hi), int(points), level, bool(hi - lo <= tol), float(argmax))

        left_t, left_v, right_v = left_t[active], left_v[active], right_v[active]
        h *= 0.5
        mid_t = left_t + h
        mid_v = kern.cosine_series(c, np.ascontiguousarray(mid_t))
        points += mid_t.size
        am = np.abs(mid_v)
        j = int(np.argmax(am))
        if am[j] > best:
            best, argmax = float(am[j]), float(mid_t[j])
        left_t = np.concatenate([left_t, mid_t])
        left_v, right_v = np.concatenate([left_v, mid_v]), np.concatenate([mid_v, right_v])
        level += 1


@dataclass(frozen=True)
class SandwichReport:
    lower: float
    norm: NormEstimate
    upper: float
    fejer: SupNormCert
    laurent: SupNormCert
    tol: float

    @property
    def ok(self) -> bool:
        v = self.norm.value
        return self.lower - self.tol <= v <= self.upper + self.tol


def sandwich(x, tol: float = 1e-6, norm_tol: float = 1e-10, seed=None, strict: bool = False) -> SandwichReport:
    """Fejer lower bound, operator norm and Laurent upper bound for one row.

    ``lower`` is the certified lower end of ``sup |fejer|`` and ``upper`` the
    certified upper end of ``sup |laurent|``, so any violation of
    ``lower - tol <= norm <= upper + tol`` is an error in the norm.
    Raises :class:`NormNotConverged` if the norm estimate does not converge,
    and :class:`SandwichViolation` on a violation when ``strict``.
    """
    x = as_coeffs(x)
    kwargs = {} if seed is None else {"seed": seed}
    est = operator_norm_iterative(toeplitz_from_coeffs(x), tol=norm_tol, **kwargs)
    if not est.converged:
        raise NormNotConverged(est)
    fej = sup_norm_certified(fejer_symbol(x), tol)
    lau = sup_norm_certified(laurent_symbol(x), tol)
    rep = SandwichReport(fej.lo, est, lau.hi, fej, lau, tol)
    if strict and not rep.ok:
        raise SandwichViolation(
            f"{rep.lower} - {tol} <= {est.value} <= {rep.upper} + {tol} fails"
        )
    return rep


@dataclass(frozen=True)
class ChainingQuantities:
    D: float
    A: float
    entropy_bound: float
    C: float

    @property
    def ratio(self) -> float:
        return self.A / self.D if self.D > 0 else 0.0


def chaining_quantities(x, C: float = 1.0) -> ChainingQuantities:
    """Diameter, Lipschitz aggregate and entropy-integral bound of the symbol process.

    ``D = 4 sqrt(sum_{j>=1} x_j^2)``, ``A = sqrt(sum_{j>=1} j^2 x_j^2)`` and
    ``D sqrt(max(0, log(C A / D))) + sqrt(pi) D`` (zero when ``D = 0``).
    """
    if not C > 0:
        raise ValueError("C must be positive")
    x = as_coeffs(x).entries
    j = np.arange(x.size, dtype=np.float64)[1:]
    tail = x[1:]
    D = 4.0 * math.sqrt(float(np.dot(tail, tail)))
    A = math.sqrt(float(np.dot(j * j, tail * tail)))
    if D == 0.0:
        return ChainingQuantities(0.0, A, 0.0, C)
    bound = D * math.sqrt(max(0.0, math.log(C * A / D))) + math.sqrt(math.pi) * D
    return ChainingQuantities(D, A, bound, C)


def expectation_upper_bound(second_moments, n: int, C: float = 1.0) -> float:
    """``C sqrt(sum E X_i^2) sqrt(log n)``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if not C > 0:
        raise ValueError("C must be positive")
    mom = np.asarray(second_moments, dtype=np.float64)
    if np.any(mom < 0):
        raise ValueError("second moments must be nonnegative")
    return float(C * math.sqrt(float(mom.sum())) * math.sqrt(math.log(n)))


def l2l4_lower_diagnostic(a) -> float:
    """``||a||_2 sqrt(max(0, log(||a||_2 / ||a||_4)))``; zero for the zero vector."""
    a = np.asarray(a, dtype=np.float64)
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if scale == 0.0:
        return 0.0
    # the norm ratio is scale-free; normalizing avoids underflow in a**4
    u = a / scale
    l2 = float(np.sqrt(np.sum(u * u)))
    l4 = float(np.sum(u**4) ** 0.25)
    return scale * l2 * math.sqrt(max(0.0, math.log(l2 / l4)))
