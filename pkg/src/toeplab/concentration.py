"""Tail bounds for ``||T_n||`` and their empirical counterparts.

All bound evaluators return probabilities in ``[0, 1]`` (formulas are capped
at 1) and use the natural logarithm. Unspecified absolute constants are
plain arguments.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from toeplab.matrix_core import a_basis_norms, operator_norm_iterative, toeplitz_from_coeffs


@dataclass(frozen=True)
class BoundParams:
    """Inputs shared by the bound evaluators.

    ``free_constants`` holds the unspecified absolute constants (``K``,
    ``C``, ``K_alpha``), which must be positive.
    """

    sigma2: float = 0.0
    M: float = 0.0
    EZ: float = 0.0
    delta: float = 1.0
    eta: float = 1.0
    p: float = 2.0
    alpha: float = 1.0
    free_constants: dict = field(default_factory=lambda: {"K": 1.0, "C": 1.0, "K_alpha": 1.0})

    def __post_init__(self):
        for name in ("sigma2", "M", "EZ"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if not self.p >= 1:
            raise ValueError("p must be >= 1")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        bad = [k for k, v in self.free_constants.items() if not v > 0]
        if bad:
            raise ValueError(f"free constants must be positive: {bad}")

    def constant(self, name: str) -> float:
        return float(self.free_constants.get(name, 1.0))


def _gauss_term(t, sigma2, delta):
    if sigma2 <= 0:
        return 0.0
    return math.exp(-t * t / (2.0 * (1.0 + delta) * sigma2))


def _cap(v):
    return min(1.0, max(0.0, v))


def klein_rio_bound(t, sigma2, M, EZ):
    """``exp(-t^2 / (2 (sigma2 + 2 M EZ) + 3 M t))``; same value for both tails."""
    if t < 0 or sigma2 < 0 or M < 0 or EZ < 0:
        raise ValueError("t, sigma2, M, EZ must be nonnegative")
    if t == 0:
        return 1.0
    den = 2.0 * (sigma2 + 2.0 * M * EZ) + 3.0 * M * t
    if den == 0:
        return 0.0
    return _cap(math.exp(-t * t / den))


def corollary2_bound(t, sigma2, delta, M, K):
    """``exp(-t^2 / (2 (1 + delta) sigma2)) + exp(-t / (K M))``, capped at 1."""
    if not delta > 0 or not K > 0:
        raise ValueError("delta and K must be positive")
    if t <= 0:
        return 1.0
    second = math.exp(-t / (K * M)) if M > 0 else 0.0
    return _cap(_gauss_term(t, sigma2, delta) + second)


def fuk_nagaev_bound(t, sigma2, delta, p, Emax_p, C):
    """Gaussian term plus ``C E max_i |X_i|^p / t^p``, capped at 1."""
    if p < 1 or not C > 0 or Emax_p < 0:
        raise ValueError("need p >= 1, C > 0, Emax_p >= 0")
    if t <= 0:
        return 1.0
    tp = t**p
    if Emax_p == 0:
        second = 0.0
    else:
        second = C * Emax_p / tp if tp > 0 else math.inf
    return _cap(_gauss_term(t, sigma2, delta) + second)


def psi_alpha_sum_bound(t, sigma2, delta, alpha, psi_max, C):
    """Gaussian term plus ``3 exp(-(t / (C psi_max))^alpha)``, capped at 1."""
    if not 0 < alpha <= 1 or not C > 0:
        raise ValueError("need 0 < alpha <= 1 and C > 0")
    if t <= 0:
        return 1.0
    second = 3.0 * math.exp(-((t / (C * psi_max)) ** alpha)) if psi_max > 0 else 0.0
    return _cap(_gauss_term(t, sigma2, delta) + second)


def psi2_toeplitz_bound(t, sum_psi2_sq, K):
    """Subgaussian entries: ``K exp(-t^2 / (K sum ||X_i||_psi2^2))``, capped at 1."""
    if not K > 0 or sum_psi2_sq < 0:
        raise ValueError("need K > 0 and a nonnegative sum")
    if t <= 0:
        return min(1.0, K)
    if sum_psi2_sq == 0:
        return 0.0
    return _cap(K * math.exp(-t * t / (K * sum_psi2_sq)))


def psi_alpha_toeplitz_bound(t, Sigma2, psi_max_norm, alpha, K_alpha, apply_alpha_power=False):
    """``2 exp(-min(t^2 / Sigma2, r) / K_alpha)`` with ``r = t / psi`` (or ``(t / psi)^alpha``)."""
    if not K_alpha > 0:
        raise ValueError("K_alpha must be positive")
    if t <= 0:
        return 1.0
    quad = t * t / Sigma2 if Sigma2 > 0 else math.inf
    if psi_max_norm > 0:
        r = t / psi_max_norm
        if apply_alpha_power:
            r = r**alpha
    else:
        r = math.inf
    e = min(quad, r)
    if math.isinf(e):
        return 0.0
    return _cap(2.0 * math.exp(-e / K_alpha))


def hj_truncation_level(p, Emax_p):
    """Truncation level ``rho`` with ``rho^p = 2 * 4^p * E max_i |X_i|^p``."""
    if p < 1 or Emax_p < 0:
        raise ValueError("need p >= 1 and Emax_p >= 0")
    return (2.0 * 4.0**p * Emax_p) ** (1.0 / p)


@dataclass(frozen=True)
class StrongVariance:
    value: float
    cap: float


def sigma2_strong(second_moments, n=None) -> StrongVariance:
    """``sum_i ||A_i||^2 E X_i^2`` and the cruder ``4 sum_i E X_i^2``."""
    mom = np.asarray(second_moments, dtype=np.float64)
    n = mom.size if n is None else n
    if mom.size != n:
        raise ValueError(f"expected {n} moments, got {mom.size}")
    w = a_basis_norms(n)
    return StrongVariance(float(np.dot(w * w, mom)), float(4.0 * mom.sum()))


@dataclass(frozen=True)
class WeakVariance:
    lower: float
    upper: float
    heuristic: float
    gamma: np.ndarray = field(repr=False)


def _weak_objective(gamma, s):
    """Squared norm of the symmetric Toeplitz matrix with first row ``gamma * s``, plus its top eigenvector."""
    row = gamma * s
    n = row.size
    if n == 1:
        return float(row[0] ** 2), np.ones(1)
    T = toeplitz_from_coeffs(row)
    if not np.any(row):
        return 0.0, np.ones(n) / math.sqrt(n)
    if n <= 256:
        w, V = np.linalg.eigh(T.todense())
        j = int(np.argmax(np.abs(w)))
        return float(w[j] ** 2), V[:, j]
    from toeplab.matrix_core import _lanczos  # large n: matrix-free

    tmin, ymin, tmax, ymax, _, _ = _lanczos(T, 1e-10, 8 * n, 1, 160, 24)
    if abs(tmax) >= abs(tmin):
        return float(tmax**2), ymax
    return float(tmin**2), ymin


def sigma2_weak(second_moments, n=None, iters: int = 20) -> WeakVariance:
    """Bracket for the weak variance of ``sum_i X_i A_i``.

    ``lower`` uses the flat weights ``gamma = 1/sqrt(n)``; ``upper`` is the
    strong variance. ``heuristic`` is the best value found by alternating
    between the top singular vectors and the weights, starting from the flat
    weights.
    """
    mom = np.asarray(second_moments, dtype=np.float64)
    n = mom.size if n is None else n
    if mom.size != n:
        raise ValueError(f"expected {n} moments, got {mom.size}")
    if np.any(mom < 0):
        raise ValueError("second moments must be nonnegative")
    if n == 1:
        v = float(mom[0])
        return WeakVariance(v, v, v, np.ones(1))
    s = np.sqrt(mom)
    gamma = np.full(n, 1.0 / math.sqrt(n))
    lower, u = _weak_objective(gamma, s)
    best, best_gamma = lower, gamma
    for _ in range(iters):
        corr = np.correlate(u, u, mode="full")[n - 1:]
        corr[1:] *= 2.0
        g = s * corr
        norm = np.linalg.norm(g)
        if norm == 0:
            break
        gamma = g / norm
        val, u = _weak_objective(gamma, s)
        if val > best * (1 + 1e-14):
            best, best_gamma = val, gamma
        else:
            break
    upper = sigma2_strong(mom, n).value
    return WeakVariance(lower, upper, best, best_gamma)


# --- empirical tails --------------------------------------------------------


def clopper_pearson_upper(k, n, alpha):
    """Upper end of the two-sided exact binomial interval at level ``1 - alpha``."""
    k = np.asarray(k)
    with np.errstate(invalid="ignore"):
        up = stats.beta.ppf(1.0 - alpha / 2.0, k + 1, np.maximum(n - k, 1e-300))
    return np.where(k >= n, 1.0, up)


def clopper_pearson_lower(k, n, alpha):
    """Lower end of the two-sided exact binomial interval at level ``1 - alpha``."""
    k = np.asarray(k)
    with np.errstate(invalid="ignore"):
        lo = stats.beta.ppf(alpha / 2.0, np.maximum(k, 1e-300), n - k + 1)
    return np.where(k <= 0, 0.0, lo)


@dataclass
class TailCurve:
    thresholds: np.ndarray
    empirical_survival: np.ndarray
    upper_confidence: np.ndarray
    bound_values: np.ndarray
    n_samples: int
    conf_alpha: float = 0.01
    lower_confidence: np.ndarray | None = None

    def with_bound(self, values) -> "TailCurve":
        return TailCurve(
            self.thresholds, self.empirical_survival, self.upper_confidence,
            np.asarray(values, dtype=np.float64), self.n_samples, self.conf_alpha,
            self.lower_confidence,
        )

    def to_csv(self, dest=None) -> str:
        """Write columns ``t, survival, upper_conf, bound``; returns the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "survival", "upper_conf", "bound"])
        for row in zip(self.thresholds, self.empirical_survival, self.upper_confidence, self.bound_values):
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if dest is not None:
            Path(dest).write_text(text)
        return text

    @classmethod
    def from_csv(cls, src, n_samples: int, conf_alpha: float = 0.01) -> "TailCurve":
        text = Path(src).read_text() if not isinstance(src, io.StringIO) else src.getvalue()
        rows = list(csv.DictReader(io.StringIO(text)))
        col = lambda k: np.array([float(r[k]) for r in rows])  # noqa: E731
        return cls(col("t"), col("survival"), col("upper_conf"), col("bound"), n_samples, conf_alpha)


def empirical_tail(samples, center, thresholds, conf_alpha=0.01, side="upper", bound=None) -> TailCurve:
    """Fraction of samples with ``sample - center >= t`` (``side='lower'``: ``center - sample >= t``)."""
    z = np.asarray(samples, dtype=np.float64)
    if z.size == 0:
        raise ValueError("need at least one sample")
    t = np.asarray(thresholds, dtype=np.float64)
    if np.any(np.diff(t) < 0):
        raise ValueError("thresholds must be increasing")
    dev = np.sort(z - center if side == "upper" else center - z)
    counts = dev.size - np.searchsorted(dev, t, side="left")
    surv = counts / dev.size
    upper = np.asarray(clopper_pearson_upper(counts, dev.size, conf_alpha), dtype=float)
    lower = np.asarray(clopper_pearson_lower(counts, dev.size, conf_alpha), dtype=float)
    bvals = np.full(t.size, np.nan) if bound is None else np.array([bound(v) for v in t])
    return TailCurve(t, surv, upper, bvals, int(dev.size), conf_alpha, lower)


@dataclass(frozen=True)
class DominanceReport:
    violations: int
    worst_gap: float
    conf_violations: int
    conf_worst_gap: float
    significant_violations: int = 0


def check_bound_dominates(curve: TailCurve) -> DominanceReport:
    """Count grid points where the data sit above the bound.

    * ``violations``: raw survival above the bound.
    * ``conf_violations``: Clopper-Pearson upper envelope above the bound.
      Zero means the bound clears every plausible survival value; this is
      the strict check used for acceptance.
    * ``significant_violations``: the lower confidence limit above the
      bound, i.e. evidence at level ``1 - conf_alpha`` that the bound fails.
      A bound equal to the true tail has none, up to the test's error rate.

    Gaps are ``max(data - bound)`` (negative when the bound dominates).
    """
    b = np.asarray(curve.bound_values)
    if np.any(np.isnan(b)):
        raise ValueError("curve has no bound values")
    raw = curve.empirical_survival - b
    conf = curve.upper_confidence - b
    sig = 0
    if curve.lower_confidence is not None:
        sig = int(np.sum(curve.lower_confidence > b))
    return DominanceReport(
        int(np.sum(raw > 0)), float(raw.max()), int(np.sum(conf > 0)), float(conf.max()), sig
    )


@dataclass(frozen=True)
class BoundFamily:
    """A bound shape with one free constant, for calibration.

    ``name`` is one of ``psi2_toeplitz``, ``psi_alpha_toeplitz``,
    ``corollary2``, ``fuk_nagaev``, ``psi_alpha_sum``; ``params`` holds the
    remaining arguments.
    """

    name: str
    params: dict

    def evaluate(self, t, constant):
        p = self.params
        if self.name == "psi2_toeplitz":
            return psi2_toeplitz_bound(t, p["sum_psi2_sq"], constant)
        if self.name == "psi_alpha_toeplitz":
            return psi_alpha_toeplitz_bound(
                t, p["Sigma2"], p["psi_max_norm"], p.get("alpha", 1.0), constant,
                p.get("apply_alpha_power", False),
            )
        if self.name == "corollary2":
            return corollary2_bound(t, p["sigma2"], p["delta"], p["M"], constant)
        if self.name == "fuk_nagaev":
            return fuk_nagaev_bound(t, p["sigma2"], p["delta"], p["p"], p["Emax_p"], constant)
        if self.name == "psi_alpha_sum":
            return psi_alpha_sum_bound(t, p["sigma2"], p["delta"], p["alpha"], p["psi_max"], constant)
        raise ValueError(f"unknown bound family {self.name!r}")

    def values(self, thresholds, constant):
        return np.array([self.evaluate(float(t), constant) for t in thresholds])


@dataclass(frozen=True)
class ConstantFit:
    value: float
    feasible: bool


def fit_min_constant(curves, family: BoundFamily, search_range=(1e-3, 1e3), rel_prec=1e-3) -> ConstantFit:
    """Smallest constant in ``search_range`` whose bound dominates every upper envelope.

    Every supported shape is nondecreasing in its constant, so bisection (on
    a log scale) applies. Returns the range maximum with ``feasible=False``
    when even that is not enough.
    """
    curves = list(curves)
    if not curves:
        raise ValueError("need at least one curve")
    lo, hi = map(float, search_range)

    def ok(c):
        return all(np.all(family.values(cv.thresholds, c) >= cv.upper_confidence) for cv in curves)

    if ok(lo):
        return ConstantFit(lo, True)
    if not ok(hi):
        return ConstantFit(hi, False)
    while hi - lo > rel_prec * hi:
        mid = math.sqrt(lo * hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return ConstantFit(hi, True)


def empirical_norms(spec, n, n_samples, tol=1e-7):
    """``||T_n||`` for ``n_samples`` draws of ``spec`` (sample indices ``0..n_samples-1``)."""
    from toeplab.ensembles import sample_sequence

    out = np.empty(n_samples)
    for k in range(n_samples):
        out[k] = operator_norm_iterative(toeplitz_from_coeffs(sample_sequence(spec, n, k)), tol=tol).value
    return out
