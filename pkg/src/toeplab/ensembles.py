"""Seeded coefficient ensembles, truncation, and empirical moment estimates.

Entry ``i`` of draw ``sample_index`` depends only on
``(master_seed, sample_index, i)``: a splitmix64 counter stream keyed by the
first two is read at positions ``2i`` and ``2i + 1``. Draws are therefore
reproducible regardless of call order or worker count, and the length-``m``
draw is a prefix of the length-``n`` draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize, special, stats

from toeplab import _backend
from toeplab.matrix_core import CoeffSeq, as_coeffs

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INIT = 0x6A09E667F3BCC909
# first index whose log exceeds 1; two_point_heavy is zero below it
HEAVY_START = 3


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix_seed(*parts: int) -> int:
    """Fold integers into one 64-bit key.

    For fixed leading parts the map from the last part (mod 2**64) to the
    key is a bijection, so distinct sample indices never collide.
    """
    h = _INIT
    for p in parts:
        h = mix64(h ^ mix64((int(p) + _GOLDEN) & MASK64))
    return h


def _uniform_pairs(master_seed, sample_index, n, backend=None):
    kern = _backend.kernels if backend is None else _backend.get(backend)
    key = mix_seed(master_seed, sample_index)
    u = kern.splitmix_uniforms(key, 0, 2 * n)
    return u[0::2], u[1::2]


# --- families -------------------------------------------------------------


@dataclass(frozen=True)
class Rademacher:
    name = "rademacher"

    def draw(self, u1, u2, idx):
        return np.where(u1 < 0.5, -1.0, 1.0)

    def mean(self):
        return 0.0

    def second_moments(self, idx):
        return np.ones(len(idx))

    def abs_bound(self):
        return 1.0

    def abs_survival(self, thr, idx):
        return np.where(np.asarray(thr) <= 1.0, 1.0, 0.0)

    def psi2_norm(self):
        return 1.0 / math.sqrt(math.log(2.0))

    def params(self):
        return {}


@dataclass(frozen=True)
class Gaussian:
    mean_: float = 0.0
    sd: float = 1.0
    name = "gaussian"

    def __post_init__(self):
        if not self.sd >= 0 or not math.isfinite(self.sd) or not math.isfinite(self.mean_):
            raise ValueError(f"invalid gaussian parameters mean={self.mean_}, sd={self.sd}")

    def draw(self, u1, u2, idx):
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return self.mean_ + self.sd * z

    def mean(self):
        return self.mean_

    def second_moments(self, idx):
        return np.full(len(idx), self.sd**2 + self.mean_**2)

    def abs_bound(self):
        return None if self.sd > 0 else abs(self.mean_)

    def abs_survival(self, thr, idx):
        thr = np.asarray(thr, dtype=float)
        if self.sd == 0:
            return np.where(abs(self.mean_) >= thr, 1.0, 0.0)
        return stats.norm.sf(thr, self.mean_, self.sd) + stats.norm.cdf(-thr, self.mean_, self.sd)

    def psi2_norm(self):
        if self.mean_ != 0:
            return None
        # E exp(Z^2 / c^2) = (1 - 2 sd^2 / c^2)^(-1/2) = 2
        return self.sd * math.sqrt(8.0 / 3.0)

    def params(self):
        return {"mean": self.mean_, "sd": self.sd}


@dataclass(frozen=True)
class UniformCentered:
    halfwidth: float = 1.0
    name = "uniform_centered"

    def __post_init__(self):
        if not self.halfwidth >= 0 or not math.isfinite(self.halfwidth):
            raise ValueError(f"invalid halfwidth {self.halfwidth}")

    def draw(self, u1, u2, idx):
        return (2.0 * u1 - 1.0) * self.halfwidth

    def mean(self):
        return 0.0

    def second_moments(self, idx):
        return np.full(len(idx), self.halfwidth**2 / 3.0)

    def abs_bound(self):
        return self.halfwidth

    def abs_survival(self, thr, idx):
        thr = np.asarray(thr, dtype=float)
        if self.halfwidth == 0:
            return np.where(thr <= 0, 1.0, 0.0)
        return np.clip(1.0 - thr / self.halfwidth, 0.0, 1.0)

    def psi2_norm(self):
        # E exp(U^2 h^2 / c^2) = sqrt(pi) erfi(sqrt(a)) / (2 sqrt(a)), a = h^2 / c^2
        if self.halfwidth == 0:
            return 0.0
        a = optimize.brentq(lambda a: math.sqrt(math.pi) * special.erfi(math.sqrt(a)) / (2 * math.sqrt(a)) - 2.0, 1e-6, 10.0)
        return self.halfwidth / math.sqrt(a)

    def params(self):
        return {"halfwidth": self.halfwidth}


@dataclass(frozen=True)
class StudentT:
    dof: float = 5.0
    name = "student_t"

    def __post_init__(self):
        if not self.dof > 0 or not math.isfinite(self.dof):
            raise ValueError(f"student_t needs dof > 0, got {self.dof}")

    def draw(self, u1, u2, idx):
        return special.stdtrit(self.dof, u1)

    def mean(self):
        return 0.0 if self.dof > 1 else float("nan")

    def second_moments(self, idx):
        v = self.dof / (self.dof - 2.0) if self.dof > 2 else float("inf")
        return np.full(len(idx), v)

    def abs_bound(self):
        return None

    def abs_survival(self, thr, idx):
        return 2.0 * stats.t.sf(np.asarray(thr, dtype=float), self.dof)

    def psi2_norm(self):
        return None

    def params(self):
        return {"dof": self.dof}


def _iterated_logs(i):
    i = np.asarray(i, dtype=np.float64)
    l1 = np.log(np.maximum(i, math.e))
    l2 = np.log(np.maximum(l1, math.e))
    l3 = np.log(np.maximum(l2, math.e))
    return l1, l2, l3


@dataclass(frozen=True)
class TwoPointHeavy:
    """Index-dependent two-point law: ``+-sqrt(i log i logloglog i)`` w.p. ``p_i`` each.

    ``p_i = 1 / (i log i loglog i logloglog i)``. Iterated logs are taken of
    ``max(., e)``; entries with index below ``HEAVY_START`` are zero.
    """

    name = "two_point_heavy"

    @staticmethod
    def levels(idx):
        idx = np.asarray(idx)
        l1, l2, l3 = _iterated_logs(idx)
        with np.errstate(divide="ignore"):
            p = np.where(idx >= HEAVY_START, 1.0 / (idx * l1 * l2 * l3), 0.0)
        value = np.sqrt(np.maximum(idx, 0) * l1 * l3)
        return value, p

    def draw(self, u1, u2, idx):
        value, p = self.levels(idx)
        return np.where(u1 < p, value, np.where(u1 < 2 * p, -value, 0.0))

    def mean(self):
        return 0.0

    def second_moments(self, idx):
        value, p = self.levels(idx)
        return 2 * p * value**2

    def abs_bound(self):
        return None

    def abs_survival(self, thr, idx):
        value, p = self.levels(idx)
        thr = np.asarray(thr, dtype=float)
        return np.where((value >= thr) & (p > 0), 2 * p, np.where(thr <= 0, 1.0, 0.0))

    def psi2_norm(self):
        return None

    def params(self):
        return {}


@dataclass(frozen=True)
class Constant:
    m: float = 0.0
    name = "constant"

    def __post_init__(self):
        if not math.isfinite(self.m):
            raise ValueError("constant must be finite")

    def draw(self, u1, u2, idx):
        return np.full(len(idx), float(self.m))

    def mean(self):
        return float(self.m)

    def second_moments(self, idx):
        return np.full(len(idx), float(self.m) ** 2)

    def abs_bound(self):
        return abs(self.m)

    def abs_survival(self, thr, idx):
        return np.where(abs(self.m) >= np.asarray(thr, dtype=float), 1.0, 0.0)

    def psi2_norm(self):
        return abs(self.m) / math.sqrt(math.log(2.0))

    def params(self):
        return {"m": self.m}


FAMILIES = {
    "rademacher": Rademacher,
    "gaussian": Gaussian,
    "uniform_centered": UniformCentered,
    "student_t": StudentT,
    "two_point_heavy": TwoPointHeavy,
    "constant": Constant,
}
_ARG_ORDER = {
    "rademacher": (),
    "gaussian": ("mean", "sd"),
    "uniform_centered": ("halfwidth",),
    "student_t": ("dof",),
    "two_point_heavy": (),
    "constant": ("m",),
}
_FIELD = {"mean": "mean_"}


def make_family(name: str, **params):
    name = name.strip().lower().replace("-", "_")
    if name not in FAMILIES:
        raise ValueError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}")
    unknown = set(params) - set(_ARG_ORDER[name])
    if unknown:
        raise ValueError(f"unexpected parameters for {name}: {sorted(unknown)}")
    return FAMILIES[name](**{_FIELD.get(k, k): float(v) for k, v in params.items()})


def parse_family(text: str):
    """Parse ``name`` or ``name:a,b`` (positional parameters), e.g. ``gaussian:1,1``."""
    name, _, args = text.partition(":")
    name = name.strip().lower().replace("-", "_")
    if name not in FAMILIES:
        raise ValueError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}")
    values = [float(a) for a in args.split(",") if a.strip()] if args else []
    keys = _ARG_ORDER[name]
    if len(values) > len(keys):
        raise ValueError(f"{name} takes at most {len(keys)} parameters {keys}")
    return make_family(name, **dict(zip(keys, values)))


def family_tag(family) -> str:
    vals = [family.params()[k] for k in _ARG_ORDER[family.name]]
    if not vals:
        return family.name
    return family.name + ":" + ",".join(repr(float(v)) for v in vals)


# --- truncation -------------------------------------------------------------


@dataclass(frozen=True)
class TruncationRule:
    """Zero out entries with ``|x_i|`` above a threshold.

    ``by_index``: threshold ``sqrt(i log i)``, infinite for ``i`` in {0, 1}.
    ``by_dimension``: the single threshold ``sqrt(n log n)``.
    """

    kind: str
    n: int | None = None

    def __post_init__(self):
        if self.kind not in ("by_index", "by_dimension"):
            raise ValueError(f"unknown truncation kind {self.kind!r}")
        if self.kind == "by_dimension" and (self.n is None or self.n < 1):
            raise ValueError("by_dimension truncation needs n >= 1")

    def thresholds(self, length: int) -> np.ndarray:
        if self.kind == "by_dimension":
            return np.full(length, math.sqrt(self.n * math.log(self.n)))
        i = np.arange(length, dtype=np.float64)
        out = np.full(length, np.inf)
        big = i >= 2
        out[big] = np.sqrt(i[big] * np.log(i[big]))
        return out

    def to_dict(self):
        return {"kind": self.kind, "n": self.n}

    @classmethod
    def from_dict(cls, d):
        return None if d is None else cls(d["kind"], d.get("n"))


def truncate_sequence(x, rule: TruncationRule | None) -> CoeffSeq:
    x = as_coeffs(x)
    if rule is None:
        return x
    e = x.entries
    return CoeffSeq(np.where(np.abs(e) <= rule.thresholds(e.size), e, 0.0))


# --- ensemble spec --------------------------------------------------------


@dataclass(frozen=True)
class EnsembleSpec:
    family: object
    truncation: TruncationRule | None = None
    master_seed: int = 0

    @property
    def tag(self) -> str:
        return family_tag(self.family)

    def with_seed(self, seed: int) -> "EnsembleSpec":
        return replace(self, master_seed=int(seed))

    def mean(self) -> float:
        return self.family.mean()

    def to_dict(self) -> dict:
        d = {"family": self.family.name}
        d.update(self.family.params())
        d["truncation"] = None if self.truncation is None else self.truncation.to_dict()
        d["master_seed"] = int(self.master_seed)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleSpec":
        d = dict(d)
        name = d.pop("family")
        trunc = TruncationRule.from_dict(d.pop("truncation", None))
        seed = int(d.pop("master_seed", 0))
        return cls(make_family(name, **d), trunc, seed)


def sample_array(spec: EnsembleSpec, n: int, sample_index: int = 0, backend=None) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    u1, u2 = _uniform_pairs(spec.master_seed, sample_index, n, backend)
    idx = np.arange(n)
    x = np.asarray(spec.family.draw(u1, u2, idx), dtype=np.float64)
    if spec.truncation is not None:
        x = np.where(np.abs(x) <= spec.truncation.thresholds(n), x, 0.0)
    return x


def sample_sequence(spec: EnsembleSpec, n: int, sample_index: int = 0, backend=None) -> CoeffSeq:
    """Draw ``x_0 .. x_{n-1}``; deterministic in ``(master_seed, sample_index)``."""
    return CoeffSeq(sample_array(spec, n, sample_index, backend))


# --- empirical moments ------------------------------------------------------


def orlicz_norm_empirical(samples, alpha: float, rel_tol: float = 1e-6) -> float:
    """Empirical psi_alpha norm: least ``c`` with ``mean(exp((|X|/c)^alpha)) - 1 <= 1``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    a = np.abs(np.asarray(samples, dtype=np.float64))
    if a.size == 0:
        raise ValueError("need at least one sample")
    top = float(a.max())
    if top == 0.0:
        return 0.0

    def excess(c):
        with np.errstate(over="ignore"):
            return float(np.mean(np.exp((a / c) ** alpha))) - 2.0

    hi = top / math.log(2.0) ** (1.0 / alpha)
    lo = hi
    while excess(lo) <= 0:
        lo *= 0.5
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    stderr: float
    n_mc: int


def max_abs_draws(spec: EnsembleSpec, n: int, n_mc: int, seed: int) -> np.ndarray:
    """``max_i |X_i|`` for ``n_mc`` independent length-``n`` draws."""
    s = spec.with_seed(seed)
    return np.array([np.max(np.abs(sample_array(s, n, k))) for k in range(n_mc)])


def max_abs_moment(spec: EnsembleSpec, n: int, p: float, n_mc: int, seed: int) -> MomentEstimate:
    """Monte Carlo estimate of ``E max_i |X_i|^p`` with its standard error."""
    if p < 1 or n_mc < 1:
        raise ValueError("need p >= 1 and n_mc >= 1")
    y = max_abs_draws(spec, n, n_mc, seed) ** p
    se = float(np.std(y, ddof=1) / math.sqrt(n_mc)) if n_mc > 1 else float("nan")
    return MomentEstimate(float(np.mean(y)), se, n_mc)
