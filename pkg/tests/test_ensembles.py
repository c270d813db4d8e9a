import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate, stats

from toeplab.ensembles import (
    HEAVY_START,
    EnsembleSpec,
    TruncationRule,
    TwoPointHeavy,
    make_family,
    max_abs_moment,
    mix_seed,
    orlicz_norm_empirical,
    parse_family,
    sample_array,
    sample_sequence,
    truncate_sequence,
)
from toeplab.matrix_core import CoeffSeq

ALL = ["rademacher", "gaussian", "uniform_centered", "student_t", "two_point_heavy", "constant:1.5"]


def spec(text, seed=0, truncation=None):
    return EnsembleSpec(parse_family(text), truncation, seed)


def test_constant():
    assert sample_sequence(spec("constant:3"), 4, 0) == CoeffSeq([3.0, 3.0, 3.0, 3.0])


@pytest.mark.parametrize("seed", [0, 1, 2**63 + 5])
def test_rademacher_support(seed):
    assert set(np.unique(sample_array(spec("rademacher", seed), 500, 3))) == {-1.0, 1.0}


def test_two_point_heavy_small_indices_zero():
    x = sample_array(spec("two_point_heavy", 4), 10, 0)
    assert np.all(x[:HEAVY_START] == 0)


def test_two_point_heavy_levels():
    value, p = TwoPointHeavy.levels(np.arange(0, 10**6, 997))
    assert np.all(2 * p <= 1) and np.all(p[np.arange(0, 10**6, 997) < HEAVY_START] == 0)
    v, q = TwoPointHeavy.levels(np.array([100.0]))
    l1 = math.log(100)
    l2 = math.log(l1)
    assert q[0] == pytest.approx(1 / (100 * l1 * l2 * 1.0))
    assert v[0] == pytest.approx(math.sqrt(100 * l1))


def test_two_point_heavy_frequencies():
    # index 3 fires with probability 2 p_3 ~ 0.61
    s = spec("two_point_heavy", 11)
    hits = np.array([sample_array(s, 4, k)[3] != 0 for k in range(4000)])
    p3 = TwoPointHeavy.levels(np.array([3]))[1][0]
    assert abs(hits.mean() - 2 * p3) <= 4 * math.sqrt(2 * p3 * (1 - 2 * p3) / 4000)


@pytest.mark.parametrize("text", ALL)
def test_determinism_and_prefix(text):
    s = spec(text, 99)
    a = sample_array(s, 300, 7)
    np.testing.assert_array_equal(a, sample_array(s, 300, 7))
    for m in (1, 17, 128):
        np.testing.assert_array_equal(sample_array(s, m, 7), a[:m])


@given(st.integers(0, 2**64 - 1), st.integers(0, 10**6), st.integers(1, 200), st.integers(1, 200))
def test_prefix_property(seed, k, m, n):
    m, n = sorted((m, n))
    s = spec("gaussian", seed)
    np.testing.assert_array_equal(sample_array(s, m, k), sample_array(s, n, k)[:m])


def test_sample_indices_differ():
    s = spec("gaussian", 5)
    assert not np.array_equal(sample_array(s, 8, 0), sample_array(s, 8, 1))


def test_mix_seed_injective_in_last_part():
    keys = {mix_seed(1, 2, k) for k in range(100000)}
    assert len(keys) == 100000


@pytest.mark.parametrize(
    "name,params",
    [("gaussian", {"sd": -1}), ("student_t", {"dof": 0}), ("uniform_centered", {"halfwidth": -2}), ("bogus", {})],
)
def test_invalid_params(name, params):
    with pytest.raises(ValueError):
        make_family(name, **params)


def test_parse_family():
    f = parse_family("gaussian:1,2")
    assert f.mean() == 1.0 and f.sd == 2.0
    with pytest.raises(ValueError):
        parse_family("rademacher:1")


def test_spec_round_trip():
    s = spec("gaussian:1,1", 42, TruncationRule("by_dimension", 10))
    assert EnsembleSpec.from_dict(s.to_dict()) == s


@pytest.mark.parametrize("text", ["rademacher", "gaussian"])
def test_mean_and_variance(text):
    s = spec(text, 3)
    n_mc, n = 400, 64
    x = np.concatenate([sample_array(s, n, k) for k in range(n_mc)])
    tol = 4 / math.sqrt(n_mc)
    assert abs(x.mean()) <= tol and abs(x.var() - 1) <= tol


@pytest.mark.parametrize(
    "text,dist",
    [("gaussian:0.5,2", stats.norm(0.5, 2)), ("uniform_centered:3", stats.uniform(-3, 6)), ("student_t:4", stats.t(4))],
)
def test_marginals_ks(text, dist):
    x = np.concatenate([sample_array(spec(text, 17), 50, k) for k in range(100)])
    assert stats.kstest(x, dist.cdf).pvalue > 1e-4


# --- truncation -----------------------------------------------------------------


def test_truncation_examples():
    assert truncate_sequence(np.zeros(4), TruncationRule("by_index")) == CoeffSeq(np.zeros(4))
    assert truncate_sequence([5.0, 5, 5], TruncationRule("by_index")) == CoeffSeq([5.0, 5, 0])
    assert truncate_sequence([5.0, 5, 5], TruncationRule("by_dimension", 3)) == CoeffSeq([0.0, 0, 0])


def test_truncation_thresholds():
    th = TruncationRule("by_index").thresholds(4)
    assert np.isinf(th[0]) and np.isinf(th[1])
    assert th[2] == pytest.approx(math.sqrt(2 * math.log(2)))
    with pytest.raises(ValueError):
        TruncationRule("by_dimension")
    with pytest.raises(ValueError):
        TruncationRule("sideways")


rules = st.sampled_from([TruncationRule("by_index"), TruncationRule("by_dimension", 5)])


@given(arrays(np.float64, st.integers(1, 30), elements=st.floats(-10, 10)), rules)
def test_truncation_idempotent_dominated(x, rule):
    once = truncate_sequence(x, rule)
    assert truncate_sequence(once, rule) == once
    assert np.all(np.abs(once.entries) <= np.abs(x))


def test_truncated_spec_sampling():
    s = spec("student_t:1.5", 2, TruncationRule("by_index"))
    x = sample_array(s, 2000, 0)
    th = TruncationRule("by_index").thresholds(2000)
    assert np.all(np.abs(x) <= th)


# --- Orlicz norms and maxima -------------------------------------------------------------


def test_orlicz_examples():
    assert orlicz_norm_empirical(np.zeros(5), 2) == 0.0
    assert orlicz_norm_empirical(np.ones(7), 2) == pytest.approx(1 / math.sqrt(math.log(2)), rel=2e-6)
    assert orlicz_norm_empirical(np.ones(7), 1) == pytest.approx(1 / math.log(2), rel=2e-6)


@given(arrays(np.float64, st.integers(1, 50), elements=st.floats(-5, 5)), st.floats(0.2, 2))
def test_orlicz_is_smallest_feasible(x, alpha):
    c = orlicz_norm_empirical(x, alpha)
    if c == 0:
        assert np.all(x == 0)
        return
    f = lambda s: np.mean(np.exp((np.abs(x) / s) ** alpha)) - 2  # noqa: E731
    assert f(c) <= 1e-9
    assert f(c * (1 - 1e-5)) > 0


def test_gaussian_psi2_matches_sampled():
    s = spec("gaussian", 21)
    x = np.concatenate([sample_array(s, 1000, k) for k in range(50)])
    assert orlicz_norm_empirical(x, 2) == pytest.approx(s.family.psi2_norm(), rel=0.05)


def test_uniform_psi2_closed_form():
    f = parse_family("uniform_centered:2")
    c = f.psi2_norm()
    val, _ = integrate.quad(lambda x: math.exp(x * x / c**2) / 4, -2, 2)
    assert val == pytest.approx(2.0, rel=1e-9)


def test_max_abs_moment_exact_cases():
    assert max_abs_moment(spec("constant:2"), 10, 2, 5, 0).value == 4.0
    assert max_abs_moment(spec("rademacher"), 17, 3, 5, 0).value == 1.0


def test_max_abs_moment_gaussian_pair():
    # oracle: E max(|Z1|, |Z2|) = int 2 x phi(x) (2 Phi(x) - 1) * 2 dx over x > 0
    oracle, _ = integrate.quad(lambda x: x * 2 * 2 * stats.norm.pdf(x) * (2 * stats.norm.cdf(x) - 1), 0, np.inf)
    assert oracle == pytest.approx(2 / math.sqrt(math.pi), rel=1e-9)
    est = max_abs_moment(spec("gaussian"), 2, 1, 40000, seed=5)
    assert abs(est.value - oracle) <= 4 * est.stderr


def test_max_abs_moment_rejects():
    with pytest.raises(ValueError):
        max_abs_moment(spec("gaussian"), 2, 0.5, 10, 0)
