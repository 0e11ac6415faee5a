import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from polylab.cumulants import (
    BoundParams,
    KStatistics,
    PowerLawRegressor,
    crossover,
    cumulants_to_moments,
    falling_factorial,
    fit_scaling_exponent,
    integer_partitions,
    k_statistics,
    ks_distance,
    kstat,
    lemma51_eval,
    lemma51_quadrature,
    lemma56_max_product,
    mdp_admissible_q,
    mdp_functional,
    moments_to_cumulants,
    normal_cdf,
    poisson_moments,
    relative_error_tail,
    set_partitions,
    thm_tail_bound,
    wilson_interval,
)
from polylab.exceptions import EmptyTail, InsufficientSamples, NonPositiveValue, TooLarge

BELL = [1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975]


# partitions ------------------------------------------------------------------


def test_bell_numbers():
    assert [len(set_partitions(k)) for k in range(1, 11)] == BELL
    with pytest.raises(TooLarge):
        set_partitions(11)


def test_set_partitions_are_partitions():
    for k in range(1, 7):
        parts = set_partitions(k)
        assert len({p.blocks for p in parts}) == len(parts)
        for p in parts:
            flat = sorted(i for b in p.blocks for i in b)
            assert flat == list(range(1, k + 1))
            assert p.k == k
            assert [b[0] for b in p.blocks] == sorted(b[0] for b in p.blocks)


def test_integer_partition_counts():
    counts = [sum(1 for _ in integer_partitions(n)) for n in range(1, 11)]
    assert counts == [1, 2, 3, 5, 7, 11, 15, 22, 30, 42]
    assert list(integer_partitions(4)) == [(4,), (3, 1), (2, 2), (2, 1, 1), (1, 1, 1, 1)]


# moments and cumulants -------------------------------------------------------


def test_round_trip_with_fractions():
    m = [Fraction(1, 2), Fraction(3, 4), Fraction(5, 3), Fraction(-2, 7), Fraction(9, 5), Fraction(1, 9), 4, Fraction(-11, 13)]
    assert cumulants_to_moments(moments_to_cumulants(m)) == m
    assert moments_to_cumulants(cumulants_to_moments(m)) == m


def test_cumulants_of_known_laws():
    mu = Fraction(7, 3)
    assert moments_to_cumulants(poisson_moments(mu, 8)) == [mu] * 8
    # standard normal: moments 0, 1, 0, 3, 0, 15
    assert moments_to_cumulants([0, 1, 0, 3, 0, 15]) == [0, 1, 0, 0, 0, 0]
    # Exp(1): cumulants (k-1)!
    m = [math.factorial(k) for k in range(1, 7)]
    assert moments_to_cumulants(m) == [math.factorial(k - 1) for k in range(1, 7)]


def test_too_many_moments():
    with pytest.raises(TooLarge):
        moments_to_cumulants([1] * 11)


# k-statistics ----------------------------------------------------------------


def test_kstat_matches_scipy():
    x = np.random.default_rng(0).gamma(2.0, size=300)
    for k in range(1, 5):
        assert kstat(x, k) == pytest.approx(stats.kstat(x, k), rel=1e-10, abs=1e-12)


def _exact_expectation(values, probs, n, k):
    """E[k-statistic] by enumerating all multisets of a finite law."""
    total = 0.0
    for counts in itertools.product(range(n + 1), repeat=len(values)):
        if sum(counts) != n:
            continue
        coef = math.factorial(n)
        weight = 1.0
        for c, p in zip(counts, probs):
            coef //= math.factorial(c)
            weight *= float(p) ** c
        sample = np.repeat(values, counts).astype(float)
        total += coef * weight * kstat(sample, k)
    return total


@pytest.mark.parametrize("k", [2, 3, 4, 5, 6])
def test_kstat_exactly_unbiased(k):
    values = [0, 1, 3]
    probs = [Fraction(1, 2), Fraction(1, 3), Fraction(1, 6)]
    moments = [sum(p * v**r for v, p in zip(values, probs)) for r in range(1, 7)]
    exact = float(moments_to_cumulants(moments)[k - 1])
    assert _exact_expectation(values, probs, 9, k) == pytest.approx(exact, rel=1e-8, abs=1e-10)


def test_unbiasedness_over_meta_replicates():
    gen = np.random.default_rng(1)
    draws = np.array([k_statistics(gen.poisson(3.0, 200), 4).values for _ in range(200)])
    means = draws.mean(axis=0)
    ses = draws.std(axis=0, ddof=1) / np.sqrt(len(draws))
    assert np.all(np.abs(means - 3.0) < 4 * ses)


def test_jackknife_errors_are_sane():
    gen = np.random.default_rng(2)
    x = gen.normal(size=4000)
    est = k_statistics(x, 4)
    assert est.se[0] == pytest.approx(1 / np.sqrt(4000), rel=0.05)
    # Var k2 ~ 2 / n for a standard normal
    assert est.se[1] == pytest.approx(np.sqrt(2 / 4000), rel=0.15)
    assert est[2] == est.values[1]


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 10**6),
    a=st.floats(-5, 5),
    b=st.floats(0.2, 5).flatmap(lambda t: st.sampled_from([t, -t])),
)
def test_property_affine_equivariance(seed, a, b):
    x = np.random.default_rng(seed).exponential(size=60)
    base = k_statistics(x, 6).values
    moved = k_statistics(a + b * x, 6).values
    assert moved[0] == pytest.approx(a + b * base[0], abs=1e-9)
    for k in range(2, 7):
        assert moved[k - 1] == pytest.approx(b**k * base[k - 1], rel=1e-7, abs=1e-9)


def test_k_statistics_errors():
    with pytest.raises(InsufficientSamples):
        k_statistics([1.0, 2.0, 3.0, 4.0], 4)
    with pytest.raises(TooLarge):
        k_statistics(np.arange(100.0), 7)
    with pytest.raises(ValueError):
        k_statistics([1.0, np.nan, 2.0, 3.0, 4.0, 5.0], 2)


def test_kstatistics_estimator():
    x = np.random.default_rng(3).normal(2.0, 1.5, 500)
    est = KStatistics(order=3).fit(x)
    assert est.cumulants_[0] == pytest.approx(x.mean())
    assert est.cumulants_[1] == pytest.approx(x.var(ddof=1))
    assert est.n_samples_ == 500 and len(est.se_) == 3


# scaling fits ----------------------------------------------------------------


def test_exact_power_law_fit():
    lam = np.array([10.0, 100.0, 1000.0, 1e4])
    fit = fit_scaling_exponent(np.column_stack([lam, 3.0 * lam**0.4]))
    assert fit.slope == pytest.approx(0.4)
    assert fit.prefactor == pytest.approx(3.0)
    assert fit.ci[0] == pytest.approx(0.4) and fit.ci[1] == pytest.approx(0.4)


def test_noisy_fit_interval_covers():
    gen = np.random.default_rng(4)
    lam = np.repeat([10.0, 100.0, 1000.0, 1e4], 5)
    y = lam ** (1 / 3) * np.exp(gen.normal(0, 0.05, lam.size))
    fit = fit_scaling_exponent(np.column_stack([lam, y]))
    assert fit.ci[0] < 1 / 3 < fit.ci[1]
    res = stats.linregress(np.log(lam), np.log(y))
    assert fit.slope == pytest.approx(res.slope)
    assert fit.stderr == pytest.approx(res.stderr)


def test_fit_preconditions():
    with pytest.raises(NonPositiveValue):
        fit_scaling_exponent([(10, 1.0), (100, -1.0), (1000, 2.0)])
    with pytest.raises(InsufficientSamples):
        fit_scaling_exponent([(10, 1.0), (100, 2.0)])
    with pytest.warns(UserWarning):
        fit_scaling_exponent([(4, 1.0), (8, 2.0), (16, 3.0)])


def test_power_law_regressor():
    X = np.array([2.0, 4.0, 8.0, 16.0, 32.0])
    reg = PowerLawRegressor().fit(X, 5 * X**1.5)
    assert reg.exponent_ == pytest.approx(1.5)
    assert reg.predict([64.0]) == pytest.approx([5 * 64**1.5])
    assert reg.score(X, 5 * X**1.5) == pytest.approx(1.0)


# bounds ----------------------------------------------------------------------


def test_bound_params():
    bp = BoundParams.for_polytope(2, 2, 1e4)
    assert bp.gamma == 7
    assert bp.delta == pytest.approx(1e4 ** (1 / 6))
    zc = BoundParams.for_zero_cell(3, 1, 8.0, c=2.0)
    assert zc.gamma == 7 and zc.delta == pytest.approx(2 * 8.0 ** (3 / 4))
    assert bp.mdp_window_exponent == pytest.approx(1 / 15)
    with pytest.raises(ValueError):
        BoundParams(2, 0, 4.0, 1.0)


def test_tail_bound_monotone_and_crossover():
    bp = BoundParams.for_polytope(2, 2, 1e6)
    y = np.linspace(0, 50, 500)
    b = thm_tail_bound(bp, y)
    assert thm_tail_bound(bp, 0.0) == pytest.approx(2.0)
    assert np.all(np.diff(b) <= 0)
    g1 = 1 + bp.gamma
    gap = lambda t: t**2 / 2**g1 - (bp.delta * t) ** (1 / g1)  # noqa: E731
    from scipy.optimize import brentq

    assert crossover(bp) == pytest.approx(brentq(gap, 1e-6, 1e6), rel=1e-10)
    with pytest.raises(ValueError):
        thm_tail_bound(bp, -1.0)


def test_admissible_q():
    assert mdp_admissible_q(2, 2) == pytest.approx(1 / 90)
    assert mdp_admissible_q(3, 0) == pytest.approx(2 / 104)


def test_normal_cdf():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(1.96) == pytest.approx(0.9750021048517795, rel=1e-14)
    assert normal_cdf(-8.0) == pytest.approx(stats.norm.cdf(-8.0), rel=1e-12)


# empirical tails -------------------------------------------------------------


def test_wilson_interval_brackets():
    lo, hi = wilson_interval(30, 100)
    assert lo < 0.3 < hi
    assert wilson_interval(0, 100)[0] == 0.0


def test_gaussian_tail_ratios_near_zero():
    x = np.random.default_rng(5).normal(size=50000)
    for y in (0.5, 1.0, 2.0):
        up, lo = relative_error_tail(x, y)
        assert up.lo < 0 < up.hi or abs(up.value) < 0.05
        assert lo.lo < 0 < lo.hi or abs(lo.value) < 0.05


def test_empty_tail_reports_bound():
    x = np.random.default_rng(6).uniform(-1, 1, 2000)
    with pytest.raises(EmptyTail) as err:
        relative_error_tail(x, 3.0)
    assert err.value.upper_bound is not None and np.isfinite(err.value.upper_bound)
    with pytest.warns(UserWarning):
        relative_error_tail(np.random.default_rng(0).normal(size=500), 0.5)
    with pytest.raises(ValueError):
        relative_error_tail(x, 4.0)


def test_mdp_functional():
    x = np.random.default_rng(7).normal(size=200000)
    val = mdp_functional(x, 1.0, 2.0)
    assert val == pytest.approx(np.log(stats.norm.sf(2.0)), rel=0.05)
    with pytest.raises(EmptyTail) as err:
        mdp_functional(x[:100], 2.0, 2.0)
    assert err.value.upper_bound <= 0


def test_ks_distance_examples():
    assert ks_distance(np.ones(200)) == 0.5
    x = np.random.default_rng(8).normal(size=5000)
    z = (x - x.mean()) / x.std(ddof=1)
    assert ks_distance(x) == pytest.approx(stats.kstest(z, "norm").statistic, abs=1e-12)
    assert stats.kstest(np.random.default_rng(9).normal(size=5000), "norm").statistic < 0.03
    with pytest.warns(UserWarning):
        ks_distance(np.arange(10.0))


# lemma checks ----------------------------------------------------------------


def test_falling_factorial():
    assert falling_factorial(5, 0) == 1
    assert falling_factorial(5, 2) == 20
    assert falling_factorial(5, 6) == 0


@pytest.mark.parametrize("d,p", [(2, 1), (2, 3), (3, 2), (4, 3), (6, 4)])
@pytest.mark.parametrize("a,b", [(0.0, 1.0), (1.0, 1.0), (0.5, 2.5), (3.0, 0.7)])
def test_lemma51_grid(a, b, d, p):
    assert lemma51_eval(a, b, d, p) == pytest.approx(lemma51_quadrature(a, b, d, p), rel=1e-10)


def test_lemma51_example():
    # m = 1: int_1^inf t e^{-t} dt = 2/e
    assert lemma51_eval(1.0, 1.0, 2, 2) == pytest.approx(2 / np.e, rel=1e-14)


def test_lemma56_values():
    expected = [1, 2, 3, 4, 6, 9, 12, 18, 27, 36]
    for k, e in zip(range(1, 11), expected):
        best, witness = lemma56_max_product(k)
        assert best == e
        assert sum(witness) == k and math.prod(witness) == best
        assert best <= 4 * 3**k
    assert lemma56_max_product(6)[1] == (3, 3)
    with pytest.raises(TooLarge):
        lemma56_max_product(23)
