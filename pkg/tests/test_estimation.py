import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tree_anova.errors import ConvergenceError, DegenerateLikelihoodError, InsufficientDataError, ParameterDomainError
from tree_anova.estimation import (
    ConvergenceConfig,
    GroupedData,
    SummaryStats,
    check_condition1,
    loglik,
    mle_null,
    mle_tree,
    null_stationarity_residuals,
    summarize,
)

TIGHT = ConvergenceConfig(tol_exponent=10)


def random_data(rng, k=None, nmax=30):
    k = k or int(rng.integers(1, 5))
    n = rng.integers(2, nmax, k + 1)
    mu = rng.normal(0, 1, k + 1)
    sd = rng.uniform(0.3, 3, k + 1)
    return GroupedData(tuple(rng.normal(m, s, ni) for m, s, ni in zip(mu, sd, n)))


def _profile_common_mean(stats, mu):
    # log-likelihood maximized over variances for a common mean mu
    return -0.5 * np.sum(stats.n * np.log(stats.biased_var + (stats.mean - mu) ** 2))


def _golden_max(f, lo, hi, tol=1e-13):
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    while b - a > tol:
        c, d = b - g * (b - a), a + g * (b - a)
        if f(c) > f(d):
            b = d
        else:
            a = c
    return (a + b) / 2


def _common_mean_oracle(stats):
    lo, hi = stats.mean.min(), stats.mean.max()
    grid = np.linspace(lo, hi, 20_001)
    vals = [_profile_common_mean(stats, m) for m in grid]
    j = int(np.argmax(vals))
    return _golden_max(lambda m: _profile_common_mean(stats, m), grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)])


def test_summarize_constant_group():
    s = summarize(GroupedData(([1, 1, 1, 1], [0, 2])))
    assert s.mean.tolist() == [1, 1]
    assert s.biased_var.tolist() == [0, 1]
    assert s.unbiased_var.tolist() == [0, 2]


def test_grouped_data_validation():
    with pytest.raises(InsufficientDataError):
        GroupedData(([1.0, 2.0],))
    with pytest.raises(InsufficientDataError):
        GroupedData(([1.0, 2.0], [3.0]))
    with pytest.raises(ParameterDomainError):
        GroupedData(([1.0, 2.0], [3.0, np.inf]))


def test_convergence_config_validation():
    with pytest.raises(ParameterDomainError):
        ConvergenceConfig(tol_exponent=2)
    assert ConvergenceConfig().tolerance == pytest.approx(1e-6)


def test_condition1_examples():
    def report(xbar, s2):
        return check_condition1(SummaryStats.from_unbiased([2, 2], xbar, np.array(s2) * 2))

    assert report([0, 10], [1, 1]).passed == (False, False)
    assert report([0, 0.5], [1, 1]).passed == (True, True)
    assert report([3, 3], [1, 1]).ok
    r = report([3, 3], [0, 1])
    assert r.passed == (False, True)
    assert len(r.warnings()) == 1


def test_tree_feasible_means_converge_in_one_iteration():
    data = GroupedData(([0.0, 1.0, 2.0], [1.5, 2.5, 3.0, 4.0], [0.5, 3.5]))
    s = summarize(data)
    fit = mle_tree(data)
    assert fit.iterations == 1
    assert fit.converged
    np.testing.assert_allclose(fit.mu_hat, s.mean, rtol=0, atol=1e-15)
    np.testing.assert_allclose(fit.sigma2_hat, s.biased_var, rtol=0, atol=1e-15)


def test_null_fixed_point_for_equal_means():
    data = GroupedData(([1.0, 3.0], [0.0, 4.0], [2.0, 2.5, 1.5]))
    fit = mle_null(data)
    np.testing.assert_allclose(fit.mu_hat, 2.0, atol=1e-12)
    assert fit.iterations == 1


def test_null_symmetric_two_groups():
    # equal n and mirrored spreads give equal variances at the fixed point
    data = GroupedData(([-1.0, 0.0, 1.0], [4.0, 5.0, 6.0]))
    fit = mle_null(data, TIGHT)
    assert fit.mu_hat[0] == pytest.approx(2.5, abs=1e-9)
    assert fit.sigma2_hat[0] == pytest.approx(fit.sigma2_hat[1], abs=1e-8)


def test_k1_reversed_means_match_profile_search():
    rng = np.random.default_rng(5)
    for _ in range(20):
        data = GroupedData((rng.normal(1.0, 1.0, 12), rng.normal(0.0, 1.5, 9)))
        s = summarize(data)
        if s.mean[0] <= s.mean[1]:
            continue
        fit = mle_tree(data, TIGHT)
        oracle = _common_mean_oracle(s)
        assert fit.mu_hat[0] == fit.mu_hat[1]
        assert fit.mu_hat[0] == pytest.approx(oracle, abs=1e-7)


def test_randomized_properties():
    rng = np.random.default_rng(11)
    cfg = ConvergenceConfig()
    for _ in range(200):
        data = random_data(rng)
        null = mle_null(data, cfg)
        tree = mle_tree(data, cfg, null=null)
        assert np.all(tree.mu_hat[0] <= tree.mu_hat[1:])
        assert np.all(null.mu_hat == null.mu_hat[0])
        assert np.all(np.diff(tree.loglik_trace) >= -1e-10)
        assert np.all(np.diff(null.loglik_trace) >= -1e-10)
        assert tree.loglik >= null.loglik - 1e-10
        mean_res, var_res = null_stationarity_residuals(data, null)
        assert mean_res <= 10 * cfg.tolerance
        assert var_res <= 10 * cfg.tolerance


def test_loglik_matches_raw_formula():
    rng = np.random.default_rng(3)
    data = random_data(rng, k=3)
    s = summarize(data)
    mu = rng.normal(size=4)
    sigma2 = rng.uniform(0.5, 2, 4)
    raw = sum(
        -0.5 * g.size * math.log(v) - 0.5 * np.sum((g - m) ** 2) / v for g, m, v in zip(data.groups, mu, sigma2)
    )
    assert float(loglik(s.n, s.mean, s.biased_var, mu, sigma2)) == pytest.approx(raw, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(-100, 100))
def test_location_equivariance(seed, c):
    data = random_data(np.random.default_rng(seed))
    for fit in (mle_null, mle_tree):
        a = fit(data, TIGHT)
        b = fit(data.shifted(c), TIGHT)
        np.testing.assert_allclose(b.mu_hat, a.mu_hat + c, rtol=0, atol=1e-7)
        np.testing.assert_allclose(b.sigma2_hat, a.sigma2_hat, rtol=0, atol=1e-7)


def test_degenerate_likelihood():
    data = GroupedData(([1.0, 1.0, 1.0], [0.0, 2.0]))
    with pytest.raises(DegenerateLikelihoodError):
        mle_tree(data)


def test_nonconvergence_reports_trace():
    data = random_data(np.random.default_rng(8), k=3)
    with pytest.raises(ConvergenceError) as info:
        mle_null(data, ConvergenceConfig(tol_exponent=12, max_iterations=1))
    assert info.value.result is not None
    assert not info.value.result.converged
