import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from heavytail import dist, risk
from heavytail.exceptions import EmptyInputError, InsufficientTailError, ParameterDomainError, ResolutionError

finite_vectors = st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200)
levels = st.floats(0.01, 0.99)


def test_var_of_integer_ladder():
    assert risk.var(np.arange(1, 101), 0.95) == 95


def test_cvar_of_integer_ladder():
    assert risk.cvar(np.arange(1, 101), 0.95) == 98


def test_var_of_cauchy_matches_closed_form():
    x = dist.sample(dist.Cauchy(0, 1), 10**7, seed=1)
    target = math.tan(math.pi * (0.995 - 0.5))
    assert abs(risk.var(x, 0.995) / target - 1.0) < 0.02


def test_cvar_of_normal_matches_closed_form():
    x = dist.sample(dist.Normal(0, 1), 10**7, seed=2)
    target = stats.norm.pdf(stats.norm.ppf(0.99)) / 0.01
    assert abs(risk.cvar(x, 0.99) / target - 1.0) < 0.02


def test_empty_input():
    with pytest.raises(EmptyInputError):
        risk.var([], 0.5)


def test_short_tail_for_cvar():
    with pytest.raises(InsufficientTailError):
        risk.cvar(np.arange(1, 101), 0.99)


@pytest.mark.parametrize("level", [0.0, 1.0, 1.2])
def test_level_domain(level):
    with pytest.raises(ParameterDomainError):
        risk.var([1.0, 2.0], level)


@settings(max_examples=200, deadline=None)
@given(x=finite_vectors, level=levels, shift=st.floats(-1e3, 1e3))
def test_var_translation_equivariant(x, level, shift):
    x = np.asarray(x)
    assert risk.var(x + shift, level) == pytest.approx(risk.var(x, level) + shift, abs=1e-9 * (1 + np.abs(x).max()))


@settings(max_examples=200, deadline=None)
@given(x=finite_vectors, level=levels, scale=st.floats(1e-3, 1e3))
def test_var_positively_homogeneous(x, level, scale):
    x = np.asarray(x)
    assert risk.var(scale * x, level) == pytest.approx(scale * risk.var(x, level), rel=1e-12, abs=1e-300)


@settings(max_examples=200, deadline=None)
@given(x=st.lists(st.floats(-1e6, 1e6), min_size=10, max_size=200), level=st.floats(0.01, 0.8))
def test_cvar_dominates_var(x, level):
    assert risk.cvar(x, level) >= risk.var(x, level)


@settings(max_examples=100, deadline=None)
@given(m=st.integers(1, 10**6), level=levels)
def test_order_index_is_ceiling_rank(m, level):
    k = risk.order_index(level, m)
    assert 0 <= k < m
    assert (k + 1) >= level * m * (1 - 1e-12)
    assert k < level * m + 1


def test_report_rejects_inverted_interval():
    with pytest.raises(ValueError):
        risk.RiskMeasureReport("VaR", 0.9, 5.0, 6.0, 7.0, 100)


def test_mc_sweep_normal_scales_with_root_n():
    reports = risk.mc_var_sweep(dist.Normal(0, 1), [1, 4, 16], [0.99], 200_000, seed=3)
    z = stats.norm.ppf(0.99)
    for r in reports:
        assert r.ci_low <= r.point_estimate <= r.ci_high
        assert abs(r.point_estimate - z / math.sqrt(r.aggregation_count)) < 0.03


def test_mc_sweep_deterministic():
    a = risk.mc_var_sweep(dist.Cauchy(0, 1), [1, 3], [0.9, 0.99], 20_000, seed=4, measures=("VaR", "CVaR"))
    b = risk.mc_var_sweep(dist.Cauchy(0, 1), [1, 3], [0.9, 0.99], 20_000, seed=4, measures=("VaR", "CVaR"))
    assert a == b
    assert len(a) == 8


def test_sample_means_chunking_does_not_change_law():
    a = risk.sample_means(dist.Normal(0, 1), 7, 50_000, seed=5, chunk_cells=1000)
    assert a.shape == (50_000,)
    assert stats.kstest(a * math.sqrt(7), "norm").pvalue > 0.01


def test_bootstrap_constant_data():
    reports = risk.bootstrap_var_sweep(np.full(50, 3.25), [1], 0.99, 2000, 20, seed=6)
    r = reports[0]
    assert r.point_estimate == 3.25
    assert r.ci_low == r.ci_high == 3.25


def test_bootstrap_minimum_size_and_resolution():
    with pytest.raises(ParameterDomainError):
        risk.bootstrap_var_sweep(np.arange(29.0), [1], 0.9, 1000, 10)
    with pytest.raises(ResolutionError):
        risk.bootstrap_var_sweep(np.arange(100.0), [1], 0.995, 1000, 10)


def test_bootstrap_deterministic():
    data = dist.sample(dist.LogNormal(0, 1), 300, seed=7)
    a = risk.bootstrap_var_sweep(data, [1, 5], 0.95, 2000, 20, seed=8)
    b = risk.bootstrap_var_sweep(data, [1, 5], 0.95, 2000, 20, seed=8)
    assert a == b


def test_bootstrap_normal_coverage():
    mu, sigma, n, level = 1.0, 2.0, 5, 0.95
    truth = mu + sigma / math.sqrt(n) * stats.norm.ppf(level)
    covered = 0
    for trial in range(50):
        data = dist.sample(dist.Normal(mu, sigma), 500, seed=1000 + trial)
        r = risk.bootstrap_var_sweep(data, [n], level, 2000, 100, seed=trial, ci_level=0.90)[0]
        covered += r.ci_low <= truth <= r.ci_high
    assert covered >= 40


def test_bootstrap_normal_decreasing_in_n():
    data = dist.sample(dist.Normal(10.0, 3.0), 9015, seed=9)
    reports = risk.bootstrap_var_sweep(data, [1, 5, 10, 50], 0.995, 20_000, 10, seed=10)
    points = [r.point_estimate for r in reports]
    assert all(a > b for a, b in zip(points, points[1:]))
