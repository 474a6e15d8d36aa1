import io
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from pucopula import PatchworkCopula, RankData
from pucopula.datasets import CASE_STUDY
from pucopula.risk_mc import (
    MarginalKind,
    QuantileCurve,
    bootstrap_quantile_se,
    empirical_quantiles,
    fit_marginal,
    order_statistic_rank,
    simulate_portfolio,
    tail_levels,
)

from .oracles import case_copula

COMONOTONE = PatchworkCopula(RankData([[1], [1]]), "upper")


# -- marginals -----------------------------------------------------------------------


def test_lognormal_fit_on_constant_data():
    m = fit_marginal("lognormal", [math.e] * 3)
    assert m.mu == pytest.approx(1.0, abs=1e-15)
    assert m.sigma == 0.0
    np.testing.assert_allclose(m.quantile([0.1, 0.9]), math.e)


def test_lognormal_fit_matches_log_moments():
    x = np.exp(np.random.default_rng(1).normal(0.3, 0.7, 5000))
    m = fit_marginal("lognormal", x)
    assert m.mu == pytest.approx(np.log(x).mean(), abs=1e-14)
    assert m.sigma == pytest.approx(np.log(x).std(), abs=1e-14)
    assert m.quantile(0.5) == pytest.approx(math.exp(m.mu))


def test_lognormal_rejects_nonpositive():
    with pytest.raises(ValueError):
        fit_marginal("lognormal", [1.0, 0.0, 2.0])


def test_empirical_interp_case_column():
    m = fit_marginal(MarginalKind.EMPIRICAL, CASE_STUDY[:, 0])
    assert m.quantile(4 / 21) == 0.468


def test_empirical_interp_small():
    m = fit_marginal("empirical", [3.0, 1.0, 2.0])
    assert m.quantile(0.5) == 2.0
    assert m.quantile(0.375) == pytest.approx(1.5)
    # flat beyond the first and last plotting positions
    assert m.quantile(0.01) == 1.0
    assert m.quantile(0.99) == 3.0


def test_empirical_order_statistics_at_plotting_positions():
    x = np.sort(CASE_STUDY[:, 1])
    m = fit_marginal("empirical", x[::-1])
    np.testing.assert_array_equal(m.quantile(np.arange(1, 21) / 21), x)


def test_empty_data_rejected():
    with pytest.raises(ValueError):
        fit_marginal("empirical", [])


@settings(max_examples=50, deadline=None)
@given(
    data=st.lists(st.floats(0.01, 1e4), min_size=1, max_size=30),
    kind=st.sampled_from(list(MarginalKind)),
)
def test_quantile_function_nondecreasing(data, kind):
    m = fit_marginal(kind, data)
    q = m.quantile(np.linspace(1e-6, 1 - 1e-6, 257))
    assert np.all(np.diff(q) >= -1e-12 * np.abs(q[1:]))


@pytest.mark.parametrize("kind", list(MarginalKind))
def test_marginal_mean_is_integral_of_quantile(kind):
    m = fit_marginal(kind, CASE_STUDY[:, 0])
    pos = list(np.arange(1, 21) / 21) if kind is MarginalKind.EMPIRICAL else None
    val, _ = integrate.quad(lambda p: float(m.quantile(p)), 0, 1, points=pos, limit=200)
    assert m.mean() == pytest.approx(val, rel=1e-8)


# -- quantiles ---------------------------------------------------------------------------


def test_order_statistic_examples():
    assert empirical_quantiles(np.arange(1, 101), [0.95]).values.tolist() == [95.0]
    assert order_statistic_rank(100, 0.07) == 7
    assert order_statistic_rank(100, 0.071) == 8


def test_levels_near_one_pick_the_maximum():
    s = np.random.default_rng(0).random(50)
    q = empirical_quantiles(s, [49.5 / 50, 0.999])
    assert np.all(q.values == s.max())


def test_single_observation():
    q = empirical_quantiles([7.5], [0.01, 0.5, 0.99])
    assert q.values.tolist() == [7.5] * 3


def test_levels_must_be_inside_unit_interval():
    with pytest.raises(ValueError):
        empirical_quantiles([1.0, 2.0], [0.0])


@settings(max_examples=50, deadline=None)
@given(
    sums=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200),
    levels=st.lists(st.floats(1e-6, 1 - 1e-6), min_size=1, max_size=40),
)
def test_quantile_curve_monotone(sums, levels):
    assert empirical_quantiles(sums, levels).is_monotone()


def test_tail_levels_recover_top_ranks():
    lv = tail_levels(1000, 0.1)
    assert len(lv) == 100
    np.testing.assert_array_equal(order_statistic_rank(1000, lv), np.arange(901, 1001))


def test_quantile_curve_csv_round_trip():
    curve = empirical_quantiles(np.random.default_rng(4).random(1000), tail_levels(1000))
    buf = io.StringIO()
    curve.to_csv(buf)
    buf.seek(0)
    back = QuantileCurve.from_csv(buf)
    assert back.levels.tobytes() == curve.levels.tobytes()
    assert back.values.tobytes() == curve.values.tobytes()


# -- simulation -----------------------------------------------------------------------------


def test_constant_margins():
    m = fit_marginal("empirical", [2.5])
    sums = simulate_portfolio(case_copula("poisson", "rook"), [m, m], 1000, seed=3)
    assert np.all(sums == 5.0)


def test_simulation_is_deterministic():
    margins = [fit_marginal("empirical", CASE_STUDY[:, k]) for k in range(2)]
    cop = case_copula("bernstein", "lower")
    a = simulate_portfolio(cop, margins, 70_000, seed=11, workers=1)
    b = simulate_portfolio(cop, margins, 70_000, seed=11, workers=2)
    assert a.tobytes() == b.tobytes()


def test_margin_count_checked():
    m = fit_marginal("empirical", [1.0, 2.0])
    with pytest.raises(ValueError):
        simulate_portfolio(case_copula("poisson", "rook"), [m], 10, seed=0)


@pytest.mark.slow
def test_negbinomial_million_sims_mean_and_runtime():
    margins = [fit_marginal("empirical", CASE_STUDY[:, k]) for k in range(2)]
    cop = case_copula("negbinomial", "rook")
    _ = cop.table
    start = time.perf_counter()
    sums = simulate_portfolio(cop, margins, 10**6, seed=2024)
    elapsed = time.perf_counter() - start
    assert elapsed < 60
    target = sum(
        integrate.quad(lambda p, m=m: float(m.quantile(p)), 0, 1,
                       points=list(np.arange(1, 21) / 21), limit=200)[0]
        for m in margins
    )
    se = sums.std(ddof=1) / math.sqrt(sums.size)
    assert abs(sums.mean() - target) < 4 * se


def test_comonotone_additivity():
    margins = [fit_marginal("lognormal", CASE_STUDY[:, k]) for k in range(2)]
    sums, comps = simulate_portfolio(COMONOTONE, margins, 200_000, seed=5,
                                     return_components=True)
    levels = np.array([0.5, 0.9, 0.99, 0.999])
    var_sum = empirical_quantiles(sums, levels).values
    var_parts = sum(empirical_quantiles(comps[:, k], levels).values for k in range(2))
    np.testing.assert_allclose(var_sum, var_parts, rtol=1e-6)
    # against the model quantiles, up to sampling error
    model = sum(m.quantile(levels) for m in margins)
    np.testing.assert_allclose(var_sum, model, rtol=0.05)


def test_var_stability_when_doubling_sims():
    margins = [fit_marginal("empirical", CASE_STUDY[:, k]) for k in range(2)]
    cop = case_copula("poisson", "rook")
    a = simulate_portfolio(cop, margins, 100_000, seed=1)
    b = simulate_portfolio(cop, margins, 200_000, seed=2)
    qa = empirical_quantiles(a, [0.99]).values[0]
    qb = empirical_quantiles(b, [0.99]).values[0]
    pooled = math.hypot(bootstrap_quantile_se(a, 0.99, 100), bootstrap_quantile_se(b, 0.99, 100))
    assert pooled > 0
    assert abs(qa - qb) < 6 * pooled
