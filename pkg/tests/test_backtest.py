import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcare import backtest
from lcare.backtest import TippConfig, multiplier_bound_check, performance, performance_from_returns, run_tipp
from lcare.errors import AlignmentError
from lcare.market_data import summarize


def test_first_step_example():
    run = run_tipp([0.02, 0.0], [5.0, 5.0])
    s0, s1 = run.states[:2]
    assert (s0.floor, s0.cushion, s0.exposure) == (90.0, 10.0, 50.0)
    assert s1.value == 101.0
    assert s1.floor == 0.9 * 101.0
    assert s1.cushion == 101.0 - 0.9 * 101.0
    assert s1.cushion == pytest.approx(10.1)


def test_zero_multiplier_flat(rng):
    r = rng.normal(0, 0.02, 200)
    run = run_tipp(r, np.zeros(200))
    assert np.all(run.values == 100.0)


def test_cushion_recursion_on_flat_floor(rng):
    r = rng.normal(0, 0.01, 500)
    m = rng.uniform(0, 4, 500)
    run = run_tipp(r, m)
    st_ = run.states
    checked = 0
    for t in range(500):
        a, b = st_[t], st_[t + 1]
        if b.floor == a.floor and a.cushion >= 0 and not a.capped:
            assert a.cushion * (1 + a.multiplier * r[t]) == pytest.approx(b.cushion, abs=1e-10)
            checked += 1
    assert checked > 100


def test_bound_check_examples():
    assert multiplier_bound_check([-0.25], [5.0]).count == 1
    assert multiplier_bound_check([-0.25], [5.0]).bounds[0] == 4.0
    assert multiplier_bound_check([0.01, 0.3], [12.0, 12.0]).count == 0
    assert multiplier_bound_check([-0.99, -0.5], [1.0, 1.0]).count == 0


def test_alignment_errors():
    with pytest.raises(AlignmentError):
        run_tipp([0.01, 0.02], [1.0])
    with pytest.raises(AlignmentError):
        run_tipp([0.01], [-1.0])
    with pytest.raises(AlignmentError):
        run_tipp([0.01], [np.nan])


def test_config_validation():
    for kw in ({"protection": 1.0}, {"protection": 0.0}, {"initial_value": 0.0}, {"horizon": 0}):
        with pytest.raises(ValueError):
            TippConfig(**kw)
    with pytest.raises(AlignmentError):
        run_tipp([0.0, 0.0], [1.0, 1.0], TippConfig(riskfree=(0.0,)))


@given(st.integers(0, 10_000))
@settings(max_examples=40)
def test_floor_monotone_and_exposure_cap(seed):
    rng = np.random.default_rng(seed)
    r = rng.standard_t(3, 300) * 0.02
    m = rng.uniform(0, 12, 300)
    run = run_tipp(r, m)
    assert np.all(np.diff(run.floors) >= 0)
    for s in run.states:
        assert 0.0 <= s.exposure <= s.value


def test_riskfree_discounting():
    run = run_tipp(np.zeros(3), np.zeros(3), TippConfig(riskfree=0.001, protection=0.5))
    s0 = run.states[0]
    assert s0.floor == pytest.approx(max(0.5 * 100 * math.exp(-0.001 * 250), 0.5 * 100))
    assert run.states[1].value == pytest.approx(100.1)


def test_gap_locks_in_cash():
    r = np.array([-0.5, 0.1, 0.1])
    run = run_tipp(r, np.full(3, 12.0))
    assert run.gaps == 1
    assert run.states[1].cushion < 0 and run.states[1].in_cash
    assert run.states[2].value == run.states[1].value


def test_reanchor_resets_floor():
    r = np.array([-0.5, 0.0, 0.0, 0.0])
    run = run_tipp(r, np.full(4, 12.0), TippConfig(horizon=2, reanchor=True))
    assert run.states[1].in_cash and not run.states[2].in_cash
    assert run.states[2].floor == pytest.approx(0.9 * run.states[2].value)


def test_perf_deterministic_growth():
    p = performance_from_returns(np.full(100, 0.001))
    assert p.ann_return == pytest.approx(25.0)
    assert p.ann_volatility == 0.0 and p.degenerate and p.sharpe == 0.0


def test_perf_constant_value():
    run = run_tipp(np.zeros(10), np.zeros(10))
    p = performance(run)
    assert p.ann_return == 0.0 and p.ann_volatility == 0.0 and p.degenerate


def _brute_perf(r, periods=250):
    n = len(r)
    s1 = s2 = s3 = s4 = 0.0
    mu = math.fsum(r) / n
    for v in r:
        d = v - mu
        s2 += d * d
        s3 += d ** 3
        s4 += d ** 4
    m2 = s2 / n
    sd = math.sqrt(s2 / (n - 1))
    q = sorted(r)
    h = (n - 1) * 0.01
    lo = int(math.floor(h))
    var = q[lo] + (h - lo) * (q[min(lo + 1, n - 1)] - q[lo])
    return (100 * mu * periods, 100 * sd * math.sqrt(periods), 100 * var, (s3 / n) / m2 ** 1.5,
            (s4 / n) / m2 ** 2, mu * periods / (sd * math.sqrt(periods)))


@given(st.integers(0, 10_000))
@settings(max_examples=30)
def test_perf_matches_brute_force(seed):
    r = np.random.default_rng(seed).standard_t(4, 400) * 0.01
    p = performance_from_returns(r)
    ref = _brute_perf(r.tolist())
    got = (p.ann_return, p.ann_volatility, p.var99, p.skewness, p.kurtosis, p.sharpe)
    assert np.allclose(got, ref, rtol=1e-10, atol=1e-10)


def test_volatility_increases_with_multiplier():
    r = np.random.default_rng(17).normal(0.0003, 0.006, 1000)
    vols = []
    for m in range(1, 6):
        run = run_tipp(r, np.full(r.size, float(m)))
        assert run.gaps == 0
        vols.append(performance(run).ann_volatility)
    assert np.all(np.diff(vols) > 0)


def test_suite_index_row(fixture_returns):
    n = fixture_returns.values.size
    src = {"constant_3": np.full(n, 3.0), "late": np.r_[np.full(100, np.nan), np.full(n - 100, 2.0)]}
    res = backtest.strategy_suite(fixture_returns, src)
    assert res.start == 100
    idx = res.table["index"]
    s = summarize(fixture_returns.values[100:])
    assert idx.ann_return == pytest.approx(100 * 250 * s.mean, rel=1e-12)
    assert idx.ann_volatility == pytest.approx(100 * math.sqrt(250) * s.std, rel=1e-12)
    direct = run_tipp(fixture_returns.values[100:], np.full(n - 100, 3.0))
    assert np.array_equal(res.runs["constant_3"].values, direct.values)


def test_deterministic_bitwise(rng):
    r = rng.normal(0, 0.02, 300)
    m = rng.uniform(1, 12, 300)
    a, b = run_tipp(r, m), run_tipp(r, m)
    assert a.states == b.states


def test_forecast_multiplier_alignment():
    m = backtest.multipliers_from_forecasts(5, [1, 2, 4], [-0.2, -0.1, -0.5], 0.05, fixed_alpha=0.065)
    assert np.isnan(m[[0, 1]]).all()
    f = 1 + 0.05 / (0.9 * 0.065)
    assert m[2] == pytest.approx(1 / (0.2 * f)) and m[3] == pytest.approx(1 / (0.1 * f))
    assert np.isnan(m[4])
