import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from lcare.data import fixture_moments
from lcare.errors import DegenerateVariance, DuplicateDate, InsufficientData, MalformedRow, NonPositivePrice
from lcare.market_data import (
    PriceSeries,
    ReturnSeries,
    load_prices,
    summarize,
    to_returns,
    window,
    write_prices_csv,
)

CSV = "date,price\n2005-01-03,100.0\n2005-01-04,101.0\n"


def test_load_two_rows():
    p = load_prices(CSV)
    assert len(p) == 2
    assert p.prices.tolist() == [100.0, 101.0]
    assert str(p.dates[0]) == "2005-01-03"


def test_load_from_stream_and_custom_columns():
    text = "Day;x\n"  # header check uses the configured names
    p = load_prices(io.StringIO("d,close\n2005-01-03,5\n"), date_col="d", price_col="close")
    assert p.prices[0] == 5.0
    with pytest.raises(MalformedRow):
        load_prices(text)


def test_negative_price_names_row():
    with pytest.raises(NonPositivePrice) as ei:
        load_prices("date,price\n2005-01-03,100\n2005-01-04,-1.0\n")
    assert ei.value.row == 3


def test_duplicate_and_malformed_rows():
    with pytest.raises(DuplicateDate) as ei:
        load_prices("date,price\n2005-01-03,100\n2005-01-03,101\n")
    assert ei.value.row == 3
    with pytest.raises(MalformedRow) as ei:
        load_prices("date,price\n2005-01-03,abc\n")
    assert ei.value.row == 2
    with pytest.raises(MalformedRow):
        load_prices("date,price\nnot-a-date,1\n")


def test_empty_input():
    with pytest.raises(InsufficientData):
        load_prices("date,price\n")
    with pytest.raises(MalformedRow):
        load_prices("")


def test_unsorted_rows_sorted():
    a = load_prices("date,price\n2005-01-04,101\n2005-01-03,100\n2005-01-05,99\n")
    b = load_prices("date,price\n2005-01-03,100\n2005-01-04,101\n2005-01-05,99\n")
    assert np.array_equal(a.dates, b.dates) and np.array_equal(a.prices, b.prices)


def _prices(vals):
    dates = np.datetime64("2005-01-03") + np.arange(len(vals))
    return PriceSeries(dates, vals)


def test_returns_arithmetic():
    assert to_returns(_prices([100.0, 101.0])).values[0] == pytest.approx(0.01, abs=1e-15)
    assert to_returns(_prices([100.0, 100.0]), "log").values[0] == 0.0
    r = to_returns(_prices([100.0, 90.0, 99.0]))
    assert r.values == pytest.approx([-0.10, 0.10], abs=1e-15)
    assert r.dates[0] == np.datetime64("2005-01-04")
    with pytest.raises(InsufficientData):
        to_returns(_prices([100.0]))


def test_log_and_simple_differ():
    p = _prices([100.0, 110.0])
    assert to_returns(p, "log").values[0] != to_returns(p, "simple").values[0]


def test_series_invariants():
    with pytest.raises(ValueError):
        PriceSeries(np.array(["2005-01-04", "2005-01-03"], dtype="datetime64[D]"), [1.0, 2.0])
    with pytest.raises(ValueError):
        ReturnSeries.from_values([0.1, np.nan])


def test_summarize_examples():
    s = summarize([-1.0, 0.0, 1.0])
    assert s.mean == 0 and s.median == 0 and s.std == pytest.approx(1.0)
    with pytest.raises(DegenerateVariance):
        summarize([0.01, 0.01, 0.01])
    with pytest.raises(InsufficientData):
        summarize([])


def test_summarize_matches_fixture_oracle(fixture_returns):
    oracle = fixture_moments()
    s = summarize(fixture_returns).as_dict()
    assert len(fixture_returns) == oracle["n"]
    for k in ("mean", "median", "min", "max", "std", "skewness", "kurtosis"):
        assert s[k] == pytest.approx(oracle[k], rel=1e-12, abs=1e-15), k


def test_window_examples():
    r = ReturnSeries.from_values(np.arange(10) / 100.0)
    assert np.array_equal(window(r, 9, 10).values, r.values)
    assert window(r, 9, 1).values.tolist() == [0.09]
    with pytest.raises(IndexError):
        window(r, 3, 5)


price_ratios = arrays(np.float64, st.integers(1, 200), elements=st.floats(0.5, 2.0))


@given(price_ratios, st.floats(0.01, 1e4))
def test_round_trip_prices(ratios, p0):
    p = p0 * np.cumprod(np.concatenate([[1.0], ratios]))
    r = to_returns(_prices(p))
    rebuilt = p[0] * np.cumprod(np.concatenate([[1.0], 1.0 + r.values]))
    assert np.max(np.abs(rebuilt / p - 1.0)) < 1e-12 * len(p)


@given(arrays(np.float64, st.integers(3, 1000), elements=st.floats(-0.5, 0.5)))
def test_summarize_two_pass_oracle(x):
    m = sum(x) / len(x)
    m2 = sum((v - m) ** 2 for v in x) / len(x)
    if m2 < 1e-12:
        return
    s = summarize(x)
    m3 = sum((v - m) ** 3 for v in x) / len(x)
    m4 = sum((v - m) ** 4 for v in x) / len(x)
    assert s.mean == pytest.approx(m, abs=1e-10)
    assert s.std == pytest.approx(math.sqrt(m2 * len(x) / (len(x) - 1)), abs=1e-10)
    assert s.skewness == pytest.approx(m3 / m2**1.5, abs=1e-10 * max(1, abs(m3 / m2**1.5)))
    assert s.kurtosis == pytest.approx(m4 / m2**2, rel=1e-10)
    assert s.min <= s.median <= s.max and s.kurtosis >= 1.0 - 1e-12


@given(st.integers(20, 120), st.integers(1, 20))
def test_windows_tile_series(n, m):
    r = ReturnSeries.from_values(np.linspace(-0.01, 0.01, n))
    ends = list(range(n - 1, m - 2, -m))[::-1]
    pieces = [window(r, e, m).values for e in ends]
    joined = np.concatenate(pieces)
    assert np.array_equal(joined, r.values[ends[0] - m + 1 :])


def test_write_then_load_round_trip():
    dates = np.datetime64("2010-01-04") + np.arange(3)
    buf = io.StringIO()
    write_prices_csv(dates, [1.5, 2.25, 3.125], buf)
    p = load_prices(buf.getvalue())
    assert p.prices.tolist() == [1.5, 2.25, 3.125]
