import numpy as np
import pytest
from hypothesis import given, strategies as st

from lcare import and_dist, risk
from lcare.and_dist import AndParams
from lcare.errors import SingularLevel


def test_es_example():
    assert risk.es_factor(0.05, 0.065) == pytest.approx(1 + 0.05 / (0.9 * 0.065), rel=1e-15)
    assert risk.es_factor(0.05, 0.065) == pytest.approx(1.8547, abs=1e-4)
    assert risk.expected_shortfall(-0.02, 0.05, 0.065) == pytest.approx(-0.03709, abs=1e-5)
    assert risk.expected_shortfall(0.0, 0.05, 0.065) == 0.0


def test_es_errors():
    with pytest.raises(SingularLevel):
        risk.es_factor(0.5, 0.1)
    for bad in [(0.6, 0.1), (0.0, 0.1), (0.05, 0.0), (0.05, 1.0)]:
        with pytest.raises(ValueError):
            risk.es_factor(*bad)


@pytest.mark.parametrize("es, m", [(-0.2, 5.0), (-0.01, 12.0), (-2.0, 1.0), (0.0, 12.0), (0.25, 4.0)])
def test_multiplier_examples(es, m):
    assert risk.multiplier(es) == pytest.approx(m)


def test_integer_mode_and_bounds():
    assert risk.multiplier(-0.3, integer=True) == 3.0
    assert risk.multiplier(-0.3) == pytest.approx(10 / 3)
    with pytest.raises(ValueError):
        risk.multiplier(-0.1, m_min=5, m_max=2)


def test_factor_grid():
    ta = np.linspace(0.001, 0.49, 60)
    al = np.linspace(0.01, 0.5, 60)
    f = np.array([[risk.es_factor(t, a) for a in al] for t in ta])
    assert np.all(f >= 1.0)
    assert np.all(np.isfinite(f))
    # increasing in tau_alpha, decreasing in alpha
    assert np.all(np.diff(f, axis=0) > 0) and np.all(np.diff(f, axis=1) < 0)
    # no jumps: steps in tau_alpha stay under the analytic slope 1 / ((1 - 2 tau)^2 alpha)
    h = ta[1] - ta[0]
    slope = 1.0 / ((1 - 2 * ta[1:, None]) ** 2 * al[None, :])
    assert np.all(np.diff(f, axis=0) <= h * slope * (1 + 1e-12))


@given(st.floats(1e-4, 10), st.floats(1e-4, 10))
def test_multiplier_nonincreasing(a, b):
    lo, hi = sorted((a, b))
    assert risk.multiplier(-hi) <= risk.multiplier(-lo)


@given(st.floats(1.0001, 11.999))
def test_clamp_round_trip(m):
    assert risk.multiplier(risk.inverse_multiplier(m)) == pytest.approx(m, rel=1e-12)


def test_series_constant_inputs():
    run = risk.risk_series(np.full(5, -0.02), 0.05, AndParams(0.0, 0.01, 0.05))
    a = run.arrays()
    for v in a.values():
        assert np.all(v == v[0])
    assert not run.errors


def test_series_magnitude_ordering(rng):
    e = -np.abs(rng.standard_normal(50)) * 0.02
    dists = [AndParams(0.0, s, 0.05) for s in rng.uniform(0.005, 0.03, 50)]
    a = risk.risk_series(e, 0.05, dists).arrays()
    assert np.all(np.abs(a["es"]) >= np.abs(a["expectile"]))
    assert np.all(a["es"] <= a["expectile"])
    assert np.all((a["multiplier"] >= 1) & (a["multiplier"] <= 12))


def test_series_alpha_is_mapping_level():
    run = risk.risk_series([-0.02, -0.03], 0.05, AndParams(0.0, 1.0, 0.05))
    expected = and_dist.alpha_for_tau(0.05, AndParams(0.0, 1.0, 0.05)).alpha
    assert np.allclose(run.arrays()["alpha"], expected)
    # scale invariance of the matched level
    run2 = risk.risk_series([-0.02], 0.05, AndParams(0.0, 0.01, 0.05))
    assert run2.points[0].alpha == pytest.approx(expected, rel=1e-10)
    fixed = risk.risk_series([-0.02], 0.05, fixed_alpha=0.065)
    assert fixed.points[0].es == pytest.approx(-0.03709, abs=1e-5)


def test_series_isolates_errors():
    run = risk.risk_series([-0.02, -0.02], 0.5, fixed_alpha=0.1)
    assert len(run.errors) == 2 and not run.points
