"""TIPP portfolio insurance with pluggable multiplier series.

Day t holds wealth V_t, running peak P_t and floor

    F^s_t = s * max(F exp(-rf (T - t)), P_t),

cushion C_t = V_t - F^s_t and risky exposure G_t = m_{t+1} max(C_t, 0),
capped at V_t. Wealth then moves as

    V_{t+1} = V_t + G_t r_{t+1} + (V_t - G_t) rf_{t+1}.

Multiplier series are indexed by the return day they apply to, so
``multipliers[i]`` sets the exposure carried into ``returns[i]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import care, risk
from .errors import AlignmentError, LcareError
from .lpa.scenarios import rolling_estimates
from .market_data import ReturnSeries

PERIODS = 250


@dataclass(frozen=True)
class TippConfig:
    initial_value: float = 100.0
    protection: float = 0.9
    horizon: int = 250
    riskfree: float | tuple = 0.0  # daily rate, scalar or per-day tuple
    reanchor: bool = False

    def __post_init__(self):
        if not 0.0 < self.protection < 1.0:
            raise ValueError("protection fraction must lie in (0, 1)")
        if not self.initial_value > 0:
            raise ValueError("initial value must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be at least one day")
        if not np.isscalar(self.riskfree):
            object.__setattr__(self, "riskfree", tuple(float(v) for v in self.riskfree))

    def rates(self, n) -> np.ndarray:
        if np.isscalar(self.riskfree):
            return np.full(n, float(self.riskfree))
        rf = np.asarray(self.riskfree, dtype=float)
        if rf.size != n:
            raise AlignmentError(f"risk-free series has {rf.size} entries for {n} returns")
        return rf

    def as_dict(self):
        rf = self.riskfree if np.isscalar(self.riskfree) else list(self.riskfree)
        return {"initial_value": self.initial_value, "protection": self.protection,
                "horizon": self.horizon, "riskfree": rf, "reanchor": self.reanchor}


@dataclass(frozen=True)
class TippState:
    date: object
    value: float
    floor: float
    cushion: float
    exposure: float
    multiplier: float
    peak: float
    capped: bool = False  # exposure truncated at wealth
    in_cash: bool = False  # parked in cash after a gap event


@dataclass
class TippRun:
    """State path; the final state carries no position."""

    states: list
    gaps: int = 0
    capped_days: int = 0

    @property
    def values(self) -> np.ndarray:
        return np.array([s.value for s in self.states])

    @property
    def cushions(self) -> np.ndarray:
        return np.array([s.cushion for s in self.states])

    @property
    def floors(self) -> np.ndarray:
        return np.array([s.floor for s in self.states])

    def rows(self):
        return [{"date": str(s.date), "value": s.value, "floor": s.floor, "cushion": s.cushion,
                 "exposure": s.exposure, "multiplier": s.multiplier, "peak": s.peak,
                 "capped": int(s.capped), "in_cash": int(s.in_cash)} for s in self.states]


def _arrays(returns, multipliers):
    if isinstance(returns, ReturnSeries):
        r, dates = returns.values, list(returns.dates)
    else:
        r = np.asarray(returns, dtype=float)
        dates = list(range(1, r.size + 1))
    m = np.asarray(multipliers, dtype=float)
    if m.shape != r.shape:
        raise AlignmentError(f"{m.size} multipliers for {r.size} returns")
    if np.any(~np.isfinite(m)) or np.any(m < 0):
        raise AlignmentError("multipliers must be finite and non-negative")
    return r, m, dates


def run_tipp(returns, multipliers, config: TippConfig = TippConfig(), start_date=None) -> TippRun:
    r, m, dates = _arrays(returns, multipliers)
    n = r.size
    rf = config.rates(n).tolist()
    r, m = r.tolist(), m.tolist()
    s, T = config.protection, config.horizon
    anchor = config.initial_value
    V = peak = config.initial_value
    t_h = 0  # days into the current horizon
    locked = False
    states, gaps, capped_days = [], 0, 0
    date0 = start_date if start_date is not None else (dates[0] - 1 if isinstance(dates[0], int) else None)
    for t in range(n + 1):
        if t > 0 and config.reanchor and t_h == T:
            anchor = peak = V
            t_h = 0
            locked = False
        rate = rf[t] if t < n else 0.0
        floor = s * max(anchor * math.exp(-rate * max(T - t_h, 0)), peak)
        C = V - floor
        if C < 0 and not locked:
            locked = True
            gaps += 1
        if t == n:
            states.append(TippState(dates[t - 1] if t else date0, V, floor, C, 0.0, 0.0, peak, False, locked))
            break
        mult = m[t]
        G = 0.0 if locked else mult * max(C, 0.0)
        capped = G > V
        if capped:
            G = V
            capped_days += 1
        states.append(TippState(dates[t - 1] if t else date0, V, floor, C, G, mult, peak, capped, locked))
        V = V + G * r[t] + (V - G) * rf[t]
        peak = max(peak, V)
        t_h += 1
    return TippRun(states, gaps, capped_days)


@dataclass(frozen=True)
class BoundReport:
    violations: np.ndarray  # return-day indices with m > 1 / (-r-)
    bounds: np.ndarray

    @property
    def count(self) -> int:
        return int(self.violations.size)


def multiplier_bound_check(returns, multipliers) -> BoundReport:
    r, m, _ = _arrays(returns, multipliers)
    neg = -np.minimum(r, 0.0)
    with np.errstate(divide="ignore"):
        bounds = np.where(neg > 0, 1.0 / neg, np.inf)
    return BoundReport(np.flatnonzero(m > bounds), bounds)


@dataclass(frozen=True)
class PerfStats:
    ann_return: float  # %
    ann_volatility: float  # %
    var99: float  # %, daily
    skewness: float
    kurtosis: float
    sharpe: float
    degenerate: bool = False

    def as_dict(self):
        return {"return": self.ann_return, "volatility": self.ann_volatility, "var99": self.var99,
                "skewness": self.skewness, "kurtosis": self.kurtosis, "sharpe": self.sharpe,
                "degenerate": self.degenerate}


def performance_from_returns(r, riskfree=0.0, periods=PERIODS) -> PerfStats:
    """Annualized mean and volatility, daily 1% quantile, moments and Sharpe.

    Skewness and kurtosis use population central moments (kurtosis is not
    excess). Sharpe is (annual return - annual risk-free) / annual volatility
    and is reported as 0 with ``degenerate`` set when volatility vanishes.
    """
    r = np.asarray(r, dtype=float)
    if r.size < 2:
        raise ValueError("need at least two returns")
    mu = float(np.mean(r))
    sd = float(np.std(r, ddof=1))
    d = r - mu
    m2 = float(np.mean(d * d))
    degenerate = sd <= 1e-12 * abs(mu) or m2 == 0.0
    if degenerate:
        sd = 0.0
        skew = kurt = float("nan")
        sharpe = 0.0
    else:
        skew = float(np.mean(d**3) / m2**1.5)
        kurt = float(np.mean(d**4) / m2**2)
        rf = float(np.mean(riskfree)) * periods
        sharpe = (mu * periods - rf) / (sd * math.sqrt(periods))
    return PerfStats(
        ann_return=100.0 * mu * periods,
        ann_volatility=100.0 * sd * math.sqrt(periods),
        var99=100.0 * float(np.quantile(r, 0.01)),
        skewness=skew,
        kurtosis=kurt,
        sharpe=float(sharpe),
        degenerate=degenerate,
    )


def performance(run: TippRun | list, riskfree=0.0, periods=PERIODS) -> PerfStats:
    states = run.states if isinstance(run, TippRun) else run
    if len(states) < 3:
        raise ValueError("need at least three states")
    v = np.array([s.value for s in states])
    return performance_from_returns(v[1:] / v[:-1] - 1.0, riskfree, periods)


# --- multiplier sources ---------------------------------------------------


def constant_multipliers(n, m) -> np.ndarray:
    return np.full(n, float(m))


def rolling_care_forecasts(returns, tau, window=250, batch=200):
    """One-step-ahead CARE expectiles from fixed rolling windows.

    Returns (t0, forecast, sigma): ``forecast[i]`` is the expectile for day
    ``t0[i] + 1``. Windows condition on the three returns before them.
    """
    y = returns.values if isinstance(returns, ReturnSeries) else np.asarray(returns, dtype=float)
    est = rolling_estimates(y, tau, window=window, batch=batch)
    t0 = np.arange(window + care.N_LAGS - 1, y.size)
    X_next = np.stack([care.regressor_row(y[t - 2 : t + 1]) for t in t0]) if t0.size else np.empty((0, 8))
    forecast = np.einsum("ij,ij->i", X_next, est[:, :8])
    return t0, forecast, est[:, 8]


def multipliers_from_forecasts(n, t0, expectiles, tau, *, sigmas=None, fixed_alpha=None, m_min=risk.M_MIN,
                               m_max=risk.M_MAX, integer=False) -> np.ndarray:
    """Place forecast-implied multipliers on their return days (NaN elsewhere).

    Forecasts made at t0 apply to return index t0 + 1; the last forecast has
    no return day inside the series and is dropped.
    """
    from .and_dist import AndParams

    out = np.full(n, np.nan)
    keep = np.asarray(t0) + 1 < n
    t0 = np.asarray(t0)[keep]
    e = np.asarray(expectiles, dtype=float)[keep]
    dists = None
    if sigmas is not None:
        dists = [AndParams(0.0, float(s), tau) for s in np.asarray(sigmas)[keep]]
    run = risk.risk_series(e, tau, dists, fixed_alpha=fixed_alpha, m_min=m_min, m_max=m_max, integer=integer)
    ok = np.array(sorted(set(range(e.size)) - set(run.errors)), dtype=int)
    out[t0[ok] + 1] = run.arrays()["multiplier"]
    return out


@dataclass
class SuiteResult:
    start: int
    table: dict  # name -> PerfStats
    runs: dict  # name -> TippRun
    errors: dict = field(default_factory=dict)

    def rows(self):
        return [{"strategy": k, **v.as_dict()} for k, v in self.table.items()]


def strategy_suite(returns, sources: dict, config: TippConfig = TippConfig(), start=None) -> SuiteResult:
    """Run TIPP for every multiplier source over a common sample.

    Sources are per-return-day arrays, NaN where unavailable. The sample
    starts at the first day where every source is defined (or ``start``).
    An "index" row holds buy-and-hold statistics over the same days.
    """
    r = returns.values if isinstance(returns, ReturnSeries) else np.asarray(returns, dtype=float)
    arrays = {k: np.asarray(v, dtype=float) for k, v in sources.items()}
    if start is None:
        start = 0
        for v in arrays.values():
            if v.shape != r.shape:
                raise AlignmentError(f"source has {v.size} entries for {r.size} returns")
            bad = np.flatnonzero(~np.isfinite(v))
            if bad.size:
                start = max(start, int(bad.max()) + 1)
    if start >= r.size - 2:
        raise AlignmentError("no common sample across multiplier sources")
    rr = r[start:]
    rs = ReturnSeries(returns.dates[start:], rr, returns.kind) if isinstance(returns, ReturnSeries) else rr
    rf = config.rates(r.size)[start:] if not np.isscalar(config.riskfree) else config.riskfree
    cfg = TippConfig(config.initial_value, config.protection, config.horizon,
                     rf if np.isscalar(rf) else tuple(rf), config.reanchor)
    table, runs, errors = {}, {}, {}
    table["index"] = performance_from_returns(rr, rf)
    for name, m in arrays.items():
        try:
            run = run_tipp(rs, m[start:], cfg)
            runs[name] = run
            table[name] = performance(run, rf)
        except (LcareError, ValueError) as exc:
            errors[name] = str(exc)
    return SuiteResult(start, table, runs, errors)
