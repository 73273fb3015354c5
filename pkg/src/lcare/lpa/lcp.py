"""Local change-point test and the adaptive (interval-of-homogeneity) estimator.

All computations for a time point ``t0`` run on a local slice holding the
longest interval I_K plus the three observations before it, so every interval
conditions on the same pre-window lags and the split intervals A and B
partition their enclosing interval exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .. import care
from ..care import CareParams, N_LAGS
from ..errors import FitError, InsufficientData
from ..market_data import ReturnSeries
from .scheme import IntervalScheme, LpaConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LocalWindow:
    """Response and design for the longest interval ending at t0, plus lags."""

    y: np.ndarray
    X: np.ndarray
    scheme: IntervalScheme

    @property
    def size(self) -> int:
        return self.y.size

    def interval_mask(self, length):
        return care.interval_mask(self.size, self.size - length, self.size)

    def interval_masks(self):
        return np.stack([self.interval_mask(n) for n in self.scheme.lengths])


def local_window(y, t0: int, scheme: IntervalScheme) -> LocalWindow:
    y = np.asarray(y, dtype=float)
    start = t0 - scheme.longest + 1 - N_LAGS
    if start < 0 or t0 >= y.size:
        raise InsufficientData(
            f"t0={t0} needs {scheme.longest + N_LAGS} observations up to and including t0"
        )
    seg = y[start : t0 + 1]
    return LocalWindow(seg, care.design_matrix(seg), scheme)


def min_t0(scheme: IntervalScheme) -> int:
    return scheme.longest + N_LAGS - 1


def split_points(scheme: IntervalScheme, k: int, min_window=care.MIN_WINDOW, stride=1):
    """Local row indices s in J_k = I_k minus I_{k-1} that leave A and B fittable.

    Indices are relative to a local window of length n_K + 3. A covers rows
    [L - N, s] and B rows (s, L-1], where N is the enclosing length.
    """
    L = scheme.longest + N_LAGS
    N = scheme.enclosing(k)
    nk, nk1 = scheme.lengths[k], scheme.lengths[k - 1]
    s = np.arange(L - nk, L - nk1)
    len_a = s + 1 - (L - N)
    len_b = L - 1 - s
    s = s[(len_a >= min_window) & (len_b >= min_window)]
    return s[::stride]


def _split_masks(win: LocalWindow, k, min_window, stride):
    L = win.size
    N = win.scheme.enclosing(k)
    s = split_points(win.scheme, k, min_window, stride)
    if s.size == 0:
        raise ValueError(f"no admissible split point at step {k}")
    rows = np.arange(L)
    A = (rows[None, :] >= L - N) & (rows[None, :] <= s[:, None])
    B = rows[None, :] > s[:, None]
    return s, A, B


def interval_fits(win: LocalWindow, tau) -> care.BatchFit:
    """QMLE on every interval I_0..I_K of the local window (one batch)."""
    return care.fit_masks(win.y, win.X, win.interval_masks(), tau)


def _enclosing_index(scheme, k):
    return min(k + 1, scheme.K)


def step_statistics(win: LocalWindow, tau, ks, fits: care.BatchFit, min_window=care.MIN_WINDOW, stride=1):
    """Test statistics T_k for the steps in ``ks``; all split fits in one batch.

    ``fits`` are the interval fits of the same window; the enclosing fit's
    weights warm-start every split fit.
    """
    masks, w0, owner, sizes = [], [], [], []
    for k in ks:
        s, A, B = _split_masks(win, k, min_window, stride)
        w_enc = fits.weights[_enclosing_index(win.scheme, k)]
        masks += [A, B]
        w0.append(np.broadcast_to(w_enc, (2 * s.size, win.size)))
        sizes.append(s.size)
        owner += [(k, int(v)) for v in s] * 2
    M = np.concatenate(masks)
    W0 = np.concatenate(w0)
    bf = care.fit_masks(win.y, win.X, M, tau, w_init=W0)
    if not np.all(np.isfinite(bf.loglik)):
        k, s = owner[int(np.flatnonzero(~np.isfinite(bf.loglik))[0])]
        raise FitError(f"split fit at step k={k}, split s={s} produced a non-finite likelihood")
    out = {}
    pos = 0
    for k, m in zip(ks, sizes):
        ll_a = bf.loglik[pos : pos + m]
        ll_b = bf.loglik[pos + m : pos + 2 * m]
        pos += 2 * m
        enc = fits.loglik[_enclosing_index(win.scheme, k)]
        out[k] = float(np.max(ll_a + ll_b) - enc)
    return out


def lcp_statistic(returns, t0: int, k: int, tau, scheme: IntervalScheme | None = None,
                  min_window=care.MIN_WINDOW, stride=1) -> float:
    """Sup over split points s in J_k of l_A + l_B - l_{I_{k+1}}."""
    scheme = scheme or IntervalScheme()
    y = returns.values if isinstance(returns, ReturnSeries) else returns
    win = local_window(y, t0, scheme)
    fits = interval_fits(win, tau)
    return step_statistics(win, tau, [k], fits, min_window, stride)[k]


def select_k(statistics, critical_values) -> int:
    """Number of leading steps whose statistic stays at or below its critical value."""
    k_hat = 0
    for t, z in zip(statistics, critical_values):
        if t > z:
            break
        k_hat += 1
    return k_hat


@dataclass(frozen=True)
class LcpStep:
    k: int
    statistic: float
    critical_value: float
    rejected: bool


@dataclass(frozen=True)
class LcpResult:
    t0: int
    date: str | None
    scenario: str | None
    steps: tuple
    k_hat: int
    interval_length: int
    params: CareParams
    expectile: float  # one-step-ahead forecast for t0 + 1
    loglik: float = float("nan")
    alpha1_yearly: float = float("nan")

    def row(self):
        d = {
            "date": self.date,
            "t0": self.t0,
            "scenario": self.scenario,
            "k_hat": self.k_hat,
            "interval_length": self.interval_length,
        }
        for i, a in enumerate(self.params.alpha):
            d[f"alpha{i}"] = a
        d["sigma_eps"] = self.params.sigma_eps
        d["expectile"] = self.expectile
        return d


def nearest_scenario(alpha1: float, scenario_alpha1: dict) -> str:
    """Label whose persistence coefficient is closest; ties go to the first label."""
    labels = list(scenario_alpha1)
    d = [abs(alpha1 - scenario_alpha1[l]) for l in labels]
    return labels[int(np.argmin(d))]


def select_scenario(returns, t0: int, tau, scenarios, scheme: IntervalScheme | None = None) -> str:
    """Pick the scenario by the yearly (I_K) estimate of the persistence coefficient.

    ``scenarios`` maps label -> CareParams for this tau.
    """
    scheme = scheme or IntervalScheme()
    y = returns.values if isinstance(returns, ReturnSeries) else returns
    win = local_window(y, t0, scheme)
    fit = care.fit_masks(win.y, win.X, win.interval_mask(scheme.longest)[None, :], tau)
    a1 = float(fit.beta[0, 1])
    return nearest_scenario(a1, {l: p.alpha[1] for l, p in scenarios.items()})


def adaptive_fit(returns, t0: int, tau, config: LpaConfig, cv, dates=None) -> LcpResult:
    """Sequential LCP test at t0 and the QMLE on the selected interval.

    ``cv`` maps scenario label -> CriticalValueTable (or a single table, used
    regardless of scenario). Testing stops at the first rejection.
    """
    scheme = config.scheme
    if isinstance(returns, ReturnSeries):
        y, dates = returns.values, returns.dates
    else:
        y = np.asarray(returns, dtype=float)
    win = local_window(y, t0, scheme)
    fits = interval_fits(win, tau)
    a1 = float(fits.beta[-1, 1])

    if isinstance(cv, dict):
        label = nearest_scenario(a1, {l: t.scenario.alpha[1] for l, t in cv.items()})
        table = cv[label]
    else:
        label, table = cv.label, cv
    if len(table.values) != scheme.K:
        raise ValueError("critical value table does not match the interval scheme")

    steps = []
    k_hat = scheme.K
    for k in range(1, scheme.K + 1):
        t_k = step_statistics(win, tau, [k], fits, config.min_window, config.split_stride)[k]
        z_k = table.values[k - 1]
        rejected = t_k > z_k
        steps.append(LcpStep(k, t_k, z_k, bool(rejected)))
        if rejected:
            k_hat = k - 1
            break

    params = CareParams(tuple(fits.beta[k_hat]), float(fits.sigma[k_hat]), tau)
    e_next = care.forecast(params, y[t0 - 2 : t0 + 1])
    date = str(dates[t0]) if dates is not None else None
    return LcpResult(
        t0=t0,
        date=date,
        scenario=label,
        steps=tuple(steps),
        k_hat=k_hat,
        interval_length=scheme.lengths[k_hat],
        params=params,
        expectile=e_next,
        loglik=float(fits.loglik[k_hat]),
        alpha1_yearly=a1,
    )


@dataclass
class AdaptiveRun:
    results: list = field(default_factory=list)
    errors: list = field(default_factory=list)  # (t0, message)

    @property
    def mean_length(self) -> float:
        if not self.results:
            return float("nan")
        return float(np.mean([r.interval_length for r in self.results]))

    def scenario_counts(self):
        out = {}
        for r in self.results:
            out[r.scenario] = out.get(r.scenario, 0) + 1
        return out


def _adaptive_one(t0, y, dates, tau, config, cv):
    try:
        return adaptive_fit(y, t0, tau, config, cv, dates=dates), None
    except Exception as exc:  # noqa: BLE001 - per-day errors are collected, run continues
        return None, (t0, f"{type(exc).__name__}: {exc}")


def adaptive_series(returns, t0_range, tau, config: LpaConfig, cv, n_jobs=1) -> AdaptiveRun:
    from .._parallel import pmap

    if isinstance(returns, ReturnSeries):
        y, dates = returns.values, returns.dates
    else:
        y, dates = np.asarray(returns, dtype=float), None
    outs = pmap(_adaptive_one, list(t0_range), n_jobs, y=y, dates=dates, tau=tau, config=config, cv=cv)
    run = AdaptiveRun()
    for res, err in outs:
        if err is not None:
            log.warning("adaptive fit failed at t0=%s: %s", *err)
            run.errors.append(err)
        else:
            run.results.append(res)
    return run
