"""'True' parameter constellations used to simulate critical values."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .. import care
from ..care import CareParams
from ..market_data import ReturnSeries

LABELS = ("low", "mid", "high")

# Quartiles of one-year rolling CARE estimates pooled over DAX, FTSE 100 and
# S&P 500 (2006-2016): columns are a0..a7, sigma_eps.
_QUARTILES = {
    0.05: {
        "low": (-0.016, -0.035, 0.079, 0.037, 0.052, 0.004, 0.022, -0.014, 0.001),
        "mid": (-0.013, 0.051, 0.145, 0.138, 0.147, 0.115, 0.104, 0.099, 0.002),
        "high": (-0.009, 0.153, 0.209, 0.247, 0.246, 0.244, 0.156, 0.152, 0.003),
    },
    0.01: {
        "low": (-0.026, -0.075, 0.077, -0.074, 0.101, -0.055, -0.576, -0.861, 0.001),
        "mid": (-0.021, 0.079, 0.155, 0.162, 0.170, 0.106, 0.109, 0.106, 0.002),
        "high": (-0.015, 0.240, 0.247, 0.232, 0.452, 0.308, 0.160, 0.149, 0.002),
    },
    0.0025: {
        "low": (-0.034, -0.131, -0.319, -0.116, 0.062, 0.031, -1.748, -3.124, 0.001),
        "mid": (-0.026, 0.090, 0.120, 0.152, 0.152, 0.141, 0.113, 0.108, 0.002),
        "high": (-0.021, 0.295, 0.207, 0.561, 0.740, 1.463, 0.179, 0.161, 0.001),
    },
}


def _params(row, tau):
    return CareParams(tuple(row[:8]), row[8], tau)


@dataclass(frozen=True)
class ScenarioSet:
    """Per expectile level, three labelled parameter constellations."""

    levels: dict  # tau -> {label: CareParams}

    @classmethod
    def default(cls):
        return cls({tau: {l: _params(rows[l], tau) for l in LABELS} for tau, rows in _QUARTILES.items()})

    def for_tau(self, tau) -> dict:
        for t, sc in self.levels.items():
            if abs(t - tau) < 1e-12:
                return sc
        raise KeyError(f"no scenarios for tau={tau}")

    @property
    def taus(self):
        return sorted(self.levels)

    def to_json(self) -> str:
        d = {repr(t): {l: p.as_dict() for l, p in sc.items()} for t, sc in sorted(self.levels.items())}
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls({float(t): {l: CareParams.from_dict(p) for l, p in sc.items()} for t, sc in d.items()})


def rolling_estimates(returns, tau, window=250, step=1, batch=200) -> np.ndarray:
    """Nine-element estimates from fixed rolling windows, one row per window end."""
    y = returns.values if isinstance(returns, ReturnSeries) else np.asarray(returns, dtype=float)
    X = care.design_matrix(y)
    ends = np.arange(window + care.N_LAGS - 1, y.size, step)
    rows = []
    for lo in range(0, ends.size, batch):
        chunk = ends[lo : lo + batch]
        M = np.zeros((chunk.size, y.size), dtype=bool)
        for i, e in enumerate(chunk):
            M[i, e - window + 1 : e + 1] = True
        bf = care.fit_masks(y, X, M, tau)
        rows.append(np.column_stack([bf.beta, bf.sigma]))
    return np.concatenate(rows) if rows else np.empty((0, 9))


def scenarios_from_returns(returns, tau, window=250, step=1) -> ScenarioSet:
    """First quartile / median / third quartile of each rolling estimate."""
    est = rolling_estimates(returns, tau, window, step)
    if est.shape[0] < 4:
        raise ValueError("too few rolling windows to form quartiles")
    q = np.quantile(est, [0.25, 0.5, 0.75], axis=0)
    return ScenarioSet({tau: {l: _params(q[i], tau) for i, l in enumerate(LABELS)}})
