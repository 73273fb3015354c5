"""Expected shortfall implied by an expectile, and TIPP multipliers.

For an expectile e at level tau_a whose quantile level is a,

    ES = |1 + tau_a / ((1 - 2 tau_a) a)| * e

and the multiplier is the reciprocal absolute ES clamped to [m_min, m_max].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import and_dist
from .and_dist import AndParams
from .errors import LcareError, SingularLevel

M_MIN = 1.0
M_MAX = 12.0


@dataclass(frozen=True)
class TailRiskPoint:
    date: object
    expectile: float
    tau_alpha: float
    alpha: float
    es: float
    multiplier: float

    def row(self):
        return {
            "date": str(self.date),
            "expectile": self.expectile,
            "tau_alpha": self.tau_alpha,
            "alpha": self.alpha,
            "es": self.es,
            "multiplier": self.multiplier,
        }


def es_factor(tau_alpha, alpha) -> float:
    if tau_alpha == 0.5:
        raise SingularLevel("expected shortfall factor is undefined at tau_alpha = 0.5")
    if not 0.0 < tau_alpha < 0.5:
        raise ValueError(f"tau_alpha must lie in (0, 0.5), got {tau_alpha}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return abs(1.0 + tau_alpha / ((1.0 - 2.0 * tau_alpha) * alpha))


def expected_shortfall(expectile, tau_alpha, alpha) -> float:
    return es_factor(tau_alpha, alpha) * expectile


def multiplier(es, m_min=M_MIN, m_max=M_MAX, integer=False) -> float:
    """1/|es| clamped to [m_min, m_max]; ``integer`` rounds down before clamping."""
    if m_min > m_max:
        raise ValueError("m_min must not exceed m_max")
    if es == 0:
        return float(m_max)
    raw = 1.0 / abs(es)
    if integer:
        raw = math.floor(raw)
    return float(min(max(raw, m_min), m_max))


def inverse_multiplier(m) -> float:
    """An ES value whose multiplier is m (inside the clamp range)."""
    return -1.0 / m


@dataclass
class RiskRun:
    points: list
    errors: dict = field(default_factory=dict)  # index -> message

    def arrays(self):
        return {
            "expectile": np.array([p.expectile for p in self.points]),
            "alpha": np.array([p.alpha for p in self.points]),
            "es": np.array([p.es for p in self.points]),
            "multiplier": np.array([p.multiplier for p in self.points]),
        }


def risk_series(expectiles, tau, dists=None, dates=None, *, fixed_alpha=None, m_min=M_MIN, m_max=M_MAX,
                integer=False) -> RiskRun:
    """Per-day ES and multiplier from expectile forecasts.

    ``dists`` gives the fitted AND per day (a single AndParams is broadcast);
    it fixes the quantile level matched to tau. With ``fixed_alpha`` that
    level is used for every day instead. Days whose mapping fails are
    reported in ``errors`` and skipped.
    """
    e = np.asarray(expectiles, dtype=float)
    n = e.size
    if dists is None or isinstance(dists, AndParams):
        dists = [dists or AndParams(0.0, 1.0, tau)] * n
    if len(dists) != n:
        raise ValueError("one distribution per expectile is required")
    dates = list(range(n)) if dates is None else list(dates)
    points, errors = [], {}
    cache = {}
    for i in range(n):
        try:
            if fixed_alpha is not None:
                a = float(fixed_alpha)
            else:
                d = dists[i]
                key = (d.sigma, d.tau)
                if key not in cache:
                    cache[key] = and_dist.alpha_for_tau(tau, AndParams(0.0, d.sigma, d.tau)).alpha
                a = cache[key]
            es = expected_shortfall(float(e[i]), tau, a)
            m = multiplier(es, m_min, m_max, integer)
        except (LcareError, ValueError) as exc:
            errors[i] = str(exc)
            continue
        points.append(TailRiskPoint(dates[i], float(e[i]), tau, a, es, m))
    return RiskRun(points, errors)
