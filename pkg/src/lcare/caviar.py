"""CAViaR benchmark: recursive conditional quantile with asymmetric slope.

    q_t = b0 + b1 q_{t-1} + b2 q_{t-2} + b3 q_{t-3} + b4 y+_{t-1} + b5 y-_{t-1}

with y+ = max(y, 0) and y- = min(y, 0). Unlike the CARE model the lagged
returns enter linearly, not squared.

The recursion is an IIR filter in q driven by the return terms, so paths are
computed with ``scipy.signal.lfilter``. Fitting minimizes the tick loss by
multi-start Nelder-Mead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter, lfiltic

from .errors import FitError, InsufficientData
from .market_data import ReturnSeries

N_BETA = 6
N_SEED = 3
SEED_OBS = 10
MIN_FIT = 60
N_STARTS = 20
MAX_ITER = 500
TOL = 1e-8
PENALTY = 1e4
BAD_LOSS = 1e10


@dataclass(frozen=True)
class CaviarParams:
    beta: tuple
    alpha: float

    def __post_init__(self):
        b = tuple(float(v) for v in self.beta)
        if len(b) != N_BETA:
            raise ValueError(f"expected {N_BETA} coefficients, got {len(b)}")
        if not all(math.isfinite(v) for v in b):
            raise ValueError("coefficients must be finite")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        object.__setattr__(self, "beta", b)

    @property
    def persistence(self) -> float:
        return abs(self.beta[1]) + abs(self.beta[2]) + abs(self.beta[3])

    @property
    def stationary(self) -> bool:
        return self.persistence < 1.0

    def as_dict(self):
        return {"beta": list(self.beta), "alpha": self.alpha}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["beta"]), d["alpha"])


@dataclass(frozen=True)
class CaviarFit:
    params: CaviarParams
    tick_loss: float
    window: tuple  # (end index, length)
    converged: bool
    quantile_path: np.ndarray
    penalty_active: bool = False
    n_starts: int = 0

    def as_dict(self):
        return {
            "model": "caviar",
            "params": self.params.as_dict(),
            "tick_loss": self.tick_loss,
            "window": {"end": self.window[0], "length": self.window[1]},
            "converged": self.converged,
            "penalty_active": self.penalty_active,
            "n_starts": self.n_starts,
            "quantile_path": [float(v) for v in self.quantile_path],
        }


def _values(window):
    return window.values if isinstance(window, ReturnSeries) else np.asarray(window, dtype=float)


def seed_quantile(y, alpha) -> float:
    """Empirical alpha-quantile of the first ten observations."""
    return float(np.quantile(y[:SEED_OBS], alpha))


def _path(beta, y, q0):
    b = beta
    a = np.array([1.0, -b[1], -b[2], -b[3]])
    drive = b[0] + b[4] * np.maximum(y[N_SEED - 1 : -1], 0.0) + b[5] * np.minimum(y[N_SEED - 1 : -1], 0.0)
    zi = lfiltic([1.0], a, [q0, q0, q0])
    out = np.empty(y.size)
    out[:N_SEED] = q0
    out[N_SEED:] = lfilter([1.0], a, drive, zi=zi)[0]
    return out


def quantile_path(params: CaviarParams, window) -> np.ndarray:
    """Conditional quantiles q_1..q_n; the first three equal the seed quantile."""
    y = _values(window)
    if y.size < N_SEED + 1:
        raise InsufficientData(f"quantile_path needs at least {N_SEED + 1} observations, got {y.size}")
    return _path(np.asarray(params.beta), y, seed_quantile(y, params.alpha))


def forecast(params: CaviarParams, window, path=None) -> float:
    """One-step-ahead quantile q_{n+1} from the end of the window."""
    y = _values(window)
    q = quantile_path(params, y) if path is None else path
    b = params.beta
    return float(b[0] + b[1] * q[-1] + b[2] * q[-2] + b[3] * q[-3]
                 + b[4] * max(y[-1], 0.0) + b[5] * min(y[-1], 0.0))


def tick_loss(y, q, alpha) -> float:
    """Sum of (alpha - 1{y <= q})(y - q) over the modelled observations."""
    u = y[N_SEED:] - q[N_SEED:]
    return float(np.sum(u * (alpha - (u <= 0))))


def _objective(beta, y, q0, alpha):
    q = _path(beta, y, q0)
    loss = tick_loss(y, q, alpha)
    if not math.isfinite(loss):
        return BAD_LOSS
    excess = abs(beta[1]) + abs(beta[2]) + abs(beta[3]) - 1.0
    if excess >= 0.0:
        loss += PENALTY * (excess + 1e-6)
    return loss


def _simplex(x0, scale):
    steps = np.array([max(0.2 * abs(x0[0]), 0.5 * scale), 0.1, 0.1, 0.1, 0.1, 0.1])
    return np.vstack([x0, x0 + np.diag(steps)])


def initial_guesses(y, alpha, n_starts=N_STARTS, seed=0) -> np.ndarray:
    """Constant-quantile start, a persistent start, then random perturbations."""
    qhat = float(np.quantile(y, alpha))
    scale = float(np.std(y)) or 1e-3
    starts = [np.array([qhat, 0.0, 0.0, 0.0, 0.0, 0.0]),
              np.array([0.2 * qhat, 0.8, 0.0, 0.0, -0.1, 0.1])]
    rng = np.random.default_rng(seed)
    while len(starts) < n_starts:
        b1 = rng.uniform(0.0, 0.95)
        rest = rng.uniform(-0.3, 0.3, 2) * (1.0 - b1)
        b4, b5 = rng.uniform(-0.5, 0.5, 2)
        b0 = (1.0 - b1 - rest.sum()) * qhat * rng.uniform(0.5, 1.5)
        starts.append(np.array([b0, b1, rest[0], rest[1], b4, b5]))
    return np.vstack(starts[:n_starts])


def _minimize(beta0, y, q0, alpha, scale, max_iter):
    res = minimize(
        _objective, beta0, args=(y, q0, alpha), method="Nelder-Mead",
        options={"maxiter": max_iter, "xatol": 1e-10, "fatol": TOL,
                 "initial_simplex": _simplex(beta0, scale)},
    )
    return res


def fit_caviar(window, alpha, *, n_starts=N_STARTS, max_iter=MAX_ITER, seed=0, starts=None,
               min_obs=MIN_FIT, end_index=None) -> CaviarFit:
    """Tick-loss fit by multi-start simplex search; ties keep the earliest start.

    ``starts`` overrides the generated start points (e.g. to warm-start from a
    previous window).
    """
    y = _values(window)
    if y.size < min_obs:
        raise InsufficientData(f"fit_caviar needs at least {min_obs} observations, got {y.size}")
    q0 = seed_quantile(y, alpha)
    scale = float(np.std(y)) or 1e-3
    x0s = initial_guesses(y, alpha, n_starts, seed) if starts is None else np.atleast_2d(starts)
    best = None
    for x0 in x0s:
        try:
            res = _minimize(np.asarray(x0, dtype=float), y, q0, alpha, scale, max_iter)
        except (ValueError, FloatingPointError):
            continue
        if not np.isfinite(res.fun) or res.fun >= BAD_LOSS:
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise FitError("every CAViaR start failed")
    params = CaviarParams(tuple(best.x), alpha)
    q = _path(best.x, y, q0)
    end = y.size - 1 if end_index is None else end_index
    return CaviarFit(
        params=params,
        tick_loss=tick_loss(y, q, alpha),
        window=(end, y.size),
        converged=bool(best.success),
        quantile_path=q,
        penalty_active=not params.stationary,
        n_starts=len(x0s),
    )


@dataclass(frozen=True)
class RollingCaviar:
    """One-step-ahead quantiles; ``forecast[i]`` applies to day ``t0[i] + 1``."""

    t0: np.ndarray
    forecast: np.ndarray
    refit: np.ndarray  # True where the parameters were re-estimated
    alpha: float


def rolling_caviar(returns, alpha, t0_range, window=250, *, refit_every=1, warm_starts=2,
                   n_starts=N_STARTS, max_iter=MAX_ITER, seed=0) -> RollingCaviar:
    """Fixed-length rolling CAViaR forecasts.

    The first window gets a full multi-start search. Later refits start from
    the previous optimum plus the first ``warm_starts - 1`` generated starts,
    which keeps daily refitting affordable. Between refits the last parameters
    are rolled forward over the new window.
    """
    y = _values(returns)
    t0s = np.asarray(list(t0_range), dtype=int)
    if t0s.size and (t0s.min() < window - 1 or t0s.max() >= y.size):
        raise InsufficientData("rolling window outside the series")
    out = np.empty(t0s.size)
    refit = np.zeros(t0s.size, dtype=bool)
    params = None
    for i, t0 in enumerate(t0s):
        w = y[t0 - window + 1 : t0 + 1]
        if params is None or i % refit_every == 0:
            if params is None:
                f = fit_caviar(w, alpha, n_starts=n_starts, max_iter=max_iter, seed=seed, end_index=int(t0))
            else:
                gen = initial_guesses(w, alpha, max(warm_starts - 1, 0), seed)
                starts = np.vstack([np.asarray(params.beta)[None, :], gen]) if gen.size else params.beta
                f = fit_caviar(w, alpha, max_iter=max_iter, starts=starts, end_index=int(t0))
            params = f.params
            refit[i] = True
        out[i] = forecast(params, w)
    return RollingCaviar(t0=t0s, forecast=out, refit=refit, alpha=alpha)
