"""Conditional autoregressive expectile (CARE) model.

The tau-expectile follows a linear recursion in three lagged returns:

    e_t = a0 + a1 y_{t-1} + a2 (y+_{t-1})^2 + a3 (y+_{t-2})^2 + a4 (y+_{t-3})^2
             + a5 (y-_{t-1})^2 + a6 (y-_{t-2})^2 + a7 (y-_{t-3})^2

Given the expectile weights ``w_t = |tau - 1{y_t <= e_t}|`` the model is a
weighted linear regression, so the asymmetric least squares fit is computed by
iteratively reweighted least squares until the weight pattern stops changing.
The residual scale is then profiled out of the AND quasi log-likelihood in
closed form, ``sigma^2 = 2 * ALS / n``, which makes QMLE and ALS share the same
coefficient estimate.

Two levels of API are provided. Window functions (``expectile_path``,
``als_loss``, ``loglik``, ``fit``) take a standalone ReturnSeries and burn the
first three observations for lags. Array functions (``design_matrix``,
``fit_masks``, ``loglik_rows``) work on a full series design and let callers
condition on lags that precede a window; the local change-point machinery
uses these so that sub-intervals partition their parent exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import and_dist
from .errors import FitError, InsufficientData, RankDeficient
from .market_data import ReturnSeries

N_LAGS = 3
N_COEF = 8
MIN_WINDOW = 20
MAX_ITER = 100
EIG_CUTOFF = 1e-11
SIGMA_FLOOR = 1e-300


@dataclass(frozen=True)
class CareParams:
    alpha: tuple
    sigma_eps: float
    tau: float

    def __post_init__(self):
        a = tuple(float(v) for v in self.alpha)
        if len(a) != N_COEF:
            raise ValueError(f"expected {N_COEF} expectile coefficients, got {len(a)}")
        if not all(math.isfinite(v) for v in a):
            raise ValueError("coefficients must be finite")
        if not self.sigma_eps > 0:
            raise ValueError("sigma_eps must be positive")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        object.__setattr__(self, "alpha", a)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.alpha)

    @property
    def theta(self) -> np.ndarray:
        """The nine-element parameter vector (a0..a7, sigma_eps)."""
        return np.append(self.vector, self.sigma_eps)

    def innovation(self) -> and_dist.AndParams:
        return and_dist.AndParams(0.0, self.sigma_eps, self.tau)

    def as_dict(self):
        return {"alpha": list(self.alpha), "sigma_eps": self.sigma_eps, "tau": self.tau}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["alpha"]), d["sigma_eps"], d["tau"])


@dataclass(frozen=True)
class CareFit:
    params: CareParams
    loglik: float
    als_loss: float
    window: tuple  # (end_index, length)
    converged: bool
    iterations: int
    rank_deficient: bool = False
    n_obs: int = 0

    def as_dict(self):
        return {
            "model": "care",
            "params": self.params.as_dict(),
            "loglik": self.loglik,
            "als_loss": self.als_loss,
            "window": {"end_index": self.window[0], "length": self.window[1]},
            "converged": self.converged,
            "iterations": self.iterations,
            "rank_deficient": self.rank_deficient,
            "n_obs": self.n_obs,
        }


@dataclass(frozen=True, eq=False)
class ExpectilePath:
    values: np.ndarray = field(repr=False)

    def residuals(self, y):
        return np.asarray(y, dtype=float) - self.values


def design_matrix(y) -> np.ndarray:
    """Regressor rows for every t; rows 0..2 lack lags and are left at zero."""
    y = np.asarray(y, dtype=float)
    n = y.size
    X = np.zeros((n, N_COEF))
    if n <= N_LAGS:
        return X
    pos = np.maximum(y, 0.0) ** 2
    neg = np.minimum(y, 0.0) ** 2
    X[N_LAGS:, 0] = 1.0
    X[N_LAGS:, 1] = y[N_LAGS - 1 : -1]
    for j in range(1, N_LAGS + 1):
        X[N_LAGS:, 1 + j] = pos[N_LAGS - j : n - j]
        X[N_LAGS:, 4 + j] = neg[N_LAGS - j : n - j]
    return X


def regressor_row(recent) -> np.ndarray:
    """Regressors for the day after ``recent`` (the last three returns, oldest first)."""
    y1, y2, y3 = recent[-1], recent[-2], recent[-3]
    p = lambda v: max(v, 0.0) ** 2
    m = lambda v: min(v, 0.0) ** 2
    return np.array([1.0, y1, p(y1), p(y2), p(y3), m(y1), m(y2), m(y3)])


def forecast(params: CareParams, recent) -> float:
    """One-step-ahead expectile given the last three returns."""
    if len(recent) < N_LAGS:
        raise InsufficientData("forecast needs three lagged returns")
    return float(regressor_row(np.asarray(recent, dtype=float)) @ params.vector)


def _values(window):
    return window.values if isinstance(window, ReturnSeries) else np.asarray(window, dtype=float)


def _require(n, minimum, what):
    if n < minimum:
        raise InsufficientData(f"{what} needs at least {minimum} observations, got {n}")


def expectile_path(params: CareParams, window) -> ExpectilePath:
    y = _values(window)
    _require(y.size, N_LAGS + 1, "expectile_path")
    e = design_matrix(y) @ params.vector
    e[:N_LAGS] = np.nan
    return ExpectilePath(e)


def als_loss(params: CareParams, window) -> float:
    y = _values(window)
    r = expectile_path(params, y).residuals(y)[N_LAGS:]
    return float(np.sum(and_dist.check_function(r, params.tau)))


def loglik(params: CareParams, window) -> float:
    y = _values(window)
    r = expectile_path(params, y).residuals(y)[N_LAGS:]
    return float(np.sum(and_dist.logpdf(r, params.innovation())))


def profile_loglik(als, n, tau):
    """Maximum over sigma of the AND log-likelihood for a given ALS value."""
    als = np.asarray(als, dtype=float)
    sigma = np.maximum(np.sqrt(2.0 * als / n), SIGMA_FLOOR)
    return n * and_dist.log_norm_const(tau) - n * np.log(sigma) - als / sigma**2


# --- batched IRLS --------------------------------------------------------


def _sample_expectiles(Y, M, tau, iters=50):
    """Per-row tau-expectile of the masked entries of Y (fixed-point iteration)."""
    cnt = M.sum(axis=1)
    e = (Y * M).sum(axis=1) / cnt
    for _ in range(iters):
        W = np.where(Y <= e[:, None], 1.0 - tau, tau) * M
        e_new = (W * Y).sum(axis=1) / W.sum(axis=1)
        if np.array_equal(e_new, e):
            break
        e = e_new
    return e


def _solve_psd(G, rhs):
    """Solve stacked symmetric PSD systems, pseudo-inverting null directions.

    Columns are Jacobi-scaled first so regressors on very different scales
    (intercept vs squared daily returns) are judged rank deficient on the same
    footing. Returns the solution and a per-system rank-deficiency flag.
    """
    d = np.sqrt(np.einsum("bii->bi", G))
    d = np.where(d > 0, d, 1.0)
    Gs = G / d[:, :, None] / d[:, None, :]
    rs = rhs / d
    lam, V = np.linalg.eigh(Gs)
    cut = EIG_CUTOFF * lam[:, -1:]
    keep = lam > cut
    inv = np.where(keep, 1.0 / np.where(keep, lam, 1.0), 0.0)
    coef = np.einsum("bij,bj->bi", V, inv * np.einsum("bji,bj->bi", V, rs))
    return coef / d, ~keep.all(axis=1)


@dataclass
class BatchFit:
    """Raw arrays from a batched fit; one entry per mask."""

    beta: np.ndarray
    sigma: np.ndarray
    als: np.ndarray
    loglik: np.ndarray
    n_obs: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    rank_deficient: np.ndarray
    weights: np.ndarray


def fit_masks(y, X, masks, tau, w_init=None, columns=None, max_iter=MAX_ITER) -> BatchFit:
    """Fit one CARE model per row of ``masks`` over a shared response/design.

    ``y`` has shape (n,) and ``X`` shape (n, 8); ``masks`` is a boolean (b, n)
    array selecting the observations of each fit. ``w_init`` optionally gives
    starting expectile weights (b, n); otherwise they come from the sign of
    ``y`` relative to each window's unconditional tau-expectile. ``columns``
    restricts the regression to a subset of coefficients (others fixed at 0).
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    M = np.atleast_2d(np.asarray(masks, dtype=bool))
    b, n = M.shape
    cols = np.arange(N_COEF) if columns is None else np.asarray(columns)
    Xc = X[:, cols]
    Mf = M.astype(float)
    Y = np.broadcast_to(y, (b, n))

    if w_init is None:
        e0 = _sample_expectiles(Y, Mf, tau)
        W = np.where(Y <= e0[:, None], 1.0 - tau, tau)
    else:
        W = np.array(w_init, dtype=float, copy=True)

    beta = np.zeros((b, cols.size))
    deficient = np.zeros(b, dtype=bool)
    converged = np.zeros(b, dtype=bool)
    iterations = np.zeros(b, dtype=int)
    active = np.arange(b)

    for it in range(1, max_iter + 1):
        MW = Mf[active] * W[active]
        Xt = np.swapaxes(Xc[None, :, :] * MW[:, :, None], 1, 2)
        G = Xt @ Xc
        rhs = Xt @ y
        bt, dfc = _solve_psd(G, rhs)
        beta[active] = bt
        deficient[active] = dfc
        iterations[active] = it
        E = bt @ Xc.T
        W_new = np.where(y[None, :] <= E, 1.0 - tau, tau)
        same = np.all((W_new == W[active]) | ~M[active], axis=1)
        W[active] = W_new
        converged[active[same]] = True
        active = active[~same]
        if active.size == 0:
            break

    full = np.zeros((b, N_COEF))
    full[:, cols] = beta
    E = full @ X.T
    R = y[None, :] - E
    W = np.where(R <= 0, 1.0 - tau, tau)
    als = np.sum(W * R * R * Mf, axis=1)
    cnt = M.sum(axis=1)
    sigma = np.maximum(np.sqrt(2.0 * als / cnt), SIGMA_FLOOR)
    ll = profile_loglik(als, cnt, tau)
    return BatchFit(full, sigma, als, ll, cnt, converged, iterations, deficient, W)


def loglik_rows(y, X, rows, params_alpha, sigma, tau):
    """Per-observation AND log-density for several parameter sets.

    Returns an array (n_params, len(rows)).
    """
    A = np.atleast_2d(params_alpha)
    s = np.atleast_1d(np.asarray(sigma, dtype=float))
    R = y[rows][None, :] - A @ X[rows].T
    U = R / s[:, None]
    eta = np.where(U <= 0, (1.0 - tau) * U * U, tau * U * U)
    return and_dist.log_norm_const(tau) - np.log(s)[:, None] - eta


def interval_mask(n, start, stop):
    """Boolean mask of rows [start, stop) in a length-n design."""
    m = np.zeros(n, dtype=bool)
    m[start:stop] = True
    return m


# --- window-level fit ----------------------------------------------------


def fit(window, tau, init: CareParams | None = None, *, columns=None, min_window=MIN_WINDOW,
        strict=False, end_index=None) -> CareFit:
    """Quasi maximum likelihood fit of the CARE model on a standalone window.

    The first three observations of the window only supply lags. A rank
    deficient design is solved by pseudo-inverse and flagged on the result;
    with ``strict=True`` it raises RankDeficient instead. Non-convergence of
    the weight iteration is reported through ``converged`` with the last
    iterate returned.
    """
    y = _values(window)
    _require(y.size, min_window, "fit")
    X = design_matrix(y)
    mask = interval_mask(y.size, N_LAGS, y.size)[None, :]
    w0 = None
    if init is not None:
        e = X @ init.vector
        w0 = np.where(y <= e, 1.0 - tau, tau)[None, :]
    bf = fit_masks(y, X, mask, tau, w_init=w0, columns=columns)
    if bf.rank_deficient[0] and strict:
        raise RankDeficient("singular regressor matrix in CARE fit")
    sigma = float(bf.sigma[0])
    if not np.all(np.isfinite(bf.beta[0])):
        raise FitError("CARE fit produced non-finite coefficients")
    params = CareParams(tuple(bf.beta[0]), sigma, tau)
    end = y.size - 1 if end_index is None else end_index
    return CareFit(
        params=params,
        loglik=float(bf.loglik[0]),
        als_loss=float(bf.als[0]),
        window=(end, y.size),
        converged=bool(bf.converged[0]),
        iterations=int(bf.iterations[0]),
        rank_deficient=bool(bf.rank_deficient[0]),
        n_obs=int(bf.n_obs[0]),
    )


def simulate(params: CareParams, n: int, seed=None, burn_in=100, shifts=None) -> np.ndarray:
    """Simulate n returns from the CARE recursion with AND(0, sigma, tau) noise.

    Lags start at zero and the first ``burn_in`` draws are discarded.
    ``shifts`` optionally adds a per-observation offset (length n) to the
    intercept, e.g. to inject a structural break.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    total = n + burn_in
    eps = and_dist.sample(params.innovation(), total, rng)
    a = params.alpha
    off = np.zeros(total)
    if shifts is not None:
        off[burn_in:] = shifts
    y = np.zeros(total + N_LAGS)
    for t in range(total):
        y1, y2, y3 = y[t + 2], y[t + 1], y[t]
        p1, p2, p3 = max(y1, 0.0), max(y2, 0.0), max(y3, 0.0)
        m1, m2, m3 = min(y1, 0.0), min(y2, 0.0), min(y3, 0.0)
        e = (a[0] + off[t] + a[1] * y1 + a[2] * p1 * p1 + a[3] * p2 * p2 + a[4] * p3 * p3
             + a[5] * m1 * m1 + a[6] * m2 * m2 + a[7] * m3 * m3)
        y[t + N_LAGS] = e + eps[t]
    return y[N_LAGS + burn_in :]
