"""Asymmetric normal distribution AND(mu, sigma^2, tau).

The density glues two half-normals at ``mu``:

    f(y) = (2/sigma) * (sqrt(pi/(1-tau)) + sqrt(pi/tau))**-1 * exp(-eta_tau((y-mu)/sigma))

with check function ``eta_tau(u) = |tau - 1{u <= 0}| u^2``. In units of
``u = (y - mu)/sigma`` the left branch is a half-normal with variance
``1/(2(1-tau))`` and the right branch one with variance ``1/(2 tau)``. The
left branch carries mass ``sqrt(tau)/(sqrt(tau)+sqrt(1-tau))``. By
construction ``mu`` is the tau-expectile of the distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .errors import NumericalError

_PHI0 = 1.0 / math.sqrt(2.0 * math.pi)
ROOT_XTOL = 1e-10
ROOT_MAXITER = 200


@dataclass(frozen=True)
class AndParams:
    mu: float = 0.0
    sigma: float = 1.0
    tau: float = 0.5

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")

    @property
    def left_mass(self) -> float:
        st, sc = math.sqrt(self.tau), math.sqrt(1.0 - self.tau)
        return st / (st + sc)

    @property
    def left_scale(self) -> float:
        """Std of the left half-normal branch, in y units."""
        return self.sigma / math.sqrt(2.0 * (1.0 - self.tau))

    @property
    def right_scale(self) -> float:
        return self.sigma / math.sqrt(2.0 * self.tau)


@dataclass(frozen=True)
class LevelMapping:
    alpha: float
    tau_alpha: float
    quantile: float
    distribution: AndParams


def check_function(u, tau):
    u = np.asarray(u, dtype=float)
    out = np.where(u <= 0, (1.0 - tau) * u * u, tau * u * u)
    return out if out.ndim else float(out)


def log_norm_const(tau) -> float:
    """log of 2 * (sqrt(pi/(1-tau)) + sqrt(pi/tau))**-1 (sigma excluded)."""
    return math.log(2.0) - math.log(math.sqrt(math.pi / (1.0 - tau)) + math.sqrt(math.pi / tau))


def logpdf(y, p: AndParams):
    u = (np.asarray(y, dtype=float) - p.mu) / p.sigma
    out = log_norm_const(p.tau) - math.log(p.sigma) - check_function(u, p.tau)
    return out


def pdf(y, p: AndParams):
    out = np.exp(logpdf(y, p))
    return out if np.ndim(out) else float(out)


def cdf(y, p: AndParams):
    y = np.asarray(y, dtype=float)
    pl = p.left_mass
    left = 2.0 * pl * ndtr((y - p.mu) / p.left_scale)
    right = pl + (1.0 - pl) * (2.0 * ndtr((y - p.mu) / p.right_scale) - 1.0)
    out = np.where(y <= p.mu, left, right)
    return out if out.ndim else float(out)


def ppf(prob, p: AndParams):
    """Inverse cdf, closed form on each branch."""
    prob = np.asarray(prob, dtype=float)
    pl = p.left_mass
    with np.errstate(divide="ignore", invalid="ignore"):
        left = p.mu + p.left_scale * ndtri(prob / (2.0 * pl))
        right = p.mu + p.right_scale * ndtri(0.5 + 0.5 * (prob - pl) / (1.0 - pl))
    out = np.where(prob <= pl, left, right)
    return out if out.ndim else float(out)


def _phi(z):
    return _PHI0 * np.exp(-0.5 * z * z)


def partial_first_moment(q, p: AndParams):
    """Integral of y dF(y) over (-inf, q]."""
    q = np.asarray(q, dtype=float)
    pl, sl, sr = p.left_mass, p.left_scale, p.right_scale
    pr = 1.0 - pl
    with np.errstate(over="ignore", invalid="ignore"):
        z_l = np.where(q <= p.mu, (q - p.mu) / sl, 0.0)
        z_r = np.where(q > p.mu, (q - p.mu) / sr, 0.0)
        # integral of (y - mu) dF over the part of each branch below q
        dev = np.where(
            q <= p.mu,
            -2.0 * pl * sl * _phi(z_l),
            -2.0 * pl * sl * _PHI0 + 2.0 * pr * sr * (_PHI0 - _phi(z_r)),
        )
        out = p.mu * cdf(q, p) + dev
    out = np.where(np.isposinf(q), mean(p), np.where(np.isneginf(q), 0.0, out))
    return out if out.ndim else float(out)


def mean(p: AndParams) -> float:
    return p.mu + 2.0 * _PHI0 * ((1.0 - p.left_mass) * p.right_scale - p.left_mass * p.left_scale)


def sample(p: AndParams, n: int, seed=None) -> np.ndarray:
    """Draw by composition: pick a branch, then a half-normal on that branch.

    ``seed`` may be an int, a SeedSequence or a numpy Generator (used in place).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    left = rng.random(n) < p.left_mass
    z = np.abs(rng.standard_normal(n))
    return np.where(left, p.mu - p.left_scale * z, p.mu + p.right_scale * z)


def _bracket(p: AndParams):
    span = 60.0 * max(p.left_scale, p.right_scale)
    return p.mu - span, p.mu + span


def _root(f, lo, hi, what):
    try:
        x, info = brentq(f, lo, hi, xtol=ROOT_XTOL, maxiter=ROOT_MAXITER, full_output=True)
    except ValueError as exc:
        raise NumericalError(f"{what}: no sign change on [{lo:.4g}, {hi:.4g}]") from exc
    except RuntimeError as exc:
        raise NumericalError(f"{what}: {exc}") from exc
    if not info.converged:
        raise NumericalError(f"{what} did not converge", residual=float(f(x)))
    return x


def expectile_of(p: AndParams, level: float) -> float:
    """Solve level*E[(Y-e)+] = (1-level)*E[(e-Y)+] for e."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    ey = mean(p)

    def foc(e):
        m = partial_first_moment(e, p)
        F = cdf(e, p)
        upper = (ey - m) - e * (1.0 - F)
        lower = e * F - m
        return level * upper - (1.0 - level) * lower

    lo, hi = _bracket(p)
    return _root(foc, lo, hi, "expectile root search")


def tau_for_alpha(alpha: float, p: AndParams) -> LevelMapping:
    """Expectile level whose expectile coincides with the alpha-quantile."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    q = float(ppf(alpha, p))
    if not math.isfinite(q):
        raise NumericalError(f"quantile at alpha={alpha} is not finite")
    g = partial_first_moment(q, p)
    num = alpha * q - g
    den = mean(p) - 2.0 * g - (1.0 - 2.0 * alpha) * q
    return LevelMapping(alpha=alpha, tau_alpha=float(num / den), quantile=q, distribution=p)


def alpha_for_tau(tau_target: float, p: AndParams) -> LevelMapping:
    if not 0.0 < tau_target < 1.0:
        raise ValueError("tau_target must lie in (0, 1)")
    f = lambda a: tau_for_alpha(a, p).tau_alpha - tau_target
    alpha = _root(f, 1e-12, 1.0 - 1e-12, "alpha root search")
    return tau_for_alpha(alpha, p)
