"""Monte Carlo risk bounds and sequential critical values for the LCP test.

Every simulated path is a homogeneous CARE sample of length n_K (+3 lags)
drawn from one scenario. On each path we keep

* the fitted log-likelihood on every interval I_k,
* the log-likelihood of every interval under every interval's estimate,
* the log-likelihood under the true parameter,
* the test statistics T_1..T_K.

Risk bounds and critical values are then pure functions of these arrays, so
the expensive fitting happens once per path set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .. import care
from ..care import CareParams
from ..errors import CalibrationError
from .._parallel import pmap
from .lcp import LocalWindow, interval_fits, step_statistics
from .scheme import LpaConfig

log = logging.getLogger(__name__)

MAX_DISCARD = 0.5  # refuse path sets where more than this share failed


@dataclass(frozen=True)
class RiskBound:
    label: str
    tau: float
    r: float
    value: float
    per_length: tuple = ()
    n_paths: int = 0
    seed: int | None = None
    discarded: int = 0

    def as_dict(self):
        return {
            "label": self.label,
            "tau": self.tau,
            "r": self.r,
            "value": self.value,
            "per_length": list(self.per_length),
            "n_paths": self.n_paths,
            "seed": self.seed,
            "discarded": self.discarded,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["per_length"] = tuple(d.get("per_length", ()))
        return cls(**d)


@dataclass(frozen=True)
class CriticalValueTable:
    label: str
    tau: float
    r: float
    rho: float
    values: tuple  # z_1..z_K
    risk_bound: float
    scenario: CareParams
    lengths: tuple
    n_paths: int = 0
    seed: int | None = None
    rho_rule: str = "per_k"

    def as_dict(self):
        return {
            "label": self.label,
            "tau": self.tau,
            "r": self.r,
            "rho": self.rho,
            "values": list(self.values),
            "risk_bound": self.risk_bound,
            "scenario": self.scenario.as_dict(),
            "lengths": list(self.lengths),
            "n_paths": self.n_paths,
            "seed": self.seed,
            "rho_rule": self.rho_rule,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["values"] = tuple(d["values"])
        d["lengths"] = tuple(d["lengths"])
        d["scenario"] = CareParams.from_dict(d["scenario"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class PathSet:
    """Per-path likelihood summaries; first axis indexes paths."""

    ll_fit: np.ndarray  # (P, K+1)
    ll_true: np.ndarray  # (P, K+1)
    ll_cross: np.ndarray  # (P, K+1, K+1): [k, j] = l_{I_k}(theta_{I_j})
    stats: np.ndarray  # (P, K) or (P, 0) when tests were skipped
    discarded: int = 0
    seed: int | None = None

    @property
    def n_paths(self) -> int:
        return self.ll_fit.shape[0]


def path_seeds(seed, n):
    return np.random.SeedSequence(seed).spawn(n)


def _one_path(seed_seq, scenario: CareParams, config: LpaConfig, with_tests: bool):
    scheme = config.scheme
    rng = np.random.default_rng(seed_seq)
    L = scheme.longest + care.N_LAGS
    with np.errstate(over="ignore", invalid="ignore"):
        y = care.simulate(scenario, L, rng, burn_in=config.burn_in)
        X = care.design_matrix(y)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        return None  # explosive dynamics
    win = LocalWindow(y, X, scheme)
    tau = scenario.tau
    fits = interval_fits(win, tau)

    rows = np.arange(care.N_LAGS, L)
    A = np.vstack([fits.beta, scenario.vector])
    S = np.append(fits.sigma, scenario.sigma_eps)
    lr = care.loglik_rows(y, win.X, rows, A, S, tau)
    tail = np.cumsum(lr[:, ::-1], axis=1)  # tail[:, n-1] = sum over the last n rows
    C = np.stack([tail[:, n - 1] for n in scheme.lengths], axis=1)  # (params, intervals)
    ll_cross = C[:-1].T
    ll_true = C[-1]
    ll_fit = fits.loglik

    stats = np.empty(0)
    if with_tests:
        d = step_statistics(win, tau, range(1, scheme.K + 1), fits, config.min_window, config.split_stride)
        stats = np.array([d[k] for k in range(1, scheme.K + 1)])
    ok = np.all(np.isfinite(ll_fit)) and np.all(np.isfinite(ll_cross)) and np.all(np.isfinite(stats))
    if not ok:
        return None
    return ll_fit, ll_true, ll_cross, stats


def simulate_paths(scenario: CareParams, config: LpaConfig, seed, with_tests=True, n_jobs=1) -> PathSet:
    """Simulate ``config.n_paths`` homogeneous paths and their likelihood summaries."""
    seeds = path_seeds(seed, config.n_paths)
    outs = pmap(_one_path, seeds, n_jobs, scenario=scenario, config=config, with_tests=with_tests)
    kept = [o for o in outs if o is not None]
    discarded = len(outs) - len(kept)
    if discarded:
        log.warning("discarded %d of %d simulated paths (explosive or failed fits)", discarded, len(outs))
    if not kept:
        raise CalibrationError("every simulated path failed to fit")
    if discarded > MAX_DISCARD * len(outs):
        raise CalibrationError(
            f"{discarded} of {len(outs)} simulated paths were explosive or failed to fit; "
            f"scenario {scenario.alpha} is not usable for calibration")
    return PathSet(
        ll_fit=np.stack([o[0] for o in kept]),
        ll_true=np.stack([o[1] for o in kept]),
        ll_cross=np.stack([o[2] for o in kept]),
        stats=np.stack([o[3] for o in kept]),
        discarded=discarded,
        seed=seed,
    )


def risk_bound_from(paths: PathSet, r: float, label="", tau=float("nan")) -> RiskBound:
    """Largest (over interval lengths) mean r-th power likelihood-ratio excess."""
    dev = np.abs(paths.ll_fit - paths.ll_true) ** r
    per_length = dev.mean(axis=0)
    return RiskBound(
        label=label,
        tau=tau,
        r=r,
        value=float(per_length.max()),
        per_length=tuple(float(v) for v in per_length),
        n_paths=paths.n_paths,
        seed=paths.seed,
        discarded=paths.discarded,
    )


def simulate_risk_bound(scenario: CareParams, config: LpaConfig, seed, label="", n_jobs=1) -> RiskBound:
    paths = simulate_paths(scenario, config, seed, with_tests=False, n_jobs=n_jobs)
    return risk_bound_from(paths, config.r, label, scenario.tau)


def _losses(paths: PathSet, q: int, r: float) -> np.ndarray:
    """|l_{I_k}(theta_k) - l_{I_k}(theta_{q-1})|^r for k = 0..K (columns)."""
    K1 = paths.ll_fit.shape[1]
    own = paths.ll_fit
    other = paths.ll_cross[:, np.arange(K1), q - 1]
    return np.abs(own - other) ** r


def critical_values_from(paths: PathSet, risk_bound: float, config: LpaConfig) -> np.ndarray:
    """Sequentially choose the smallest z_q meeting the propagation bounds.

    For step q, with z_1..z_{q-1} fixed, paths still surviving are those
    with T_l <= z_l for all l < q. Rejecting at step q costs the path
    L_{kq} = |l_{I_k}(theta_k) - l_{I_k}(theta_{q-1})|^r at every later k.
    z_q is the smallest value >= 0 such that, for every k >= q,

        mean(L_{kq} * 1{survive, T_q > z_q}) <= rho_k * R.

    The search is exact over the observed statistics (the constraint is a
    step function of z that only changes at those values).
    """
    K = config.scheme.K
    if paths.stats.shape[1] != K:
        raise CalibrationError("path set lacks test statistics")
    if not risk_bound > 0:
        raise CalibrationError(f"risk bound must be positive, got {risk_bound}")
    P = paths.n_paths
    T = paths.stats
    survive = np.ones(P, dtype=bool)
    z = np.zeros(K)
    for q in range(1, K + 1):
        ks = np.arange(q, K + 1)
        if config.rho_rule == "per_k":
            budget = config.rho * ks / K * risk_bound
        else:
            budget = np.full(ks.size, config.rho * q / K * risk_bound)
        L = _losses(paths, q, config.r)[:, ks] / P
        idx = np.flatnonzero(survive)
        order = idx[np.argsort(-T[idx, q - 1], kind="stable")]
        cum = np.cumsum(L[order], axis=0)
        feasible = np.all(cum <= budget[None, :], axis=1)
        # number of top-ranked survivors that may be rejected
        n_rej = int(np.argmin(feasible)) if not feasible.all() else order.size
        if n_rej < order.size:
            z_q = float(T[order[n_rej], q - 1])
        else:
            z_q = 0.0
        z[q - 1] = max(z_q, 0.0)
        survive &= T[:, q - 1] <= z[q - 1]
    return z


def calibrate_critical_values(scenario: CareParams, bound: RiskBound, config: LpaConfig, seed,
                              label="", n_jobs=1, paths: PathSet | None = None) -> CriticalValueTable:
    if paths is None:
        paths = simulate_paths(scenario, config, seed, with_tests=True, n_jobs=n_jobs)
    z = critical_values_from(paths, bound.value, config)
    return CriticalValueTable(
        label=label or bound.label,
        tau=scenario.tau,
        r=config.r,
        rho=config.rho,
        values=tuple(float(v) for v in z),
        risk_bound=bound.value,
        scenario=scenario,
        lengths=config.scheme.lengths,
        n_paths=paths.n_paths,
        seed=seed,
        rho_rule=config.rho_rule,
    )


@dataclass
class Calibration:
    """Risk bound and critical values for one scenario, from a shared path set."""

    bound: RiskBound
    table: CriticalValueTable
    paths: PathSet = field(repr=False)


def calibrate(scenario: CareParams, config: LpaConfig, seed, label="", n_jobs=1) -> Calibration:
    """Risk bound and critical values computed on the same simulated paths."""
    paths = simulate_paths(scenario, config, seed, with_tests=True, n_jobs=n_jobs)
    bound = risk_bound_from(paths, config.r, label, scenario.tau)
    table = calibrate_critical_values(scenario, bound, config, seed, label=label, paths=paths)
    return Calibration(bound, table, paths)


def false_alarm_rates(paths: PathSet, values) -> np.ndarray:
    """Marginal frequency of T_k > z_k per step."""
    return np.mean(paths.stats > np.asarray(values)[None, :], axis=0)


def validate_critical_values(table: CriticalValueTable, config: LpaConfig, seed, n_jobs=1):
    """delta_k = |rho - P(T_k > z_k)| on fresh homogeneous paths."""
    paths = simulate_paths(table.scenario, config, seed, with_tests=True, n_jobs=n_jobs)
    rates = false_alarm_rates(paths, table.values)
    return np.abs(config.rho - rates), rates
