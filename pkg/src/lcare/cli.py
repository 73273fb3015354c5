"""Command-line pipeline: summarize, calibrate, adapt, fit, backtest, report.

Outputs go to a content-addressed artifact store: each command hashes its
resolved configuration (including the SHA-256 of its input files) and writes
JSON/CSV into ``<store>/<command>-<hash>/`` together with ``config.json``.
Reruns with the same inputs and seed rewrite identical bytes.

Exit codes: 0 success, 1 numerical failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, backtest, care, caviar, risk
from .and_dist import AndParams
from .errors import (
    AlignmentError,
    ConfigMismatch,
    InsufficientData,
    LcareError,
    ParseError,
)
from .lpa import (
    DEFAULT_LENGTHS,
    CriticalValueTable,
    IntervalScheme,
    LpaConfig,
    RiskBound,
    ScenarioSet,
    adaptive_series,
    calibrate,
    min_t0,
    scenarios_from_returns,
)
from .market_data import load_prices, summarize, to_returns

log = logging.getLogger("lcare")

USAGE_ERRORS = (ParseError, InsufficientData, ConfigMismatch, AlignmentError, OSError, ValueError, KeyError)


class UsageError(Exception):
    pass


# --- artifact store --------------------------------------------------------


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical(config).encode()).hexdigest()[:16]


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.floating, np.integer)):
        return _clean(v.item())
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


class ArtifactStore:
    """Plain directory of JSON/CSV artifacts keyed by config hash."""

    def __init__(self, root):
        self.root = Path(root)

    def key(self, kind, config) -> str:
        return f"{kind}-{config_hash(config)}"

    def dir(self, key) -> Path:
        return self.root / key

    def create(self, kind, config) -> Path:
        d = self.dir(self.key(kind, config))
        d.mkdir(parents=True, exist_ok=True)
        self.write_json(d / "config.json", config)
        return d

    @staticmethod
    def write_json(path, obj):
        Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")

    @staticmethod
    def write_csv(path, rows, fields=None):
        rows = list(rows)
        fields = fields or (list(rows[0]) if rows else [])
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k)) for k in fields})
        Path(path).write_text(buf.getvalue())

    def find(self, ref, kind) -> Path:
        """Resolve an artifact by directory path, full key or key prefix."""
        p = Path(ref)
        if p.is_dir():
            return p
        cands = sorted(self.root.glob(f"{ref}*")) + sorted(self.root.glob(f"{kind}-{ref}*"))
        cands = [c for c in dict.fromkeys(cands) if c.is_dir() and c.name.startswith(kind)]
        if len(cands) != 1:
            raise UsageError(f"no unique {kind} artifact matches {ref!r} in {self.root}")
        return cands[0]

    def latest(self, kind, match=None) -> Path | None:
        """The single artifact of this kind whose config contains ``match``."""
        hits = []
        for d in sorted(self.root.glob(f"{kind}-*")):
            cfg = json.loads((d / "config.json").read_text())
            if match is None or all(cfg.get(k) == v for k, v in match.items()):
                hits.append(d)
        if len(hits) > 1:
            raise UsageError(f"several {kind} artifacts match; pass one explicitly")
        return hits[0] if hits else None


def _fmt(v):
    if isinstance(v, float):
        return "" if not math.isfinite(v) else repr(v)
    if isinstance(v, (np.floating,)):
        return _fmt(float(v))
    return "" if v is None else v


# --- helpers ---------------------------------------------------------------


def _returns(path, kind, date_col="date", price_col="price"):
    with open(path, newline="") as fh:
        prices = load_prices(fh, date_col=date_col, price_col=price_col)
    return to_returns(prices, kind)


def _lengths(text):
    if text is None:
        return list(DEFAULT_LENGTHS)
    return [int(v) for v in text.split(",")]


def _scenarios(source, tau, kind):
    if source == "default":
        return ScenarioSet.default().for_tau(tau), {"source": "default"}
    if source.startswith("data:"):
        path = source[5:]
        sc = scenarios_from_returns(_returns(path, kind), tau)
        return sc.for_tau(tau), {"source": "data", "input_sha256": file_sha256(path)}
    p = Path(source)
    if not p.is_file():
        raise UsageError(f"scenario file not found: {source}")
    return ScenarioSet.from_json(p.read_text()).for_tau(tau), {"source": "file", "sha256": file_sha256(p)}


def _write_out(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_config(config, out):
    """Resolved config next to a file output, or on stderr for stdout output."""
    text = json.dumps(_clean(config), indent=2, sort_keys=True) + "\n"
    if out:
        Path(str(out) + ".config.json").write_text(text)
    else:
        sys.stderr.write(text)


# --- commands --------------------------------------------------------------


def cmd_summarize(args):
    r = _returns(args.input, args.return_kind, args.date_col, args.price_col)
    s = summarize(r)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["statistic", "value"])
    for k, v in s.as_dict().items():
        w.writerow([k, repr(float(v))])
    _write_out(buf.getvalue(), args.out)
    _emit_config({"command": "summarize", "input_sha256": file_sha256(args.input),
                  "return_kind": args.return_kind, "n": len(r)}, args.out)
    return 0


def _lpa_config(args, tau):
    scheme = IntervalScheme(tuple(_lengths(args.lengths)))
    return LpaConfig(scheme=scheme, tau=tau, r=args.r, rho=args.rho, n_paths=args.paths,
                     min_window=args.min_window, split_stride=args.stride, rho_rule=args.rho_rule)


def cmd_calibrate(args):
    store = ArtifactStore(args.store)
    scen, provenance = _scenarios(args.scenarios, args.tau, args.return_kind)
    cfg = _lpa_config(args, args.tau)
    config = {"command": "calibrate", "version": __version__, "lpa": cfg.as_dict(), "seed": args.seed,
              "scenarios": provenance, "scenario_params": {l: p.as_dict() for l, p in scen.items()}}
    results = {}
    for i, (label, params) in enumerate(scen.items()):
        c = calibrate(params, cfg, seed=[args.seed, i], label=label, n_jobs=args.jobs)
        results[label] = c
        log.info("%s: R=%.4g z=%s discarded=%d", label, c.bound.value, np.round(c.table.values, 3).tolist(),
                 c.bound.discarded)
    d = store.create("calibrate", config)
    for label, c in results.items():
        store.write_json(d / f"risk_bound_{label}.json", c.bound.as_dict())
        store.write_json(d / f"critical_values_{label}.json", c.table.as_dict())
    print(d.name)
    return 0


def load_calibration(path: Path):
    config = json.loads((path / "config.json").read_text())
    tables = {}
    for f in sorted(path.glob("critical_values_*.json")):
        t = CriticalValueTable.from_dict(json.loads(f.read_text()))
        tables[t.label] = t
    bounds = {}
    for f in sorted(path.glob("risk_bound_*.json")):
        b = RiskBound.from_dict(json.loads(f.read_text()))
        bounds[b.label] = b
    if not tables:
        raise UsageError(f"{path} holds no critical value tables")
    return config, tables, bounds


def cmd_adapt(args):
    store = ArtifactStore(args.store)
    cal_dir = store.find(args.cv, "calibrate")
    cal_cfg, tables, _ = load_calibration(cal_dir)
    lpa_cfg = LpaConfig.from_dict(cal_cfg["lpa"])
    if abs(lpa_cfg.tau - args.tau) > 1e-12:
        raise ConfigMismatch(f"artifact calibrated for tau={lpa_cfg.tau}, requested tau={args.tau}")
    if args.r is not None and abs(lpa_cfg.r - args.r) > 1e-12:
        raise ConfigMismatch(f"artifact calibrated for r={lpa_cfg.r}, requested r={args.r}")
    r = _returns(args.input, args.return_kind)
    first = min_t0(lpa_cfg.scheme) if args.start is None else args.start
    last = len(r) - 1 if args.end is None else args.end
    if first < min_t0(lpa_cfg.scheme) or last >= len(r) or first > last:
        raise UsageError(f"t0 range [{first}, {last}] outside [{min_t0(lpa_cfg.scheme)}, {len(r) - 1}]")
    config = {"command": "adapt", "version": __version__, "input_sha256": file_sha256(args.input),
              "return_kind": args.return_kind, "calibration": cal_dir.name, "tau": args.tau,
              "r": lpa_cfg.r, "start": first, "end": last, "fixed_alpha": args.fixed_alpha,
              "m_min": args.m_min, "m_max": args.m_max, "integer_multiplier": args.integer_multiplier}
    run = adaptive_series(r, range(first, last + 1), args.tau, lpa_cfg, tables, n_jobs=args.jobs)
    d = store.create("adapt", config)
    e = [x.expectile for x in run.results]
    dists = [AndParams(0.0, x.params.sigma_eps, args.tau) for x in run.results]
    rs = risk.risk_series(e, args.tau, dists, fixed_alpha=args.fixed_alpha, m_min=args.m_min,
                          m_max=args.m_max, integer=args.integer_multiplier)
    by_i = {}
    j = 0
    for i in range(len(run.results)):
        if i in rs.errors:
            continue
        by_i[i] = rs.points[j]
        j += 1
    rows = []
    for i, res in enumerate(run.results):
        row = res.row()
        p = by_i.get(i)
        row.update({"alpha": p.alpha if p else None, "es": p.es if p else None,
                    "multiplier": p.multiplier if p else None})
        rows.append(row)
    store.write_csv(d / "lcp.csv", rows)
    summary = {"n_days": len(run.results), "mean_length": run.mean_length,
               "scenario_counts": run.scenario_counts(),
               "errors": [{"t0": t, "message": m} for t, m in run.errors],
               "risk_errors": {str(k): v for k, v in rs.errors.items()}}
    store.write_json(d / "summary.json", summary)
    print(d.name)
    return 0


def cmd_fit(args):
    r = _returns(args.input, args.return_kind)
    end = len(r) - 1 if args.end is None else args.end
    if end >= len(r) or end - args.window + 1 < 0:
        raise UsageError(f"window of {args.window} ending at {end} lies outside the series")
    w = r.values[end - args.window + 1 : end + 1]
    if args.model == "care":
        f = care.fit(w, args.tau, end_index=end)
        out = f.as_dict()
        out["forecast"] = care.forecast(f.params, w[-3:])
    else:
        f = caviar.fit_caviar(w, args.alpha, n_starts=args.starts, seed=args.seed, end_index=end)
        out = f.as_dict()
        out["forecast"] = caviar.forecast(f.params, w, f.quantile_path)
    config = {"command": "fit", "model": args.model, "input_sha256": file_sha256(args.input),
              "return_kind": args.return_kind, "window": args.window, "end": end,
              "tau": args.tau, "alpha": args.alpha, "seed": args.seed}
    out["config"] = config
    _write_out(json.dumps(_clean(out), indent=2, sort_keys=True) + "\n", args.out)
    return 0


def _parse_strategy(text):
    if text.startswith("constant:"):
        body = text.split(":", 1)[1]
        if "-" in body:
            lo, hi = (int(v) for v in body.split("-"))
            return [(f"constant_{m}", ("constant", float(m))) for m in range(lo, hi + 1)]
        return [(f"constant_{float(body):g}", ("constant", float(body)))]
    if text in ("lcare", "rolling-care", "rolling-caviar"):
        return [(text.replace("-", "_"), (text, None))]
    raise UsageError(f"unknown strategy {text!r}")


def _lcare_multipliers(store, args, n, dates, input_sha):
    ref = args.adapt
    if ref is None:
        hit = store.latest("adapt", {"input_sha256": input_sha, "tau": args.tau})
        if hit is None:
            raise UsageError("strategy lcare needs adaptive estimates: run `lcare adapt` on this input first")
        d = hit
    else:
        d = store.find(ref, "adapt")
    cfg = json.loads((d / "config.json").read_text())
    if cfg.get("input_sha256") != input_sha:
        raise ConfigMismatch(f"adapt artifact {d.name} was computed on a different input")
    out = np.full(n, np.nan)
    with open(d / "lcp.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            t0 = int(row["t0"])
            if row["multiplier"] and t0 + 1 < n:
                out[t0 + 1] = float(row["multiplier"])
    return out, d.name


def cmd_backtest(args):
    store = ArtifactStore(args.store)
    r = _returns(args.input, args.return_kind)
    n = len(r)
    input_sha = file_sha256(args.input)
    specs = []
    for s in args.strategy or ["constant:1-12", "rolling-care", "rolling-caviar", "lcare"]:
        specs.extend(_parse_strategy(s))
    sources, provenance = {}, {}
    window = args.window
    # resolve artifact-backed sources before any expensive estimation
    specs.sort(key=lambda s: s[1][0] != "lcare")
    for name, (kind, value) in specs:
        if kind == "constant":
            sources[name] = backtest.constant_multipliers(n, value)
        elif kind == "lcare":
            sources[name], provenance["lcare"] = _lcare_multipliers(store, args, n, r.dates, input_sha)
        elif kind == "rolling-care":
            t0, f, sig = backtest.rolling_care_forecasts(r, args.tau, window)
            sources[name] = backtest.multipliers_from_forecasts(
                n, t0, f, args.tau, sigmas=sig, fixed_alpha=args.fixed_alpha,
                m_min=args.m_min, m_max=args.m_max, integer=args.integer_multiplier)
        elif kind == "rolling-caviar":
            rc = caviar.rolling_caviar(r, args.caviar_alpha, range(window - 1, n - 1), window,
                                       refit_every=args.refit_every, seed=args.seed)
            # the quantile at caviar_alpha is read as the tau-expectile at the matched level
            sources[name] = backtest.multipliers_from_forecasts(
                n, rc.t0, rc.forecast, args.tau, fixed_alpha=args.caviar_alpha,
                m_min=args.m_min, m_max=args.m_max, integer=args.integer_multiplier)
    tipp = backtest.TippConfig(args.initial_value, args.protection, args.horizon, args.riskfree, args.reanchor)
    config = {"command": "backtest", "version": __version__, "input_sha256": input_sha,
              "return_kind": args.return_kind, "strategies": [n for n, _ in specs], "tau": args.tau,
              "window": window, "caviar_alpha": args.caviar_alpha, "refit_every": args.refit_every,
              "fixed_alpha": args.fixed_alpha, "m_min": args.m_min, "m_max": args.m_max,
              "integer_multiplier": args.integer_multiplier, "seed": args.seed, "tipp": tipp.as_dict(),
              "start": args.start, "sources": provenance}
    res = backtest.strategy_suite(r, sources, tipp, start=args.start)
    d = store.create("backtest", config)
    rows = res.rows()
    store.write_csv(d / "table.csv", rows)
    store.write_json(d / "table.json", {"start": res.start, "start_date": str(r.dates[res.start]),
                                        "rows": rows, "errors": res.errors,
                                        "gaps": {k: v.gaps for k, v in res.runs.items()},
                                        "capped_days": {k: v.capped_days for k, v in res.runs.items()}})
    for name, run in res.runs.items():
        store.write_csv(d / f"states_{name}.csv", run.rows())
    print(d.name)
    return 0


def cmd_report(args):
    store = ArtifactStore(args.store)
    dirs = [store.dir(args.artifact)] if args.artifact else sorted(p for p in store.root.glob("*-*") if p.is_dir())
    if args.artifact and not dirs[0].is_dir():
        dirs = [store.find(args.artifact, args.artifact.split("-")[0])]
    for d in dirs:
        kind = d.name.split("-")[0]
        print(f"== {d.name}")
        if kind == "calibrate":
            _, tables, bounds = load_calibration(d)
            for label, t in tables.items():
                b = bounds.get(label)
                rb = f"{b.value:.4g}" if b else "?"
                print(f"  {label:>5}  R={rb}  z={' '.join(f'{v:.3f}' for v in t.values)}")
        elif kind == "adapt":
            s = json.loads((d / "summary.json").read_text())
            print(f"  days={s['n_days']}  mean length={s['mean_length']:.2f}  scenarios={s['scenario_counts']}"
                  f"  errors={len(s['errors'])}")
        elif kind == "backtest":
            t = json.loads((d / "table.json").read_text())
            print(f"  from {t['start_date']}")
            print(f"  {'strategy':<16}{'return%':>9}{'vol%':>8}{'VaR99%':>8}{'skew':>8}{'kurt':>8}{'sharpe':>8}")
            for row in t["rows"]:
                vals = [row[k] if row[k] is not None else float("nan")
                        for k in ("return", "volatility", "var99", "skewness", "kurtosis", "sharpe")]
                print(f"  {row['strategy']:<16}" + "".join(f"{v:>8.3f} " for v in vals))
    return 0


# --- argument parsing ------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="lcare", description="Adaptive expectile tail risk and TIPP backtests.")
    ap.add_argument("--store", default="artifacts", help="artifact directory (default: ./artifacts)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def data_args(p):
        p.add_argument("input", help="CSV with date and price columns")
        p.add_argument("--return-kind", choices=("simple", "log"), default="simple")

    def risk_args(p):
        p.add_argument("--fixed-alpha", type=float, default=None,
                       help="use this quantile level for every day instead of the fitted mapping")
        p.add_argument("--m-min", type=float, default=risk.M_MIN)
        p.add_argument("--m-max", type=float, default=risk.M_MAX)
        p.add_argument("--integer-multiplier", action="store_true")

    p = sub.add_parser("summarize", help="descriptive statistics of returns")
    data_args(p)
    p.add_argument("--date-col", default="date")
    p.add_argument("--price-col", default="price")
    p.add_argument("--out")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("calibrate", help="simulate risk bounds and critical values")
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=0.25)
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenarios", default="default",
                   help="'default', a scenario JSON file, or data:PRICES.csv for rolling quartiles")
    p.add_argument("--return-kind", choices=("simple", "log"), default="simple")
    p.add_argument("--lengths", help="comma-separated interval lengths")
    p.add_argument("--min-window", type=int, default=care.MIN_WINDOW)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--rho-rule", choices=("per_k", "per_step"), default="per_k")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("adapt", help="daily adaptive interval selection and expectile forecasts")
    data_args(p)
    p.add_argument("--cv", required=True, help="calibrate artifact (key, prefix or directory)")
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--start", type=int, default=None, help="first t0 index")
    p.add_argument("--end", type=int, default=None, help="last t0 index")
    p.add_argument("--jobs", type=int, default=1)
    risk_args(p)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("fit", help="fit CARE or CAViaR on one window")
    data_args(p)
    p.add_argument("--model", choices=("care", "caviar"), default="care")
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--alpha", type=float, default=0.065)
    p.add_argument("--window", type=int, default=250)
    p.add_argument("--end", type=int, default=None)
    p.add_argument("--starts", type=int, default=caviar.N_STARTS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("backtest", help="TIPP strategies and performance table")
    data_args(p)
    p.add_argument("--strategy", action="append",
                   help="constant:M, constant:LO-HI, lcare, rolling-care, rolling-caviar (repeatable)")
    p.add_argument("--adapt", help="adapt artifact for the lcare strategy")
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--window", type=int, default=250)
    p.add_argument("--caviar-alpha", type=float, default=0.065)
    p.add_argument("--refit-every", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", type=int, default=None, help="first return index of the common sample")
    p.add_argument("--initial-value", type=float, default=100.0)
    p.add_argument("--protection", type=float, default=0.9)
    p.add_argument("--horizon", type=int, default=250)
    p.add_argument("--riskfree", type=float, default=0.0, help="daily risk-free rate")
    p.add_argument("--reanchor", action="store_true", help="reset the floor every horizon")
    risk_args(p)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("report", help="print summaries of stored artifacts")
    p.add_argument("artifact", nargs="?", help="artifact key (default: all)")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except (UsageError, *USAGE_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LcareError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
