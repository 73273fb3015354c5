"""Generate the bundled synthetic price fixture and its oracle moments.

3000 business days of CARE returns (tau = 0.05) with one break at day 2000,
where the innovation scale doubles and the intercept drops. Moments are
computed with scipy.stats as an independent oracle for ``summarize``.
"""

import argparse
import json
from pathlib import Path

import numpy as np
from scipy import stats

from lcare import care
from lcare.care import CareParams
from lcare.market_data import write_prices_csv

OUT = Path(__file__).resolve().parents[1] / "src" / "lcare" / "data"
N, BREAK, SEED = 3000, 2000, 20061
CALM = CareParams((-0.0123, 0.05, 0.3, 0.2, 0.1, 0.6, 0.4, 0.2), 0.0065, 0.05)
STRESS = CareParams((-0.025, 0.05, 0.3, 0.2, 0.1, 0.6, 0.4, 0.2), 0.013, 0.05)


def generate(seed=SEED):
    ss = np.random.SeedSequence(seed).spawn(2)
    calm = care.simulate(CALM, BREAK, ss[0])
    stress = care.simulate(STRESS, N - BREAK, ss[1])
    return np.concatenate([calm, stress])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=OUT)
    ap.add_argument("--seed", type=int, default=SEED)
    args = ap.parse_args(argv)

    y = generate(args.seed)
    prices = 100.0 * np.cumprod(np.concatenate([[1.0], 1.0 + y]))
    dates = np.busday_offset(np.datetime64("2006-01-02"), np.arange(prices.size), roll="forward")
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "fixture_prices.csv", "w", newline="") as fh:
        write_prices_csv(dates, prices, fh)

    # recompute returns from the written (rounded) prices so the oracle matches ingestion
    p = np.loadtxt(args.out / "fixture_prices.csv", delimiter=",", skiprows=1, usecols=1)
    r = p[1:] / p[:-1] - 1.0
    moments = {
        "n": int(r.size),
        "mean": float(np.mean(r)),
        "median": float(np.median(r)),
        "min": float(np.min(r)),
        "max": float(np.max(r)),
        "std": float(np.std(r, ddof=1)),
        "skewness": float(stats.skew(r)),
        "kurtosis": float(stats.kurtosis(r, fisher=False)),
        "seed": args.seed,
        "break_index": BREAK,
        "tau": CALM.tau,
        "regimes": {"calm": CALM.as_dict(), "stress": STRESS.as_dict()},
    }
    (args.out / "fixture_moments.json").write_text(json.dumps(moments, indent=2) + "\n")
    print(json.dumps({k: moments[k] for k in ("n", "mean", "std", "skewness", "kurtosis")}))


if __name__ == "__main__":
    main()
