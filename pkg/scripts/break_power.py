"""Adaptive interval lengths on homogeneous and broken simulated series.

Series are drawn from the tau = 0.05 mid scenario. The break variant shifts
the intercept by a multiple of the unconditional standard deviation over the
last ``--break-days`` observations; the sign is set by ``--direction``.
"""

import argparse

import numpy as np

from lcare import care
from lcare.lpa import LpaConfig, ScenarioSet, adaptive_fit, calibrate

TAU = 0.05


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=1000, help="calibration paths per scenario")
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--size", type=float, default=5.0, help="break size in unconditional sd")
    ap.add_argument("--break-days", type=int, default=30)
    ap.add_argument("--direction", choices=("down", "up"), default="down")
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args(argv)

    cfg = LpaConfig(tau=TAU, n_paths=args.paths)
    scen = ScenarioSet.default().for_tau(TAU)
    tables = {l: calibrate(p, cfg, seed=args.seed, label=l, n_jobs=args.jobs).table for l, p in scen.items()}
    mid = scen["mid"]
    sd = float(np.std(care.simulate(mid, 200_000, seed=70)))
    n, t0 = 400, 399
    shifts = np.zeros(n)
    shifts[n - args.break_days :] = (-1 if args.direction == "down" else 1) * args.size * sd
    homog, broken, labels = [], [], []
    for rep in range(args.reps):
        res = adaptive_fit(care.simulate(mid, n, np.random.default_rng([71, rep])), t0, TAU, cfg, tables)
        homog.append(res.interval_length)
        labels.append(res.scenario)
        y = care.simulate(mid, n, np.random.default_rng([72, rep]), shifts=shifts)
        broken.append(adaptive_fit(y, t0, TAU, cfg, tables).interval_length)
    homog, broken = np.array(homog), np.array(broken)
    print(f"unconditional sd {sd:.6f}")
    print(f"homogeneous: mean length {homog.mean():.1f}, scenarios {dict(zip(*np.unique(labels, return_counts=True)))}")
    print(f"break ({args.direction}, {args.size} sd): share <= 72 days {np.mean(broken <= 72):.3f}, "
          f"mean length {broken.mean():.1f}")


if __name__ == "__main__":
    main()
