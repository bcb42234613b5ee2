#!/usr/bin/env python3
"""Monte Carlo study of confidence-interval coverage for the panel
difference-in-differences estimator."""

import argparse
import json
import time

from subsidysim.scenarios import run_coverage
from subsidysim.simulate import ScenarioConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=100)
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--n-hcps", type=int, default=400)
    ap.add_argument("--out", help="write the summary JSON here")
    args = ap.parse_args()

    t0 = time.time()
    summary = run_coverage(
        seed=args.seed, n_reps=args.reps,
        config=ScenarioConfig(seed=args.seed, n_hcps=args.n_hcps),
    )
    for name in ("tau_12", "tau_12c"):
        print(f"{name}: coverage {summary['coverage'][name]:.3f}  "
              f"mean bias {summary['mean_bias'][name]:+.4f}")
    print(f"({args.reps} replications, {time.time() - t0:.1f}s)")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=1, sort_keys=True)


if __name__ == "__main__":
    main()
