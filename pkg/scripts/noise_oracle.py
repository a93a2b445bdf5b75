#!/usr/bin/env python3
"""Monte-Carlo oracle for the mock noise law.

Predicts, before running any pipeline, what indecisiveness scores the mock
backend will produce for a given noise sd and repetition count, and what
fraction of records a candidate threshold would route. Used to sanity-check
experiment tolerances against the declared noise law rather than against
the pipeline under test.

Usage:
    python scripts/noise_oracle.py --sds 0.3 1.5 --t 10 --truth 2.5
"""

from __future__ import annotations

import argparse

import numpy as np


def score_samples(sd: float, truth: float, t: int, n: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Sample the normalized dispersion of t clamp-quantized noisy grades."""
    draws = rng.normal(truth, sd, size=(n, t))
    grades = np.floor(2.0 * np.clip(draws, 0.0, 5.0) + 0.5) / 2.0
    return grades.std(axis=1, ddof=1) / 10.0


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sds", type=float, nargs="+", default=[0.3, 1.5])
    parser.add_argument("--t", type=int, default=10)
    parser.add_argument("--truth", type=float, default=2.5)
    parser.add_argument("--samples", type=int, default=200_000)
    parser.add_argument("--thresholds", type=float, nargs="+",
                        default=[0.05, 0.08, 0.10, 0.12, 0.15])
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    per_sd = {}
    for sd in args.sds:
        scores = score_samples(sd, args.truth, args.t, args.samples, rng)
        per_sd[sd] = scores
        qs = np.percentile(scores, [5, 25, 50, 75, 95])
        print(f"noise sd {sd}: score p05 {qs[0]:.3f}  p25 {qs[1]:.3f}  "
              f"p50 {qs[2]:.3f}  p75 {qs[3]:.3f}  p95 {qs[4]:.3f}")

    print(f"\nrouting fraction (score > threshold), truth={args.truth}, t={args.t}:")
    header = "threshold  " + "  ".join(f"sd={sd:<5}" for sd in args.sds)
    print(header)
    for thr in args.thresholds:
        cells = "  ".join(f"{(per_sd[sd] > thr).mean():6.1%}" for sd in args.sds)
        print(f"{thr:9.3f}  {cells}")
    return 0


if __name__ == "__main__":
    import sys
    sys.exit(main())
