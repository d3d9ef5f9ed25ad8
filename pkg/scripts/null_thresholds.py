#!/usr/bin/env python3
"""False positives of the FDR and decoupling rules when no candidate is active.

The design has q conditioning columns carrying all of the signal and d
independent null candidates.
"""
import argparse

import numpy as np

from csis.rng import make_rng
from csis.screening import ConditioningSet, Dataset, screen_conditional
from csis.thresholding import ThresholdRule, fdr_select


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--d", type=int, default=500)
    ap.add_argument("--q", type=int, default=2)
    ap.add_argument("--f", type=float, default=10.0)
    ap.add_argument("--K", type=int, default=5)
    ap.add_argument("--tau", type=float, default=0.99)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--dispersion", default="auto", choices=["auto", "unit", "estimate"])
    args = ap.parse_args(argv)

    cond = ConditioningSet(tuple(range(args.q)))
    fdr, dec = [], []
    for r in range(args.reps):
        rng = make_rng(args.seed, "null-design", r)
        x = rng.standard_normal((args.n, args.q + args.d))
        y = x[:, :args.q] @ np.where(np.arange(args.q) % 2 == 0, 1.0, -1.0) + rng.standard_normal(args.n)
        data = Dataset(x, y)
        stats = screen_conditional(data, cond, dispersion=args.dispersion)
        fdr.append(fdr_select(stats, args.f)[1].size)
        rule = ThresholdRule("decoupling", K=args.K, tau=args.tau, seed=r)
        dec.append(rule.apply(stats, data, cond, "gaussian", dispersion=args.dispersion)[1].size)
    print(f"FDR rule (f={args.f:g}):        mean FP {np.mean(fdr):.2f}, sd {np.std(fdr):.2f}")
    print(f"decoupling (K={args.K}, tau={args.tau:g}): mean FP {np.mean(dec):.2f}, sd {np.std(dec):.2f}")


if __name__ == "__main__":
    main()
