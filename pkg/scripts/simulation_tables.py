#!/usr/bin/env python3
"""Run the canned simulation designs at desk scale and print one table per design.

    python scripts/simulation_tables.py --reps 50 --workers 8
    python scripts/simulation_tables.py --designs ex3 --p 1000 --rho 0,0.4,0.8
"""
import argparse
import sys

from csis.datagen import example_spec
from csis.harness import RunConfig, format_report, run_experiment
from csis.thresholding import ThresholdRule

# (example, family, default rho grid)
DESIGNS = {
    "ex1": [("ex1", "gaussian", [None]), ("ex1", "binomial_logit", [None])],
    "ex2": [("ex2", "gaussian", [None]), ("ex2", "binomial_logit", [None])],
    "ex3": [("ex3", "gaussian", [0.0, 0.4, 0.8])],
    "ex4": [("ex4", "gaussian", [0.0, 0.4, 0.8])],
    "ex5": [("ex5", "gaussian", [0.0, 0.4, 0.8])],
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--designs", default="ex1,ex2", help="comma list from " + ",".join(DESIGNS))
    ap.add_argument("--reps", type=int, default=50)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--p", type=int, help="override p (ex3-ex5 are slow at full size)")
    ap.add_argument("--rho", help="override the rho grid, comma list")
    ap.add_argument("--cset", type=int, default=1)
    ap.add_argument("--format", default="pretty", choices=["pretty", "csv", "tsv"])
    args = ap.parse_args(argv)

    rules = (ThresholdRule("decoupling"), ThresholdRule("fdr"))
    for name in args.designs.split(","):
        for example, family, rhos in DESIGNS[name]:
            if args.rho:
                rhos = [float(r) for r in args.rho.split(",")]
            rows = []
            for rho in rhos:
                spec = example_spec(example, family, rho=rho, p=args.p, cset=args.cset,
                                    replications=args.reps, seed=args.seed)
                cfg = RunConfig(spec, methods=("SIS", "MLR", "CSIS", "CMLR"), threshold_rules=rules,
                                workers=args.workers)
                rows.extend(run_experiment(cfg))
            print(f"# {example} {family}")
            sys.stdout.write(format_report(rows, args.format))
            print()


if __name__ == "__main__":
    main()
