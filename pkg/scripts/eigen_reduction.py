#!/usr/bin/env python3
"""Tabulate how conditioning on q equicorrelated covariates shrinks the largest eigenvalue."""
import argparse

import numpy as np

from csis.harness import format_table
from csis.metrics import conditional_eigen_ratio


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=1000)
    ap.add_argument("--r", default="0.1,0.3,0.5,0.7,0.9")
    ap.add_argument("--qmax", type=int, default=10)
    ap.add_argument("--format", default="pretty", choices=["pretty", "csv", "tsv"])
    args = ap.parse_args(argv)

    rs = [float(v) for v in args.r.split(",")]
    header = ["q"] + [f"r={r:g}" for r in rs]
    body = []
    for q in np.arange(args.qmax + 1):
        body.append([str(q)] + [f"{conditional_eigen_ratio(r, int(q), args.d)[2]:.3f}" for r in rs])
    print(f"# lambda_max ratio unconditional / conditional, d={args.d}")
    print(format_table(header, body, args.format), end="")


if __name__ == "__main__":
    main()
