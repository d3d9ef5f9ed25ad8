#!/usr/bin/env python3
"""How often the lone independent active feature of ex2 is ranked first by CSIS and CMLR."""
import argparse

import numpy as np

from csis.datagen import example_spec
from csis.metrics import minimum_model_size
from csis.screening import rank_features, screen_conditional


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)

    spec = example_spec("ex2", replications=args.reps, seed=args.seed)
    active = spec.active_in_D()
    mms = {"magnitude": [], "likelihood": []}
    for r in range(args.reps):
        stats = screen_conditional(spec.generate(r), spec.conditioning)
        for key in mms:
            mms[key].append(minimum_model_size(rank_features(stats, key), active))
    for key, name in (("magnitude", "CSIS"), ("likelihood", "CMLR")):
        v = np.asarray(mms[key])
        print(f"{name}: P(rank 1) = {np.mean(v == 1):.3f}, median MMS {np.median(v):g}, "
              f"90th pct {np.percentile(v, 90):g}")


if __name__ == "__main__":
    main()
