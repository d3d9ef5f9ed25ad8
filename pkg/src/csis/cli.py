"""Command line entry point: ``csis {simulate,screen,threshold,eigen-ratio}``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings

import jsonschema
import numpy as np

from .datagen import EXAMPLES, example_spec
from .glm import Family
from .harness import DataError, RunConfig, format_report, format_table, load_csv, run_experiment
from .metrics import conditional_eigen_ratio
from .screening import rank_features, screen_conditional
from .thresholding import ThresholdRule, decoupling_details, fdr_select, fdr_threshold

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "csis simulate configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "example": {"enum": list(EXAMPLES)},
        "family": {"enum": [f.value for f in Family] + ["binomial", "normal"]},
        "rho": {"oneOf": [{"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                          {"type": "array", "items": {"type": "number", "minimum": 0, "exclusiveMaximum": 1}}]},
        "n": {"type": "integer", "minimum": 2},
        "p": {"type": "integer", "minimum": 2},
        "loaded": {"type": "integer", "minimum": 0},
        "cset": {"enum": [1, 2, 3]},
        "methods": {"type": "array", "minItems": 1, "items": {"enum": ["SIS", "MLR", "CSIS", "CMLR",
                                                                       "sis", "mlr", "csis", "cmlr"]}},
        "rules": {"type": "array", "items": {"enum": ["fdr", "decoupling"]}},
        "reps": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "fdr_f": {"type": "number", "exclusiveMinimum": 0},
        "decouple_k": {"type": "integer", "minimum": 1},
        "decouple_tau": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "workers": {"type": "integer", "minimum": 0},
        "wald": {"enum": ["inverse", "raw"]},
    },
}

SIMULATE_DEFAULTS = {
    "example": "ex1", "family": "gaussian", "rho": None, "n": None, "p": None, "loaded": None, "cset": 1,
    "methods": ["SIS", "MLR", "CSIS", "CMLR"], "rules": ["decoupling", "fdr"], "reps": 200, "seed": 0,
    "fdr_f": None, "decouple_k": 5, "decouple_tau": 0.99, "workers": 1, "wald": "inverse",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _workers(n: int) -> int:
    if n == 0:
        import os
        return os.cpu_count() or 1
    return n


def _add_common(p):
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--family", help="gaussian | binomial_logit | poisson")
    p.add_argument("--method", help="comma list of SIS, MLR, CSIS, CMLR")
    p.add_argument("--fdr-f", type=float, dest="fdr_f", help="tolerated false positives (default n/log n)")
    p.add_argument("--decouple-k", type=int, dest="decouple_k", help="decoupling repetitions K")
    p.add_argument("--decouple-tau", type=float, dest="decouple_tau", help="decoupling quantile tau")
    p.add_argument("--workers", type=int, help="worker count, 0 = all CPUs")
    p.add_argument("--output", help="write the report here instead of stdout")
    p.add_argument("--format", choices=["csv", "tsv", "pretty"], default=None)
    p.add_argument("--wald", choices=["inverse", "raw"], default=None, help="Wald standard error")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csis", description="Conditional sure independence screening for GLMs.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run a canned or JSON-configured simulation")
    sim.add_argument("--config", help="JSON config file; flags override its values")
    sim.add_argument("--example", choices=EXAMPLES)
    sim.add_argument("--rho", type=_float_list, help="comma list of correlations")
    sim.add_argument("--n", type=int)
    sim.add_argument("--p", type=int)
    sim.add_argument("--loaded", type=int, help="number of factor-loaded columns (ex3-ex5)")
    sim.add_argument("--cset", type=int, choices=[1, 2, 3], help="ex5 conditioning set")
    sim.add_argument("--reps", type=int)
    sim.add_argument("--rules", help="comma list of fdr, decoupling (or 'none')")
    sim.add_argument("--no-timing", action="store_true", help="omit the wall_seconds column")
    _add_common(sim)

    for name, helptext in (("screen", "rank the features of a CSV dataset"),
                           ("threshold", "compute the FDR or decoupling threshold for a CSV dataset")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--input", required=True)
        p.add_argument("--response", default="y")
        p.add_argument("--cond", default="", help="comma list of conditioning column names")
        p.add_argument("--rule", choices=["fdr", "decoupling", "fixed", "none"],
                       default="decoupling" if name == "threshold" else "none")
        p.add_argument("--gamma", type=float, help="threshold for --rule fixed")
        p.add_argument("--no-standardize", action="store_true")
        _add_common(p)

    eig = sub.add_parser("eigen-ratio", help="tabulate the conditional max-eigenvalue reduction")
    eig.add_argument("--r", type=_float_list, required=True)
    eig.add_argument("--q", type=_int_list, required=True)
    eig.add_argument("--d", type=_int_list, required=True)
    eig.add_argument("--output")
    eig.add_argument("--format", choices=["csv", "tsv", "pretty"], default=None)
    return parser


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _rules(names, fdr_f, k, tau, seed):
    rules = []
    for name in names:
        if name == "fdr":
            rules.append(ThresholdRule("fdr", f=fdr_f))
        elif name == "decoupling":
            rules.append(ThresholdRule("decoupling", K=k, tau=tau, seed=seed))
        elif name != "none":
            raise UsageError(f"unknown rule {name!r}")
    return tuple(rules)


def _simulate(args) -> int:
    cfg = dict(SIMULATE_DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
            jsonschema.validate(loaded, CONFIG_SCHEMA)
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config: {exc}") from exc
        except jsonschema.ValidationError as exc:
            raise UsageError(f"invalid config: {exc.message}") from exc
        cfg.update(loaded)
    flag_map = {"example": args.example, "rho": args.rho, "n": args.n, "p": args.p, "loaded": args.loaded,
                "cset": args.cset, "reps": args.reps, "seed": args.seed, "family": args.family,
                "fdr_f": args.fdr_f, "decouple_k": args.decouple_k, "decouple_tau": args.decouple_tau,
                "workers": args.workers, "wald": args.wald,
                "methods": _csv_list(args.method) if args.method else None,
                "rules": _csv_list(args.rules) if args.rules else None}
    cfg.update({k: v for k, v in flag_map.items() if v is not None})

    family = Family.parse(cfg["family"])
    rhos = cfg["rho"] if isinstance(cfg["rho"], list) else [cfg["rho"]]
    rules = _rules(cfg["rules"], cfg["fdr_f"], cfg["decouple_k"], cfg["decouple_tau"], cfg["seed"])
    rows = []
    for rho in rhos:
        spec = example_spec(cfg["example"], family, rho=rho, cset=cfg["cset"], n=cfg["n"], p=cfg["p"],
                            loaded=cfg["loaded"], replications=cfg["reps"], seed=cfg["seed"])
        config = RunConfig(spec, methods=tuple(cfg["methods"]), threshold_rules=rules,
                           workers=_workers(cfg["workers"]), wald=cfg["wald"])
        rows.extend(run_experiment(config))
    _emit(format_report(rows, args.format or "pretty", timing=not args.no_timing), args.output)
    return 0


def _load(args):
    return load_csv(args.input, args.response, _csv_list(args.cond), standardize=not args.no_standardize)


def _screen(args) -> int:
    data, cond = _load(args)
    family = Family.parse(args.family or "gaussian")
    methods = [m.upper() for m in _csv_list(args.method)] if args.method else ["CSIS"]
    if len(methods) != 1 or methods[0] not in ("SIS", "MLR", "CSIS", "CMLR"):
        raise UsageError("screen takes exactly one --method of SIS, MLR, CSIS, CMLR")
    method = methods[0]
    if method in ("SIS", "MLR"):
        cond = type(cond)(())
    ranking_method = "magnitude" if method in ("SIS", "CSIS") else "likelihood"
    wald = args.wald or "inverse"
    stats = screen_conditional(data, cond, family, wald=wald, workers=_workers(args.workers or 1))
    seed = args.seed or 0
    selected, threshold = None, None
    if args.rule == "fixed":
        if args.gamma is None:
            raise UsageError("--rule fixed needs --gamma")
        rule = ThresholdRule("fixed", gamma=args.gamma)
    elif args.rule == "fdr":
        rule = ThresholdRule("fdr", f=args.fdr_f)
    elif args.rule == "decoupling":
        rule = ThresholdRule("decoupling", K=args.decouple_k or 5,
                             tau=args.decouple_tau if args.decouple_tau is not None else 0.99, seed=seed)
    else:
        rule = None
    if rule is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            threshold, selected = rule.apply(stats, data, cond, family, method=ranking_method, wald=wald)
        selected = set(selected.tolist())

    pos = {int(j): k for k, j in enumerate(stats.candidates)}
    header = ["rank", "column", "coef", "nll", "reduction", "wald", "converged"]
    if selected is not None:
        header.append("selected")
    body = []
    for r, j in enumerate(rank_features(stats, ranking_method), start=1):
        k = pos[int(j)]
        row = [str(r), data.name(int(j)), f"{stats.coef[k]:.10g}", f"{stats.nll[k]:.10g}",
               f"{stats.reduction[k]:.10g}", f"{stats.wald[k]:.10g}", str(bool(stats.converged[k])).lower()]
        if selected is not None:
            row.append(str(int(j) in selected).lower())
        body.append(row)
    text = format_table(header, body, args.format or "csv")
    if threshold is not None:
        sys.stderr.write(f"# rule={args.rule} threshold={threshold:.10g} selected={len(selected)}\n")
    _emit(text, args.output)
    return 0


def _threshold(args) -> int:
    data, cond = _load(args)
    family = Family.parse(args.family or "gaussian")
    methods = [m.upper() for m in _csv_list(args.method)] if args.method else ["CSIS"]
    if len(methods) != 1 or methods[0] not in ("SIS", "MLR", "CSIS", "CMLR"):
        raise UsageError("threshold takes exactly one --method of SIS, MLR, CSIS, CMLR")
    if methods[0] in ("SIS", "MLR"):
        cond = type(cond)(())
    d = data.p - cond.q
    wald = args.wald or "inverse"
    if args.rule == "fdr":
        f = args.fdr_f if args.fdr_f is not None else data.n / np.log(data.n)
        header, body = ["rule", "d", "f", "delta"], [["fdr", str(d), f"{f:.10g}", f"{fdr_threshold(d, f):.10g}"]]
    elif args.rule == "decoupling":
        statistic = "likelihood" if methods[0] in ("MLR", "CMLR") else "magnitude"
        k = args.decouple_k or 5
        tau = args.decouple_tau if args.decouple_tau is not None else 0.99
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = decoupling_details(data, cond, family, k, tau, args.seed or 0, statistic=statistic, wald=wald)
        header = ["rule", "d", "K", "tau", "gamma_star", "excluded"]
        body = [["decoupling", str(d), str(k), f"{tau:g}", f"{res.gamma:.10g}", str(res.excluded)]]
    else:
        raise UsageError("threshold needs --rule fdr or --rule decoupling")
    _emit(format_table(header, body, args.format or "csv"), args.output)
    return 0


def _eigen(args) -> int:
    header = ["r", "q", "d", "lam_unc", "lam_cond", "ratio"]
    body = []
    for r in args.r:
        for q in args.q:
            for d in args.d:
                lu, lc, ratio = conditional_eigen_ratio(r, q, d)
                body.append([f"{r:g}", str(q), str(d), f"{lu:.10g}", f"{lc:.10g}", f"{ratio:.10g}"])
    _emit(format_table(header, body, args.format or "pretty"), args.output)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    handler = {"simulate": _simulate, "screen": _screen, "threshold": _threshold, "eigen-ratio": _eigen}
    try:
        return handler[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"csis: error: {exc}\n")
        return 1
    except (DataError, OSError) as exc:
        sys.stderr.write(f"csis: data error: {exc}\n")
        return 2
    except ValueError as exc:
        sys.stderr.write(f"csis: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
