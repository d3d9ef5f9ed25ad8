"""Replicated simulation runs, CSV ingestion and report formatting."""
from __future__ import annotations

import csv
import io
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .datagen import ExperimentSpec
from .metrics import fp_fn, minimum_model_size, summarize_mms
from .rng import child_seed
from .screening import ConditioningSet, Dataset, rank_features, screen_conditional
from .thresholding import ThresholdRule

METHODS = ("SIS", "MLR", "CSIS", "CMLR")
_RANKING = {"SIS": "magnitude", "MLR": "likelihood", "CSIS": "magnitude", "CMLR": "likelihood"}
_CONDITIONAL = {"SIS": False, "MLR": False, "CSIS": True, "CMLR": True}
_RULE_COLUMN = {"decoupling": "pi", "fdr": "fdr", "fixed": "fixed"}


class DataError(ValueError):
    """Malformed or unusable input data."""


@dataclass(frozen=True)
class RunConfig:
    spec: ExperimentSpec
    methods: tuple = ("CSIS",)
    threshold_rules: tuple = ()
    replications: int | None = None
    workers: int = 1
    wald: str = "inverse"

    def __post_init__(self):
        methods = tuple(m.upper() for m in self.methods)
        if not methods:
            raise ValueError("at least one method is required")
        bad = [m for m in methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        object.__setattr__(self, "methods", methods)
        kinds = [r.kind for r in self.threshold_rules]
        if len(set(kinds)) != len(kinds):
            raise ValueError("at most one threshold rule of each kind")
        if self.reps < 1:
            raise ValueError("replications must be at least 1")

    @property
    def reps(self) -> int:
        return self.spec.replications if self.replications is None else self.replications


@dataclass
class ReportRow:
    method: str
    example: str
    rho: float
    n: int
    p: int
    family: str
    mmms: float
    rsd: float
    fp_pi: float | None
    fn_pi: float | None
    fp_fdr: float | None
    fn_fdr: float | None
    fp_fixed: float | None
    fn_fixed: float | None
    replications: int
    failed: int
    flagged: int
    wall_seconds: float


TIMING_COLUMNS = ("wall_seconds",)


def _replication(spec: ExperimentSpec, methods, rules, wald, rep: int):
    data = spec.generate(rep)
    sweeps = {}
    out = {}
    for method in methods:
        cond = spec.conditioning if _CONDITIONAL[method] else ConditioningSet(())
        if cond not in sweeps:
            sweeps[cond] = screen_conditional(data, cond, spec.family, wald=wald)
        stats = sweeps[cond]
        active = spec.active_in_D(cond)
        ranking_method = _RANKING[method]
        conv = dict(zip(stats.candidates.tolist(), stats.converged.tolist()))
        flagged = not all(conv[int(j)] for j in active)
        mms = stats.d if flagged else minimum_model_size(rank_features(stats, ranking_method), active)
        sel = {}
        for rule in rules:
            if rule.kind == "decoupling":
                rule = rule.with_seed(child_seed(spec.seed, "decoupling", rep))
            _, chosen = rule.apply(stats, data, cond, spec.family, method=ranking_method, wald=wald)
            sel[rule.kind] = fp_fn(chosen, active, stats.candidates)
        out[method] = (mms, flagged, sel)
    return out


def _safe_replication(args):
    spec, methods, rules, wald, rep = args
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return _replication(spec, methods, rules, wald, rep)
    except Exception:  # a broken replication is recorded, not fatal
        return None


def run_experiment(config: RunConfig, rho_label: float | None = None) -> list[ReportRow]:
    """Run all replications and aggregate one row per method.

    Replication r draws its data from the stream (spec.seed, r), so the
    report does not depend on ``workers``.
    """
    spec = config.spec
    start = time.perf_counter()
    jobs = [(spec, config.methods, config.threshold_rules, config.wald, r) for r in range(config.reps)]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_safe_replication, jobs))
    else:
        results = [_safe_replication(j) for j in jobs]
    wall = time.perf_counter() - start

    ok = [r for r in results if r is not None]
    rows = []
    for method in config.methods:
        mms = [r[method][0] for r in ok]
        flagged = sum(r[method][1] for r in ok)
        mmms, rsd = summarize_mms(mms) if mms else (math.nan, math.nan)
        cells = {}
        for rule in config.threshold_rules:
            col = _RULE_COLUMN[rule.kind]
            counts = np.array([r[method][2][rule.kind] for r in ok], dtype=float).reshape(-1, 2)
            cells[f"fp_{col}"], cells[f"fn_{col}"] = (counts.mean(axis=0) if len(counts) else (math.nan,) * 2)
        rows.append(ReportRow(
            method=method, example=spec.name, rho=spec.rho if rho_label is None else rho_label,
            n=spec.n, p=spec.p, family=spec.family.value, mmms=mmms, rsd=rsd,
            fp_pi=cells.get("fp_pi"), fn_pi=cells.get("fn_pi"),
            fp_fdr=cells.get("fp_fdr"), fn_fdr=cells.get("fn_fdr"),
            fp_fixed=cells.get("fp_fixed"), fn_fixed=cells.get("fn_fixed"),
            replications=config.reps, failed=len(results) - len(ok), flagged=flagged,
            wall_seconds=wall,
        ))
    return rows


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.4f}".rstrip("0").rstrip(".") if value != int(value) else f"{int(value)}"
    return str(value)


def format_table(header, body, fmt: str = "csv") -> str:
    """Render rows of already-formatted strings as csv, tsv or an aligned table."""
    if fmt in ("csv", "tsv"):
        buf = io.StringIO()
        w = csv.writer(buf, delimiter="," if fmt == "csv" else "\t", lineterminator="\n")
        w.writerow(header)
        w.writerows(body)
        return buf.getvalue()
    if fmt in ("pretty", "pretty-table", "table"):
        widths = [max(len(h), *(len(r[i]) for r in body)) if body else len(h) for i, h in enumerate(header)]
        line = lambda cells: "  ".join(c.rjust(wd) for c, wd in zip(cells, widths)).rstrip()
        return "\n".join([line(header), line(["-" * wd for wd in widths])] + [line(r) for r in body]) + "\n"
    raise ValueError(f"unknown output format {fmt!r}")


def format_report(rows, fmt: str = "csv", timing: bool = True) -> str:
    names = [f.name for f in fields(ReportRow) if timing or f.name not in TIMING_COLUMNS]
    body = [[_fmt(getattr(r, k)) if k != "wall_seconds" else f"{r.wall_seconds:.3f}" for k in names]
            for r in rows]
    return format_table(names, body, fmt)


def _parse_cell(text: str, row: int, col: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"non-numeric value {text!r} at row {row}, column {col!r}") from None
    if not math.isfinite(v):
        raise DataError(f"non-finite value {text!r} at row {row}, column {col!r}")
    return v


def load_csv(path, response: str = "y", conditioning=(), *, standardize: bool = True,
             center_conditioning: bool = False):
    """Read a headed CSV into ``(Dataset, ConditioningSet)``.

    Candidate columns are standardised to mean 0 and mean square 1; constant
    candidate columns are dropped with a warning. Conditioning columns are
    kept as is (optionally centred). Row numbers in errors count the header
    as row 1.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    if response not in header:
        raise DataError(f"{path}: response column {response!r} not found")
    conditioning = [c for c in conditioning if c]
    missing = [c for c in conditioning if c not in header]
    if missing:
        raise DataError(f"{path}: conditioning columns {missing} not found")
    if response in conditioning:
        raise DataError("the response cannot be a conditioning column")

    values = np.empty((len(rows), len(header)))
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(r)} fields, expected {len(header)}")
        for k, cell in enumerate(r):
            values[i, k] = _parse_cell(cell.strip(), i + 2, header[k])
    if values.shape[0] < 2:
        raise DataError(f"{path}: need at least two data rows")

    y = values[:, header.index(response)]
    names, cols = [], []
    for k, name in enumerate(header):
        if name == response:
            continue
        col = values[:, k]
        if name in conditioning:
            if center_conditioning:
                col = col - col.mean()
        elif standardize:
            sd = col.std()
            if sd == 0.0:
                warnings.warn(f"column {name!r} is constant and was excluded", UserWarning, stacklevel=2)
                continue
            col = (col - col.mean()) / sd
        names.append(name)
        cols.append(col)
    x = np.column_stack(cols) if cols else np.empty((len(rows), 0))
    data = Dataset(x, y, tuple(names))
    cond = ConditioningSet(tuple(names.index(c) for c in conditioning))
    return data, cond
