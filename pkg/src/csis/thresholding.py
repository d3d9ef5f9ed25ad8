"""Data-driven screening thresholds: FDR control on Wald statistics and random decoupling."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from statistics import NormalDist

import numpy as np

from .rng import make_rng
from .screening import (
    ConditioningSet,
    Dataset,
    ScreenStatistics,
    screen_conditional,
    select_by_magnitude,
)

_STD_NORMAL = NormalDist()


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    return _STD_NORMAL.inv_cdf(p)


def default_fdr_f(n: int) -> float:
    """Tolerated false positives n / log(n)."""
    return n / math.log(n)


def fdr_threshold(d: int, f: float) -> float:
    """delta = Phi^-1(1 - f / (2d))."""
    if d < 1:
        raise ValueError("need at least one candidate")
    if not f > 0:
        raise ValueError("f must be positive")
    if f >= 2 * d:
        raise ValueError(f"f={f} >= 2d={2 * d}: threshold undefined")
    return normal_quantile(1.0 - f / (2.0 * d))


def fdr_select(stats: ScreenStatistics, f: float | None = None, statistic: str = "wald"):
    """Return ``(delta, selected)`` with selected = {j : z_j >= delta, z_j > 0}.

    For f > d the cutoff delta is negative; a zero statistic carries no
    evidence and is still never selected.

    ``statistic="lr"`` thresholds the signed-root likelihood ratio instead of
    the Wald z, for likelihood-ranked sweeps.
    """
    if f is None:
        f = default_fdr_f(stats.n)
    delta = fdr_threshold(stats.d, f)
    z = stats.wald if statistic == "wald" else stats.lr_statistic()
    keep = stats.converged & (z >= delta) & (z > 0)
    return delta, stats.candidates[keep]


def step_quantile(values, tau: float) -> float:
    """Element ceil(tau * m) (1-based) of the ascending-sorted values."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("no values to take a quantile of")
    k = max(1, math.ceil(round(tau * v.size, 9)))
    return float(v[k - 1])


def decouple(data: Dataset, cond: ConditioningSet, rng: np.random.Generator, mode: str = "joint") -> Dataset:
    """Copy of ``data`` with the candidate columns' rows randomly permuted.

    ``joint`` applies one row permutation to all candidate columns;
    ``independent`` draws a separate permutation for each column.
    Conditioning columns and the response are untouched.
    """
    cand = cond.candidates(data.p)
    x = data.x.copy()
    if mode == "joint":
        perm = rng.permutation(data.n)
        x[:, cand] = data.x[perm][:, cand]
    elif mode == "independent":
        for j in cand:
            x[:, j] = data.x[rng.permutation(data.n), j]
    else:
        raise ValueError(f"unknown decoupling mode {mode!r}")
    return Dataset(x, data.y, data.column_names)


@dataclass
class DecouplingResult:
    gamma: float
    pool: np.ndarray
    excluded: int


def decoupled_pool(data: Dataset, cond: ConditioningSet, family, K: int = 5, seed: int = 0, *,
                   statistic: str = "magnitude", mode: str = "joint", pool: str = "pooled",
                   **screen_kw):
    """Null statistics from K decoupled copies; returns ``(values, excluded)``.

    Repetition k draws its permutation from the child stream (seed, k), so
    increasing K never reshuffles earlier repetitions.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    values, excluded = [], 0
    for k in range(K):
        rng = make_rng(seed, "decouple", k)
        null = screen_conditional(decouple(data, cond, rng, mode), cond, family, **screen_kw)
        if statistic == "magnitude":
            v = np.abs(null.coef)
        elif statistic == "likelihood":
            v = null.reduction
        else:
            raise ValueError(f"unknown statistic {statistic!r}")
        v = v[null.converged]
        excluded += int(null.d - v.size)
        if pool == "pooled":
            values.append(v)
        elif pool == "max":
            values.append(v.max(keepdims=True) if v.size else v)
        else:
            raise ValueError(f"unknown pooling {pool!r}")
    return np.sort(np.concatenate(values)), excluded


def decoupling_threshold(data: Dataset, cond: ConditioningSet, family, K: int = 5, tau: float = 0.99,
                         seed: int = 0, **kw) -> float:
    """tau-quantile gamma*_tau of the decoupled |beta*| values (tau=1 gives the max)."""
    return decoupling_details(data, cond, family, K, tau, seed, **kw).gamma


def decoupling_details(data, cond, family, K=5, tau=0.99, seed=0, **kw) -> DecouplingResult:
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    values, excluded = decoupled_pool(data, cond, family, K, seed, **kw)
    if excluded:
        warnings.warn(f"{excluded} decoupled fits did not converge and were left out of the pool",
                      RuntimeWarning, stacklevel=2)
    return DecouplingResult(step_quantile(values, tau), values, excluded)


@dataclass(frozen=True)
class ThresholdRule:
    """One way of turning screening statistics into a selected set.

    kind is ``fixed`` (uses ``gamma``), ``fdr`` (uses ``f``; None means
    n/log n) or ``decoupling`` (uses ``K``, ``tau``, ``seed``).
    """
    kind: str
    gamma: float | None = None
    f: float | None = None
    K: int = 5
    tau: float = 0.99
    seed: int = 0
    mode: str = "joint"
    pool: str = "pooled"

    def __post_init__(self):
        if self.kind not in ("fixed", "fdr", "decoupling"):
            raise ValueError(f"unknown threshold rule {self.kind!r}")
        if self.kind == "fixed" and (self.gamma is None or self.gamma < 0):
            raise ValueError("fixed rule needs gamma >= 0")
        if self.f is not None and not self.f > 0:
            raise ValueError("f must be positive")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")

    def with_seed(self, seed: int) -> "ThresholdRule":
        return replace(self, seed=seed)

    def apply(self, stats: ScreenStatistics, data: Dataset, cond: ConditioningSet, family,
              method: str = "magnitude", **screen_kw):
        """Return ``(realized_threshold, selected)`` for the given sweep.

        For likelihood-ranked sweeps the fixed and decoupling rules threshold
        the likelihood reduction, and the FDR rule the signed-root LR statistic.
        """
        if method == "magnitude":
            value = np.abs(stats.coef)
        elif method == "likelihood":
            value = stats.reduction
        else:
            raise ValueError(f"unknown method {method!r}")
        if self.kind == "fdr":
            return fdr_select(stats, self.f, "wald" if method == "magnitude" else "lr")
        if self.kind == "fixed":
            gamma = float(self.gamma)
        else:
            res = decoupling_details(data, cond, family, self.K, self.tau, self.seed, statistic=method,
                                     mode=self.mode, pool=self.pool, **screen_kw)
            gamma = res.gamma
        if method == "magnitude":
            return gamma, select_by_magnitude(stats, gamma)
        return gamma, stats.candidates[stats.converged & (value > gamma)]
