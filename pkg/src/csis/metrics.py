"""Screening-quality metrics and the conditional max-eigenvalue formula."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def minimum_model_size(ranking, active_in_D) -> int:
    """Smallest k such that the top-k of ``ranking`` contains every active candidate."""
    ranking = np.asarray(ranking)
    active = np.asarray(list(active_in_D) if isinstance(active_in_D, (set, frozenset)) else active_in_D)
    if active.size == 0:
        raise ValueError("active set must be non-empty")
    pos = {int(j): r for r, j in enumerate(ranking, start=1)}
    missing = [int(j) for j in active if int(j) not in pos]
    if missing:
        raise ValueError(f"active features {missing} are not in the ranking")
    return max(pos[int(j)] for j in active)


def summarize_mms(mms_values):
    """Median and robust SD (IQR / 1.34) of minimum model sizes.

    Quartiles interpolate linearly at positions (m + 1) * {1/4, 3/4} of the
    sorted sample, clamped to its ends.
    """
    v = np.asarray(mms_values, dtype=float)
    if v.size == 0:
        raise ValueError("need at least one value")
    q1, q3 = np.percentile(v, [25, 75], method="weibull")
    return float(np.median(v)), float((q3 - q1) / 1.34)


def fp_fn(selected, active_in_D, D=None):
    """False positives |selected - active| and false negatives |active - selected|."""
    sel = {int(j) for j in selected}
    act = {int(j) for j in active_in_D}
    if D is not None and not sel <= {int(j) for j in D}:
        raise ValueError("selected set is not contained in the candidate set")
    return len(sel - act), len(act - sel)


def conditional_eigen_ratio(r: float, q: int, d: int):
    """Largest eigenvalue of an equicorrelated block before and after conditioning on q others.

    Returns ``(lam_unc, lam_cond, lam_unc / lam_cond)``.
    """
    if not 0.0 <= r < 1.0:
        raise ValueError(f"r must lie in [0, 1), got {r}")
    if q < 0 or d < 1:
        raise ValueError("need q >= 0 and d >= 1")
    lam_unc = (1.0 - r) + r * d
    if q == 0:
        return lam_unc, lam_unc, 1.0
    lam_cond = (1.0 - r) + r * d * (1.0 - r) / (1.0 - r + r * q)
    return lam_unc, lam_cond, lam_unc / lam_cond


@dataclass
class ReplicationOutcome:
    mms: int
    active_in_D: tuple
    selected_pi: tuple = ()
    selected_fdr: tuple = ()
    mms_flagged: bool = False
