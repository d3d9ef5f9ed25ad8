"""Conditional marginal screening (CSIS / CMLR) over candidate features."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .glm import (
    DEFAULT_COEF_BOUND,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    Family,
    FitProblem,
    check_rank,
    fit_glm,
    fit_glm_many,
)

# Fixed sweep block. Worker count only changes which thread runs a block,
# never the block boundaries, so results are bitwise identical for any count.
CHUNK_SIZE = 256
COLLINEAR_RTOL = 1e-10


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    column_names: tuple | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise ValueError(f"x {x.shape} and y {y.shape} are incompatible")
        if x.shape[0] < 2:
            raise ValueError("need at least two observations")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        if self.column_names is not None:
            names = tuple(str(c) for c in self.column_names)
            if len(names) != x.shape[1]:
                raise ValueError("column_names length does not match number of columns")
            object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def name(self, j: int) -> str:
        return self.column_names[j] if self.column_names else f"x{j + 1}"


@dataclass(frozen=True)
class ConditioningSet:
    """Columns always included in every marginal fit (the intercept is implicit)."""
    indices: tuple = ()
    include_intercept: bool = True

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ValueError(f"duplicate conditioning indices in {idx}")
        if any(i < 0 for i in idx):
            raise ValueError("conditioning indices must be non-negative")
        if not self.include_intercept:
            raise ValueError("the intercept is always included")
        object.__setattr__(self, "indices", idx)

    @property
    def q(self) -> int:
        return len(self.indices)

    def validate(self, p: int) -> None:
        if any(i >= p for i in self.indices):
            raise ValueError(f"conditioning index out of range for p={p}: {self.indices}")

    def candidates(self, p: int) -> np.ndarray:
        self.validate(p)
        mask = np.ones(p, dtype=bool)
        mask[list(self.indices)] = False
        return np.flatnonzero(mask)

    def base_design(self, x: np.ndarray) -> np.ndarray:
        n = x.shape[0]
        return np.column_stack([np.ones(n)] + [x[:, i] for i in self.indices])


@dataclass
class ScreenStatistics:
    """Per-candidate outputs of one conditional sweep, aligned with ``candidates``."""
    candidates: np.ndarray
    coef: np.ndarray
    nll: np.ndarray
    wald: np.ndarray
    converged: np.ndarray
    baseline_nll: float
    baseline_coef: np.ndarray
    n: int
    family: Family = Family.GAUSSIAN
    at_bound: np.ndarray = field(default=None, repr=False)
    phi: np.ndarray = field(default=None, repr=False)

    @property
    def d(self) -> int:
        return self.candidates.size

    @property
    def reduction(self) -> np.ndarray:
        """Likelihood reduction baseline_nll - R_j (non-negative for converged fits)."""
        return self.baseline_nll - self.nll

    def lr_statistic(self) -> np.ndarray:
        """Root likelihood ratio sqrt(2 n reduction / phi); N(0,1)-scaled like the Wald z."""
        phi = 1.0 if self.phi is None else self.phi
        return np.sqrt(2.0 * self.n * np.maximum(self.reduction, 0.0) / phi)


def screen_conditional(data: Dataset, cond: ConditioningSet, family=Family.GAUSSIAN, *,
                       wald: str = "inverse", tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                       coef_bound: float = DEFAULT_COEF_BOUND, dispersion: str = "auto",
                       workers: int = 1) -> ScreenStatistics:
    """Fit [1 | X_C | X_j] for every candidate j and collect the screening statistics.

    ``wald`` picks the standard error behind the Wald statistic:
    ``"inverse"`` uses sqrt([I^-1]_jj / n), ``"raw"`` uses 1 / sqrt(n I_jj).
    ``dispersion`` scales that standard error: ``"unit"`` keeps phi = 1,
    ``"estimate"`` uses the residual mean square RSS_j / (n - q - 2), and
    ``"auto"`` estimates it for the Gaussian family only. The fitted
    coefficients and likelihoods never depend on it.
    The unconditional SIS/MLR sweep is ``ConditioningSet(())``.
    """
    family = Family.parse(family)
    if wald not in ("inverse", "raw"):
        raise ValueError(f"wald must be 'inverse' or 'raw', got {wald!r}")
    if dispersion not in ("auto", "unit", "estimate"):
        raise ValueError(f"dispersion must be 'auto', 'unit' or 'estimate', got {dispersion!r}")
    if family is not Family.GAUSSIAN and dispersion == "estimate":
        raise ValueError("dispersion estimation is only supported for the gaussian family")
    estimate_phi = family is Family.GAUSSIAN and dispersion != "unit"
    cand = cond.candidates(data.p)
    base = cond.base_design(data.x)
    n = data.n
    if base.shape[1] >= n:
        raise ValueError(f"conditioning set too large: {base.shape[1]} base columns for n={n}")
    check_rank(base)
    q_base, _ = np.linalg.qr(base)

    if family is Family.GAUSSIAN:
        y_fit = q_base @ (q_base.T @ data.y)
        r_y = data.y - y_fit
        base_coef = np.linalg.lstsq(base, data.y, rcond=None)[0]
        baseline = float(-0.5 * (y_fit @ y_fit) / n)
        rss_base = float(r_y @ r_y)
        df = n - base.shape[1] - 1
        if estimate_phi and df < 1:
            raise ValueError("too few observations to estimate the dispersion")
        sweep = lambda cols: _gaussian_block(data.x[:, cols], q_base, r_y, baseline, n, wald,
                                             (rss_base, df) if estimate_phi else None)
    else:
        base_fit = fit_glm(FitProblem(base, data.y, family, coef_bound), tol=tol, max_iter=max_iter)
        base_coef = base_fit.coefficients
        baseline = base_fit.nll
        sweep = lambda cols: _glm_block(family, data.x[:, cols], base, q_base, data.y, base_coef, baseline,
                                        n, wald, tol, max_iter, coef_bound)

    blocks = [cand[i:i + CHUNK_SIZE] for i in range(0, cand.size, CHUNK_SIZE)]
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(sweep, blocks))
    else:
        parts = [sweep(b) for b in blocks]

    if parts:
        coef, nll, z, conv, bound, phi = (np.concatenate(a) for a in zip(*parts))
    else:
        coef = nll = z = phi = np.zeros(0)
        conv = bound = np.zeros(0, dtype=bool)
    return ScreenStatistics(candidates=cand, coef=coef, nll=nll, wald=z, converged=conv,
                            baseline_nll=baseline, baseline_coef=np.asarray(base_coef), n=n,
                            family=family, at_bound=bound, phi=phi)


def _residualize(xc, q_base):
    resid = xc - q_base @ (q_base.T @ xc)
    ss = np.sum(resid * resid, axis=0)
    norms2 = np.sum(xc * xc, axis=0)
    collinear = ss <= (COLLINEAR_RTOL ** 2) * np.maximum(norms2, np.finfo(float).tiny)
    return resid, ss, norms2, collinear


def _gaussian_block(xc, q_base, r_y, baseline, n, wald, phi_terms):
    # Frisch-Waugh: the candidate coefficient is the regression of the
    # y-residual on the candidate residual, both taken against [1 | X_C].
    resid, ss, norms2, collinear = _residualize(xc, q_base)
    cross = resid.T @ r_y
    safe_ss = np.where(collinear, 1.0, ss)
    coef = np.where(collinear, 0.0, cross / safe_ss)
    nll = np.where(collinear, baseline, baseline - cross * cross / (2.0 * n * safe_ss))
    if wald == "inverse":
        z = np.abs(coef) * np.sqrt(safe_ss)
    else:
        z = np.abs(coef) * np.sqrt(norms2)
    phi = np.ones(xc.shape[1])
    if phi_terms is not None:
        rss_base, df = phi_terms
        rss = np.maximum(rss_base - cross * cross / safe_ss, 0.0)
        phi = np.maximum(rss / df, np.finfo(float).tiny)
        z = z / np.sqrt(phi)
    z = np.where(collinear, 0.0, z)
    return coef, nll, z, ~collinear, np.zeros(xc.shape[1], dtype=bool), phi


def _glm_block(family, xc, base, q_base, y, base_coef, baseline, n, wald, tol, max_iter, coef_bound):
    k = xc.shape[1]
    _, _, _, collinear = _residualize(xc, q_base)
    coef = np.zeros(k)
    nll = np.full(k, baseline)
    z = np.zeros(k)
    conv = np.zeros(k, dtype=bool)
    bound = np.zeros(k, dtype=bool)
    ok = np.flatnonzero(~collinear)
    if ok.size:
        fit = fit_glm_many(family, base, xc[:, ok], y, base_coef, tol=tol, max_iter=max_iter,
                           coef_bound=coef_bound)
        b = fit.coefficients[:, -1]
        coef[ok] = b
        nll[ok] = fit.nll
        conv[ok] = fit.converged
        bound[ok] = fit.at_bound
        with np.errstate(divide="ignore", invalid="ignore"):
            if wald == "inverse":
                se = np.sqrt(fit.inv_info_last / n)
            else:
                se = 1.0 / np.sqrt(n * fit.info_last)
            zz = np.abs(b) / se
        z[ok] = np.where(np.isfinite(zz), zz, 0.0)
    return coef, nll, z, conv, bound, np.ones(k)


def select_by_magnitude(stats: ScreenStatistics, gamma: float) -> np.ndarray:
    """Candidates with |beta_j| > gamma (non-converged fits never selected)."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    keep = stats.converged & (np.abs(stats.coef) > gamma)
    return stats.candidates[keep]


def select_by_likelihood(stats: ScreenStatistics, gamma_tilde: float) -> np.ndarray:
    """Candidates whose minimised marginal nll is below gamma_tilde."""
    keep = stats.converged & (stats.nll < gamma_tilde)
    return stats.candidates[keep]


def rank_features(stats: ScreenStatistics, method: str = "magnitude") -> np.ndarray:
    """Candidate columns ordered most- to least-promising.

    Non-converged fits go last; ties fall back to ascending column index.
    """
    if method == "magnitude":
        primary = -np.abs(stats.coef)
    elif method == "likelihood":
        primary = stats.nll
    else:
        raise ValueError(f"unknown ranking method {method!r}")
    order = np.lexsort((stats.candidates, primary, ~stats.converged))
    return stats.candidates[order]
