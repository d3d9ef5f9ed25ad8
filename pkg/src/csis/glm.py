"""Canonical-link exponential families and a damped Newton solver.

The objective everywhere is the mean negative log-likelihood

    P_n l(x'beta, y) = (1/n) sum_i [ b(x_i'beta) - y_i x_i'beta ]

with the dispersion parameter ignored (Gaussian fits use unit dispersion).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import expit

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100
DEFAULT_COEF_BOUND = 1e4
MAX_HALVINGS = 50


class Family(str, enum.Enum):
    GAUSSIAN = "gaussian"
    BINOMIAL_LOGIT = "binomial_logit"
    POISSON = "poisson"

    @classmethod
    def parse(cls, name) -> "Family":
        if isinstance(name, Family):
            return name
        key = str(name).strip().lower()
        aliases = {"normal": "gaussian", "binomial": "binomial_logit", "logit": "binomial_logit",
                   "logistic": "binomial_logit"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown family {name!r}") from None


class RankDeficientError(np.linalg.LinAlgError):
    """The design has a column lying in the span of the preceding columns."""

    def __init__(self, column: int):
        super().__init__(f"design column {column} is linearly dependent on earlier columns")
        self.column = column


def _cumulant_arrays(family: Family, theta: np.ndarray):
    if family is Family.GAUSSIAN:
        return 0.5 * theta * theta, theta.copy(), np.ones_like(theta)
    if family is Family.BINOMIAL_LOGIT:
        # log(1 + e^t) = max(t, 0) + log1p(e^-|t|)
        b = np.maximum(theta, 0.0) + np.log1p(np.exp(-np.abs(theta)))
        b1 = expit(theta)
        e = np.exp(-np.abs(theta))
        b2 = e / (1.0 + e) ** 2
        return b, b1, b2
    if family is Family.POISSON:
        e = np.exp(theta)
        return e, e, e.copy()
    raise ValueError(f"unsupported family {family!r}")


def cumulant(family, theta):
    """Return ``(b, b', b'')`` at ``theta`` (scalar or array)."""
    family = Family.parse(family)
    arr = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("theta must be finite")
    b, b1, b2 = _cumulant_arrays(family, arr)
    if arr.ndim == 0:
        return float(b), float(b1), float(b2)
    return b, b1, b2


def neg_loglik(family, eta, y) -> float:
    """Mean negative log-likelihood (1/n) sum [b(eta_i) - eta_i y_i]."""
    family = Family.parse(family)
    eta = np.asarray(eta, dtype=float)
    y = np.asarray(y, dtype=float)
    if eta.shape != y.shape or eta.ndim != 1 or eta.size == 0:
        raise ValueError(f"eta and y must be non-empty vectors of equal length, got {eta.shape} and {y.shape}")
    b, _, _ = _cumulant_arrays(family, eta)
    return float(np.mean(b - eta * y))


def score(family, design, y, coefficients) -> np.ndarray:
    """Gradient of :func:`neg_loglik` in the coefficients: (1/n) X'(b'(X beta) - y)."""
    family = Family.parse(family)
    X = np.asarray(design, dtype=float)
    eta = X @ np.asarray(coefficients, dtype=float)
    _, mu, _ = _cumulant_arrays(family, eta)
    return X.T @ (mu - np.asarray(y, dtype=float)) / X.shape[0]


def observed_information(family, design, coefficients) -> np.ndarray:
    """Scaled information (1/n) sum_i b''(x_i'beta) x_i x_i'."""
    family = Family.parse(family)
    X = np.asarray(design, dtype=float)
    beta = np.asarray(coefficients, dtype=float)
    if X.ndim != 2 or beta.shape != (X.shape[1],):
        raise ValueError(f"design {X.shape} does not match coefficients {beta.shape}")
    _, _, w = _cumulant_arrays(family, X @ beta)
    info = (X.T * w) @ X / X.shape[0]
    return 0.5 * (info + info.T)


@dataclass(frozen=True)
class FitProblem:
    design: np.ndarray
    response: np.ndarray
    family: Family = Family.GAUSSIAN
    coef_bound: float = DEFAULT_COEF_BOUND

    def __post_init__(self):
        X = np.asarray(self.design, dtype=float)
        y = np.asarray(self.response, dtype=float)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError(f"design {X.shape} and response {y.shape} are incompatible")
        n, m = X.shape
        if n < m:
            raise ValueError(f"need n >= m, got n={n}, m={m}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("design and response must be finite")
        if m == 0 or not np.all(X[:, 0] == 1.0):
            raise ValueError("first design column must be the all-ones intercept")
        if not self.coef_bound > 0:
            raise ValueError("coef_bound must be positive")
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "family", Family.parse(self.family))


@dataclass
class FitResult:
    coefficients: np.ndarray
    nll: float
    information: np.ndarray
    converged: bool
    iterations: int
    gradient_norm: float
    at_bound: bool = False
    objective_trace: list = field(default_factory=list, repr=False)


def check_rank(X: np.ndarray, rtol: float = 1e-10) -> None:
    """Raise :class:`RankDeficientError` naming the first dependent column."""
    r = np.linalg.qr(X, mode="r")
    diag = np.abs(np.diag(r))
    norms = np.linalg.norm(X, axis=0)
    for k, (rk, nk) in enumerate(zip(diag, norms)):
        if nk == 0.0 or rk <= rtol * nk:
            raise RankDeficientError(k)


def _newton_direction(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    try:
        c = scipy.linalg.cho_factor(H, lower=True, check_finite=False)
        return -scipy.linalg.cho_solve(c, g, check_finite=False)
    except np.linalg.LinAlgError:
        lu, piv = scipy.linalg.lu_factor(H, check_finite=False)
        return -scipy.linalg.lu_solve((lu, piv), g, check_finite=False)


def fit_glm(problem: FitProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
            start=None) -> FitResult:
    """Minimise the mean negative log-likelihood over the box |beta_k| <= B.

    Damped Newton: the full step is halved until the objective does not
    increase. A coefficient leaving the box is clipped back onto it and the
    fit stops with ``at_bound=True`` (this is how separation shows up in
    logistic fits).
    """
    X, y, fam, bound = problem.design, problem.response, problem.family, problem.coef_bound
    n, m = X.shape
    check_rank(X)

    beta = np.zeros(m) if start is None else np.array(start, dtype=float)
    eta = X @ beta
    obj = neg_loglik(fam, eta, y)
    trace = [obj]
    converged = at_bound = False
    it = 0
    while True:
        _, mu, w = _cumulant_arrays(fam, eta)
        grad = X.T @ (mu - y) / n
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        H = (X.T * w) @ X / n
        step = _newton_direction(H, grad)
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = beta + t * step
            trial_eta = X @ trial
            trial_obj = neg_loglik(fam, trial_eta, y)
            if trial_obj <= obj:
                break
            t *= 0.5
        else:
            # no descent along the Newton direction; gnorm > tol here
            break
        beta, eta, obj = trial, trial_eta, trial_obj
        trace.append(obj)
        if np.any(np.abs(beta) > bound):
            beta = np.clip(beta, -bound, bound)
            eta = X @ beta
            obj = neg_loglik(fam, eta, y)
            trace.append(obj)
            converged = at_bound = True
            _, mu, _ = _cumulant_arrays(fam, eta)
            gnorm = float(np.max(np.abs(X.T @ (mu - y) / n)))
            break

    return FitResult(
        coefficients=beta,
        nll=obj,
        information=observed_information(fam, X, beta),
        converged=converged,
        iterations=it,
        gradient_norm=gnorm,
        at_bound=at_bound,
        objective_trace=trace,
    )


@dataclass
class BatchFit:
    """Per-candidate results of :func:`fit_glm_many`; row k belongs to candidate k."""
    coefficients: np.ndarray  # (k, m0 + 1)
    nll: np.ndarray
    inv_info_last: np.ndarray  # [I^-1]_{last,last}
    info_last: np.ndarray  # I_{last,last}
    converged: np.ndarray
    at_bound: np.ndarray
    iterations: np.ndarray


def fit_glm_many(family, base: np.ndarray, candidates: np.ndarray, y: np.ndarray, start: np.ndarray,
                 tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                 coef_bound: float = DEFAULT_COEF_BOUND) -> BatchFit:
    """Fit ``[base | candidates[:, j]]`` for every column j at once.

    Same algorithm as :func:`fit_glm` (damped Newton with per-candidate step
    halving), vectorised over candidates. ``start`` is the warm start for the
    base coefficients; the candidate coefficient starts at zero. Candidates
    must not be collinear with ``base``; callers screen those out first.
    """
    fam = Family.parse(family)
    n, m0 = base.shape
    k = candidates.shape[1]
    m = m0 + 1
    coef = np.zeros((k, m))
    coef[:, :m0] = start
    iters = np.zeros(k, dtype=int)
    converged = np.zeros(k, dtype=bool)
    at_bound = np.zeros(k, dtype=bool)

    def linear_pred(c):
        return base @ c[:, :m0].T + candidates * c[:, m0]

    def objective(eta):
        b, _, _ = _cumulant_arrays(fam, eta)
        return np.mean(b - eta * y[:, None], axis=0)

    eta = linear_pred(coef)
    obj = objective(eta)
    active = np.ones(k, dtype=bool)
    for it in range(max_iter + 1):
        _, mu, w = _cumulant_arrays(fam, eta)
        resid = mu - y[:, None]
        grad = np.empty((k, m))
        grad[:, :m0] = (base.T @ resid).T / n
        grad[:, m0] = np.sum(candidates * resid, axis=0) / n
        done = active & (np.max(np.abs(grad), axis=1) <= tol)
        converged |= done
        active &= ~done
        if not active.any() or it == max_iter:
            break
        idx = np.flatnonzero(active)
        iters[idx] += 1
        H = _batch_hessian(base, candidates[:, idx], w[:, idx])
        step = -np.linalg.solve(H, grad[idx][..., None])[..., 0]

        t = np.ones(idx.size)
        accepted = np.zeros(idx.size, dtype=bool)
        new_coef = coef[idx].copy()
        new_eta = eta[:, idx].copy()
        new_obj = obj[idx].copy()
        pending = np.ones(idx.size, dtype=bool)
        for _ in range(MAX_HALVINGS + 1):
            sub = np.flatnonzero(pending)
            trial = coef[idx[sub]] + t[sub, None] * step[sub]
            trial_eta = base @ trial[:, :m0].T + candidates[:, idx[sub]] * trial[:, m0]
            trial_obj = objective(trial_eta)
            ok = trial_obj <= obj[idx[sub]]
            good = sub[ok]
            new_coef[good] = trial[ok]
            new_eta[:, good] = trial_eta[:, ok]
            new_obj[good] = trial_obj[ok]
            accepted[good] = True
            pending[good] = False
            if not pending.any():
                break
            t[pending] *= 0.5
        # no descent after all halvings: give up on these (not converged)
        active[idx[~accepted]] = False
        coef[idx] = new_coef
        eta[:, idx] = new_eta
        obj[idx] = new_obj

        out = active & np.any(np.abs(coef) > coef_bound, axis=1)
        if out.any():
            oi = np.flatnonzero(out)
            coef[oi] = np.clip(coef[oi], -coef_bound, coef_bound)
            eta[:, oi] = base @ coef[oi, :m0].T + candidates[:, oi] * coef[oi, m0]
            obj[oi] = objective(eta[:, oi])
            converged[oi] = at_bound[oi] = True
            active[oi] = False

    _, _, w = _cumulant_arrays(fam, eta)
    H = _batch_hessian(base, candidates, w)
    e_last = np.zeros((k, m, 1))
    e_last[:, m0, 0] = 1.0
    try:
        inv_last = np.linalg.solve(H, e_last)[:, m0, 0]
    except np.linalg.LinAlgError:
        inv_last = np.array([_safe_inv_last(h) for h in H])
    return BatchFit(coefficients=coef, nll=obj, inv_info_last=inv_last, info_last=H[:, m0, m0].copy(),
                    converged=converged, at_bound=at_bound, iterations=iters)


def _safe_inv_last(h: np.ndarray) -> float:
    try:
        return float(np.linalg.solve(h, np.eye(h.shape[0])[:, -1])[-1])
    except np.linalg.LinAlgError:
        return np.inf


def _batch_hessian(base: np.ndarray, cand: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Scaled information for each [base | cand_j] with weights w[:, j]."""
    n, m0 = base.shape
    k = cand.shape[1]
    H = np.empty((k, m0 + 1, m0 + 1))
    H[:, :m0, :m0] = np.einsum("ia,ik,ib->kab", base, w, base) / n
    cross = (base.T @ (w * cand)).T / n
    H[:, :m0, m0] = cross
    H[:, m0, :m0] = cross
    H[:, m0, m0] = np.sum(w * cand * cand, axis=0) / n
    return H
