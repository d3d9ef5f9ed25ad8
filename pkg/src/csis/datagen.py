"""Seeded covariate and response generators for the simulation designs.

Column indices are 0-based throughout; "the first four covariates" are
columns 0..3.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .glm import Family
from .rng import make_rng
from .screening import ConditioningSet, Dataset

LINEAR_PREDICTOR_CLAMP = 30.0
MIXTURE_VARIANCE = 1.75  # 0.5 * (1 + 1) + 0.5 * (0.5 + 1) - 0**2


def gen_equicorrelated(n: int, p: int, rho: float, rng: np.random.Generator, independent=()) -> np.ndarray:
    """X_j = sqrt(rho) W + sqrt(1 - rho) Z_j; columns in ``independent`` are just Z_j."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    w = rng.standard_normal(n)
    z = rng.standard_normal((n, p))
    x = math.sqrt(rho) * w[:, None] + math.sqrt(1.0 - rho) * z
    idx = list(independent)
    if idx:
        x[:, idx] = z[:, idx]
    return x


def innovation_blocks(p: int):
    """Column slices for the normal, double-exponential and mixture thirds."""
    third = p // 3
    return slice(0, third), slice(third, 2 * third), slice(2 * third, p)


def gen_factor_mixture(n: int, p: int, a, rng: np.random.Generator) -> np.ndarray:
    """X_j = (e_j + a_j e) / sqrt(1 + a_j^2) with a shared standard normal factor e.

    The innovations e_j are standard normal, Laplace(0, 1) / sqrt(2), and an
    equal mixture of N(-1, 1) and N(1, 0.5) scaled by 1 / sqrt(1.75), one law
    per third of the columns, so every column has mean 0 and variance 1.
    """
    a = np.broadcast_to(np.asarray(a, dtype=float), (p,))
    if np.any(a < 0):
        raise ValueError("factor loadings must be non-negative")
    s_norm, s_lap, s_mix = innovation_blocks(p)
    eps = np.empty((n, p))
    k = s_norm.stop - s_norm.start
    eps[:, s_norm] = rng.standard_normal((n, k))
    k = s_lap.stop - s_lap.start
    eps[:, s_lap] = rng.laplace(0.0, 1.0, (n, k)) / math.sqrt(2.0)
    k = s_mix.stop - s_mix.start
    upper = rng.random((n, k)) < 0.5
    mix = np.where(upper, 1.0 + math.sqrt(0.5) * rng.standard_normal((n, k)),
                   -1.0 + rng.standard_normal((n, k)))
    eps[:, s_mix] = mix / math.sqrt(MIXTURE_VARIANCE)
    factor = rng.standard_normal(n)
    return (eps + factor[:, None] * a) / np.sqrt(1.0 + a * a)


def rho_to_loading(rho: float) -> float:
    """Common loading a with a^2 / (1 + a^2) = rho."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    return math.sqrt(rho / (1.0 - rho))


def _mean_corr_root(mean: float) -> float:
    # E[g(max(0, mean + Z))] with g(a) = a / sqrt(1 + a^2); g(0) = 0 so only z > -mean counts
    # the normal weight is below 1e-30 outside |z| <= 12, so a finite window
    # keeps quad from missing the bump when -mean is far from it
    lo, hi = max(-mean, -12.0), 12.0
    if lo >= hi:
        return 0.0
    g = lambda z: (mean + z) / math.sqrt(1.0 + (mean + z) ** 2) * math.exp(-0.5 * z * z)
    val, _ = integrate.quad(g, lo, hi, points=[0.0] if lo < 0.0 else None, epsabs=1e-14, epsrel=1e-12, limit=200)
    return val / math.sqrt(2.0 * math.pi)


def expected_random_loading_corr(mean: float) -> float:
    """E Corr(X_i, X_j), i != j, for loadings drawn iid as max(0, N(mean, 1))."""
    return _mean_corr_root(mean) ** 2


def random_loading_mean(rho: float, tol: float = 1e-10) -> float:
    """Mean a of the clamped normal loadings giving expected correlation rho (bisection)."""
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    lo, hi = -10.0, 100.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if expected_random_loading_corr(mid) < rho:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class CovariateModel:
    """How to draw the n x p design.

    ``equicorrelated``: common correlation ``rho``, with ``independent``
    columns drawn free of the common factor.
    ``factor_mixture``: fixed ``loadings`` (length p), or, when
    ``random_loading_mean`` is set, the first ``random_count`` loadings are
    drawn per dataset as max(0, N(mean, 1)) and the rest are zero.
    """
    kind: str
    rho: float = 0.0
    independent: tuple = ()
    loadings: tuple | None = None
    random_loading_mean: float | None = None
    random_count: int = 0

    def __post_init__(self):
        if self.kind not in ("equicorrelated", "factor_mixture"):
            raise ValueError(f"unknown covariate model {self.kind!r}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")

    def sample(self, n: int, p: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "equicorrelated":
            return gen_equicorrelated(n, p, self.rho, rng, self.independent)
        if self.random_loading_mean is not None:
            a = np.zeros(p)
            a[:self.random_count] = np.maximum(
                0.0, self.random_loading_mean + rng.standard_normal(self.random_count))
        elif self.loadings is not None:
            a = np.asarray(self.loadings, dtype=float)
            if a.size != p:
                raise ValueError("loadings length must equal p")
        else:
            a = np.zeros(p)
        return gen_factor_mixture(n, p, a, rng)


def gen_response(x: np.ndarray, beta_star, family, rng: np.random.Generator) -> np.ndarray:
    family = Family.parse(family)
    beta = np.asarray(beta_star, dtype=float)
    if x.ndim != 2 or beta.shape != (x.shape[1],):
        raise ValueError(f"x {x.shape} does not match beta {beta.shape}")
    eta = x @ beta
    if family is Family.GAUSSIAN:
        return eta + rng.standard_normal(x.shape[0])
    eta = np.clip(eta, -LINEAR_PREDICTOR_CLAMP, LINEAR_PREDICTOR_CLAMP)
    if family is Family.BINOMIAL_LOGIT:
        prob = 1.0 / (1.0 + np.exp(-eta))
        return (rng.random(x.shape[0]) < prob).astype(float)
    return rng.poisson(np.exp(eta)).astype(float)


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    n: int
    p: int
    covariates: CovariateModel
    beta_star: np.ndarray = field(repr=False)
    conditioning: ConditioningSet
    family: Family = Family.GAUSSIAN
    replications: int = 200
    seed: int = 0
    rho: float = 0.0

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        beta = np.asarray(self.beta_star, dtype=float)
        if beta.shape != (self.p,):
            raise ValueError("beta_star must have length p")
        object.__setattr__(self, "beta_star", beta)
        object.__setattr__(self, "family", Family.parse(self.family))
        self.conditioning.validate(self.p)
        if self.active_in_D().size == 0:
            raise ValueError("no active coefficient among the candidates; minimum model size undefined")

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.beta_star)

    def active_in_D(self, cond: ConditioningSet | None = None) -> np.ndarray:
        cond = self.conditioning if cond is None else cond
        return np.setdiff1d(self.active, cond.indices)

    def generate(self, replication: int) -> Dataset:
        """Dataset for one replication, drawn from the stream (seed, replication)."""
        rng = make_rng(self.seed, "replication", replication)
        x = self.covariates.sample(self.n, self.p, rng)
        y = gen_response(x, self.beta_star, self.family, rng)
        return Dataset(x, y)


def _alternating(s: int) -> np.ndarray:
    return np.where(np.arange(s) % 2 == 0, 1.0, 1.3)


EXAMPLES = ("ex1", "ex2", "ex3", "ex4", "ex5")


def example_spec(example: str, family="gaussian", *, rho: float | None = None, cset: int = 1,
                 n: int | None = None, p: int | None = None, replications: int = 200, seed: int = 0,
                 loaded: int | None = None) -> ExperimentSpec:
    """Canned simulation settings.

    ex1/ex2 are the equicorrelated false-negative/false-positive designs;
    ex3 (s=12, 100 loaded columns, condition on 4), ex4 (s=6, 50 random
    loadings, condition on 2) and ex5 (s=6, 2000 loaded columns, conditioning
    set ``cset`` in 1..3) use the factor-mixture design. ``n``, ``p`` and
    ``loaded`` override the defaults for desk-scale runs.
    """
    family = Family.parse(family)
    binom = family is not Family.GAUSSIAN
    if example == "ex1":
        p = p or 2000
        beta = np.zeros(p)
        beta[:6] = [3, 3, 3, 3, 3, -7.5]
        rho = 0.5 if rho is None else rho
        cov = CovariateModel("equicorrelated", rho=rho)
        cond = ConditioningSet(tuple(range(5)))
        n = n or 100
    elif example == "ex2":
        p = p or 2000
        beta = np.zeros(p)
        beta[0], beta[p - 1] = 10.0, 1.0
        rho = 0.9 if rho is None else rho
        cov = CovariateModel("equicorrelated", rho=rho, independent=(p - 1,))
        cond = ConditioningSet((0,))
        n = n or 100
    elif example == "ex3":
        p = p or 5000
        rho = 0.0 if rho is None else rho
        k = 100 if loaded is None else loaded
        a = np.zeros(p)
        a[:k] = rho_to_loading(rho)
        beta = np.zeros(p)
        beta[:12] = _alternating(12)
        cov = CovariateModel("factor_mixture", rho=rho, loadings=tuple(a))
        cond = ConditioningSet(tuple(range(4)))
        n = n or (300 if binom or rho == 0.0 else 100)
    elif example == "ex4":
        p = p or 40000
        rho = 0.0 if rho is None else rho
        k = 50 if loaded is None else loaded
        mean = random_loading_mean(rho) if rho > 0 else None
        beta = np.zeros(p)
        beta[:6] = _alternating(6)
        cov = CovariateModel("factor_mixture", rho=rho, random_loading_mean=mean,
                             random_count=k if mean is not None else 0)
        cond = ConditioningSet((0, 1))
        n = n or (500 if binom else 200)
    elif example == "ex5":
        p = p or 10000
        rho = 0.0 if rho is None else rho
        k = 2000 if loaded is None else loaded
        if not k < p:
            raise ValueError("ex5 needs more columns than loaded ones")
        a = np.zeros(p)
        a[:k] = rho_to_loading(rho)
        beta = np.zeros(p)
        beta[:4] = [1, 2, 1, 2]
        beta[p - 2:] = [1, 2]
        cov = CovariateModel("factor_mixture", rho=rho, loadings=tuple(a))
        if cset == 1:
            cond = ConditioningSet((0, 1))
        elif cset == 2:
            cond = ConditioningSet((0, 1, 4, k))
        elif cset == 3:
            rng = make_rng(seed, "ex5-conditioning")
            inactive = np.flatnonzero(beta == 0)
            head = rng.choice(inactive[inactive < k], 3, replace=False)
            tail = rng.choice(inactive[inactive >= k], 1, replace=False)
            cond = ConditioningSet(tuple(int(i) for i in np.sort(np.concatenate([head, tail]))))
        else:
            raise ValueError(f"ex5 conditioning set must be 1, 2 or 3, got {cset}")
        n = n or (400 if binom else 200)
    else:
        raise ValueError(f"unknown example {example!r}; choose from {EXAMPLES}")
    return ExperimentSpec(name=example, n=n, p=p, covariates=cov, beta_star=beta, conditioning=cond,
                          family=family, replications=replications, seed=seed, rho=float(rho))


def write_csv(data: Dataset, path) -> None:
    """Write the response as column ``y`` followed by the covariates."""
    names = [data.name(j) for j in range(data.p)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y"] + names)
        for yi, row in zip(data.y, data.x):
            w.writerow([repr(float(yi))] + [repr(float(v)) for v in row])
