import numpy as np
import numpy.testing as nptest
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import csis.screening as screening
from csis.datagen import example_spec
from csis.glm import FitProblem, RankDeficientError, fit_glm
from csis.screening import (
    ConditioningSet,
    Dataset,
    ScreenStatistics,
    rank_features,
    screen_conditional,
    select_by_likelihood,
    select_by_magnitude,
)


def _stats(coef=None, nll=None, idx=None, converged=None, baseline=1.0):
    k = len(coef if coef is not None else nll)
    idx = np.arange(k) if idx is None else np.asarray(idx)
    coef = np.zeros(k) if coef is None else np.asarray(coef, dtype=float)
    nll = np.zeros(k) if nll is None else np.asarray(nll, dtype=float)
    conv = np.ones(k, dtype=bool) if converged is None else np.asarray(converged)
    return ScreenStatistics(candidates=idx, coef=coef, nll=nll, wald=np.abs(coef), converged=conv,
                            baseline_nll=baseline, baseline_coef=np.zeros(1), n=10)


def _random_data(seed, n=50, p=10):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    y = x[:, :3] @ [1.0, -0.5, 0.25] + rng.standard_normal(n)
    return Dataset(x, y)


def _ols_last(x_cols, y):
    X = np.column_stack([np.ones(len(y))] + x_cols)
    return np.linalg.solve(X.T @ X, X.T @ y)[-1]


@pytest.mark.parametrize("cond", [(), (0,), (0, 4, 7)])
def test_gaussian_matches_per_feature_ols(cond):
    data = _random_data(1)
    stats = screen_conditional(data, ConditioningSet(cond))
    for k, j in enumerate(stats.candidates):
        oracle = _ols_last([data.x[:, i] for i in cond] + [data.x[:, j]], data.y)
        assert stats.coef[k] == pytest.approx(oracle, abs=1e-12)


def test_gaussian_nll_matches_fitted_likelihood():
    data = _random_data(2)
    cond = ConditioningSet((1, 2))
    stats = screen_conditional(data, cond)
    base = cond.base_design(data.x)
    assert stats.baseline_nll == pytest.approx(fit_glm(FitProblem(base, data.y)).nll, abs=1e-12)
    for k, j in enumerate(stats.candidates):
        res = fit_glm(FitProblem(np.column_stack([base, data.x[:, j]]), data.y))
        assert stats.nll[k] == pytest.approx(res.nll, abs=1e-12)


def test_inverse_wald_matches_information():
    data = _random_data(3)
    cond = ConditioningSet((0,))
    stats = screen_conditional(data, cond, dispersion="unit")
    raw = screen_conditional(data, cond, dispersion="unit", wald="raw")
    base = cond.base_design(data.x)
    for k, j in enumerate(stats.candidates):
        X = np.column_stack([base, data.x[:, j]])
        info = X.T @ X / data.n
        se = np.sqrt(np.linalg.inv(info)[-1, -1] / data.n)
        assert stats.wald[k] == pytest.approx(abs(stats.coef[k]) / se, rel=1e-10)
        assert raw.wald[k] == pytest.approx(abs(stats.coef[k]) * np.sqrt(data.n * info[-1, -1]), rel=1e-10)


def test_estimated_dispersion_gives_t_statistic():
    data = _random_data(4)
    cond = ConditioningSet((0, 1))
    stats = screen_conditional(data, cond, dispersion="estimate")
    base = cond.base_design(data.x)
    for k, j in enumerate(stats.candidates):
        X = np.column_stack([base, data.x[:, j]])
        beta = np.linalg.lstsq(X, data.y, rcond=None)[0]
        resid = data.y - X @ beta
        sigma2 = resid @ resid / (data.n - X.shape[1])
        se = np.sqrt(sigma2 * np.linalg.inv(X.T @ X)[-1, -1])
        assert stats.wald[k] == pytest.approx(abs(beta[-1]) / se, rel=1e-10)


def test_response_column_gets_unit_coefficient():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((30, 4))
    y = 2.0 + rng.standard_normal(30)
    x[:, 2] = y
    stats = screen_conditional(Dataset(x, y), ConditioningSet(()))
    assert stats.coef[2] == pytest.approx(1.0, abs=1e-12)
    assert np.argmin(stats.nll) == 2


@pytest.mark.parametrize("family", ["gaussian", "binomial_logit", "poisson"])
def test_likelihood_dominance(family):
    rng = np.random.default_rng(6)
    x = rng.standard_normal((80, 25))
    eta = 0.7 * x[:, 0] - 0.5 * x[:, 3]
    if family == "gaussian":
        y = eta + rng.standard_normal(80)
    elif family == "binomial_logit":
        y = (rng.random(80) < 1 / (1 + np.exp(-eta))).astype(float)
    else:
        y = rng.poisson(np.exp(eta)).astype(float)
    stats = screen_conditional(Dataset(x, y), ConditioningSet((0,)), family)
    assert stats.converged.all()
    assert np.all(stats.nll[stats.converged] <= stats.baseline_nll + 1e-10)


@pytest.mark.parametrize("family", ["binomial_logit", "poisson"])
def test_glm_sweep_matches_single_fits(family):
    rng = np.random.default_rng(7)
    x = rng.standard_normal((100, 8))
    eta = 0.5 * x[:, 1] + 0.4 * x[:, 5]
    y = (rng.random(100) < 1 / (1 + np.exp(-eta))).astype(float) if family == "binomial_logit" \
        else rng.poisson(np.exp(eta)).astype(float)
    data, cond = Dataset(x, y), ConditioningSet((1,))
    stats = screen_conditional(data, cond, family)
    base = cond.base_design(x)
    for k, j in enumerate(stats.candidates):
        res = fit_glm(FitProblem(np.column_stack([base, x[:, j]]), y, family))
        assert stats.coef[k] == pytest.approx(res.coefficients[-1], abs=1e-7)
        se = np.sqrt(np.linalg.inv(res.information)[-1, -1] / 100)
        assert stats.wald[k] == pytest.approx(abs(res.coefficients[-1]) / se, rel=1e-6)


def test_collinear_candidate_flagged():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((40, 4))
    x[:, 3] = 2 * x[:, 0] - 1.0
    y = x[:, 1] + rng.standard_normal(40)
    for family in ("gaussian", "binomial_logit"):
        yy = y if family == "gaussian" else (y > 0).astype(float)
        stats = screen_conditional(Dataset(x, yy), ConditioningSet((0,)), family)
        k = list(stats.candidates).index(3)
        assert stats.coef[k] == 0.0 and not stats.converged[k]
        assert rank_features(stats)[-1] == 3


def test_collinear_conditioning_set_rejected():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((20, 4))
    x[:, 1] = x[:, 0]
    with pytest.raises(RankDeficientError):
        screen_conditional(Dataset(x, rng.standard_normal(20)), ConditioningSet((0, 1)))


def test_orthogonal_residual_gives_zero():
    # build X_j whose residual on [1, X_C] is orthogonal to the residual of y
    rng = np.random.default_rng(10)
    n = 60
    xc = rng.standard_normal((n, 3))
    y = xc @ [1.0, 2.0, -1.0] + rng.standard_normal(n)
    base = np.column_stack([np.ones(n), xc])
    proj = base @ np.linalg.lstsq(base, np.eye(n), rcond=None)[0]
    r_y = y - proj @ y
    v = rng.standard_normal(n)
    v -= proj @ v
    v -= (v @ r_y) / (r_y @ r_y) * r_y
    xj = 0.3 * xc[:, 0] + v
    stats = screen_conditional(Dataset(np.column_stack([xc, xj]), y), ConditioningSet((0, 1, 2)))
    assert abs(stats.coef[0]) <= 1e-10


@pytest.mark.parametrize("seed", range(20))
def test_schur_complement_identity(seed):
    # beta_j = sample Cov_L(Y, X_j | X_C) / (Omega_jj - Omega_Cj' Omega_CC^-1 Omega_Cj)
    rng = np.random.default_rng(100 + seed)
    n, q = 40, 3
    x = rng.standard_normal((n, q + 5)) + rng.standard_normal((n, 1))
    y = x @ rng.normal(0, 1, q + 5) + rng.standard_normal(n)
    cond = ConditioningSet(tuple(range(q)))
    stats = screen_conditional(Dataset(x, y), cond)
    base = cond.base_design(x)
    y_fit_c = base @ np.linalg.solve(base.T @ base, base.T @ y)
    for k, j in enumerate(stats.candidates):
        Z = np.column_stack([base, x[:, j]])
        omega = Z.T @ Z / n
        cov_l = np.mean(x[:, j] * (y - y_fit_c))
        schur = omega[-1, -1] - omega[:-1, -1] @ np.linalg.solve(omega[:-1, :-1], omega[:-1, -1])
        assert stats.coef[k] == pytest.approx(cov_l / schur, abs=1e-8)


def test_select_by_magnitude_examples():
    s = _stats(coef=[0.5, 0.1, 0.3], idx=[1, 2, 3])
    assert set(select_by_magnitude(s, 0.2)) == {1, 3}
    assert set(select_by_magnitude(s, 0.0)) == {1, 2, 3}
    assert select_by_magnitude(s, np.inf).size == 0
    with pytest.raises(ValueError):
        select_by_magnitude(s, -1.0)


def test_select_by_likelihood_examples():
    s = _stats(nll=[0.9, 0.4], idx=[1, 2], baseline=1.0)
    assert set(select_by_likelihood(s, 0.5)) == {2}
    assert set(select_by_likelihood(s, s.baseline_nll + 1)) == {1, 2}
    assert select_by_likelihood(s, -np.inf).size == 0


def test_non_converged_never_selected():
    s = _stats(coef=[5.0, 1.0], nll=[0.0, 0.5], converged=[False, True])
    assert list(select_by_magnitude(s, 0.0)) == [1]
    assert list(select_by_likelihood(s, 10.0)) == [1]


def test_rank_examples():
    assert list(rank_features(_stats(coef=[0.1, 0.9, 0.5], idx=[7, 8, 9]))) == [8, 9, 7]
    assert list(rank_features(_stats(coef=[0.3, 0.3, 0.3], idx=[4, 2, 6]))) == [2, 4, 6]
    assert list(rank_features(_stats(nll=[0.2, 0.2, 0.1], idx=[7, 8, 9]), "likelihood")) == [9, 7, 8]
    assert list(rank_features(_stats(coef=[9.0, 0.1], converged=[False, True]))) == [1, 0]


@settings(max_examples=50)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30), st.floats(0, 5), st.floats(0, 5))
def test_nested_selection(coefs, g1, g2):
    g1, g2 = sorted((g1, g2))
    s = _stats(coef=coefs, nll=coefs)
    assert set(select_by_magnitude(s, g2)) <= set(select_by_magnitude(s, g1))
    assert set(select_by_likelihood(s, g1)) <= set(select_by_likelihood(s, g2))


@pytest.mark.parametrize("family", ["gaussian", "binomial_logit"])
def test_worker_count_bitwise_identical(family):
    spec = example_spec("ex1", family, p=900, seed=3)
    data = spec.generate(0)
    ref = screen_conditional(data, spec.conditioning, family, workers=1)
    for workers in (2, 4):
        other = screen_conditional(data, spec.conditioning, family, workers=workers)
        for attr in ("coef", "nll", "wald", "converged"):
            nptest.assert_array_equal(getattr(other, attr), getattr(ref, attr))


@pytest.mark.parametrize("family,atol", [("gaussian", 1e-12), ("binomial_logit", 1e-6)])
def test_block_partition_independence(monkeypatch, family, atol):
    spec = example_spec("ex1", family, p=600, seed=4)
    data = spec.generate(1)
    ref = screen_conditional(data, spec.conditioning, family)
    for size in (1, 50, 10_000):
        monkeypatch.setattr(screening, "CHUNK_SIZE", size)
        other = screen_conditional(data, spec.conditioning, family)
        nptest.assert_allclose(other.coef, ref.coef, atol=atol)
        nptest.assert_array_equal(other.converged, ref.converged)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.ones((1, 2)), np.ones(1))
    with pytest.raises(ValueError):
        Dataset(np.array([[1.0], [np.inf]]), np.ones(2))
    with pytest.raises(ValueError):
        ConditioningSet((1, 1))
    with pytest.raises(ValueError):
        ConditioningSet((5,)).candidates(3)
