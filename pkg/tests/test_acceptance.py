"""Acceptance gate: one PASS/FAIL line per criterion, shown in the terminal summary."""
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from csis.cli import main
from csis.datagen import example_spec, write_csv
from csis.glm import FitProblem, fit_glm, neg_loglik, score
from csis.harness import RunConfig, run_experiment
from csis.metrics import conditional_eigen_ratio
from csis.rng import make_rng
from csis.screening import ConditioningSet, Dataset, screen_conditional
from csis.thresholding import ThresholdRule, fdr_select

SEED = 7
pytestmark = pytest.mark.slow


def record(label, ok, detail, started):
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail} [{time.perf_counter() - started:.1f}s]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _rows(example, family, reps, methods=("SIS", "CSIS"), **kw):
    spec = example_spec(example, family, replications=reps, seed=SEED, **kw)
    return {r.method: r for r in run_experiment(RunConfig(spec, methods=methods, workers=4))}


def test_c1_example1_gaussian():
    t = time.perf_counter()
    rows = _rows("ex1", "gaussian", 50)
    csis, sis = rows["CSIS"], rows["SIS"]
    ok = csis.mmms == 1 and csis.rsd == 0 and sis.mmms >= 1900
    record("C1 ex1 gaussian 50 reps", ok,
           f"CSIS {csis.mmms:g} ({csis.rsd:g}), SIS {sis.mmms:g} ({sis.rsd:g})", t)


def test_c2_example2_gaussian():
    t = time.perf_counter()
    rows = _rows("ex2", "gaussian", 50)
    csis, sis = rows["CSIS"], rows["SIS"]
    ok = csis.mmms == 1 and sis.mmms >= 1990
    record("C2 ex2 gaussian 50 reps", ok,
           f"CSIS {csis.mmms:g} ({csis.rsd:g}), SIS {sis.mmms:g} ({sis.rsd:g})", t)


def test_c3_example1_binomial():
    t = time.perf_counter()
    rows = _rows("ex1", "binomial_logit", 30)
    csis, sis = rows["CSIS"], rows["SIS"]
    ok = csis.mmms == 1 and sis.mmms >= 1900
    record("C3 ex1 binomial 30 reps", ok,
           f"CSIS {csis.mmms:g} ({csis.rsd:g}), SIS {sis.mmms:g} ({sis.rsd:g}), "
           f"failed {csis.failed}, flagged {csis.flagged}", t)


def test_c4_eigen_formula_oracle():
    t = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(20):
        r, q, d = rng.uniform(0, 0.99), int(rng.integers(0, 40)), int(rng.integers(1, 201))
        k = q + d
        sigma = (1 - r) * np.eye(k) + r * np.ones((k, k))
        cond = sigma[q:, q:]
        if q:
            cond = cond - sigma[q:, :q] @ np.linalg.solve(sigma[:q, :q], sigma[:q, q:])
        numeric = np.linalg.eigvalsh(cond)[-1]
        worst = max(worst, abs(conditional_eigen_ratio(r, q, d)[1] - numeric) / numeric)
    record("C4 conditional eigenvalue formula", worst <= 1e-10, f"max rel err {worst:.2e}", t)


def _null_replication(r):
    # beta_D = 0; the two conditioning columns carry the signal
    rng = make_rng(SEED, "null-design", r)
    x = rng.standard_normal((200, 502))
    y = 1.0 * x[:, 0] - 1.0 * x[:, 1] + rng.standard_normal(200)
    return Dataset(x, y), ConditioningSet((0, 1))


def test_c5_fdr_null_control():
    t = time.perf_counter()
    fps = []
    for r in range(200):
        data, cond = _null_replication(r)
        stats = screen_conditional(data, cond)
        assert stats.d == 500
        fps.append(fdr_select(stats, 10.0)[1].size)
    mean = float(np.mean(fps))
    record("C5 FDR null, n=200 d=500 f=10", 5 <= mean <= 20, f"mean FP {mean:.2f} (target 10)", t)


def test_c6_decoupling_null_control():
    t = time.perf_counter()
    fps = []
    for r in range(200):
        data, cond = _null_replication(r)
        stats = screen_conditional(data, cond)
        rule = ThresholdRule("decoupling", K=5, tau=0.99, seed=r)
        fps.append(rule.apply(stats, data, cond, "gaussian")[1].size)
    mean = float(np.mean(fps))
    record("C6 decoupling null, K=5 tau=0.99", mean <= 15, f"mean FP {mean:.2f} (bound 15)", t)


def test_c7_linear_identities():
    t = time.perf_counter()
    rng = np.random.default_rng(SEED)
    n = 80
    xc = rng.standard_normal((n, 3))
    y = xc @ [1.0, -2.0, 0.5] + rng.standard_normal(n)
    base = np.column_stack([np.ones(n), xc])
    hat = base @ np.linalg.pinv(base)
    r_y = y - hat @ y
    v = rng.standard_normal(n)
    v -= hat @ v
    v -= (v @ r_y) / (r_y @ r_y) * r_y
    xj = 0.7 * xc[:, 1] - 0.2 * xc[:, 2] + v
    beta_orth = abs(screen_conditional(Dataset(np.column_stack([xc, xj]), y), ConditioningSet((0, 1, 2))).coef[0])

    worst = 0.0
    for _ in range(20):
        x = rng.standard_normal((60, 10)) + rng.standard_normal((60, 1))
        y = x @ rng.normal(0, 1, 10) + rng.standard_normal(60)
        cond = ConditioningSet((0, 1, 2))
        stats = screen_conditional(Dataset(x, y), cond)
        base = cond.base_design(x)
        resid_y = y - base @ np.linalg.lstsq(base, y, rcond=None)[0]
        for k, j in enumerate(stats.candidates):
            z = np.column_stack([base, x[:, j]])
            om = z.T @ z / 60
            schur = om[-1, -1] - om[:-1, -1] @ np.linalg.solve(om[:-1, :-1], om[:-1, -1])
            worst = max(worst, abs(stats.coef[k] - np.mean(x[:, j] * resid_y) / schur))
    ok = beta_orth <= 1e-10 and worst <= 1e-8
    record("C7 orthogonal-residual zero and Schur identity", ok,
           f"|beta| {beta_orth:.1e}, identity max err {worst:.1e}", t)


def test_c8_solver_properties():
    t = time.perf_counter()
    rng = np.random.default_rng(SEED)
    ls_err = 0.0
    for _ in range(100):
        n, m = int(rng.integers(10, 60)), int(rng.integers(2, 8))
        X = np.column_stack([np.ones(n), rng.standard_normal((n, m - 1))])
        y = rng.standard_normal(n) * 5
        oracle = np.linalg.lstsq(X, y, rcond=None)[0]
        ls_err = max(ls_err, np.max(np.abs(fit_glm(FitProblem(X, y)).coefficients - oracle)))
    fd_err = 0.0
    for fam in ("gaussian", "binomial_logit", "poisson"):
        X = np.column_stack([np.ones(40), rng.standard_normal((40, 3))])
        y = rng.poisson(1.0, 40).astype(float) if fam == "poisson" else (rng.random(40) < 0.5).astype(float)
        beta = rng.normal(0, 0.5, 4)
        g = score(fam, X, y, beta)
        h = 1e-6
        fd = np.array([(neg_loglik(fam, X @ (beta + h * e), y) - neg_loglik(fam, X @ (beta - h * e), y)) / (2 * h)
                       for e in np.eye(4)])
        fd_err = max(fd_err, np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1e-3)))
    monotone = True
    for _ in range(20):
        X = np.column_stack([np.ones(150), rng.standard_normal((150, 4))])
        y = (rng.random(150) < 1 / (1 + np.exp(-X @ rng.normal(0, 1.5, 5)))).astype(float)
        trace = fit_glm(FitProblem(X, y, "binomial_logit")).objective_trace
        monotone &= bool(np.all(np.diff(trace) <= 0))
    ok = ls_err <= 1e-8 and fd_err <= 1e-5 and monotone
    record("C8 solver properties", ok,
           f"lstsq err {ls_err:.1e}, score FD rel err {fd_err:.1e}, monotone {monotone}", t)


def test_c9_determinism(tmp_path, capsys):
    t = time.perf_counter()
    sim = ["simulate", "--example", "ex1", "--p", "500", "--reps", "4", "--seed", str(SEED),
           "--format", "csv", "--no-timing"]
    data = tmp_path / "d.csv"
    write_csv(example_spec("ex1", "binomial_logit", p=300, seed=SEED).generate(0), data)
    scr = ["screen", "--input", str(data), "--cond", "x1,x2,x3,x4,x5", "--rule", "decoupling", "--seed", str(SEED)]
    cases = {
        "sim-gauss": sim,
        "sim-binom": sim + ["--family", "binomial_logit"],
        "screen-csis": scr,
        "screen-cmlr": scr + ["--method", "cmlr", "--family", "binomial_logit"],
    }
    same = True
    for name, argv in cases.items():
        bodies = []
        for workers in ("1", "3", "1"):
            assert main(argv + ["--workers", workers]) == 0
            bodies.append(capsys.readouterr().out)
        same &= len(set(bodies)) == 1 and len(bodies[0]) > 0
    record("C9 byte-identical reports across worker counts", same, f"{len(cases)} invocations x 3 runs", t)


@pytest.mark.parametrize("rho", [0.4, 0.8])
def test_example3_ordinal(rho):
    t = time.perf_counter()
    rows = _rows("ex3", "gaussian", 20, p=1000, rho=rho)
    csis, sis = rows["CSIS"], rows["SIS"]
    record(f"ex3 p=1000 rho={rho} CSIS <= SIS", csis.mmms <= sis.mmms,
           f"CSIS {csis.mmms:g} ({csis.rsd:.1f}), SIS {sis.mmms:g} ({sis.rsd:.1f})", t)
