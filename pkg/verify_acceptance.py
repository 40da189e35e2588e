import filecmp
import os
import tempfile
import time

import numpy as np

from cli import main as cli_main
from dataset import Dataset
from errors import SparseEstimationError
from estimators import adaptive_lasso, fit_initial, lqa_fit, multi_step_lla, one_step_lla
from oracle import best_subset_l0, exact_recovery_check, hard_threshold_oracle, recovery_design
from penalty import Family, PenaltySpec
from simulation import EstimatorConfig, ScenarioSpec, run_comparison
from solver import WeightedL1Problem, kkt_check, lars_path, max_lambda, solve_weighted_lasso_cd


def random_instance(rng, max_n=100, max_p=20, min_extra=2):
    p = int(rng.integers(2, max_p + 1))
    n = int(rng.integers(p + min_extra, max(p + min_extra, max_n) + 1))
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    k = int(rng.integers(1, p + 1))
    beta[:k] = rng.choice([-1.0, 1.0], k) * rng.uniform(0.5, 3.0, k)
    return Dataset(X, X @ beta + rng.standard_normal(n))


def orthonormal(rng, n, z):
    Q, _ = np.linalg.qr(rng.standard_normal((n, len(z))))
    return Dataset(Q, Q @ z, intercept=False)


def check_l1_fixpoint():
    rng = np.random.default_rng(1)
    for _ in range(200):
        data = random_instance(rng)
        spec = PenaltySpec(Family.L1, float(rng.uniform(0.05, 0.5)) * max_lambda(data))
        first = multi_step_lla(data, spec, fit_initial("ols", data), max_steps=1).final
        beta = first.beta
        for _ in range(4):
            beta = one_step_lla(data, spec, beta).beta
            if np.max(np.abs(beta - first.beta)) > 1e-8:
                return False
    return True


def check_solver_agreement():
    rng = np.random.default_rng(2)
    for _ in range(100):
        data = random_instance(rng, max_n=100, max_p=30, min_extra=1)
        weights = rng.uniform(0.5, 2.0, data.p)
        path = lars_path(data, weights)
        for lam, beta_path in zip(path.breakpoints, path.coefficients):
            prob = WeightedL1Problem(data, float(lam), weights)
            est = solve_weighted_lasso_cd(prob)
            scale = max(1.0, float(np.max(np.abs(beta_path))))
            if np.max(np.abs(beta_path - est.beta)) > 1e-6 * scale or kkt_check(prob, est.beta) > 1e-8:
                return False
    return True


def check_mm_monotone():
    rng = np.random.default_rng(3)
    violations = 0
    for i in range(200):
        data = random_instance(rng)
        family = Family.SCAD if i % 2 == 0 else Family.MCP
        spec = PenaltySpec(family, float(rng.uniform(0.02, 0.3)) * max_lambda(data))
        obj = np.array(multi_step_lla(data, spec, fit_initial("ols", data)).objectives)
        slack = 1e-10 * np.maximum(1.0, np.abs(obj[:-1]))
        violations += int(np.sum(obj[1:] > obj[:-1] + slack))
    print(f"  monotonicity violations: {violations}")
    return violations == 0


def check_scad_unbiased():
    rng = np.random.default_rng(4)
    for _ in range(50):
        p = int(rng.integers(2, 10))
        z = rng.choice([-1.0, 1.0], p) * rng.uniform(1.0, 5.0, p)
        data = orthonormal(rng, 40, z)
        lam = float(np.min(np.abs(z))) / 3.8
        if np.max(np.abs(one_step_lla(data, PenaltySpec(Family.SCAD, lam), z).beta - z)) > 1e-10:
            return False
    return True


def check_l0_l1_equivalence():
    rng = np.random.default_rng(5)
    done, agree = 0, 0
    while done < 100:
        p = int(rng.integers(4, 17))
        k = int(rng.integers(1, 3))
        X, beta = recovery_design(64, p, k, kind="rademacher", seed=int(rng.integers(2 ** 31)))
        record = exact_recovery_check(X, beta)
        if not record.bound_satisfied:
            continue
        done += 1
        agree += int(record.l1_support == record.l0_support)
    print(f"  agreement: {agree}/{done}")
    return agree == done


def check_exhaustive_oracle():
    rng = np.random.default_rng(6)
    for _ in range(50):
        p = int(rng.integers(2, 13))
        z = rng.standard_normal(p) * 2
        data = orthonormal(rng, 30, z)
        lam = float(rng.uniform(0.5, 2.0))
        solution = best_subset_l0(data, lam)
        expected = hard_threshold_oracle(z, lam)
        if solution.subset != tuple(np.flatnonzero(expected)):
            return False
        if np.max(np.abs(solution.beta - expected), initial=0.0) > 1e-10:
            return False
    return True


def check_simulation_direction():
    battery = [
        EstimatorConfig("lasso_cv", "lasso"),
        EstimatorConfig("one_step_scad", "one_step", penalty="scad"),
        EstimatorConfig("lla_scad", "lla", penalty="scad"),
    ]
    report = run_comparison(battery, ScenarioSpec(), reps=100, seed=2024, n_jobs=4)
    table = report.aggregates.set_index("estimator")
    print(table[["mean_ME", "median_ME", "mean_FP", "mean_FN"]].to_string())
    fp_ok = table.loc["one_step_scad", "mean_FP"] < table.loc["lasso_cv", "mean_FP"]
    me_ok = table.loc["one_step_scad", "mean_ME"] <= 1.1 * table.loc["lla_scad", "mean_ME"]
    return bool(fp_ok and me_ok)


def check_lqa_exhibit():
    data = orthonormal(np.random.default_rng(0), 40, np.array([3.0, 2.0, 0.0]))
    spec = PenaltySpec(Family.SCAD, 0.5)
    init = np.array([3.0, 0.0, 0.0])
    lqa = lqa_fit(data, spec, init)
    lla = multi_step_lla(data, spec, init).final
    print(f"  LQA beta: {np.round(lqa.beta, 6)}  LLA beta: {np.round(lla.beta, 6)}")
    return lqa.beta[1] == 0.0 and 1 in lla.active_set


def check_determinism():
    with tempfile.TemporaryDirectory() as tmp:
        runs = []
        for name, threads in (("a", "1"), ("b", "1"), ("c", "4")):
            out = os.path.join(tmp, name)
            code = cli_main(["simulate", "--reps", "20", "--seed", "7", "--threads", threads, "--out", out])
            if code != 0:
                return False
            runs.append(out)
        files = ("simulation.json", "summary.csv", "config.json")
        return all(
            filecmp.cmp(os.path.join(runs[0], f), os.path.join(other, f), shallow=False)
            for other in runs[1:] for f in files
        )


def check_adaptive_exclusion():
    rng = np.random.default_rng(8)
    for _ in range(100):
        data = random_instance(rng)
        beta0 = rng.standard_normal(data.p)
        zeros = rng.random(data.p) < 0.4
        beta0[zeros] = 0.0
        if np.all(zeros):
            continue
        est = adaptive_lasso(data, float(rng.choice([0.5, 1.0, 2.0])), float(rng.uniform(0.1, 5.0)), beta0)
        if np.any(est.beta[zeros] != 0.0):
            return False
    return True


CHECKS = [
    ("L1 one-step fixpoint", check_l1_fixpoint),
    ("LARS / CD agreement", check_solver_agreement),
    ("MM monotonicity", check_mm_monotone),
    ("SCAD unbiasedness", check_scad_unbiased),
    ("L0/L1 equivalence", check_l0_l1_equivalence),
    ("exhaustive oracle consistency", check_exhaustive_oracle),
    ("simulation direction", check_simulation_direction),
    ("LQA vs LLA exhibit", check_lqa_exhibit),
    ("determinism", check_determinism),
    ("adaptive exclusion", check_adaptive_exclusion),
]


if __name__ == "__main__":
    failed = []
    for name, check in CHECKS:
        print(f"{name}...")
        start = time.perf_counter()
        try:
            ok = check()
        except SparseEstimationError as e:
            print(f"  error: {e.detail}")
            ok = False
        print(f"  {'PASS' if ok else 'FAIL'} ({time.perf_counter() - start:.1f}s)")
        if not ok:
            failed.append(name)

    if failed:
        print(f"\nFailed: {', '.join(failed)}")
        raise SystemExit(1)
    print("\nAll acceptance checks passed!")
