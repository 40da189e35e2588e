"""
Test script for one-step / multi-step LLA, LQA, adaptive and MSA lasso
Run with: pytest test_estimators.py -v
"""

import numpy as np
import pytest

import config
import estimators
from dataset import Dataset, ResponseFamily
from errors import ValidationError
from estimators import (
    InitialMethod,
    adaptive_lasso,
    fit_initial,
    lasso,
    lqa_fit,
    msa_lasso,
    multi_step_lla,
    objective,
    one_step_lla,
    select_gamma,
    tune_adaptive,
)
from penalty import Family, PenaltySpec, lla_weights
from solver import Estimate, Provenance, soft_threshold
from tuning import TuneResult, cross_validate, kfold_assignments, lambda_grid


def orthonormal_data(z, n=40, seed=0):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, len(z))))
    return Dataset(Q, Q @ np.asarray(z, dtype=float), intercept=False)


def random_gaussian(n=60, p=8, seed=0, beta=(3.0, 1.5, 0.0, 0.0, 2.0), sigma=1.0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    b = np.zeros(p)
    b[: len(beta)] = beta[:p]
    return Dataset(X, X @ b + sigma * rng.standard_normal(n))


# -------------------- objective --------------------

def test_objective_null_model():
    """Test beta = 0 with the mean intercept gives half the total sum of squares"""
    data = random_gaussian(seed=1)
    value = objective(data, PenaltySpec(Family.L1, 2.0), np.zeros(data.p), data.y.mean())
    assert value == pytest.approx(0.5 * np.sum((data.y - data.y.mean()) ** 2))


def test_objective_l0_and_scad_plateau():
    """Test L0 adds k lambda^2/2 and SCAD adds p (a+1) lambda^2 / (2 scale) on its plateau"""
    data = random_gaussian(seed=2)
    beta = np.zeros(data.p)
    beta[[0, 3]] = [1.0, -2.0]
    base = objective(data, PenaltySpec(Family.L1, 0.0), beta, 0.0)
    assert objective(data, PenaltySpec(Family.L0, 1.5), beta, 0.0) == pytest.approx(base + 2 * 0.5 * 1.5 ** 2)

    big = np.full(data.p, 10.0)
    base_big = objective(data, PenaltySpec(Family.L1, 0.0), big, 0.0)
    scad = objective(data, PenaltySpec(Family.SCAD, 1.0), big, 0.0)
    # SCAD reads lambda per observation: scale * p_{lambda / scale}
    assert scad == pytest.approx(base_big + data.p * 0.5 * 4.7 / data.penalty_scale)


# -------------------- initial estimators --------------------

def test_ols_initial_interpolates_noiseless_data():
    """Test the OLS initial recovers beta* from y = X beta*"""
    data = random_gaussian(seed=3, sigma=0.0)
    beta = fit_initial(InitialMethod.OLS, data)
    assert beta[:5] == pytest.approx([3.0, 1.5, 0.0, 0.0, 2.0], abs=1e-10)


def test_ols_initial_refuses_wide_designs():
    """Test p >= n sends the caller to ridge or lasso"""
    rng = np.random.default_rng(0)
    data = Dataset(rng.standard_normal((10, 12)), rng.standard_normal(10))
    with pytest.raises(ValidationError) as exc_info:
        fit_initial("ols", data)
    assert "ridge" in exc_info.value.detail and "lasso" in exc_info.value.detail
    # ridge still works
    assert np.all(np.isfinite(fit_initial("ridge", data)))


def test_ridge_initial_approaches_ols():
    """Test ridge with a vanishing penalty is the OLS limit"""
    data = random_gaussian(seed=4)
    ols = fit_initial("ols", data)
    ridge = fit_initial("ridge", data, ridge_penalty=1e-10)
    assert ridge == pytest.approx(ols, abs=1e-6)


def test_lasso_initial_on_pure_noise_is_mostly_zero():
    """Test the CV lasso keeps most coefficients at zero when y is noise"""
    zero_share = []
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        data = Dataset(rng.standard_normal((100, 8)), rng.standard_normal(100))
        beta = fit_initial("lasso", data, seed=seed, n_lambdas=20)
        zero_share.append(np.mean(beta == 0))
    assert np.mean(zero_share) > 0.5


def test_enet_initial_gaussian_and_binomial():
    """Test the elastic-net initial gives finite vectors for both families"""
    data = random_gaussian(seed=5)
    beta = fit_initial("enet", data, n_lambdas=10)
    assert beta.shape == (data.p,) and np.all(np.isfinite(beta))

    rng = np.random.default_rng(5)
    X = rng.standard_normal((150, 4))
    y = (rng.uniform(size=150) < 1 / (1 + np.exp(-2 * X[:, 0]))).astype(float)
    binomial = Dataset(X, y, family=ResponseFamily.BINOMIAL)
    assert np.all(np.isfinite(fit_initial("enet", binomial, n_lambdas=10)))
    assert np.all(np.isfinite(fit_initial("ridge", binomial)))


# -------------------- one-step LLA --------------------

def test_one_step_l1_ignores_initial():
    """Test one-step LLA with L1 is the plain lasso for any beta0"""
    data = random_gaussian(seed=6)
    spec = PenaltySpec(Family.L1, 5.0)
    reference = lasso(data, 5.0).beta
    for beta0 in (np.zeros(data.p), np.arange(data.p, dtype=float), -np.ones(data.p)):
        assert one_step_lla(data, spec, beta0).beta == pytest.approx(reference, abs=1e-8)


def test_one_step_scad_keeps_large_ols_coefficients():
    """Test SCAD leaves coefficients beyond a*lambda unchanged"""
    z = np.array([5.0, -4.5, 6.0])
    data = orthonormal_data(z)
    est = one_step_lla(data, PenaltySpec(Family.SCAD, 1.0), z)
    assert est.beta == pytest.approx(z, abs=1e-10)


def test_one_step_scad_from_zero_is_lasso():
    """Test beta0 = 0 gives uniform weights lambda, i.e. the lasso"""
    data = random_gaussian(seed=7)
    est = one_step_lla(data, PenaltySpec(Family.SCAD, 4.0), np.zeros(data.p))
    assert est.beta == pytest.approx(lasso(data, 4.0).beta, abs=1e-8)


def test_one_step_lars_route_matches_cd():
    """Test the LARS subproblem route agrees with coordinate descent"""
    data = random_gaussian(seed=8)
    beta0 = fit_initial("ols", data)
    spec = PenaltySpec(Family.SCAD, 0.1 * lambda_grid(data)[0])
    cd = one_step_lla(data, spec, beta0, solver="cd")
    lars = one_step_lla(data, spec, beta0, solver="lars")
    assert lars.beta == pytest.approx(cd.beta, abs=1e-6)


def test_one_step_fully_excluded():
    """Test all-infinite weights return the null model with a flag"""
    data = random_gaussian(seed=9)
    est = one_step_lla(data, PenaltySpec(Family.ADAPTIVE, 1.0), np.zeros(data.p))
    assert est.active_set == ()
    assert "fully_excluded" in est.flags
    assert est.intercept == pytest.approx(data.y.mean())


def test_scad_unbiasedness_on_orthonormal_designs():
    """Test one-step SCAD equals OLS when every |OLS_j| >= a*lambda"""
    for seed in range(10):
        rng = np.random.default_rng(seed)
        z = rng.choice([-1.0, 1.0], 6) * rng.uniform(1.0, 5.0, 6)
        data = orthonormal_data(z, seed=seed)
        lam = np.min(np.abs(z)) / 3.8
        est = one_step_lla(data, PenaltySpec(Family.SCAD, lam), z)
        assert np.max(np.abs(est.beta - z)) <= 1e-10


def test_one_step_binomial():
    """Test one-step SCAD on logistic data through IRLS"""
    rng = np.random.default_rng(10)
    X = rng.standard_normal((300, 5))
    y = (rng.uniform(size=300) < 1 / (1 + np.exp(-(2 * X[:, 0] - X[:, 1])))).astype(float)
    data = Dataset(X, y, family=ResponseFamily.BINOMIAL)
    beta0 = fit_initial("ols", data)
    est = one_step_lla(data, PenaltySpec(Family.SCAD, 5.0), beta0)
    assert {0, 1} <= set(est.active_set)
    assert np.isfinite(est.objective)


# -------------------- multi-step LLA --------------------

def test_multi_step_l1_fixpoint():
    """Test L1 converges after the first step"""
    for seed in range(10):
        data = random_gaussian(seed=seed)
        spec = PenaltySpec(Family.L1, 0.2 * lambda_grid(data)[0])
        trajectory = multi_step_lla(data, spec, fit_initial("ols", data), max_steps=5)
        assert trajectory.converged
        assert trajectory.steps == 1
        again = one_step_lla(data, spec, trajectory.final.beta)
        assert np.max(np.abs(again.beta - trajectory.final.beta)) <= 1e-8


def test_multi_step_first_iterate_is_one_step():
    """Test iterate 1 is bit-identical to one_step_lla"""
    data = random_gaussian(seed=11)
    beta0 = fit_initial("ols", data)
    spec = PenaltySpec(Family.MCP, 0.1 * lambda_grid(data)[0])
    trajectory = multi_step_lla(data, spec, beta0, max_steps=1)
    single = one_step_lla(data, spec, beta0)
    assert trajectory.steps == 1
    assert np.array_equal(trajectory.iterates[1].beta, single.beta)
    assert np.array_equal(trajectory.iterates[0].beta, beta0)


@pytest.mark.parametrize("family", [Family.SCAD, Family.MCP, Family.L1])
def test_multi_step_objective_is_nonincreasing(family):
    """Test the MM descent property on random Gaussian data"""
    for seed in range(30):
        data = random_gaussian(seed=200 + seed)
        beta0 = fit_initial("ols", data)
        lam = float(np.random.default_rng(seed).uniform(0.02, 0.3)) * lambda_grid(data)[0]
        trajectory = multi_step_lla(data, PenaltySpec(family, lam), beta0)
        obj = np.array(trajectory.objectives)
        slack = 1e-10 * np.maximum(1.0, np.abs(obj[:-1]))
        assert np.all(obj[1:] <= obj[:-1] + slack)


def test_lla_resurrects_what_lqa_drops():
    """Test LQA drops a zero-initialised variable for good while LLA brings it back"""
    data = orthonormal_data([3.0, 2.0, 0.0])
    spec = PenaltySpec(Family.SCAD, 0.5)
    init = np.array([3.0, 0.0, 0.0])

    lqa = lqa_fit(data, spec, init)
    assert lqa.beta[1] == 0.0

    trajectory = multi_step_lla(data, spec, init)
    assert 1 in trajectory.final.active_set
    assert trajectory.final.beta[1] == pytest.approx(2.0, abs=1e-8)
    assert trajectory.iterates[1].beta[1] == pytest.approx(1.5, abs=1e-8)


# -------------------- adaptive lasso --------------------

def test_adaptive_zero_initial_forces_zero():
    """Test beta0_j = 0 with epsilon = 0 keeps beta_j at exactly zero"""
    for seed in range(30):
        rng = np.random.default_rng(seed)
        data = random_gaussian(seed=300 + seed)
        beta0 = rng.standard_normal(data.p)
        zeros = rng.choice(data.p, size=3, replace=False)
        beta0[zeros] = 0.0
        est = adaptive_lasso(data, float(rng.choice([0.5, 1.0, 2.0])), 0.5, beta0)
        assert np.all(est.beta[zeros] == 0.0)


def test_adaptive_tiny_gamma_is_lasso():
    """Test gamma -> 0 makes every weight lambda"""
    data = random_gaussian(seed=12)
    beta0 = fit_initial("ols", data)
    est = adaptive_lasso(data, 1e-9, 3.0, beta0)
    assert est.beta == pytest.approx(lasso(data, 3.0).beta, abs=1e-6)


def test_adaptive_recovers_orthonormal_support():
    """Test noiseless orthonormal data: sign and support recovered with gamma = 1"""
    z = np.array([2.0, 0.0, -1.0, 0.0, 3.0])
    data = orthonormal_data(z)
    est = adaptive_lasso(data, 1.0, 0.01, z)
    assert est.active_set == (0, 2, 4)
    assert np.array_equal(np.sign(est.beta), np.sign(z))
    # weighted soft-thresholding closed form
    expected = soft_threshold(z, 0.01 / np.where(z != 0, np.abs(z), 1.0))
    assert est.beta == pytest.approx(np.where(z != 0, expected, 0.0), abs=1e-10)


def test_adaptive_reports_surrogate_objective():
    """Test gamma >= 1 reports the weighted-L1 criterion with a flag"""
    data = random_gaussian(seed=13)
    beta0 = fit_initial("ols", data)
    est = adaptive_lasso(data, 1.0, 0.5, beta0)
    assert "surrogate_objective" in est.flags
    weights = lla_weights(PenaltySpec(Family.ADAPTIVE, 0.5, shape=1.0), beta0)
    resid = data.y - est.intercept - data.X @ est.beta
    assert est.objective == pytest.approx(0.5 * resid @ resid + np.sum(weights * np.abs(est.beta)), rel=1e-10)


def test_select_gamma_single_value_reduces_to_cv():
    """Test a one-point gamma grid is CV of the adaptive lasso"""
    data = random_gaussian(seed=14)
    beta0 = fit_initial("ols", data)
    chosen = select_gamma(data, beta0, gamma_grid=[1.0], seed=3, n_lambdas=10)

    unit = lla_weights(PenaltySpec(Family.ADAPTIVE, 1.0, shape=1.0), beta0)
    grid = lambda_grid(data, unit, n_lambdas=10)
    cv = cross_validate(lambda train, lam: adaptive_lasso(train, 1.0, lam, beta0), data, grid,
                        folds=kfold_assignments(data.n, 5, 3))
    assert chosen.gamma_best == 1.0
    assert chosen.lambda_best == cv.lambda_best


def test_select_gamma_default_grid():
    """Test the default grid returns a grid value with a finite score"""
    data = random_gaussian(seed=15)
    chosen = select_gamma(data, fit_initial("ols", data), n_lambdas=10)
    assert chosen.gamma_best in (0.5, 1.0, 2.0)
    assert all(np.isfinite(s) for s in chosen.scores.values())


def test_zero_initial_skips_tuning():
    """Test an all-zero initial returns the fully excluded null model without a lambda grid"""
    data = random_gaussian(seed=18)
    zero = np.zeros(data.p)
    for tuner in ("cv", "bic"):
        tuned = tune_adaptive(data, 1.0, zero, tuner=tuner)
        assert np.isnan(tuned.lambda_best)
        assert tuned.estimate.active_set == ()
        assert "fully_excluded" in tuned.estimate.flags
        assert tuned.estimate.intercept == pytest.approx(data.y.mean())

    chosen = select_gamma(data, zero)
    assert np.isnan(chosen.lambda_best)
    assert chosen.gamma_best == 0.5
    assert "fully_excluded" in chosen.estimate.flags


def test_tune_adaptive_matches_manual_cv():
    """Test tune_adaptive is CV over the adaptive grid when the initial has support"""
    data = random_gaussian(seed=19)
    beta0 = fit_initial("ols", data)
    tuned = tune_adaptive(data, 1.0, beta0, seed=4)
    unit = lla_weights(PenaltySpec(Family.ADAPTIVE, 1.0, shape=1.0), beta0)
    cv = cross_validate(lambda train, lam: adaptive_lasso(train, 1.0, lam, beta0), data,
                        lambda_grid(data, unit), seed=4)
    assert tuned.lambda_best == cv.lambda_best


# -------------------- MSA-LASSO --------------------

def test_msa_single_step_is_adaptive_lasso_from_lasso_cv():
    """Test one MSA step is the adaptive lasso (gamma = 1) started at the CV lasso"""
    data = random_gaussian(seed=16)
    trajectory = msa_lasso(data, steps=1, seed=2, n_lambdas=15)
    start = trajectory.iterates[0]
    reference = estimators.lasso_cv(data, seed=2, n_lambdas=15).estimate
    assert np.array_equal(start.beta, reference.beta)
    if trajectory.steps == 1:
        refit = adaptive_lasso(data, 1.0, trajectory.lambdas[1], start.beta, epsilon=config.MSA_EPSILON)
        assert trajectory.final.beta == pytest.approx(refit.beta, abs=1e-12)
    assert len(trajectory.lambdas) == len(trajectory.iterates)


def test_msa_stops_on_empty_model(monkeypatch):
    """Test an empty starting model ends MSA-LASSO with a flag"""
    data = random_gaussian(seed=17)
    empty = Estimate(np.zeros(data.p), data.y.mean(), Provenance("lasso"), 0.0)
    monkeypatch.setattr(estimators, "lasso_cv", lambda *a, **k: TuneResult(10.0, empty))
    trajectory = msa_lasso(data, steps=3)
    assert trajectory.steps == 0
    assert "empty_model" in trajectory.flags


def test_msa_on_pure_noise_ends_empty():
    """Test beta* = 0 leaves MSA-LASSO with an empty model in most seeds"""
    empty = 0
    for seed in range(20):
        data = random_gaussian(n=80, seed=400 + seed, beta=())
        trajectory = msa_lasso(data, steps=3, seed=seed, n_lambdas=15)
        empty += int(trajectory.final.active_set == ())
    assert empty > 10


def test_msa_false_positives_do_not_rise():
    """Test average false positives are nonincreasing across MSA steps on a strong signal"""
    truth = (10.0, -10.0, 0.0, 0.0, 10.0, 0.0, 0.0, 0.0)
    support = {0, 1, 4}
    counts = np.zeros(4)
    for seed in range(10):
        data = random_gaussian(n=200, seed=500 + seed, beta=truth)
        trajectory = msa_lasso(data, steps=3, seed=seed, n_lambdas=20)
        assert trajectory.steps == 3
        counts += [len(set(e.active_set) - support) for e in trajectory.iterates]
    assert np.all(np.diff(counts) <= 0)


# -------------------- LQA --------------------

def test_lqa_l1_matches_soft_threshold():
    """Test LQA with L1 on an orthonormal design approaches soft-thresholding"""
    z = np.array([3.0, -2.0, 0.4, 1.2])
    data = orthonormal_data(z)
    est = lqa_fit(data, PenaltySpec(Family.L1, 1.0), z, max_iter=2000)
    assert est.beta == pytest.approx(soft_threshold(z, 1.0), abs=1e-4)
    assert est.beta[2] == 0.0


def test_lqa_large_tau_drops_everything():
    """Test tau above every |init_j| gives the all-zero estimate with a flag"""
    data = random_gaussian(seed=18)
    est = lqa_fit(data, PenaltySpec(Family.SCAD, 1.0), np.full(data.p, 0.5), tau=1.0)
    assert est.active_set == ()
    assert "all_dropped" in est.flags


def test_lqa_requires_gaussian():
    """Test LQA rejects binomial data"""
    X = np.random.default_rng(0).standard_normal((20, 2))
    data = Dataset(X, (X[:, 0] > 0).astype(float), family=ResponseFamily.BINOMIAL)
    with pytest.raises(ValidationError):
        lqa_fit(data, PenaltySpec(Family.SCAD, 1.0), np.ones(2))


# -------------------- equivariance --------------------

@pytest.mark.parametrize("c", [0.5, 2.0])
def test_lasso_scale_equivariance(c):
    """Test scaling y and lambda by c scales the lasso estimate by c"""
    data = random_gaussian(seed=19)
    scaled = Dataset(data.X, c * data.y)
    base = lasso(data, 4.0).beta
    assert lasso(scaled, 4.0 * c).beta == pytest.approx(c * base, abs=1e-7)


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
