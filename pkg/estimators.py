"""
Sparse estimators built on the weighted-L1 and weighted-ridge solvers.

One-step LLA takes an initial estimate beta0 and solves a single weighted
lasso with w_j = p'_lambda(|beta0_j|); multi-step LLA repeats that with the
previous iterate as the weight source. LQA replaces the tangent line with a
quadratic and needs a threshold to produce zeros. Adaptive LASSO and MSA-LASSO
are weighted lassos with weights from an initial fit.

All estimators work on the scale of the Dataset they are given; use
``Dataset.standardize`` / ``Dataset.to_original_scale`` around them.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit
from sklearn.linear_model import ElasticNet, LogisticRegression

import config
from dataset import Dataset
from errors import (
    ComputationError,
    NonConvergenceError,
    SeparationError,
    SingularPenaltyError,
    ValidationError,
)
from penalty import Family, PenaltySpec, lla_weights, lqa_coefficient, penalty_value
from solver import (
    Estimate,
    Provenance,
    WeightedL1Problem,
    irls_penalized,
    kkt_check,
    lars_path,
    solve_ridge_weighted,
    solve_weighted_lasso_cd,
)
from tuning import CvResult, TuneResult, cross_validate, kfold_assignments, lambda_grid, tune_lambda

logger = logging.getLogger(__name__)

SOLVERS = ("cd", "lars")


class InitialMethod(str, Enum):
    OLS = "ols"
    RIDGE = "ridge"
    LASSO = "lasso"
    ENET = "enet"


@dataclass(frozen=True, eq=False)
class LlaTrajectory:
    """Iterates of a multi-step fit; ``iterates[0]`` is the starting point."""

    iterates: Tuple[Estimate, ...]
    objectives: Tuple[float, ...]
    converged: bool
    lambdas: Tuple[float, ...] = ()
    flags: Tuple[str, ...] = ()

    @property
    def steps(self) -> int:
        return len(self.iterates) - 1

    @property
    def final(self) -> Estimate:
        return self.iterates[-1]

    def to_json(self) -> Dict[str, Any]:
        return {
            "steps": self.steps,
            "converged": self.converged,
            "objectives": [o if np.isfinite(o) else None for o in self.objectives],
            "lambdas": list(self.lambdas),
            "active_sizes": [len(e.active_set) for e in self.iterates],
            "flags": list(self.flags),
            "iterates": [e.to_json() for e in self.iterates],
        }


@dataclass(frozen=True, eq=False)
class GammaSelection:
    gamma_best: float
    lambda_best: float
    estimate: Estimate
    scores: Dict[float, float] = field(default_factory=dict)
    cv: Dict[float, CvResult] = field(default_factory=dict)


# -------------------- Objective --------------------

def objective(data: Dataset, spec: PenaltySpec, beta: np.ndarray, intercept: float) -> float:
    """Penalized criterion: loss at (beta, intercept) plus sum_j p_lambda(|beta_j|).

    The loss is 1/2 ||y - intercept - X beta||^2 for Gaussian data and the
    negative log-likelihood for Binomial data.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (data.p,) or not np.all(np.isfinite(beta)):
        raise ValidationError("beta must be a finite vector of length p")
    eta = intercept + data.X @ beta
    if data.is_gaussian:
        resid = data.y - eta
        loss = 0.5 * float(resid @ resid)
    else:
        loss = float(np.sum(np.logaddexp(0.0, eta) - data.y * eta))
    return loss + float(np.sum(penalty_value(spec, np.abs(beta), data.penalty_scale)))


def _profile_intercept(data: Dataset, beta: np.ndarray) -> float:
    """Best unpenalized intercept for a fixed beta."""
    if not data.intercept:
        return 0.0
    if data.is_gaussian:
        return float(data.y.mean() - data.X.mean(axis=0) @ beta)

    ybar = float(data.y.mean())
    if ybar in (0.0, 1.0):
        raise SeparationError(
            "separation detected: the response is constant; increase lambda or drop the intercept"
        )
    offset = data.X @ beta
    total = float(data.y.sum())

    def score(b: float) -> float:
        return total - float(expit(b + offset).sum())

    lo, hi = -1.0, 1.0
    while score(lo) < 0:
        lo *= 2
    while score(hi) > 0:
        hi *= 2
    return float(brentq(score, lo, hi, xtol=1e-12))


def _finalise(
    data: Dataset,
    spec: PenaltySpec,
    est: Estimate,
    algorithm: str,
    steps: int = 1,
    initial: Optional[str] = None,
) -> Estimate:
    flags = est.flags
    try:
        value = objective(data, spec, est.beta, est.intercept)
    except SingularPenaltyError:
        # the solver already reports the weighted-L1 criterion it minimised
        value = est.objective
        flags = flags + ("surrogate_objective",)
    return est.with_changes(
        provenance=Provenance(
            algorithm, penalty=spec, lam=spec.lam, steps=steps, initial=initial, scale=data.penalty_scale,
        ),
        objective=value,
        flags=flags,
    )


# -------------------- Weighted lasso dispatch --------------------

def _check_solver(solver: str) -> None:
    if solver not in SOLVERS:
        raise ValidationError(f"Unknown solver {solver!r}; expected one of {SOLVERS}")


def _solve_weighted(
    data: Dataset,
    lam: float,
    weights: np.ndarray,
    init: Optional[np.ndarray] = None,
    solver: str = "cd",
) -> Estimate:
    """Weighted lasso by CD or LARS (Gaussian) or IRLS (Binomial)."""
    _check_solver(solver)
    prob = WeightedL1Problem(data, lam, weights)
    if not data.is_gaussian:
        return irls_penalized(prob, init=init)
    if solver == "cd":
        return solve_weighted_lasso_cd(prob, init=init)

    path = lars_path(data, prob.weights * lam if lam > 0 else prob.weights)
    beta, intercept = path.at(1.0 if lam > 0 else 0.0)
    X, y, _, _ = data.centered()
    resid = y - X @ beta
    nz = beta != 0
    surrogate = 0.5 * float(resid @ resid) + float(np.sum(prob.thresholds[nz] * np.abs(beta[nz])))
    return Estimate(
        beta=beta,
        intercept=intercept,
        provenance=Provenance("lars_weighted_lasso", lam=lam),
        objective=surrogate,
        kkt=kkt_check(prob, beta),
    )


def lasso(data: Dataset, lam: float, solver: str = "cd", init: Optional[np.ndarray] = None) -> Estimate:
    """Plain lasso at a fixed lambda; ``init`` warm-starts CD and IRLS."""
    spec = PenaltySpec(Family.L1, lam)
    est = _solve_weighted(data, lam, np.ones(data.p), init=init, solver=solver)
    return _finalise(data, spec, est, "lasso")


def lasso_cv(
    data: Dataset,
    K: int = config.CV_FOLDS,
    seed: int = 0,
    n_lambdas: int = config.N_LAMBDAS,
    one_se: bool = False,
    solver: str = "cd",
    tuner: str = "cv",
) -> TuneResult:
    grid = lambda_grid(data, n_lambdas=n_lambdas)

    def fitter(train: Dataset, lam: float, init: Optional[np.ndarray] = None) -> Estimate:
        return lasso(train, lam, solver=solver, init=init)

    return tune_lambda(fitter, data, grid, tuner=tuner, K=K, seed=seed, one_se=one_se, warm_start=True)


# -------------------- Initial estimators --------------------

def _elastic_net(data: Dataset, lam: float, l1_ratio: float) -> Estimate:
    """lambda * (l1_ratio ||b||_1 + (1 - l1_ratio)/2 ||b||^2) on top of the loss."""
    if data.is_gaussian:
        model = ElasticNet(
            alpha=lam / data.n,
            l1_ratio=l1_ratio,
            fit_intercept=data.intercept,
            tol=1e-10,
            max_iter=100_000,
        )
    else:
        model = LogisticRegression(
            penalty="elasticnet",
            solver="saga",
            l1_ratio=l1_ratio,
            C=1.0 / lam,
            fit_intercept=data.intercept,
            tol=1e-8,
            max_iter=10_000,
        )
    model.fit(data.X, data.y)
    beta = np.ravel(model.coef_)
    intercept = float(np.ravel(model.intercept_)[0]) if data.intercept else 0.0
    eta = intercept + data.X @ beta
    if data.is_gaussian:
        loss = 0.5 * float(np.sum((data.y - eta) ** 2))
    else:
        loss = float(np.sum(np.logaddexp(0.0, eta) - data.y * eta))
    penalty = lam * (l1_ratio * np.abs(beta).sum() + 0.5 * (1 - l1_ratio) * beta @ beta)
    return Estimate(
        beta=beta,
        intercept=intercept,
        provenance=Provenance("elastic_net", lam=lam),
        objective=loss + float(penalty),
    )


def _ridge_binomial(data: Dataset, d: float) -> np.ndarray:
    # sklearn minimises C * loss + 1/2 ||b||^2, i.e. loss + d ||b||^2 with C = 1 / (2d)
    model = LogisticRegression(C=1.0 / (2.0 * d), fit_intercept=data.intercept, tol=1e-10, max_iter=10_000)
    model.fit(data.X, data.y)
    return np.ravel(model.coef_)


def fit_initial(
    method: InitialMethod,
    data: Dataset,
    K: int = config.CV_FOLDS,
    seed: int = 0,
    n_lambdas: int = config.N_LAMBDAS,
    ridge_penalty: float = config.RIDGE_PENALTY,
    l1_ratio: float = config.ENET_L1_RATIO,
) -> np.ndarray:
    """Initial coefficient vector for LLA, LQA and the adaptive lasso.

    OLS/MLE needs n > p and full column rank. Ridge adds ``ridge_penalty`` to
    every diagonal entry of the quadratic. The lasso and elastic-net initials
    tune their own lambda by K-fold CV.
    """
    try:
        method = InitialMethod(method)
    except ValueError:
        raise ValidationError(f"Unknown initial estimator {method!r}")

    if method is InitialMethod.OLS:
        if data.p >= data.n:
            raise ValidationError(
                f"OLS/MLE initial needs n > p (got n={data.n}, p={data.p}); "
                "use the ridge or lasso initial instead"
            )
        if data.is_gaussian:
            beta = solve_ridge_weighted(data, np.zeros(data.p))
        else:
            beta = irls_penalized(WeightedL1Problem(data, 0.0, np.ones(data.p))).beta
    elif method is InitialMethod.RIDGE:
        if not ridge_penalty > 0:
            raise ValidationError(f"ridge penalty must be positive, got {ridge_penalty}")
        if data.is_gaussian:
            beta = solve_ridge_weighted(data, np.full(data.p, ridge_penalty))
        else:
            beta = _ridge_binomial(data, ridge_penalty)
    elif method is InitialMethod.LASSO:
        beta = lasso_cv(data, K=K, seed=seed, n_lambdas=n_lambdas).estimate.beta
    else:
        if not 0 < l1_ratio <= 1:
            raise ValidationError(f"l1_ratio must lie in (0, 1], got {l1_ratio}")
        grid = lambda_grid(data, n_lambdas=n_lambdas) / l1_ratio

        def fitter(train: Dataset, lam: float) -> Estimate:
            return _elastic_net(train, lam, l1_ratio)

        beta = tune_lambda(fitter, data, grid, K=K, seed=seed).estimate.beta

    beta = np.asarray(beta, dtype=float)
    if not np.all(np.isfinite(beta)):
        raise ComputationError(f"{method.value} initial estimate is not finite")
    logger.debug("%s initial: %d nonzero of %d", method.value, np.count_nonzero(beta), data.p)
    return beta + 0.0


# -------------------- LLA --------------------

def one_step_lla(
    data: Dataset,
    spec: PenaltySpec,
    beta0: np.ndarray,
    solver: str = "cd",
    initial_name: Optional[str] = None,
) -> Estimate:
    """One LLA step: the weighted lasso with w_j = p'_lambda(|beta0_j|).

    lambda already sits inside p'_lambda, so the subproblem is posed with a
    unit multiplier. Coordinates with infinite weight are fixed at zero; when
    all of them are, the null model is returned with the ``fully_excluded`` flag.
    """
    _check_solver(solver)
    beta0 = np.asarray(beta0, dtype=float)
    if beta0.shape != (data.p,):
        raise ValidationError(f"beta0 must have length {data.p}, got shape {beta0.shape}")
    weights = lla_weights(spec, beta0, data.penalty_scale)
    excluded = np.isinf(weights)

    if np.all(excluded):
        zero = np.zeros(data.p)
        intercept = _profile_intercept(data, zero)
        null = Estimate(
            beta=zero,
            intercept=intercept,
            provenance=Provenance("one_step_lla"),
            objective=_null_surrogate(data, intercept),
            flags=("fully_excluded",),
        )
        return _finalise(data, spec, null, "one_step_lla", initial=initial_name)

    init = np.where(excluded, 0.0, beta0)
    est = _solve_weighted(data, 1.0, weights, init=init, solver=solver)
    return _finalise(data, spec, est, "one_step_lla", initial=initial_name)


def _null_surrogate(data: Dataset, intercept: float) -> float:
    if data.is_gaussian:
        resid = data.y - intercept
        return 0.5 * float(resid @ resid)
    return float(np.sum(np.logaddexp(0.0, intercept) - data.y * intercept))


def _safe_objective(data: Dataset, spec: PenaltySpec, beta: np.ndarray, intercept: float) -> float:
    try:
        return objective(data, spec, beta, intercept)
    except SingularPenaltyError:
        return np.nan


def multi_step_lla(
    data: Dataset,
    spec: PenaltySpec,
    beta0: np.ndarray,
    max_steps: int = config.LLA_MAX_STEPS,
    tol: float = config.LLA_TOL,
    solver: str = "cd",
    initial_name: Optional[str] = None,
) -> LlaTrajectory:
    """Iterate LLA from beta0 until the max coefficient change drops below tol.

    Step 1 is exactly ``one_step_lla(data, spec, beta0)``. The loop also stops
    when the LLA weights repeat, since the next subproblem would be the same.
    """
    if max_steps < 1:
        raise ValidationError(f"max_steps must be >= 1, got {max_steps}")
    if not tol > 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    beta0 = np.asarray(beta0, dtype=float)
    weights = lla_weights(spec, beta0, data.penalty_scale)

    intercept0 = _profile_intercept(data, beta0)
    start = Estimate(
        beta=beta0,
        intercept=intercept0,
        provenance=Provenance(
            "initial", penalty=spec, lam=spec.lam, steps=0, initial=initial_name, scale=data.penalty_scale,
        ),
        objective=_safe_objective(data, spec, beta0, intercept0),
    )
    iterates = [start]
    converged = False
    for step in range(1, max_steps + 1):
        prev = iterates[-1]
        est = one_step_lla(data, spec, prev.beta, solver=solver, initial_name=initial_name)
        est = est.with_changes(
            provenance=replace(est.provenance, algorithm="multi_step_lla", steps=step)
        )
        iterates.append(est)
        change = float(np.max(np.abs(est.beta - prev.beta), initial=0.0))
        next_weights = lla_weights(spec, est.beta, data.penalty_scale)
        if change < tol or np.array_equal(next_weights, weights):
            converged = True
            break
        weights = next_weights

    objectives = tuple(float(e.objective) for e in iterates)
    rises = [
        k for k in range(1, len(objectives))
        if objectives[k] > objectives[k - 1] + 1e-10 * max(1.0, abs(objectives[k - 1]))
    ]
    if rises:
        if data.is_gaussian:
            logger.warning("LLA objective increased at steps %s (solver tolerance?)", rises)
        else:
            logger.warning("LLA objective increased at steps %s; IRLS inner solves are not monotone", rises)
    logger.debug("multi-step LLA: %d steps, converged=%s", len(iterates) - 1, converged)

    flags = tuple(sorted({f for e in iterates for f in e.flags}))
    return LlaTrajectory(
        iterates=tuple(iterates),
        objectives=objectives,
        converged=converged,
        lambdas=tuple(spec.lam for _ in iterates),
        flags=flags,
    )


# -------------------- Adaptive LASSO --------------------

def adaptive_lasso(
    data: Dataset,
    gamma: float,
    lam: float,
    beta0: np.ndarray,
    epsilon: float = 0.0,
    solver: str = "cd",
    initial_name: Optional[str] = None,
) -> Estimate:
    """Weighted lasso with w_j = lambda * (|beta0_j| + epsilon)^(-gamma).

    With epsilon = 0 a zero in beta0 keeps that coefficient at exactly zero.
    """
    if not gamma > 0:
        raise ValidationError(f"gamma must be positive, got {gamma}")
    spec = PenaltySpec(Family.ADAPTIVE, lam, shape=gamma, epsilon=epsilon)
    est = one_step_lla(data, spec, beta0, solver=solver, initial_name=initial_name)
    return est.with_changes(provenance=Provenance(
        "adaptive_lasso", penalty=spec, lam=lam, steps=1, initial=initial_name,
    ))


def _excluded_adaptive(
    data: Dataset, gamma: float, beta0: np.ndarray, epsilon: float, initial_name: Optional[str]
) -> Optional[Estimate]:
    """The null model when every adaptive weight is infinite, else None.

    No lambda changes that fit, so none is chosen and the provenance lambda is nan.
    """
    unit = lla_weights(PenaltySpec(Family.ADAPTIVE, 1.0, shape=gamma, epsilon=epsilon), beta0)
    if not np.all(np.isinf(unit)):
        return None
    logger.info("adaptive lasso: initial estimate is all zero, returning the null model untuned")
    est = adaptive_lasso(data, gamma, 0.0, beta0, epsilon=epsilon, initial_name=initial_name)
    return est.with_changes(provenance=replace(est.provenance, lam=np.nan))


def tune_adaptive(
    data: Dataset,
    gamma: float,
    beta0: np.ndarray,
    tuner: str = "cv",
    epsilon: float = 0.0,
    K: int = config.CV_FOLDS,
    seed: int = 0,
    one_se: bool = False,
    solver: str = "cd",
    initial_name: Optional[str] = None,
) -> TuneResult:
    """Adaptive lasso at a fixed gamma with lambda chosen by ``tuner``.

    An all-zero initial estimate (with epsilon = 0) has nothing to tune: the
    ``fully_excluded`` null model comes back with lambda_best = nan.
    """
    beta0 = np.asarray(beta0, dtype=float)
    null = _excluded_adaptive(data, gamma, beta0, epsilon, initial_name)
    if null is not None:
        return TuneResult(lambda_best=np.nan, estimate=null)
    unit = lla_weights(PenaltySpec(Family.ADAPTIVE, 1.0, shape=gamma, epsilon=epsilon), beta0)

    def fitter(train: Dataset, lam: float) -> Estimate:
        return adaptive_lasso(train, gamma, lam, beta0, epsilon=epsilon, solver=solver, initial_name=initial_name)

    return tune_lambda(fitter, data, lambda_grid(data, unit), tuner=tuner, K=K, seed=seed, one_se=one_se)


def select_gamma(
    data: Dataset,
    beta0: np.ndarray,
    gamma_grid: Sequence[float] = config.GAMMA_GRID,
    K: int = config.CV_FOLDS,
    seed: int = 0,
    n_lambdas: int = config.N_LAMBDAS,
    rtol: float = 0.0,
    solver: str = "cd",
) -> GammaSelection:
    """Joint CV over the (gamma, lambda) lattice for the adaptive lasso.

    Every gamma is scored on the same folds. Ties (within ``rtol`` of the best
    score) go to the smaller gamma, then to the larger lambda.
    """
    gammas = sorted(float(g) for g in gamma_grid)
    if not gammas:
        raise ValidationError("gamma grid must be nonempty")
    if any(not g > 0 for g in gammas):
        raise ValidationError(f"gamma values must be positive, got {gammas}")
    beta0 = np.asarray(beta0, dtype=float)
    null = _excluded_adaptive(data, gammas[0], beta0, 0.0, None)
    if null is not None:
        return GammaSelection(gamma_best=gammas[0], lambda_best=np.nan, estimate=null)
    folds = kfold_assignments(data.n, K, seed)

    results: Dict[float, CvResult] = {}
    for gamma in gammas:
        unit = lla_weights(PenaltySpec(Family.ADAPTIVE, 1.0, shape=gamma), beta0)
        grid = lambda_grid(data, unit, n_lambdas=n_lambdas)

        def fitter(train: Dataset, lam: float, gamma=gamma) -> Estimate:
            return adaptive_lasso(train, gamma, lam, beta0, solver=solver)

        results[gamma] = cross_validate(fitter, data, grid, K=K, seed=seed, folds=folds)

    scores = {g: r.best_score for g, r in results.items()}
    best_score = min(scores.values())
    slack = rtol * abs(best_score) if np.isfinite(best_score) else 0.0
    gamma_best = next(g for g in gammas if scores[g] <= best_score + slack)
    lam_best = results[gamma_best].lambda_best
    logger.debug("gamma CV scores %s -> gamma=%g, lambda=%.6g", scores, gamma_best, lam_best)
    return GammaSelection(
        gamma_best=gamma_best,
        lambda_best=lam_best,
        estimate=adaptive_lasso(data, gamma_best, lam_best, beta0, solver=solver),
        scores=scores,
        cv=results,
    )


def msa_lasso(
    data: Dataset,
    steps: int,
    tuner: str = "cv",
    epsilon: float = config.MSA_EPSILON,
    K: int = config.CV_FOLDS,
    seed: int = 0,
    n_lambdas: int = config.N_LAMBDAS,
    solver: str = "cd",
    one_se: bool = False,
) -> LlaTrajectory:
    """Multi-step adaptive lasso.

    Step 0 is the CV-tuned lasso. Step k solves the adaptive lasso with
    weights 1 / (|beta^(k-1)_j| + epsilon) and a lambda re-tuned by ``tuner``
    ("cv" or "bic"). An empty model ends the trajectory early with the
    ``empty_model`` flag.
    """
    if steps < 1:
        raise ValidationError(f"steps must be >= 1, got {steps}")
    if not epsilon >= 0:
        raise ValidationError(f"epsilon must be nonnegative, got {epsilon}")

    first = lasso_cv(data, K=K, seed=seed, n_lambdas=n_lambdas, solver=solver, tuner=tuner, one_se=one_se)
    start = first.estimate.with_changes(provenance=Provenance(
        "msa_lasso", penalty=PenaltySpec(Family.L1, first.lambda_best), lam=first.lambda_best, steps=0,
    ))
    iterates = [start]
    lambdas = [first.lambda_best]
    flags = []
    converged = False

    for step in range(1, steps + 1):
        prev = iterates[-1].beta
        if not np.any(prev):
            flags.append("empty_model")
            logger.info("MSA-LASSO stopped at step %d: empty model", step - 1)
            break
        unit = lla_weights(PenaltySpec(Family.ADAPTIVE, 1.0, shape=1.0, epsilon=epsilon), prev)
        grid = lambda_grid(data, unit, n_lambdas=n_lambdas)

        def fitter(train: Dataset, lam: float, prev=prev) -> Estimate:
            return adaptive_lasso(train, 1.0, lam, prev, epsilon=epsilon, solver=solver)

        tuned = tune_lambda(fitter, data, grid, tuner=tuner, K=K, seed=seed, one_se=one_se)
        est = tuned.estimate.with_changes(provenance=Provenance(
            "msa_lasso", penalty=tuned.estimate.provenance.penalty, lam=tuned.lambda_best, steps=step,
        ))
        iterates.append(est)
        lambdas.append(tuned.lambda_best)
        converged = float(np.max(np.abs(est.beta - prev), initial=0.0)) < config.LLA_TOL
        if not np.any(est.beta):
            flags.append("empty_model")
            logger.info("MSA-LASSO stopped at step %d: empty model", step)
            break

    return LlaTrajectory(
        iterates=tuple(iterates),
        objectives=tuple(float(e.objective) for e in iterates),
        converged=converged,
        lambdas=tuple(lambdas),
        flags=tuple(flags),
    )


# -------------------- LQA --------------------

def lqa_fit(
    data: Dataset,
    spec: PenaltySpec,
    init: np.ndarray,
    tau: float = config.LQA_TAU,
    max_iter: int = config.LQA_MAX_ITER,
    tol: float = config.LQA_TOL,
) -> Estimate:
    """Iteratively reweighted ridge with the LQA diagonal p'(|b|) / (2|b|).

    A coefficient whose magnitude falls below ``tau`` is set to zero and never
    re-enters. Gaussian family only.
    """
    if not data.is_gaussian:
        raise ValidationError("lqa_fit requires the Gaussian family")
    if not tau > 0:
        raise ValidationError(f"tau must be positive, got {tau}")
    beta = np.array(init, dtype=float, copy=True)
    if beta.shape != (data.p,) or not np.all(np.isfinite(beta)):
        raise ValidationError("init must be a finite vector of length p")

    dropped = np.abs(beta) < tau
    beta[dropped] = 0.0
    converged = False
    change = np.inf
    iteration = 0
    for iteration in range(1, max_iter + 1):
        if np.all(dropped):
            converged = True
            break
        diag = np.asarray(lqa_coefficient(spec, beta, tau, data.penalty_scale), dtype=float)
        diag[dropped] = np.inf
        new = solve_ridge_weighted(data, diag)
        dropped |= np.abs(new) < tau
        new[dropped] = 0.0
        change = float(np.max(np.abs(new - beta)))
        beta = new
        if change < tol:
            converged = True
            break

    if not converged:
        raise NonConvergenceError(
            f"LQA did not converge in {max_iter} iterations", beta=beta, residual=change
        )

    flags = ("all_dropped",) if np.all(dropped) else ()
    logger.debug("LQA: %d iterations, %d dropped", iteration, int(dropped.sum()))
    X, y, _, _ = data.centered()
    resid = y - X @ beta
    est = Estimate(
        beta=beta,
        intercept=_profile_intercept(data, beta),
        provenance=Provenance("lqa"),
        objective=0.5 * float(resid @ resid),
        flags=flags,
    )
    return _finalise(data, spec, est, "lqa", steps=iteration)
