"""
Tuning-parameter selection: lambda grids, K-fold cross-validation and BIC.

A *fitter* is any callable ``fitter(train: Dataset, lam: float) -> Estimate``;
cross-validation and BIC only look at the returned beta and intercept.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.model_selection import KFold

import config
from dataset import Dataset
from errors import ComputationError, SparseEstimationError, ValidationError
from solver import Estimate, SolutionPath, max_lambda

logger = logging.getLogger(__name__)

Fitter = Callable[[Dataset, float], Estimate]


@dataclass(frozen=True, eq=False)
class CvResult:
    lambda_best: float
    lambda_1se: float
    lambda_grid: np.ndarray
    cv_curve: np.ndarray
    cv_se: np.ndarray
    folds: np.ndarray
    failures: Tuple[Dict[str, Any], ...] = ()

    @property
    def best_score(self) -> float:
        return float(np.min(self.cv_curve))


@dataclass(frozen=True, eq=False)
class BicResult:
    lambda_best: float
    table: pd.DataFrame
    floored: bool = False


@dataclass(frozen=True, eq=False)
class TuneResult:
    lambda_best: float
    estimate: Estimate
    details: Any = field(default=None)


def lambda_grid(
    data: Dataset,
    weights: Optional[np.ndarray] = None,
    n_lambdas: int = config.N_LAMBDAS,
    min_ratio: float = config.LAMBDA_MIN_RATIO,
) -> np.ndarray:
    """Log-spaced grid from lambda_max down to min_ratio * lambda_max."""
    lam_max = max_lambda(data, weights)
    if not lam_max > 0:
        raise ComputationError(
            "lambda_max is zero: no penalized predictor is correlated with the response"
        )
    if n_lambdas == 1:
        return np.array([lam_max])
    return np.geomspace(lam_max, lam_max * min_ratio, n_lambdas)


def kfold_assignments(n: int, K: int = config.CV_FOLDS, seed: int = 0) -> np.ndarray:
    """Fold label per row; folds are disjoint, cover all rows, sizes differ by <= 1."""
    if K < 2 or K > n:
        raise ValidationError(f"Need 2 <= K <= n for cross-validation, got K={K}, n={n}")
    labels = np.empty(n, dtype=int)
    splitter = KFold(n_splits=K, shuffle=True, random_state=seed)
    for k, (_, test) in enumerate(splitter.split(np.zeros((n, 1)))):
        labels[test] = k
    return labels


def held_out_loss(data: Dataset, rows: np.ndarray, beta: np.ndarray, intercept: float) -> float:
    """Mean squared error (Gaussian) or mean log-loss (Binomial) on the given rows."""
    X, y = data.X[rows], data.y[rows]
    eta = intercept + X @ beta
    if data.is_gaussian:
        return float(np.mean((y - eta) ** 2))
    return float(np.mean(np.logaddexp(0.0, eta) - y * eta))


def _check_grid(grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("lambda grid must be a nonempty 1-D sequence")
    if np.any(np.diff(grid) >= 0):
        raise ValidationError("lambda grid must be strictly decreasing")
    return grid


def cross_validate(
    fitter: Fitter,
    data: Dataset,
    lambda_grid: Sequence[float],
    K: int = config.CV_FOLDS,
    seed: int = 0,
    folds: Optional[np.ndarray] = None,
    warm_start: bool = False,
) -> CvResult:
    """K-fold CV over a decreasing lambda grid.

    Ties in the mean held-out loss go to the larger lambda. A fit that raises
    is scored +inf for that (fold, lambda) and recorded in ``failures``. With
    ``warm_start`` the fitter is called as ``fitter(train, lam, init=beta)``
    with the fold's fit at the previous lambda.
    """
    grid = _check_grid(lambda_grid)
    labels = kfold_assignments(data.n, K, seed) if folds is None else np.asarray(folds)
    fold_ids = np.unique(labels)
    if fold_ids.size < 2:
        raise ValidationError("cross-validation needs at least two folds")

    scores = np.empty((fold_ids.size, grid.size))
    failures: List[Dict[str, Any]] = []
    for row, k in enumerate(fold_ids):
        train_rows = np.flatnonzero(labels != k)
        test_rows = np.flatnonzero(labels == k)
        train = data.subset_rows(train_rows)
        if not data.is_gaussian and np.unique(train.y).size < 2:
            scores[row] = np.inf
            failures.append({"fold": int(k), "lambda": None,
                             "detail": "constant binomial response in training fold"})
            continue
        prev = None
        for i, lam in enumerate(grid):
            try:
                est = fitter(train, float(lam), init=prev) if warm_start else fitter(train, float(lam))
                prev = est.beta
                scores[row, i] = held_out_loss(data, test_rows, est.beta, est.intercept)
            except SparseEstimationError as e:
                scores[row, i] = np.inf
                failures.append({"fold": int(k), "lambda": float(lam), "detail": e.detail})

    if failures:
        logger.warning("%d cross-validation fits failed and were scored +inf", len(failures))

    curve = scores.mean(axis=0)
    finite = np.all(np.isfinite(scores), axis=0)
    se = np.full(grid.size, np.inf)
    if fold_ids.size > 1:
        se[finite] = scores[:, finite].std(axis=0, ddof=1) / np.sqrt(fold_ids.size)
    if not np.any(np.isfinite(curve)):
        raise ComputationError("every lambda failed during cross-validation",
                               failures=[f["detail"] for f in failures])

    best = int(np.argmin(curve))
    within = np.flatnonzero(curve <= curve[best] + se[best])
    one_se = int(within.min()) if within.size else best
    return CvResult(
        lambda_best=float(grid[best]),
        lambda_1se=float(grid[one_se]),
        lambda_grid=grid,
        cv_curve=curve,
        cv_se=se,
        folds=labels,
        failures=tuple(failures),
    )


def bic_curve(data: Dataset, lambdas: Sequence[float], betas: np.ndarray, intercepts: Sequence[float]) -> pd.DataFrame:
    """BIC(lambda) = n log(RSS/n) + log(n) * df, df = active-set size."""
    if not data.is_gaussian:
        raise ValidationError("BIC selection requires the Gaussian family")
    betas = np.atleast_2d(np.asarray(betas, dtype=float))
    fitted = np.asarray(intercepts, dtype=float)[:, None] + betas @ data.X.T
    rss = np.sum((data.y[None, :] - fitted) ** 2, axis=1)
    floored = rss < config.BIC_RSS_FLOOR
    rss = np.maximum(rss, config.BIC_RSS_FLOOR)
    df = np.count_nonzero(betas, axis=1)
    n = data.n
    return pd.DataFrame({
        "lambda": np.asarray(lambdas, dtype=float),
        "rss": rss,
        "df": df,
        "bic": n * np.log(rss / n) + np.log(n) * df,
        "rss_floored": floored,
    })


def _pick_bic(table: pd.DataFrame) -> BicResult:
    # descending lambda so that argmin's first hit is the larger lambda
    table = table.sort_values("lambda", ascending=False, kind="mergesort").reset_index(drop=True)
    best = int(np.argmin(table["bic"].to_numpy()))
    floored = bool(table["rss_floored"].any())
    if floored:
        logger.warning("RSS floored at %g for at least one lambda", config.BIC_RSS_FLOOR)
    return BicResult(lambda_best=float(table["lambda"].iloc[best]), table=table, floored=floored)


def bic_select(path: SolutionPath, data: Dataset) -> BicResult:
    """Pick the path breakpoint minimising BIC; ties go to the larger lambda."""
    return _pick_bic(bic_curve(data, path.breakpoints, path.coefficients, path.intercepts))


def tune_lambda(
    fitter: Fitter,
    data: Dataset,
    grid: Sequence[float],
    tuner: str = "cv",
    K: int = config.CV_FOLDS,
    seed: int = 0,
    one_se: bool = False,
    warm_start: bool = False,
) -> TuneResult:
    """Choose lambda for any estimator by CV or BIC and refit on all the data.

    ``warm_start`` has the meaning it has in ``cross_validate``.
    """
    grid = _check_grid(grid)
    if tuner == "cv":
        cv = cross_validate(fitter, data, grid, K=K, seed=seed, warm_start=warm_start)
        lam = cv.lambda_1se if one_se else cv.lambda_best
        logger.debug("CV chose lambda=%.6g", lam)
        return TuneResult(lambda_best=lam, estimate=fitter(data, lam), details=cv)
    if tuner == "bic":
        fits = {}
        prev = None
        for lam in grid:
            try:
                est = fitter(data, float(lam), init=prev) if warm_start else fitter(data, float(lam))
                fits[float(lam)] = est
                prev = est.beta
            except SparseEstimationError as e:
                logger.warning("BIC fit at lambda=%.6g failed: %s", lam, e.detail)
        if not fits:
            raise ComputationError("every lambda failed during BIC tuning")
        lams = list(fits)
        table = bic_curve(
            data,
            lams,
            np.array([fits[l].beta for l in lams]),
            [fits[l].intercept for l in lams],
        )
        result = _pick_bic(table)
        logger.debug("BIC chose lambda=%.6g", result.lambda_best)
        return TuneResult(lambda_best=result.lambda_best, estimate=fits[result.lambda_best], details=result)
    raise ValidationError(f"Unknown tuner {tuner!r}; expected 'cv' or 'bic'")
