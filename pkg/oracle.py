"""
Exhaustive L0 search and L0/L1 equivalence checks for small designs.

These are ground-truth engines: slow, exact, and capped at
config.SUBSET_P_CAP predictors.
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Any, Dict, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import lstsq

import config
from dataset import Dataset
from errors import ExhaustiveCapError, ValidationError
from solver import lars_path

logger = logging.getLogger(__name__)

# Relative slack (on the scale of ||y||^2) under which two subset objectives tie
TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class SubsetSolution:
    subset: Tuple[int, ...]
    beta: np.ndarray
    l0_objective: float
    subsets_examined: int
    intercept: float = 0.0

    def to_json(self) -> Dict[str, Any]:
        return {
            "subset": list(self.subset),
            "beta": [float(b) for b in self.beta],
            "intercept": self.intercept,
            "l0_objective": self.l0_objective,
            "subsets_examined": self.subsets_examined,
        }


@dataclass(frozen=True)
class RecoveryRecord:
    mu: float
    k: int
    bound_satisfied: bool
    recovered: bool
    l1_support: Tuple[int, ...]
    l0_support: Optional[Tuple[int, ...]]
    l0_skipped: bool = False

    def to_json(self) -> Dict[str, Any]:
        return {
            "mu": self.mu,
            "k": self.k,
            "bound_satisfied": self.bound_satisfied,
            "recovered": self.recovered,
            "l1_support": list(self.l1_support),
            "l0_support": None if self.l0_support is None else list(self.l0_support),
            "l0_skipped": self.l0_skipped,
        }


def _refit(G: np.ndarray, c: np.ndarray, yy: float, subset: Tuple[int, ...]) -> Tuple[np.ndarray, float]:
    """Least-squares refit on a subset from the Gram matrix; min-norm if rank deficient."""
    if not subset:
        return np.zeros(0), yy
    idx = list(subset)
    G_s = G[np.ix_(idx, idx)]
    c_s = c[idx]
    b = lstsq(G_s, c_s, lapack_driver="gelsy")[0]
    rss = yy - 2.0 * b @ c_s + b @ G_s @ b
    return b, max(float(rss), 0.0)


def _best_of_size(G: np.ndarray, c: np.ndarray, yy: float, size: int, penalty: float, slack: float):
    best = None
    for subset in combinations(range(G.shape[0]), size):
        b, rss = _refit(G, c, yy, subset)
        value = 0.5 * rss + penalty * size
        if best is None or value < best[0] - slack:
            best = (value, subset, b)
    return best


def best_subset_l0(
    data: Dataset,
    lam: float,
    p_cap: int = config.SUBSET_P_CAP,
    n_jobs: int = 1,
) -> SubsetSolution:
    """Global minimiser of 1/2 RSS(S) + 1/2 lambda^2 |S| over all 2^p subsets.

    Subsets are scored size by size, each size in lexicographic order; ties go
    to the smaller subset, then to the lexicographically first.
    """
    if not data.is_gaussian:
        raise ValidationError("best_subset_l0 requires the Gaussian family")
    if not np.isfinite(lam) or lam < 0:
        raise ValidationError(f"lambda must be a finite nonnegative number, got {lam}")
    p = data.p
    if p > p_cap:
        raise ExhaustiveCapError(
            f"p exceeds exhaustive cap: p={p} > {p_cap} would need 2^{p} subset refits",
            p=p,
            p_cap=p_cap,
        )

    X, y, x_mean, _ = data.centered()
    G = X.T @ X
    c = X.T @ y
    yy = float(y @ y)
    penalty = 0.5 * lam ** 2
    slack = TIE_RTOL * max(yy, 1.0)

    per_size = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_best_of_size)(G, c, yy, size, penalty, slack) for size in range(p + 1)
    )
    value, subset, b = per_size[0]
    for cand in per_size[1:]:
        if cand[0] < value - slack:
            value, subset, b = cand

    beta = np.zeros(p)
    beta[list(subset)] = b
    beta = beta + 0.0
    intercept = float(data.y.mean() - x_mean @ beta) if data.intercept else 0.0
    logger.debug("best subset at lambda=%.6g: %s (objective %.6g)", lam, subset, value)
    return SubsetSolution(
        subset=tuple(int(j) for j in subset),
        beta=beta,
        l0_objective=float(value),
        subsets_examined=2 ** p,
        intercept=intercept,
    )


def hard_threshold_oracle(z: np.ndarray, lam: float) -> np.ndarray:
    """z_j * 1[|z_j| > lambda]: the L0 solution for an orthonormal design."""
    z = np.asarray(z, dtype=float)
    return np.where(np.abs(z) > lam, z, 0.0) + 0.0


def mutual_coherence(X: np.ndarray) -> float:
    """max over j != k of |<x_j, x_k>| / (||x_j|| ||x_k||)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise ValidationError("mutual coherence needs a matrix with at least two columns")
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0):
        raise ValidationError(
            "mutual coherence is undefined for zero columns",
            zero_columns=np.flatnonzero(norms == 0),
        )
    U = X / norms
    G = np.abs(U.T @ U)
    np.fill_diagonal(G, 0.0)
    return float(min(G.max(), 1.0))


def recovery_design(n: int, p: int, k: int, kind: str = "gaussian", seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Random design and a k-sparse coefficient vector for recovery experiments.

    ``kind`` is "gaussian" (N(0, 1/n) entries) or "rademacher" (+-1/sqrt(n)).
    Nonzero coefficients have random signs and magnitudes in [1, 2).
    """
    if not 0 <= k <= p:
        raise ValidationError(f"Need 0 <= k <= p, got k={k}, p={p}")
    rng = np.random.default_rng(seed)
    if kind == "gaussian":
        X = rng.standard_normal((n, p)) / np.sqrt(n)
    elif kind == "rademacher":
        X = rng.choice([-1.0, 1.0], size=(n, p)) / np.sqrt(n)
    else:
        raise ValidationError(f"Unknown design kind {kind!r}; expected 'gaussian' or 'rademacher'")
    beta_star = np.zeros(p)
    support = np.sort(rng.choice(p, size=k, replace=False))
    beta_star[support] = rng.choice([-1.0, 1.0], size=k) * rng.uniform(1.0, 2.0, size=k)
    return X, beta_star


def exact_recovery_check(
    X: np.ndarray,
    beta_star: np.ndarray,
    noise_sd: float = 0.0,
    seed: int = 0,
    lam: Optional[float] = None,
    p_cap: int = config.SUBSET_P_CAP,
) -> RecoveryRecord:
    """Compare the lasso-path support near lambda = 0 with the L0 support.

    The model has no intercept, so y = X beta_star (+ noise). The lasso support
    is read inside the last path segment at config.RECOVERY_LAMBDA_RATIO *
    lambda_max. The L0 branch uses ``lam`` if given, else 1e-4 ||y|| for
    noiseless data and sigma sqrt(2 log p) otherwise.
    """
    X = np.asarray(X, dtype=float)
    beta_star = np.asarray(beta_star, dtype=float)
    if beta_star.shape != (X.shape[1],):
        raise ValidationError("beta_star must have one entry per column of X")
    true_support = tuple(int(j) for j in np.flatnonzero(beta_star))
    y = X @ beta_star
    if noise_sd > 0:
        y = y + noise_sd * np.random.default_rng(seed).standard_normal(X.shape[0])
    data = Dataset(X, y, intercept=False)

    mu = mutual_coherence(X)
    k = len(true_support)
    bound = bool(mu == 0 or k < 0.5 * (1.0 + 1.0 / mu))

    path = lars_path(data)
    lam_eval = max(config.RECOVERY_LAMBDA_RATIO * path.breakpoints[0], path.breakpoints[-1])
    beta_l1, _ = path.at(lam_eval)
    l1_support = tuple(int(j) for j in np.flatnonzero(beta_l1))

    l0_support = None
    skipped = data.p > p_cap
    if skipped:
        logger.info("L0 branch skipped: p=%d exceeds the exhaustive cap %d", data.p, p_cap)
    else:
        if lam is None:
            if noise_sd > 0:
                lam = noise_sd * np.sqrt(2.0 * np.log(data.p))
            else:
                lam = 1e-4 * float(np.linalg.norm(y))
        l0_support = best_subset_l0(data, lam, p_cap=p_cap).subset

    recovered = l1_support == true_support and (skipped or l0_support == true_support)
    return RecoveryRecord(
        mu=mu,
        k=k,
        bound_satisfied=bound,
        recovered=bool(recovered),
        l1_support=l1_support,
        l0_support=l0_support,
        l0_skipped=skipped,
    )
