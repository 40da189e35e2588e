"""
Weighted-L1 and weighted-ridge solvers.

Every estimator in this package reduces to one of these subproblems.
Objective convention throughout (no 1/n):

    Gaussian   1/2 ||y - X beta||^2 + lambda * sum_j w_j |beta_j|
    Binomial   sum_i [log(1 + exp(eta_i)) - y_i eta_i] + lambda * sum_j w_j |beta_j|

The intercept is never penalized. For Gaussian data it is profiled out by
centering; for Binomial data it is estimated inside IRLS. A weight of +inf
pins its coefficient to exactly 0.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError, cho_factor, cho_solve, lstsq, qr, solve_triangular
from scipy.optimize import linprog
from scipy.special import expit
from sklearn.linear_model import lars_path as sklearn_lars_path

import config
from dataset import Dataset
from errors import (
    ComputationError,
    NonConvergenceError,
    SeparationError,
    SingularSystemError,
    ValidationError,
)
from penalty import PenaltySpec

logger = logging.getLogger(__name__)


# -------------------- Result types --------------------

@dataclass(frozen=True)
class Provenance:
    algorithm: str
    penalty: Optional[PenaltySpec] = None
    lam: Optional[float] = None
    steps: int = 1
    initial: Optional[str] = None
    scale: Optional[float] = None


@dataclass(frozen=True, eq=False)
class Estimate:
    """A fitted coefficient vector with exact zeros and where it came from."""

    beta: np.ndarray
    intercept: float
    provenance: Provenance
    objective: float
    flags: Tuple[str, ...] = ()
    kkt: Optional[float] = None

    def __post_init__(self):
        # + 0.0 turns -0.0 into 0.0
        beta = np.array(self.beta, dtype=float, copy=True) + 0.0
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "intercept", float(self.intercept) + 0.0)
        object.__setattr__(self, "objective", float(self.objective))
        object.__setattr__(self, "flags", tuple(self.flags))

    @property
    def active_set(self) -> Tuple[int, ...]:
        return tuple(int(j) for j in np.flatnonzero(self.beta))

    def with_changes(self, **changes: Any) -> "Estimate":
        return replace(self, **changes)

    def to_json(self) -> Dict[str, Any]:
        prov = self.provenance
        return {
            "algorithm": prov.algorithm,
            "penalty": prov.penalty.to_json() if prov.penalty is not None else None,
            "lambda": prov.lam,
            "steps": prov.steps,
            "intercept": self.intercept,
            "beta": [float(b) for b in self.beta],
            "active_set": list(self.active_set),
            "objective": self.objective if np.isfinite(self.objective) else None,
            "initial": prov.initial,
            "penalty_scale": prov.scale,
            "flags": list(self.flags),
        }


@dataclass(frozen=True, eq=False)
class WeightedL1Problem:
    """lambda * sum_j w_j |beta_j| on top of the data's likelihood."""

    data: Dataset
    lam: float
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, copy=True)
        if w.shape != (self.data.p,):
            raise ValidationError(f"weights must have length {self.data.p}, got shape {w.shape}")
        if np.any(np.isnan(w)) or np.any(w < 0):
            raise ValidationError("weights must be nonnegative (or +inf)")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValidationError(f"lambda must be a finite nonnegative number, got {self.lam}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def excluded(self) -> np.ndarray:
        return np.isinf(self.weights)

    @property
    def thresholds(self) -> np.ndarray:
        """Per-coordinate lambda * w_j, with +inf for excluded coordinates."""
        with np.errstate(invalid="ignore"):
            return np.where(self.excluded, np.inf, self.lam * self.weights)


@dataclass(frozen=True, eq=False)
class SolutionPath:
    """Piecewise-linear lasso path, breakpoints in decreasing lambda."""

    breakpoints: np.ndarray
    coefficients: np.ndarray
    active_sets: Tuple[Tuple[int, ...], ...]
    intercepts: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def p(self) -> int:
        return self.coefficients.shape[1]

    def at(self, lam: float) -> Tuple[np.ndarray, float]:
        """Coefficients and intercept at any lambda by linear interpolation."""
        bp = self.breakpoints
        if lam >= bp[0]:
            return self.coefficients[0].copy(), float(self.intercepts[0])
        if lam < bp[-1]:
            raise ComputationError(
                f"lambda={lam:g} lies below the end of the path ({bp[-1]:g})",
                lam=lam,
            )
        k = int(np.searchsorted(-bp, -lam, side="right")) - 1
        if bp[k] == lam or k == len(bp) - 1:
            return self.coefficients[k].copy(), float(self.intercepts[k])
        t = (bp[k] - lam) / (bp[k] - bp[k + 1])
        beta = (1 - t) * self.coefficients[k] + t * self.coefficients[k + 1]
        intercept = (1 - t) * self.intercepts[k] + t * self.intercepts[k + 1]
        return beta + 0.0, float(intercept)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            self.coefficients + 0.0,
            columns=[f"beta_{j + 1}" for j in range(self.p)],
        )
        frame.insert(0, "active_size", [len(a) for a in self.active_sets])
        frame.insert(0, "lambda", self.breakpoints)
        return frame

    def to_csv(self, path_or_buf) -> None:
        self.to_frame().to_csv(
            path_or_buf,
            index=False,
            float_format=f"%.{config.PATH_SIGNIFICANT_DIGITS}g",
            lineterminator="\n",
        )


# -------------------- Kernels --------------------

def soft_threshold(z, a):
    """sign(z) * (|z| - a)_+, elementwise."""
    if np.any(np.asarray(a) < 0):
        raise ValidationError("soft_threshold requires a >= 0")
    out = np.sign(z) * np.maximum(np.abs(z) - a, 0.0) + 0.0
    if np.ndim(out) == 0:
        return float(out)
    return out


def _gaussian_violations(X: np.ndarray, resid: np.ndarray, beta: np.ndarray, thr: np.ndarray) -> np.ndarray:
    g = -(X.T @ resid)
    with np.errstate(invalid="ignore"):
        active = np.abs(g + thr * np.sign(beta))
        inactive = np.maximum(np.abs(g) - thr, 0.0)
    return np.where(beta != 0, active, inactive)


def _require_gaussian(data: Dataset, what: str) -> None:
    if not data.is_gaussian:
        raise ValidationError(f"{what} requires the Gaussian family")


def _weighted_penalty(thr: np.ndarray, beta: np.ndarray) -> float:
    nz = beta != 0
    return float(np.sum(thr[nz] * np.abs(beta[nz])))


def max_lambda(data: Dataset, weights: Optional[np.ndarray] = None) -> float:
    """Smallest lambda at which every penalized coefficient is zero."""
    w = np.ones(data.p) if weights is None else np.asarray(weights, dtype=float)
    if data.is_gaussian:
        X, resid, _, _ = data.centered()
        unpenalized = w == 0
        if np.any(unpenalized):
            U = X[:, unpenalized]
            resid = resid - U @ lstsq(U, resid)[0]
    else:
        X = data.X
        base = data.y.mean() if data.intercept else 0.5
        resid = data.y - base
        if data.intercept:
            X = X - X.mean(axis=0)
    penalized = np.isfinite(w) & (w > 0)
    if not np.any(penalized):
        return 0.0
    return float(np.max(np.abs(X[:, penalized].T @ resid) / w[penalized]))


# -------------------- Coordinate descent --------------------

def _solve_on_support(X: np.ndarray, y: np.ndarray, beta: np.ndarray, thr: np.ndarray) -> Optional[np.ndarray]:
    """Exact minimiser on the current support with its signs held fixed.

    Solves X_A'X_A b = X_A'y - thr_A sign(beta_A) through a QR factorisation of
    X_A. Returns None when X_A is rank deficient or a penalized coordinate would
    change sign.
    """
    A = np.flatnonzero(beta)
    if A.size == 0 or A.size >= X.shape[0]:
        return None
    Q, R = qr(X[:, A], mode="economic")
    diag = np.abs(np.diag(R))
    if diag.min() <= np.finfo(float).eps * A.size * diag.max():
        return None
    signs = np.sign(beta[A])
    penalized = thr[A] > 0
    shift = solve_triangular(R, np.where(penalized, thr[A] * signs, 0.0), trans="T")
    solution = solve_triangular(R, Q.T @ y - shift)
    if not np.all(np.isfinite(solution)) or np.any(np.sign(solution[penalized]) != signs[penalized]):
        return None
    out = beta.copy()
    out[A] = solution
    return out


def solve_weighted_lasso_cd(
    prob: WeightedL1Problem,
    init: Optional[np.ndarray] = None,
    tol: float = config.CD_TOL,
    max_iter: int = config.CD_MAX_ITER,
) -> Estimate:
    """Cyclic coordinate descent with active-set iteration (Gaussian).

    A full sweep is followed by sweeps over the nonzero coordinates until their
    changes settle, then the KKT equations on that support are solved directly
    when the result keeps every sign. The loop ends when a full sweep leaves a
    KKT residual <= max(tol, config.CD_RELATIVE_TOL * max|X'y|); a full sweep
    that changes nothing above that residual raises NonConvergenceError.
    """
    data = prob.data
    _require_gaussian(data, "coordinate descent")
    if not tol > 0:
        raise ValidationError(f"tol must be positive, got {tol}")

    X, y, x_mean, y_mean = data.centered()
    thr = prob.thresholds
    col_sq = np.einsum("ij,ij->j", X, X)
    tol = max(tol, config.CD_RELATIVE_TOL * float(np.max(np.abs(X.T @ y), initial=0.0)))

    beta = np.zeros(data.p) if init is None else np.array(init, dtype=float, copy=True)
    if beta.shape != (data.p,) or not np.all(np.isfinite(beta)):
        raise ValidationError("init must be a finite vector of length p")
    beta[prob.excluded | (col_sq == 0)] = 0.0
    free = np.flatnonzero(~prob.excluded & (col_sq > 0))
    resid = y - X @ beta

    def sweep(indices: np.ndarray) -> float:
        nonlocal resid
        biggest = 0.0
        for j in indices:
            xj = X[:, j]
            old = beta[j]
            z = xj @ resid + col_sq[j] * old
            new = soft_threshold(z, thr[j]) / col_sq[j]
            if new != old:
                resid = resid - (new - old) * xj
                beta[j] = new
                biggest = max(biggest, col_sq[j] * abs(new - old))
        return biggest

    sweeps = 0
    while True:
        full_change = sweep(free)
        sweeps += 1
        resid = y - X @ beta
        kkt = float(np.max(_gaussian_violations(X, resid, beta, thr), initial=0.0))
        if kkt <= tol:
            break
        if full_change == 0.0:
            raise NonConvergenceError(
                f"coordinate descent stalled with KKT residual {kkt:.3g} above {tol:.3g}",
                beta=beta,
                residual=kkt,
            )
        if sweeps >= max_iter:
            raise NonConvergenceError(
                f"coordinate descent did not converge in {max_iter} sweeps",
                beta=beta,
                residual=kkt,
            )
        active = free[beta[free] != 0]
        for _ in range(min(config.CD_ACTIVE_SWEEPS, max_iter - sweeps)):
            sweeps += 1
            if sweep(active) <= tol:
                break
        polished = _solve_on_support(X, y, beta, thr)
        if polished is not None:
            beta[:] = polished
            resid = y - X @ beta

    logger.debug("CD converged after %d sweeps (kkt=%.3g)", sweeps, kkt)
    beta = beta + 0.0
    intercept = y_mean - x_mean @ beta if data.intercept else 0.0
    objective = 0.5 * float(resid @ resid) + _weighted_penalty(thr, beta)
    return Estimate(
        beta=beta,
        intercept=intercept,
        provenance=Provenance("cd_weighted_lasso", lam=prob.lam),
        objective=objective,
        kkt=kkt,
    )


def kkt_check(prob: WeightedL1Problem, beta: np.ndarray, intercept: Optional[float] = None) -> float:
    """Largest violation of the weighted-lasso optimality conditions.

    violation_j = |g_j + lambda w_j sign(beta_j)| if beta_j != 0, else
    (|g_j| - lambda w_j)_+, with g the gradient of the smooth part. Gaussian
    problems profile the intercept out; Binomial problems use the given
    intercept and also count its own score equation.
    """
    data = prob.data
    beta = np.asarray(beta, dtype=float)
    thr = prob.thresholds
    if data.is_gaussian:
        X, y, _, _ = data.centered()
        resid = y - X @ beta
        return float(np.max(_gaussian_violations(X, resid, beta, thr), initial=0.0))

    if intercept is None:
        if data.intercept:
            raise ValidationError("kkt_check needs the intercept for Binomial problems")
        intercept = 0.0
    mu = expit(intercept + data.X @ beta)
    resid = data.y - mu
    worst = float(np.max(_gaussian_violations(data.X, resid, beta, thr), initial=0.0))
    if data.intercept:
        worst = max(worst, abs(float(resid.sum())))
    return worst


# -------------------- LARS --------------------

def lars_path(data: Dataset, weights: Optional[np.ndarray] = None) -> SolutionPath:
    """Lasso path of the weighted problem via LARS with the lasso modification.

    Finite positive weights are absorbed by rescaling x_j / w_j; zero weights
    mark unpenalized columns, which are profiled out by projection; +inf
    weights drop the column. Breakpoints are reported in this module's lambda
    convention (no 1/n).
    """
    _require_gaussian(data, "lars_path")
    w = np.ones(data.p) if weights is None else np.array(weights, dtype=float)
    WeightedL1Problem(data, 0.0, w)  # validates the weights

    X, y, x_mean, y_mean = data.centered()
    n, p = X.shape
    unpenalized = w == 0
    penalized = np.isfinite(w) & (w > 0)
    pen_idx = np.flatnonzero(penalized)
    U = X[:, unpenalized]

    def project(A: np.ndarray) -> np.ndarray:
        if U.shape[1] == 0:
            return A
        return A - U @ lstsq(U, A)[0]

    ties = []
    if pen_idx.size == 0:
        lambdas = np.array([0.0])
        betas = np.zeros((1, p))
    else:
        X_tilde = project(X[:, pen_idx]) / w[pen_idx]
        y_tilde = project(y)
        alphas, _, coefs = sklearn_lars_path(
            X_tilde,
            y_tilde,
            method="lasso",
            alpha_min=0.0,
            max_iter=max(500, 10 * p),
            return_path=True,
        )
        raw_lambdas = alphas * n

        keep = [0]
        for k in range(1, len(raw_lambdas)):
            if raw_lambdas[k] < raw_lambdas[keep[-1]]:
                keep.append(k)
        lambdas = raw_lambdas[keep]
        coefs_tilde = coefs[:, keep].T

        for k, lam in enumerate(lambdas):
            if lam <= 0:
                continue
            c = X_tilde.T @ (y_tilde - X_tilde @ coefs_tilde[k])
            at_boundary = int(np.sum(np.abs(c) >= lam * (1 - 1e-9)))
            if at_boundary > np.count_nonzero(coefs_tilde[k]) + 1:
                ties.append(float(lam))

        betas = np.zeros((len(lambdas), p))
        betas[:, pen_idx] = coefs_tilde / w[pen_idx]

    if U.shape[1]:
        fitted_pen = X[:, pen_idx] @ betas[:, pen_idx].T
        betas[:, unpenalized] = lstsq(U, y[:, None] - fitted_pen)[0].T

    if ties:
        logger.warning(
            "LARS met %d tied entry events; lowest column index was taken", len(ties)
        )
    betas = betas + 0.0
    intercepts = (y_mean - betas @ x_mean) if data.intercept else np.zeros(len(lambdas))
    return SolutionPath(
        breakpoints=lambdas,
        coefficients=betas,
        active_sets=tuple(tuple(int(j) for j in np.flatnonzero(b)) for b in betas),
        intercepts=intercepts,
        metadata={
            "tie_breaks": ties,
            "tie_rule": "lowest column index",
            "excluded": [int(j) for j in np.flatnonzero(np.isinf(w))],
            "unpenalized": [int(j) for j in np.flatnonzero(unpenalized)],
        },
    )


# -------------------- Ridge --------------------

def solve_ridge_weighted(data: Dataset, diag: np.ndarray) -> np.ndarray:
    """argmin 1/2 ||y - X beta||^2 + sum_j d_j beta_j^2 (Gaussian).

    d_j = +inf drops column j (coefficient 0); the others are refit.
    """
    _require_gaussian(data, "ridge")
    d = np.asarray(diag, dtype=float)
    if d.shape != (data.p,) or np.any(np.isnan(d)) or np.any(d < 0):
        raise ValidationError("diag must be a nonnegative vector of length p")

    X, y, _, _ = data.centered()
    keep = np.isfinite(d)
    beta = np.zeros(data.p)
    if not np.any(keep):
        return beta

    Xk = X[:, keep]
    A = Xk.T @ Xk + 2.0 * np.diag(d[keep])
    b = Xk.T @ y
    k = A.shape[0]
    try:
        factor = cho_factor(A)
        pivots = np.abs(np.diag(factor[0]))
        if pivots.min() ** 2 <= np.finfo(float).eps * max(pivots.max() ** 2, 1.0) * k:
            raise LinAlgError("numerically singular")
    except LinAlgError:
        deficiency = k - int(np.linalg.matrix_rank(A))
        raise SingularSystemError(
            f"ridge system is singular: {max(deficiency, 1)}-dimensional null space "
            "(X'X + 2D is not positive definite)",
            deficiency=max(deficiency, 1),
        )
    solution = cho_solve(factor, b)
    # one step of iterative refinement
    solution = solution + cho_solve(factor, b - A @ solution)
    beta[keep] = solution
    return beta


# -------------------- IRLS (Binomial) --------------------

def separating_direction(Z: np.ndarray, y: np.ndarray) -> Optional[np.ndarray]:
    """A direction d with (2y - 1) * (Z d) >= 0 for every row and > 0 for some, if one exists.

    Such a d (complete or quasi-complete separation) drives the logistic
    likelihood towards its supremum as t * d with t -> inf, so no finite
    maximiser exists. Found by the LP max 1'Ad s.t. Ad >= 0, -1 <= d <= 1,
    A = diag(2y - 1) Z.
    """
    n, k = Z.shape
    if k == 0:
        return None
    A = (2 * y - 1)[:, None] * Z
    res = linprog(-A.sum(axis=0), A_ub=-A, b_ub=np.zeros(n), bounds=[(-1.0, 1.0)] * k, method="highs")
    if res.status != 0:
        logger.warning("separation LP ended with status %d: %s", res.status, res.message)
        return None
    margin = A @ res.x
    if margin.max() > config.SEPARATION_LP_TOL * max(1.0, float(np.abs(A).max())):
        return res.x
    return None


def _check_separation(data: Dataset, thr: np.ndarray) -> None:
    """Raise SeparationError when the unpenalized part of the model separates the classes.

    Coordinates with a positive finite threshold stay bounded under the L1
    penalty; only the intercept and zero-threshold coordinates can run off.
    """
    if data.intercept:
        ybar = float(data.y.mean())
        if ybar in (0.0, 1.0):
            raise SeparationError(
                "separation detected: the response is constant; increase lambda "
                "or drop the intercept",
            )
    free = np.flatnonzero(thr == 0)
    Z = data.X[:, free]
    if data.intercept:
        Z = np.column_stack([np.ones(data.n), Z])
    direction = separating_direction(Z, data.y)
    if direction is not None:
        names = [data.feature_names[j] for j in free[np.abs(direction[int(data.intercept):]) > 1e-9]]
        raise SeparationError(
            "separation detected: the unpenalized predictors separate the two classes, "
            "so the likelihood has no finite maximiser; use a positive lambda",
            predictors=names,
        )

def _binomial_objective(data: Dataset, thr: np.ndarray, beta: np.ndarray, intercept: float) -> float:
    eta = intercept + data.X @ beta
    nll = float(np.sum(np.logaddexp(0.0, eta) - data.y * eta))
    return nll + _weighted_penalty(thr, beta)


def irls_penalized(
    prob: WeightedL1Problem,
    init: Optional[np.ndarray] = None,
    outer_tol: float = config.IRLS_TOL,
    max_outer: int = config.IRLS_MAX_OUTER,
    intercept_init: Optional[float] = None,
) -> Estimate:
    """Penalized logistic regression by IRLS with a weighted-lasso inner solve.

    Each outer step solves the weighted least-squares lasso on the working
    response; a step that raises the penalized objective is halved (up to
    config.IRLS_MAX_HALVINGS times).
    """
    data = prob.data
    if data.is_gaussian:
        raise ValidationError("irls_penalized requires the Binomial family")
    X, y = data.X, data.y
    thr = prob.thresholds

    beta = np.zeros(data.p) if init is None else np.array(init, dtype=float, copy=True)
    if beta.shape != (data.p,) or not np.all(np.isfinite(beta)):
        raise ValidationError("init must be a finite vector of length p")
    beta[prob.excluded] = 0.0

    _check_separation(data, thr)
    if data.intercept:
        ybar = float(y.mean())
        intercept = np.log(ybar / (1 - ybar)) if intercept_init is None else float(intercept_init)
    else:
        intercept = 0.0

    current = _binomial_objective(data, thr, beta, intercept)
    norms = []
    converged = False
    change = np.inf
    outer = 0
    for outer in range(1, max_outer + 1):
        eta = intercept + X @ beta
        mu = expit(eta)
        w = np.maximum(mu * (1 - mu), config.IRLS_WEIGHT_FLOOR)
        z = eta + (y - mu) / w
        sw = np.sqrt(w)
        if data.intercept:
            x_bar = (w @ X) / w.sum()
            z_bar = float(w @ z / w.sum())
            Xw = sw[:, None] * (X - x_bar)
            zw = sw * (z - z_bar)
        else:
            x_bar, z_bar = np.zeros(data.p), 0.0
            Xw, zw = sw[:, None] * X, sw * z

        working = WeightedL1Problem(
            Dataset(Xw, zw, intercept=False), prob.lam, prob.weights
        )
        target = solve_weighted_lasso_cd(working, init=beta).beta
        target_intercept = z_bar - x_bar @ target if data.intercept else 0.0

        step = 1.0
        cand_beta, cand_intercept = target, target_intercept
        cand = _binomial_objective(data, thr, cand_beta, cand_intercept)
        slack = 1e-12 * max(1.0, abs(current))
        halvings = 0
        while cand > current + slack and halvings < config.IRLS_MAX_HALVINGS:
            step /= 2
            halvings += 1
            cand_beta = beta + step * (target - beta)
            cand_intercept = intercept + step * (target_intercept - intercept)
            cand = _binomial_objective(data, thr, cand_beta, cand_intercept)
        if cand > current + slack:
            converged = True
            break

        change = max(float(np.max(np.abs(cand_beta - beta), initial=0.0)), abs(cand_intercept - intercept))
        beta, intercept, current = cand_beta, cand_intercept, cand

        norms.append(float(np.hypot(np.linalg.norm(beta), intercept)))
        if change < outer_tol:
            converged = True
            break

    if not converged:
        # a converging sequence has shrinking increments; a diverging one does not
        recent = norms[-config.IRLS_DIVERGENCE_WINDOW:]
        growth = np.diff(recent)
        if len(recent) == config.IRLS_DIVERGENCE_WINDOW and np.all(growth > 0) and growth[-1] >= 0.5 * growth[0]:
            raise SeparationError(
                f"separation detected: ||(intercept, beta)|| kept growing to {recent[-1]:.3g} "
                f"over the last {len(recent)} IRLS steps; use a stronger lambda",
                outer_iterations=outer,
            )
        raise NonConvergenceError(
            f"IRLS did not converge in {max_outer} outer iterations",
            intercept=intercept,
            objective=current,
            beta=beta,
            residual=change,
        )

    beta = beta + 0.0
    logger.debug("IRLS converged after %d outer steps", outer)
    return Estimate(
        beta=beta,
        intercept=intercept,
        provenance=Provenance("irls_weighted_lasso", lam=prob.lam, steps=outer),
        objective=current,
        kkt=kkt_check(prob, beta, intercept),
    )
