"""
Monte-Carlo harness comparing sparse estimators on simulated data.

Each replication draws a fresh dataset from its own random stream
(SeedSequence([seed, replication])), fits every estimator in the battery with
its own tuning, and scores it against the true coefficients. Replications may
run in several worker processes; rows are sorted by replication before anything is
written, so the report does not depend on scheduling.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.linalg import LinAlgError, cholesky, toeplitz
from scipy.special import expit

import config
from dataset import Dataset, ResponseFamily
from errors import SparseEstimationError, ValidationError
from estimators import (
    InitialMethod,
    fit_initial,
    lasso_cv,
    lqa_fit,
    msa_lasso,
    multi_step_lla,
    one_step_lla,
    select_gamma,
    tune_adaptive,
)
from penalty import Family, PenaltySpec
from solver import solve_ridge_weighted
from tuning import lambda_grid, tune_lambda

logger = logging.getLogger(__name__)

METHODS = ("ols", "oracle_ols", "lasso", "one_step", "lla", "adaptive", "msa", "lqa")

METRIC_COLUMNS = [
    "model_error",
    "correct_zeros",
    "incorrect_zeros",
    "false_positives",
    "false_negatives",
    "true_negatives",
    "active_size",
]

SUMMARY_COLUMNS = ["estimator", "mean_ME", "median_ME", "mean_FP", "mean_FN", "mean_active_size"]

PER_REP_COLUMNS = ["rep", "order", "estimator"] + METRIC_COLUMNS + ["status", "lambda_chosen", "flags", "detail"]
AGGREGATE_EXTRAS = ["median_FP", "mean_correct_zeros", "n_ok", "n_failed"]


# -------------------- Scenarios --------------------

@dataclass(frozen=True)
class ScenarioSpec:
    """Simulation design: x ~ N(0, Sigma) with Sigma_ij = rho^|i-j|."""

    n: int = config.DEFAULT_N
    beta_star: Tuple[float, ...] = config.DEFAULT_BETA_STAR
    rho: float = config.DEFAULT_RHO
    sigma: float = config.DEFAULT_SIGMA
    family: ResponseFamily = ResponseFamily.GAUSSIAN
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "beta_star", tuple(float(b) for b in self.beta_star))
        try:
            object.__setattr__(self, "family", ResponseFamily(self.family))
        except ValueError:
            raise ValidationError(f"Unknown likelihood family: {self.family!r}")
        if self.n < 4:
            raise ValidationError(f"scenario needs n >= 4, got {self.n}")
        if not self.beta_star:
            raise ValidationError("beta_star must be nonempty")
        if not abs(self.rho) < 1:
            raise ValidationError(f"need |rho| < 1, got {self.rho}")
        if self.sigma < 0:
            raise ValidationError(f"sigma must be nonnegative, got {self.sigma}")

    @property
    def p(self) -> int:
        return len(self.beta_star)

    @property
    def covariance(self) -> np.ndarray:
        return toeplitz(self.rho ** np.arange(self.p))

    def to_json(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["beta_star"] = list(self.beta_star)
        payload["family"] = self.family.value
        payload["p"] = self.p
        return payload

    @classmethod
    def from_json(cls, payload: Dict[str, Any]) -> "ScenarioSpec":
        payload = dict(payload)
        if "correlation" in payload:
            payload["rho"] = payload.pop("correlation")
        p = payload.pop("p", None)
        unknown = set(payload) - {"n", "beta_star", "rho", "sigma", "family", "seed"}
        if unknown:
            raise ValidationError(f"Unknown scenario fields: {sorted(unknown)}")
        spec = cls(**payload)
        if p is not None and p != spec.p:
            raise ValidationError(f"scenario p={p} does not match len(beta_star)={spec.p}")
        return spec


@dataclass(frozen=True, eq=False)
class Scenario:
    data: Dataset
    beta_star: np.ndarray
    Sigma: np.ndarray


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, replication]))


def generate_scenario(spec: ScenarioSpec, replication: int = 0) -> Scenario:
    """Draw one dataset; the same (seed, replication) always gives the same data."""
    rng = replication_rng(spec.seed, replication)
    Sigma = spec.covariance
    L = cholesky(Sigma, lower=True)
    X = rng.standard_normal((spec.n, spec.p)) @ L.T
    beta_star = np.array(spec.beta_star)
    eta = X @ beta_star
    if spec.family is ResponseFamily.GAUSSIAN:
        y = eta + spec.sigma * rng.standard_normal(spec.n)
    else:
        y = (rng.uniform(size=spec.n) < expit(eta)).astype(float)
    return Scenario(data=Dataset(X, y, family=spec.family), beta_star=beta_star, Sigma=Sigma)


def evaluate(beta_hat: np.ndarray, beta_star: np.ndarray, Sigma: np.ndarray) -> Dict[str, float]:
    """Model error (b - b*)' Sigma (b - b*) and selection counts."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_star = np.asarray(beta_star, dtype=float)
    if beta_hat.shape != beta_star.shape or Sigma.shape != (beta_star.size, beta_star.size):
        raise ValidationError("beta_hat, beta_star and Sigma dimensions disagree")
    diff = beta_hat - beta_star
    selected = beta_hat != 0
    truth = beta_star != 0
    correct_zeros = int(np.sum(~selected & ~truth))
    incorrect_zeros = int(np.sum(~selected & truth))
    return {
        "model_error": float(diff @ Sigma @ diff),
        "correct_zeros": correct_zeros,
        "incorrect_zeros": incorrect_zeros,
        "false_positives": int(np.sum(selected & ~truth)),
        "false_negatives": incorrect_zeros,
        "true_negatives": correct_zeros,
        "active_size": int(selected.sum()),
    }


# -------------------- Estimator battery --------------------

@dataclass(frozen=True)
class EstimatorConfig:
    """One member of a comparison battery.

    ``method`` picks the estimator; ``penalty`` and ``shape`` apply to
    one_step, lla and lqa; ``gamma`` of None means the adaptive lasso picks it
    by CV over config.GAMMA_GRID.
    """

    name: str
    method: str
    penalty: str = Family.SCAD.value
    initial: str = InitialMethod.LASSO.value
    tuner: str = "cv"
    steps: int = config.LLA_MAX_STEPS
    gamma: Optional[float] = None
    shape: Optional[float] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"Unknown estimator method {self.method!r}; expected one of {METHODS}")
        if self.tuner not in ("cv", "bic"):
            raise ValidationError(f"Unknown tuner {self.tuner!r}")
        if self.initial not in {m.value for m in InitialMethod}:
            raise ValidationError(f"Unknown initial estimator {self.initial!r}")

    def penalty_spec(self, lam: float = 1.0) -> PenaltySpec:
        return PenaltySpec(self.penalty, lam, shape=self.shape)

    def to_json(self) -> Dict[str, Any]:
        return asdict(self)


def default_battery() -> List[EstimatorConfig]:
    return [
        EstimatorConfig("lasso_cv", "lasso"),
        EstimatorConfig("one_step_scad", "one_step", penalty="scad"),
        EstimatorConfig("lla_scad", "lla", penalty="scad"),
        EstimatorConfig("one_step_mcp", "one_step", penalty="mcp"),
        EstimatorConfig("adaptive_lasso", "adaptive"),
        EstimatorConfig("msa_lasso", "msa", steps=3),
        EstimatorConfig("ols", "ols"),
    ]


def fit_battery_member(
    cfg: EstimatorConfig,
    data: Dataset,
    seed: int = 0,
    true_support: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, float, Tuple[str, ...]]:
    """Fit one estimator with its own tuning; returns (beta, lambda_chosen, flags).

    Coefficients come back on the scale of ``data``: the fit itself runs on
    the standardized copy.
    """
    std = data.standardize()
    method = cfg.method

    if method == "ols":
        beta = fit_initial(InitialMethod.OLS, std)
        return _raw(std, beta), np.nan, ()
    if method == "oracle_ols":
        if true_support is None:
            raise ValidationError("oracle_ols needs the true support")
        diag = np.where(np.isin(np.arange(data.p), true_support), 0.0, np.inf)
        return _raw(std, solve_ridge_weighted(std, diag)), np.nan, ()
    if method == "lasso":
        tuned = lasso_cv(std, seed=seed, tuner=cfg.tuner)
        return _raw(std, tuned.estimate.beta), tuned.lambda_best, tuned.estimate.flags
    if method == "msa":
        trajectory = msa_lasso(std, cfg.steps, tuner=cfg.tuner, seed=seed)
        return _raw(std, trajectory.final.beta), trajectory.lambdas[-1], trajectory.flags

    beta0 = fit_initial(cfg.initial, std, seed=seed)
    if method == "adaptive":
        if cfg.gamma is None:
            chosen = select_gamma(std, beta0, seed=seed)
            return _raw(std, chosen.estimate.beta), chosen.lambda_best, chosen.estimate.flags
        tuned = tune_adaptive(std, cfg.gamma, beta0, tuner=cfg.tuner, seed=seed, initial_name=cfg.initial)
        return _raw(std, tuned.estimate.beta), tuned.lambda_best, tuned.estimate.flags
    if method == "one_step":
        def fitter(train, lam):
            return one_step_lla(train, cfg.penalty_spec(lam), beta0, initial_name=cfg.initial)
        grid = lambda_grid(std)
    elif method == "lla":
        def fitter(train, lam):
            return multi_step_lla(train, cfg.penalty_spec(lam), beta0, max_steps=cfg.steps).final
        grid = lambda_grid(std)
    else:
        def fitter(train, lam):
            return lqa_fit(train, cfg.penalty_spec(lam), beta0)
        grid = lambda_grid(std)

    tuned = tune_lambda(fitter, std, grid, tuner=cfg.tuner, seed=seed)
    return _raw(std, tuned.estimate.beta), tuned.lambda_best, tuned.estimate.flags


def _raw(std: Dataset, beta: np.ndarray) -> np.ndarray:
    # the intercept does not enter model error
    return std.to_original_scale(beta, 0.0)[0] + 0.0


# -------------------- Harness --------------------

def _replication_rows(
    battery: Sequence[EstimatorConfig], spec: ScenarioSpec, replication: int
) -> List[Dict[str, Any]]:
    scenario = generate_scenario(spec, replication)
    fit_seed = int(np.random.SeedSequence([spec.seed, replication]).generate_state(1)[0])
    support = np.flatnonzero(scenario.beta_star)
    rows = []
    for order, cfg in enumerate(battery):
        row: Dict[str, Any] = {"rep": replication, "order": order, "estimator": cfg.name}
        try:
            beta, lam, flags = fit_battery_member(cfg, scenario.data, seed=fit_seed, true_support=support)
            row.update(evaluate(beta, scenario.beta_star, scenario.Sigma))
            row.update(status="ok", lambda_chosen=lam, flags=",".join(flags), detail="")
        except (SparseEstimationError, LinAlgError) as e:
            detail = e.detail if isinstance(e, SparseEstimationError) else str(e)
            logger.warning("rep %d: %s failed: %s", replication, cfg.name, detail)
            row.update({c: np.nan for c in METRIC_COLUMNS})
            row.update(status="failed", lambda_chosen=np.nan, flags="", detail=detail)
        rows.append(row)
    return rows


def run_comparison(
    battery: Sequence[EstimatorConfig],
    spec: ScenarioSpec,
    reps: int,
    seed: Optional[int] = None,
    n_jobs: int = config.DEFAULT_THREADS,
) -> "SimulationReport":
    """Fit every estimator on ``reps`` simulated datasets and tabulate the metrics.

    ``seed`` overrides the scenario's own seed when given. A failing fit is
    recorded as a ``failed`` row.
    """
    if reps < 1:
        raise ValidationError(f"reps must be >= 1, got {reps}")
    if not battery:
        raise ValidationError("battery must contain at least one estimator")
    names = [cfg.name for cfg in battery]
    if len(set(names)) != len(names):
        raise ValidationError(f"estimator names must be unique, got {names}")
    if seed is not None:
        spec = ScenarioSpec(**{**asdict(spec), "seed": seed})

    logger.info("Running %d replications of %d estimators on %d worker(s)", reps, len(battery), n_jobs)
    chunks = Parallel(n_jobs=n_jobs)(
        delayed(_replication_rows)(battery, spec, r) for r in range(reps)
    )
    rows = [row for chunk in chunks for row in chunk]
    run_config = {
        "scenario": spec.to_json(),
        "battery": [cfg.to_json() for cfg in battery],
        "reps": reps,
    }
    return SimulationReport.from_rows(rows, run_config, spec.seed)


@dataclass(frozen=True, eq=False)
class SimulationReport:
    per_rep: pd.DataFrame
    aggregates: pd.DataFrame
    config: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_rows(cls, rows: List[Dict[str, Any]], run_config: Dict[str, Any], seed: int) -> "SimulationReport":
        per_rep = pd.DataFrame(rows, columns=PER_REP_COLUMNS)
        per_rep = per_rep.sort_values(["rep", "order"], kind="mergesort").reset_index(drop=True)
        return cls(per_rep=per_rep, aggregates=aggregate(per_rep), config=run_config, seed=seed)

    @property
    def failures(self) -> pd.DataFrame:
        return self.per_rep[self.per_rep["status"] != "ok"]

    def summary_frame(self) -> pd.DataFrame:
        return self.aggregates[SUMMARY_COLUMNS]

    def write_summary_csv(self, path) -> None:
        self.summary_frame().to_csv(
            path,
            index=False,
            float_format=f"%.{config.SUMMARY_SIGNIFICANT_DIGITS}g",
            lineterminator="\n",
        )

    def to_json(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "config": self.config,
            "per_rep": _records(self.per_rep),
            "aggregates": _records(self.aggregates),
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(self.to_json(), f, indent=2, sort_keys=True, allow_nan=False)
            f.write("\n")

    @classmethod
    def from_json(cls, payload: Dict[str, Any]) -> "SimulationReport":
        per_rep = pd.DataFrame(payload["per_rep"], columns=PER_REP_COLUMNS)
        for column in METRIC_COLUMNS + ["lambda_chosen"]:
            per_rep[column] = pd.to_numeric(per_rep[column], errors="coerce")
        return cls.from_rows(per_rep.to_dict("records"), payload.get("config", {}), payload.get("seed", 0))


def aggregate(per_rep: pd.DataFrame) -> pd.DataFrame:
    """Means and medians per estimator over successful replications, sorted by name."""
    if per_rep.empty:
        return pd.DataFrame(columns=SUMMARY_COLUMNS + AGGREGATE_EXTRAS)
    names = sorted(per_rep["estimator"].unique())
    ok = per_rep[per_rep["status"] == "ok"]
    grouped = ok.groupby("estimator")
    table = pd.DataFrame({
        "mean_ME": grouped["model_error"].mean(),
        "median_ME": grouped["model_error"].median(),
        "mean_FP": grouped["false_positives"].mean(),
        "mean_FN": grouped["false_negatives"].mean(),
        "mean_active_size": grouped["active_size"].mean(),
        "median_FP": grouped["false_positives"].median(),
        "mean_correct_zeros": grouped["correct_zeros"].mean(),
    }).reindex(names)
    counts = per_rep.groupby("estimator")["status"]
    table["n_ok"] = counts.apply(lambda s: int((s == "ok").sum())).reindex(names)
    table["n_failed"] = counts.apply(lambda s: int((s != "ok").sum())).reindex(names)
    return table.rename_axis("estimator").reset_index()


def _records(frame: pd.DataFrame) -> List[Dict[str, Any]]:
    out = []
    for record in frame.to_dict("records"):
        clean = {}
        for key, value in record.items():
            if isinstance(value, (np.integer,)):
                value = int(value)
            elif isinstance(value, (float, np.floating)):
                value = float(value) if np.isfinite(value) else None
            clean[key] = value
        out.append(clean)
    return out
