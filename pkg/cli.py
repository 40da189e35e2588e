"""
Command-line front end.

    python cli.py fit --data d.csv --response y --penalty scad --cv --initial lasso --out run/
    python cli.py path --data d.csv --penalty lasso --out run/
    python cli.py simulate --reps 100 --seed 1 --out sim/
    python cli.py compare --data d.csv --out cmp/
    python cli.py subset --data d.csv --lambda 2.0 --out sub/
    python cli.py recovery --reps 100 --n 64 --p 16 --k 1 --out rec/

Every run writes config.json (the resolved configuration, seed included) next
to its artifacts. Exit codes: 0 success, 1 validation or I/O, 2 computation.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

import config
from dataset import Dataset, ResponseFamily
from errors import SparseEstimationError, ValidationError, jsonable
from estimators import (
    InitialMethod,
    adaptive_lasso,
    fit_initial,
    lasso,
    lasso_cv,
    lqa_fit,
    msa_lasso,
    multi_step_lla,
    one_step_lla,
    select_gamma,
    tune_adaptive,
)
from oracle import best_subset_l0, exact_recovery_check, recovery_design
from penalty import Family, PenaltySpec, lla_weights
from sanitizer import DataSanitizer
from simulation import (
    ScenarioSpec,
    SimulationReport,
    default_battery,
    fit_battery_member,
    run_comparison,
)
from solver import Estimate, lars_path
from tuning import bic_select, lambda_grid, tune_lambda

logger = logging.getLogger(__name__)

COMMANDS = ("fit", "path", "simulate", "compare", "subset", "recovery")
DATA_COMMANDS = ("fit", "path", "compare", "subset")

PENALTIES = {
    "lasso": Family.L1,
    "scad": Family.SCAD,
    "mcp": Family.MCP,
    "adalasso": Family.ADAPTIVE,
    "bridge": Family.BRIDGE,
    "log": Family.LOG,
}


@dataclass
class RunConfig:
    command: str
    data: Optional[str] = None
    response: Optional[str] = None
    family: str = ResponseFamily.GAUSSIAN.value
    penalty: str = "scad"
    lam: Optional[float] = None
    tuner: str = "cv"
    gamma: Optional[float] = None
    gamma_cv: bool = False
    initial: str = InitialMethod.LASSO.value
    steps: int = 1
    algorithm: str = "lla"
    solver: str = "cd"
    shape: Optional[float] = None
    epsilon: float = config.PENALTY_EPSILON
    folds: int = config.CV_FOLDS
    one_se: bool = False
    seed: int = 0
    out: str = "."
    reps: int = 100
    scenario: Dict[str, Any] = field(default_factory=dict)
    n: int = 64
    p: int = 16
    k: int = 1
    kind: str = "rademacher"
    noise_sd: float = 0.0
    # threads and out are not echoed; artifacts must not depend on them
    threads: int = config.DEFAULT_THREADS

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ValidationError(f"Unknown command {self.command!r}; expected one of {COMMANDS}")
        if self.command in DATA_COMMANDS:
            if not self.data:
                raise ValidationError(f"'{self.command}' needs --data")
            DataSanitizer.validate_file(self.data)
        if self.penalty not in PENALTIES:
            raise ValidationError(f"Unknown penalty {self.penalty!r}; expected one of {sorted(PENALTIES)}")
        if self.algorithm not in ("lla", "lqa"):
            raise ValidationError(f"Unknown algorithm {self.algorithm!r}; expected 'lla' or 'lqa'")
        if self.penalty == "lasso" and (self.algorithm == "lqa" or self.steps > 1):
            raise ValidationError(
                "the lasso is convex and fitted directly; --algorithm lqa and --steps > 1 "
                "apply to the nonconcave penalties (use adalasso --steps k for MSA-LASSO)"
            )
        if self.tuner not in ("cv", "bic", "fixed"):
            raise ValidationError(f"Unknown tuner {self.tuner!r}")
        if self.tuner == "fixed" and self.lam is None:
            raise ValidationError("a fixed lambda needs --lambda")
        if self.command == "subset" and self.lam is None:
            raise ValidationError("'subset' needs --lambda")
        if self.steps < 1:
            raise ValidationError(f"--steps must be >= 1, got {self.steps}")
        if self.reps < 1:
            raise ValidationError(f"--reps must be >= 1, got {self.reps}")
        if self.threads < 1:
            raise ValidationError(f"--threads must be >= 1, got {self.threads}")
        if self.lam is not None and not (np.isfinite(self.lam) and self.lam >= 0):
            raise ValidationError(f"--lambda must be a finite nonnegative number, got {self.lam}")

    def to_json(self) -> Dict[str, Any]:
        echo = asdict(self)
        echo.pop("threads")
        echo.pop("out")
        return echo


# -------------------- Output helpers --------------------

def write_json(path: str, payload: Any) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(jsonable(payload), f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")


def _prepare_out_dir(out: str) -> None:
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as e:
        raise ValidationError(f"Cannot create output directory {out}: {e.strerror}", path=out)
    if not os.access(out, os.W_OK):
        raise ValidationError(f"Output directory is not writable: {out}", path=out)


def emit_report(report: SimulationReport, out_dir: str) -> Tuple[str, str]:
    """Write simulation.json (full per-replication data) and summary.csv."""
    _prepare_out_dir(out_dir)
    json_path = os.path.join(out_dir, "simulation.json")
    csv_path = os.path.join(out_dir, "summary.csv")
    try:
        report.write_json(json_path)
        report.write_summary_csv(csv_path)
    except OSError as e:
        raise ValidationError(f"Cannot write report: {e}", path=out_dir)
    return json_path, csv_path


def _estimate_payload(std: Dataset, est: Estimate) -> Dict[str, Any]:
    payload = est.to_json()
    beta, intercept = std.to_original_scale(est.beta, est.intercept)
    payload["beta"] = [float(b) for b in beta + 0.0]
    payload["intercept"] = intercept
    payload["beta_standardized"] = [float(b) for b in est.beta]
    payload["feature_names"] = list(std.feature_names)
    return payload


# -------------------- Commands --------------------

def _load(cfg: RunConfig) -> Tuple[Dataset, Dict[str, Any]]:
    data, manifest = DataSanitizer.ingest_csv(cfg.data, cfg.response, cfg.family)
    return data.standardize(), manifest


def _tuned(cfg: RunConfig, fitter, std: Dataset, grid: np.ndarray) -> Tuple[Estimate, Dict[str, Any]]:
    if cfg.lam is not None:
        return fitter(std, cfg.lam), {"lambda_source": "fixed"}
    tuned = tune_lambda(fitter, std, grid, tuner=cfg.tuner, K=cfg.folds, seed=cfg.seed, one_se=cfg.one_se)
    return tuned.estimate, {"lambda_source": cfg.tuner, "lambda_chosen": tuned.lambda_best}


def _fit(cfg: RunConfig, std: Dataset) -> Tuple[Estimate, Dict[str, Any]]:
    family = PENALTIES[cfg.penalty]

    if family is Family.L1:
        if cfg.lam is not None:
            return lasso(std, cfg.lam, solver=cfg.solver), {"lambda_source": "fixed"}
        tuned = lasso_cv(std, K=cfg.folds, seed=cfg.seed, one_se=cfg.one_se, solver=cfg.solver, tuner=cfg.tuner)
        return tuned.estimate, {"lambda_source": cfg.tuner, "lambda_chosen": tuned.lambda_best}

    if family is Family.ADAPTIVE and cfg.steps > 1:
        tuner = "bic" if cfg.tuner == "bic" else "cv"
        epsilon = cfg.epsilon if cfg.epsilon > 0 else config.MSA_EPSILON
        trajectory = msa_lasso(std, cfg.steps, tuner=tuner, epsilon=epsilon, K=cfg.folds,
                               seed=cfg.seed, solver=cfg.solver, one_se=cfg.one_se)
        return trajectory.final, {"trajectory": trajectory.to_json()}

    beta0 = fit_initial(cfg.initial, std, K=cfg.folds, seed=cfg.seed)

    if family is Family.ADAPTIVE:
        if cfg.gamma_cv:
            chosen = select_gamma(std, beta0, K=cfg.folds, seed=cfg.seed, solver=cfg.solver)
            return chosen.estimate, {
                "lambda_source": "cv",
                "lambda_chosen": chosen.lambda_best,
                "gamma_chosen": chosen.gamma_best,
                "gamma_scores": {str(g): s for g, s in chosen.scores.items()},
            }
        gamma = cfg.gamma if cfg.gamma is not None else config.ADAPTIVE_GAMMA
        if cfg.lam is not None:
            est = adaptive_lasso(std, gamma, cfg.lam, beta0, epsilon=cfg.epsilon,
                                 solver=cfg.solver, initial_name=cfg.initial)
            return est, {"lambda_source": "fixed"}
        tuned = tune_adaptive(std, gamma, beta0, tuner=cfg.tuner, epsilon=cfg.epsilon, K=cfg.folds,
                              seed=cfg.seed, one_se=cfg.one_se, solver=cfg.solver, initial_name=cfg.initial)
        source = cfg.tuner if np.isfinite(tuned.lambda_best) else "fully_excluded"
        return tuned.estimate, {"lambda_source": source, "lambda_chosen": tuned.lambda_best}

    def spec_at(lam: float) -> PenaltySpec:
        return PenaltySpec(family, lam, shape=cfg.shape, epsilon=cfg.epsilon)

    if cfg.algorithm == "lqa":
        def fitter(train, lam):
            return lqa_fit(train, spec_at(lam), beta0)
    elif cfg.steps == 1:
        def fitter(train, lam):
            return one_step_lla(train, spec_at(lam), beta0, solver=cfg.solver, initial_name=cfg.initial)
    else:
        def fitter(train, lam):
            return multi_step_lla(train, spec_at(lam), beta0, max_steps=cfg.steps,
                                  solver=cfg.solver, initial_name=cfg.initial).final
    est, info = _tuned(cfg, fitter, std, lambda_grid(std))
    if cfg.algorithm == "lla" and cfg.steps > 1:
        trajectory = multi_step_lla(std, spec_at(est.provenance.lam), beta0, max_steps=cfg.steps,
                                    solver=cfg.solver, initial_name=cfg.initial)
        info["trajectory"] = trajectory.to_json()
    return est, info


def run_fit(cfg: RunConfig) -> None:
    std, manifest = _load(cfg)
    est, info = _fit(cfg, std)
    payload = _estimate_payload(std, est)
    payload["tuning"] = {k: v for k, v in info.items() if k != "trajectory"}
    payload["manifest"] = manifest
    write_json(os.path.join(cfg.out, "estimate.json"), payload)
    if "trajectory" in info:
        write_json(os.path.join(cfg.out, "trajectory.json"), info["trajectory"])
    logger.info("fit: %d of %d predictors active", len(est.active_set), std.p)


def run_path(cfg: RunConfig) -> None:
    std, manifest = _load(cfg)
    if not std.is_gaussian:
        raise ValidationError("'path' requires the gaussian family")
    family = PENALTIES[cfg.penalty]
    if family is Family.L1:
        weights = None
    elif family is Family.ADAPTIVE:
        beta0 = fit_initial(cfg.initial, std, K=cfg.folds, seed=cfg.seed)
        gamma = cfg.gamma if cfg.gamma is not None else config.ADAPTIVE_GAMMA
        weights = lla_weights(PenaltySpec(family, 1.0, shape=gamma, epsilon=cfg.epsilon), beta0)
    else:
        raise ValidationError("'path' supports the lasso and adalasso penalties only")

    path = lars_path(std, weights)
    path.to_csv(os.path.join(cfg.out, "path.csv"))
    if cfg.tuner == "bic":
        bic = bic_select(path, std)
        bic.table.to_csv(
            os.path.join(cfg.out, "bic.csv"),
            index=False,
            float_format=f"%.{config.PATH_SIGNIFICANT_DIGITS}g",
            lineterminator="\n",
        )
        write_json(os.path.join(cfg.out, "bic_choice.json"),
                   {"lambda_best": bic.lambda_best, "rss_floored": bic.floored})
    write_json(os.path.join(cfg.out, "path_meta.json"),
               {**path.metadata, "feature_names": list(std.feature_names), "manifest": manifest})


def _load_scenario(cfg: RunConfig) -> ScenarioSpec:
    payload = dict(cfg.scenario)
    payload["seed"] = cfg.seed
    return ScenarioSpec.from_json(payload)


def run_simulate(cfg: RunConfig) -> None:
    spec = _load_scenario(cfg)
    report = run_comparison(default_battery(), spec, cfg.reps, seed=cfg.seed, n_jobs=cfg.threads)
    emit_report(report, cfg.out)
    failed = int((report.per_rep["status"] != "ok").sum())
    if failed:
        logger.warning("%d estimator fits failed; see simulation.json", failed)


def run_compare(cfg: RunConfig) -> None:
    data, manifest = DataSanitizer.ingest_csv(cfg.data, cfg.response, cfg.family)
    rows: List[Dict[str, Any]] = []
    for est_cfg in default_battery():
        row: Dict[str, Any] = {"estimator": est_cfg.name}
        try:
            beta, lam, flags = fit_battery_member(est_cfg, data, seed=cfg.seed)
            row.update(status="ok", **{"lambda": lam}, active_size=int(np.count_nonzero(beta)),
                       flags=",".join(flags))
        except SparseEstimationError as e:
            beta = np.full(data.p, np.nan)
            row.update(status="failed", **{"lambda": np.nan}, active_size=np.nan, flags=e.detail)
        row.update({name: b for name, b in zip(data.feature_names, beta)})
        rows.append(row)
    table = pd.DataFrame(rows).sort_values("estimator", kind="mergesort")
    table.to_csv(
        os.path.join(cfg.out, "compare.csv"),
        index=False,
        float_format=f"%.{config.PATH_SIGNIFICANT_DIGITS}g",
        lineterminator="\n",
    )
    write_json(os.path.join(cfg.out, "manifest.json"), manifest)


def run_subset(cfg: RunConfig) -> None:
    std, manifest = _load(cfg)
    solution = best_subset_l0(std, cfg.lam, n_jobs=cfg.threads)
    payload = solution.to_json()
    beta, intercept = std.to_original_scale(solution.beta, solution.intercept)
    payload["beta_standardized"] = payload["beta"]
    payload["beta"] = [float(b) for b in beta + 0.0]
    payload["intercept"] = intercept
    payload["selected"] = [std.feature_names[j] for j in solution.subset]
    payload["lambda"] = cfg.lam
    payload["manifest"] = manifest
    write_json(os.path.join(cfg.out, "subset.json"), payload)


def run_recovery(cfg: RunConfig) -> None:
    out_path = os.path.join(cfg.out, "recovery.jsonl")
    with open(out_path, "w", encoding="utf-8", newline="\n") as f:
        for instance in range(cfg.reps):
            seed = int(np.random.SeedSequence([cfg.seed, instance]).generate_state(1)[0])
            X, beta_star = recovery_design(cfg.n, cfg.p, cfg.k, kind=cfg.kind, seed=seed)
            record = exact_recovery_check(X, beta_star, noise_sd=cfg.noise_sd, seed=seed, lam=cfg.lam)
            line = {"instance": instance, **record.to_json()}
            f.write(json.dumps(jsonable(line), sort_keys=True, allow_nan=False) + "\n")


RUNNERS = {
    "fit": run_fit,
    "path": run_path,
    "simulate": run_simulate,
    "compare": run_compare,
    "subset": run_subset,
    "recovery": run_recovery,
}


def _report_error(error: SparseEstimationError, out: Optional[str]) -> int:
    payload = error.to_dict()
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    if out and os.path.isdir(out):
        try:
            write_json(os.path.join(out, "error.json"), payload)
        except OSError:
            pass
    return error.status_code


def execute(cfg: RunConfig) -> int:
    """Run one command and return its exit status."""
    try:
        cfg.validate()
        _prepare_out_dir(cfg.out)
        write_json(os.path.join(cfg.out, "config.json"), cfg.to_json())
        RUNNERS[cfg.command](cfg)
    except SparseEstimationError as e:
        logger.error("%s failed: %s", cfg.command, e.detail)
        return _report_error(e, cfg.out)
    except OSError as e:
        return _report_error(ValidationError(f"I/O error: {e}"), cfg.out)
    return 0


# -------------------- Argument parsing --------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cli.py", description="One-step sparse estimation for penalized likelihood models")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=".")
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default: ${config.THREADS_ENV_VAR} or {config.DEFAULT_THREADS})")

    data_args = _Parser(add_help=False)
    data_args.add_argument("--data", required=True)
    data_args.add_argument("--response", default=None)
    data_args.add_argument("--family", choices=[f.value for f in ResponseFamily], default="gaussian")

    model = _Parser(add_help=False)
    model.add_argument("--penalty", choices=sorted(PENALTIES), default="scad")
    lam = model.add_mutually_exclusive_group()
    lam.add_argument("--lambda", dest="lam", type=float, default=None)
    lam.add_argument("--cv", dest="tuner", action="store_const", const="cv")
    lam.add_argument("--bic", dest="tuner", action="store_const", const="bic")
    gamma = model.add_mutually_exclusive_group()
    gamma.add_argument("--gamma", type=float, default=None)
    gamma.add_argument("--gamma-cv", action="store_true")
    model.add_argument("--initial", choices=[m.value for m in InitialMethod], default="lasso")
    model.add_argument("--steps", type=int, default=1)
    model.add_argument("--algorithm", choices=["lla", "lqa"], default="lla")
    model.add_argument("--solver", choices=["cd", "lars"], default="cd")
    model.add_argument("--shape", type=float, default=None, help="SCAD a, MCP gamma or bridge exponent")
    model.add_argument("--epsilon", type=float, default=config.PENALTY_EPSILON)
    model.add_argument("--folds", type=int, default=config.CV_FOLDS)
    model.add_argument("--one-se", action="store_true")

    sub.add_parser("fit", parents=[common, data_args, model], help="fit one estimator")
    sub.add_parser("path", parents=[common, data_args, model], help="lasso / adaptive lasso path")
    sub.add_parser("compare", parents=[common, data_args], help="fit the estimator battery to one file")

    subset = sub.add_parser("subset", parents=[common, data_args], help="exhaustive L0 best subset")
    subset.add_argument("--lambda", dest="lam", type=float, required=True)

    simulate = sub.add_parser("simulate", parents=[common], help="Monte-Carlo estimator comparison")
    simulate.add_argument("--reps", type=int, default=100)
    simulate.add_argument("--scenario", default=None, help="JSON object or path to a JSON file")

    recovery = sub.add_parser("recovery", parents=[common], help="L0/L1 exact recovery checks")
    recovery.add_argument("--reps", type=int, default=100)
    recovery.add_argument("--n", type=int, default=64)
    recovery.add_argument("--p", type=int, default=16)
    recovery.add_argument("--k", type=int, default=1)
    recovery.add_argument("--kind", choices=["gaussian", "rademacher"], default="rademacher")
    recovery.add_argument("--noise-sd", type=float, default=0.0)
    recovery.add_argument("--lambda", dest="lam", type=float, default=None, help="L0 lambda override")
    return parser


def _parse_scenario(value: Optional[str]) -> Dict[str, Any]:
    if value is None:
        return {}
    try:
        if os.path.isfile(value):
            with open(value, encoding="utf-8") as f:
                payload = json.load(f)
        else:
            payload = json.loads(value)
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"--scenario is neither a JSON file nor a JSON object: {e}")
    if not isinstance(payload, dict):
        raise ValidationError("--scenario must be a JSON object")
    return payload


def _resolve_threads(value: Optional[int]) -> int:
    if value is not None:
        return value
    raw = os.environ.get(config.THREADS_ENV_VAR)
    if raw is None:
        return config.DEFAULT_THREADS
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"{config.THREADS_ENV_VAR} must be an integer, got {raw!r}")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__}
    values["threads"] = _resolve_threads(args.threads)
    if "scenario" in values:
        values["scenario"] = _parse_scenario(values["scenario"])
    if values.get("lam") is not None:
        values["tuner"] = "fixed"
    elif values.get("tuner") is None:
        values.pop("tuner", None)
    return RunConfig(**values)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ValidationError as e:
        return _report_error(e, None)

    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")

    try:
        cfg = config_from_args(args)
    except ValidationError as e:
        return _report_error(e, getattr(args, "out", None))
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
