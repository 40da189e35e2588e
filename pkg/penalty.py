"""
Penalty functions for penalized likelihood estimation.

Each family provides its value p_lambda(t), derivative p'_lambda(t) (the LLA
weight generator), the LQA ridge coefficient and, where defined, the maximum
concavity. All functions accept scalars or numpy arrays of t = |beta_j| and
return the same shape back.

Closed forms (t >= 0, lambda >= 0):

    L0        p(t) = lambda^2 / 2 * 1[t != 0]
    L1        p(t) = lambda * t
    SCAD      p'(t) = lambda * {1[t <= lambda] + (a lambda - t)_+ / ((a - 1) lambda) 1[t > lambda]}
    MCP       p'(t) = (lambda - t / gamma)_+
    Bridge    p(t) = lambda * t^q
    Log       p(t) = lambda * log(1 + t / eps),  p'(t) = lambda / (t + eps)
    Adaptive  p'(t) = lambda * (t + eps)^(-gamma)

``scale`` puts SCAD and MCP in per-observation units: the penalty becomes
scale * p_{lambda/scale}(t), so its flat region starts at a * lambda / scale
while the slope at zero stays lambda. With the loss summed over n rows and
columns of squared norm n, scale = n. The other families are linear in lambda
(L0 excepted) and ignore it.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

import config
from errors import SingularPenaltyError, ValidationError

ArrayLike = Union[float, np.ndarray]

# Quadratic coefficient returned by lqa_coefficient for dropped coefficients
LQA_DROP = math.inf


class Family(str, Enum):
    L0 = "l0"
    L1 = "l1"
    SCAD = "scad"
    MCP = "mcp"
    BRIDGE = "bridge"
    LOG = "log"
    ADAPTIVE = "adaptive"


DIFFERENTIABLE = frozenset(
    {Family.L1, Family.SCAD, Family.MCP, Family.BRIDGE, Family.LOG, Family.ADAPTIVE}
)

_DEFAULT_SHAPE = {
    Family.SCAD: config.SCAD_A,
    Family.MCP: config.MCP_GAMMA,
    Family.BRIDGE: config.BRIDGE_EXPONENT,
    Family.ADAPTIVE: config.ADAPTIVE_GAMMA,
}


@dataclass(frozen=True)
class PenaltySpec:
    """A penalty family with its strength and shape constant.

    ``shape`` is a for SCAD, gamma for MCP, the exponent for Bridge and
    AdaptivePower; it is unused (0) for L0, L1 and Log. ``None`` picks the
    family default from config.
    """

    family: Family
    lam: float
    shape: Optional[float] = None
    epsilon: float = config.PENALTY_EPSILON

    def __post_init__(self):
        try:
            family = Family(self.family)
        except ValueError:
            raise ValidationError(f"Unknown penalty family: {self.family!r}")
        object.__setattr__(self, "family", family)

        shape = self.shape
        if shape is None:
            shape = _DEFAULT_SHAPE.get(family, 0.0)
        object.__setattr__(self, "shape", float(shape))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "epsilon", float(self.epsilon))

        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValidationError(f"lambda must be a finite nonnegative number, got {self.lam}")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ValidationError(f"epsilon must be nonnegative, got {self.epsilon}")
        if family is Family.SCAD and not self.shape > 2:
            raise ValidationError(f"SCAD requires a > 2, got {self.shape}")
        if family is Family.MCP and not self.shape > 1:
            raise ValidationError(f"MCP requires gamma > 1, got {self.shape}")
        if family in (Family.BRIDGE, Family.ADAPTIVE) and not self.shape > 0:
            raise ValidationError(f"{family.value} requires an exponent > 0, got {self.shape}")

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(self.family, lam, self.shape, self.epsilon)

    def to_json(self) -> Dict[str, Any]:
        return {
            "family": self.family.value,
            "lambda": self.lam,
            "shape": self.shape,
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_json(cls, payload: Dict[str, Any]) -> "PenaltySpec":
        try:
            return cls(
                family=payload["family"],
                lam=payload["lambda"],
                shape=payload.get("shape"),
                epsilon=payload.get("epsilon", config.PENALTY_EPSILON),
            )
        except KeyError as e:
            raise ValidationError(f"Penalty JSON is missing field {e.args[0]!r}")


def _as_array(t: ArrayLike, strictly_positive: bool = False) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)):
        raise ValidationError("penalty argument contains NaN")
    if strictly_positive and np.any(arr <= 0):
        raise ValidationError("penalty derivative requires t > 0")
    if np.any(arr < 0):
        raise ValidationError("penalty argument must be nonnegative")
    return arr


def _like(values: np.ndarray, template: ArrayLike) -> ArrayLike:
    if np.ndim(template) == 0:
        return float(values)
    return values


def _require_differentiable(spec: PenaltySpec) -> None:
    if spec.family not in DIFFERENTIABLE:
        raise ValidationError(
            f"non-differentiable family: {spec.family.value} has no LLA/LQA weights "
            "(use the exhaustive oracle for L0)"
        )


SCALED = frozenset({Family.SCAD, Family.MCP})


def _per_observation(spec: PenaltySpec, scale: float) -> Tuple[PenaltySpec, float]:
    """(spec with lambda / scale, multiplier) for SCAD and MCP; identity otherwise."""
    if not np.isfinite(scale) or not scale > 0:
        raise ValidationError(f"penalty scale must be positive, got {scale}")
    if spec.family not in SCALED or scale == 1.0:
        return spec, 1.0
    return spec.with_lambda(spec.lam / scale), scale


def penalty_value(spec: PenaltySpec, t: ArrayLike, scale: float = 1.0) -> ArrayLike:
    """Return p_lambda(t) for t >= 0."""
    arr = _as_array(t)
    spec, mult = _per_observation(spec, scale)
    lam, c, eps = spec.lam, spec.shape, spec.epsilon
    family = spec.family

    if family is Family.L0:
        values = np.where(arr != 0, 0.5 * lam ** 2, 0.0)
    elif family is Family.L1:
        values = lam * arr
    elif family is Family.SCAD:
        middle = (2 * c * lam * arr - arr ** 2 - lam ** 2) / (2 * (c - 1))
        values = np.where(
            arr <= lam,
            lam * arr,
            np.where(arr <= c * lam, middle, 0.5 * (c + 1) * lam ** 2),
        )
    elif family is Family.MCP:
        values = np.where(arr <= c * lam, lam * arr - arr ** 2 / (2 * c), 0.5 * c * lam ** 2)
    elif family is Family.BRIDGE:
        values = lam * ((arr + eps) ** c - eps ** c)
    elif family is Family.LOG:
        if eps == 0:
            # lambda * log(t) has no antiderivative that vanishes at 0
            raise SingularPenaltyError(
                "singular penalty value: log penalty needs epsilon > 0 "
                "(lambda * log(t) is unbounded below at t = 0)",
                family=family.value,
            )
        values = lam * np.log1p(arr / eps)
    else:
        if c >= 1:
            raise SingularPenaltyError(
                f"singular penalty value: adaptive exponent {c} >= 1 has no "
                "nonnegative penalty; use it through its weights only",
                family=family.value,
            )
        values = lam * ((arr + eps) ** (1 - c) - eps ** (1 - c)) / (1 - c)

    return _like(mult * values, t)


def penalty_derivative(spec: PenaltySpec, t: ArrayLike, scale: float = 1.0) -> ArrayLike:
    """Return p'_lambda(t) for t > 0."""
    _require_differentiable(spec)
    arr = _as_array(t, strictly_positive=True)
    spec, mult = _per_observation(spec, scale)
    lam, c, eps = spec.lam, spec.shape, spec.epsilon
    family = spec.family

    if family is Family.L1:
        values = np.full_like(arr, lam)
    elif family is Family.SCAD:
        values = np.where(arr <= lam, lam, np.maximum(c * lam - arr, 0.0) / (c - 1))
    elif family is Family.MCP:
        values = np.maximum(lam - arr / c, 0.0)
    elif family is Family.BRIDGE:
        values = c * lam * (arr + eps) ** (c - 1)
    elif family is Family.LOG:
        values = lam / (arr + eps)
    else:
        values = lam * (arr + eps) ** (-c)

    return _like(mult * values, t)


def _weight_at_zero(spec: PenaltySpec) -> float:
    lam, c, eps = spec.lam, spec.shape, spec.epsilon
    family = spec.family
    if family in (Family.L1, Family.SCAD, Family.MCP):
        return lam
    if eps > 0:
        if family is Family.BRIDGE:
            return c * lam * eps ** (c - 1)
        if family is Family.LOG:
            return lam / eps
        return lam * eps ** (-c)
    if family is Family.BRIDGE:
        if c > 1:
            return 0.0
        if c == 1:
            return lam
    return math.inf


def lla_weights(spec: PenaltySpec, beta0: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """LLA weights w_j = p'_lambda(|beta0_j|) for a whole coefficient vector.

    A zero initial coefficient gets the right-derivative p'(0+); families whose
    derivative diverges at 0 give +inf, which pins the variable at zero.
    """
    _require_differentiable(spec)
    t = np.atleast_1d(np.abs(np.asarray(beta0, dtype=float)))
    if not np.all(np.isfinite(t)):
        raise ValidationError("initial estimate must be finite")
    weights = np.empty_like(t)
    positive = t > 0
    if np.any(positive):
        weights[positive] = penalty_derivative(spec, t[positive], scale)
    # p'(0+) = lambda for SCAD and MCP at every scale
    weights[~positive] = _weight_at_zero(spec)
    return weights


def lla_weight(spec: PenaltySpec, beta0_j: float, scale: float = 1.0) -> float:
    return float(lla_weights(spec, np.array([beta0_j]), scale)[0])


def lqa_coefficient(
    spec: PenaltySpec,
    beta_kj: ArrayLike,
    tau: float = config.LQA_TAU,
    scale: float = 1.0,
) -> ArrayLike:
    """Ridge coefficient p'(|b|) / (2|b|), or LQA_DROP when |b| < tau."""
    if not tau > 0:
        raise ValidationError(f"tau must be positive, got {tau}")
    _require_differentiable(spec)
    t = np.atleast_1d(np.abs(np.asarray(beta_kj, dtype=float)))
    coef = np.full_like(t, LQA_DROP)
    kept = t >= tau
    if np.any(kept):
        coef[kept] = penalty_derivative(spec, t[kept], scale) / (2 * t[kept])
    if np.ndim(beta_kj) == 0:
        return float(coef[0])
    return coef


def max_concavity(spec: PenaltySpec) -> float:
    """sup over t > 0 of -p''_lambda(t)."""
    if spec.family is Family.L1:
        return 0.0
    if spec.family is Family.SCAD:
        return 1.0 / (spec.shape - 1)
    if spec.family is Family.MCP:
        return 1.0 / spec.shape
    raise ValidationError(f"concavity not defined in scope for family {spec.family.value}")
