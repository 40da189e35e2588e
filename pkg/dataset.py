"""
Dataset container shared by every solver and estimator.

A Dataset is immutable once built: its arrays are copied and marked
read-only so fits can share it across threads.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from sklearn.preprocessing import StandardScaler

from errors import ValidationError

logger = logging.getLogger(__name__)


class ResponseFamily(str, Enum):
    GAUSSIAN = "gaussian"
    BINOMIAL = "binomial"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix X (n x p), response y and the likelihood family.

    ``column_means`` and ``column_scales`` are recorded by ``standardize`` so
    coefficients can be mapped back to the original predictor scale.
    """

    X: np.ndarray
    y: np.ndarray
    family: ResponseFamily = ResponseFamily.GAUSSIAN
    intercept: bool = True
    standardized: bool = False
    column_means: Optional[np.ndarray] = None
    column_scales: Optional[np.ndarray] = None
    feature_names: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        try:
            family = ResponseFamily(self.family)
        except ValueError:
            raise ValidationError(f"Unknown likelihood family: {self.family!r}")
        object.__setattr__(self, "family", family)

        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ValidationError("X must be a 2-D matrix")
        n, p = X.shape
        if n < 2 or p < 1:
            raise ValidationError(f"Dataset needs n >= 2 and p >= 1, got n={n}, p={p}")
        if y.shape != (n,):
            raise ValidationError(f"y must have length {n}, got shape {y.shape}")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise ValidationError("Dataset contains non-finite entries")
        if family is ResponseFamily.BINOMIAL and not np.all((y == 0) | (y == 1)):
            raise ValidationError("Binomial responses must be 0 or 1")

        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))
        if self.column_means is not None:
            object.__setattr__(self, "column_means", _frozen(self.column_means))
        if self.column_scales is not None:
            object.__setattr__(self, "column_scales", _frozen(self.column_scales))

        names = tuple(self.feature_names) if self.feature_names else tuple(
            f"x{j + 1}" for j in range(p)
        )
        if len(names) != p:
            raise ValidationError(f"Expected {p} feature names, got {len(names)}")
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def is_gaussian(self) -> bool:
        return self.family is ResponseFamily.GAUSSIAN

    @property
    def penalty_scale(self) -> float:
        """Mean squared column norm of the (centred) design.

        1 for orthonormal columns, n after standardize. SCAD and MCP thresholds are
        read in per-observation units through this factor.
        """
        X = self.X - self.X.mean(axis=0) if self.intercept else self.X
        scale = float(np.mean(np.einsum("ij,ij->j", X, X))) if self.p else 0.0
        return scale if scale > 0 else 1.0

    def centered(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
        """Return (Xc, yc, x_mean, y_mean) with the intercept profiled out.

        Without an intercept nothing is centred and the means are zero.
        """
        if not self.intercept:
            return self.X, self.y, np.zeros(self.p), 0.0
        x_mean = self.X.mean(axis=0)
        y_mean = float(self.y.mean())
        return self.X - x_mean, self.y - y_mean, x_mean, y_mean

    def subset_rows(self, rows: Sequence[int]) -> "Dataset":
        rows = np.asarray(rows)
        return replace(
            self,
            X=self.X[rows],
            y=self.y[rows],
            standardized=False,
            column_means=None,
            column_scales=None,
        )

    def standardize(self) -> "Dataset":
        """Scale every predictor to mean 0 (intercept models) and squared norm n."""
        scaler = StandardScaler(with_mean=self.intercept)
        X_std = scaler.fit_transform(self.X)
        constant = np.flatnonzero(scaler.var_ == 0)
        if constant.size:
            names = [self.feature_names[j] for j in constant]
            raise ValidationError(f"Cannot standardize constant predictor columns: {names}")
        means = scaler.mean_ if self.intercept else np.zeros(self.p)
        logger.debug("Standardized %d predictors", self.p)
        return replace(
            self,
            X=X_std,
            standardized=self.intercept,
            column_means=means,
            column_scales=scaler.scale_,
        )

    def to_original_scale(self, beta: np.ndarray, intercept: float) -> Tuple[np.ndarray, float]:
        """Map (beta, intercept) fitted on this dataset back to the raw predictors."""
        beta = np.asarray(beta, dtype=float)
        if self.column_scales is None:
            return beta.copy(), float(intercept)
        raw = beta / self.column_scales
        means = self.column_means if self.column_means is not None else np.zeros(self.p)
        return raw, float(intercept - means @ raw)
