"""
Error hierarchy for the estimation library.

Every error carries a ``status_code`` (the CLI exit code) and a ``detail``
message, plus optional structured context that ends up in the error JSON.
"""

from typing import Any, Dict

import numpy as np

VALIDATION_ERROR = 1
COMPUTATION_ERROR = 2


def jsonable(value: Any) -> Any:
    """Plain JSON types with non-finite floats as null."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


class SparseEstimationError(Exception):
    """Base error: a status code and a detail message."""

    def __init__(self, status_code: int, detail: str, **context: Any):
        super().__init__(detail)
        self.status_code = status_code
        self.detail = detail
        self.context = context

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "detail": self.detail,
            "exit_code": self.status_code,
            "context": {k: jsonable(v) for k, v in self.context.items()},
        }


class ValidationError(SparseEstimationError):
    def __init__(self, detail: str, **context: Any):
        super().__init__(VALIDATION_ERROR, detail, **context)


class ComputationError(SparseEstimationError):
    def __init__(self, detail: str, **context: Any):
        super().__init__(COMPUTATION_ERROR, detail, **context)


class NonConvergenceError(ComputationError):
    """Iteration cap reached; keeps the last iterate and its residual."""

    def __init__(self, detail: str, beta: np.ndarray, residual: float, **context: Any):
        super().__init__(detail, residual=residual, **context)
        self.beta = np.asarray(beta, dtype=float).copy()
        self.residual = float(residual)


class SingularSystemError(ComputationError):
    def __init__(self, detail: str, deficiency: int, **context: Any):
        super().__init__(detail, deficiency=deficiency, **context)
        self.deficiency = int(deficiency)


class SeparationError(ComputationError):
    pass


class SingularPenaltyError(ComputationError):
    pass


class ExhaustiveCapError(ComputationError):
    pass
