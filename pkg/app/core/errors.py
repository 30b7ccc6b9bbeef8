"""Error taxonomy for the sampler, state-space and nowcasting layers.

Every error raised on purpose by the package derives from :class:`BavartError`
and carries an :class:`ErrorClass`.  :func:`classify_error` maps any exception
(ours or numpy's) onto that taxonomy so the CLI can emit a structured
diagnostic and a stable exit code.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from pydantic import ValidationError

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Enums
# ---------------------------------------------------------------------------

class ErrorClass(str, Enum):
    """Taxonomy of failures the toolkit reports."""

    SCHEMA = "schema"
    CONFIG = "config"
    DIMENSION = "dimension"
    EMPTY_LEAF = "empty_leaf"
    MOVE_UNAVAILABLE = "move_unavailable"
    INSUFFICIENT_HISTORY = "insufficient_history"
    FILTER_DIVERGENCE = "filter_divergence"
    NON_FINITE = "non_finite"
    UNSTABLE_DGP = "unstable_dgp"
    CHAIN_MISMATCH = "chain_mismatch"
    DEGENERATE_DRAWS = "degenerate_draws"
    IO = "io"
    UNKNOWN = "unknown"


# Exit codes: 2 = the user's input is wrong, 3 = the numerics failed.
_EXIT_CODES: dict[ErrorClass, int] = {
    ErrorClass.SCHEMA: 2,
    ErrorClass.CONFIG: 2,
    ErrorClass.DIMENSION: 2,
    ErrorClass.INSUFFICIENT_HISTORY: 2,
    ErrorClass.CHAIN_MISMATCH: 2,
    ErrorClass.UNSTABLE_DGP: 2,
    ErrorClass.IO: 2,
    ErrorClass.EMPTY_LEAF: 3,
    ErrorClass.MOVE_UNAVAILABLE: 3,
    ErrorClass.FILTER_DIVERGENCE: 3,
    ErrorClass.NON_FINITE: 3,
    ErrorClass.DEGENERATE_DRAWS: 3,
    ErrorClass.UNKNOWN: 1,
}


# ---------------------------------------------------------------------------
# Exceptions
# ---------------------------------------------------------------------------

class BavartError(ValueError):
    """Base class for deliberate, classified failures."""

    error_class: ErrorClass = ErrorClass.UNKNOWN

    def __init__(self, message: str, **context: Any) -> None:
        super().__init__(message)
        self.message = message
        self.context = {k: v for k, v in context.items() if v is not None}

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.message} ({details})"


class SchemaError(BavartError):
    error_class = ErrorClass.SCHEMA


class ConfigError(BavartError):
    error_class = ErrorClass.CONFIG


class DimensionError(BavartError):
    error_class = ErrorClass.DIMENSION


class EmptyLeafError(BavartError):
    error_class = ErrorClass.EMPTY_LEAF


class MoveUnavailableError(BavartError):
    error_class = ErrorClass.MOVE_UNAVAILABLE


class InsufficientHistoryError(BavartError):
    error_class = ErrorClass.INSUFFICIENT_HISTORY


class FilterDivergenceError(BavartError):
    error_class = ErrorClass.FILTER_DIVERGENCE


class NonFiniteError(BavartError):
    error_class = ErrorClass.NON_FINITE


class UnstableDGPError(BavartError):
    error_class = ErrorClass.UNSTABLE_DGP


class ChainMismatchError(BavartError):
    error_class = ErrorClass.CHAIN_MISMATCH


class DegenerateDrawsError(BavartError):
    error_class = ErrorClass.DEGENERATE_DRAWS


def require_finite(name: str, *arrays: Any) -> None:
    """Raise :class:`NonFiniteError` if any array holds NaN or Inf."""
    for arr in arrays:
        if not np.all(np.isfinite(np.asarray(arr, dtype=float))):
            raise NonFiniteError(f"{name} contains non-finite values")


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

@dataclass
class ClassifiedError:
    """An exception enriched with classification metadata."""

    original_exception: BaseException
    error_class: ErrorClass
    message: str
    exit_code: int
    context: dict[str, Any] = field(default_factory=dict, repr=False)

    def __str__(self) -> str:
        return f"[{self.error_class.value}] {self.message} (exit={self.exit_code})"

    def to_json(self) -> str:
        payload = {
            "error": self.error_class.value,
            "message": self.message,
            "exit_code": self.exit_code,
            "exception": type(self.original_exception).__name__,
        }
        if self.context:
            payload["context"] = {k: str(v) for k, v in self.context.items()}
        return json.dumps(payload, sort_keys=True)


def classify_error(exception: BaseException) -> ClassifiedError:
    """Map *exception* onto the :class:`ErrorClass` taxonomy.

    Our own exceptions carry their class; a few foreign exception types are
    recognised by type.  Everything else is ``UNKNOWN``.
    """
    if isinstance(exception, BavartError):
        error_class = exception.error_class
        message = exception.message
        context = dict(exception.context)
    elif isinstance(exception, ValidationError):
        error_class, message, context = ErrorClass.CONFIG, str(exception), {}
    elif isinstance(exception, np.linalg.LinAlgError):
        error_class, message, context = ErrorClass.NON_FINITE, str(exception), {}
    elif isinstance(exception, (FileNotFoundError, PermissionError, IsADirectoryError)):
        error_class, message, context = ErrorClass.IO, str(exception), {}
    else:
        error_class, message, context = ErrorClass.UNKNOWN, str(exception) or type(exception).__name__, {}

    return ClassifiedError(
        original_exception=exception,
        error_class=error_class,
        message=message,
        exit_code=_EXIT_CODES.get(error_class, 1),
        context=context,
    )
