"""Linear surrogate of the tree system: the pseudo-inverse projection of fitted values onto the lags."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.core.errors import DimensionError, require_finite

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EffectSizeMatrix:
    a_tilde: np.ndarray  # (K, M)
    intercept: Optional[np.ndarray] = None  # (M,)
    rank: int = 0

    @property
    def K(self) -> int:
        return int(self.a_tilde.shape[0])

    @property
    def M(self) -> int:
        return int(self.a_tilde.shape[1])

    def predict(self, x: np.ndarray) -> np.ndarray:
        out = np.asarray(x, dtype=float) @ self.a_tilde
        if self.intercept is not None:
            out = out + self.intercept
        return out


def pseudo_inverse(x: np.ndarray) -> tuple[np.ndarray, int]:
    """Moore-Penrose inverse via SVD; singular values below max(T, K) * eps * s_max are dropped."""
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    if s.size == 0:
        return np.zeros((x.shape[1], x.shape[0])), 0
    cutoff = max(x.shape) * np.finfo(float).eps * s[0]
    keep = s > cutoff
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (vt.T * s_inv) @ u.T, int(keep.sum())


def effect_size_projection(x: np.ndarray, f: np.ndarray, intercept: bool = False) -> EffectSizeMatrix:
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    if x.ndim != 2 or x.shape[0] != f.shape[0] or x.shape[0] == 0:
        raise DimensionError("X and F must be row-aligned and non-empty", x=x.shape, f=f.shape)
    require_finite("projection input", x, f)

    design = np.column_stack([np.ones(x.shape[0]), x]) if intercept else x
    pinv, rank = pseudo_inverse(design)
    coef = pinv @ f
    if intercept:
        return EffectSizeMatrix(a_tilde=coef[1:], intercept=coef[0], rank=rank)
    return EffectSizeMatrix(a_tilde=coef, rank=rank)


def projection_residual(x: np.ndarray, f: np.ndarray, effect: EffectSizeMatrix) -> np.ndarray:
    """Row-wise Euclidean norm of F - X A_tilde."""
    f = np.asarray(f, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    return np.linalg.norm(f - effect.predict(x), axis=1)
