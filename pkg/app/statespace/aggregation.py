"""Intertemporal restriction linking five monthly growth rates to one quarterly rate."""

from typing import Sequence

import numpy as np

from app.core.errors import DimensionError, NonFiniteError

# newest month first: t, t-1, t-2, t-3, t-4
WEIGHTS = np.array([1.0 / 9.0, 2.0 / 9.0, 1.0 / 3.0, 2.0 / 9.0, 1.0 / 9.0])
N_WEIGHTS = WEIGHTS.shape[0]


def aggregate_quarterly(m: Sequence[float]) -> float:
    values = np.asarray(m, dtype=float)
    if values.shape != (N_WEIGHTS,):
        raise DimensionError("aggregation needs exactly five monthly values", shape=values.shape)
    if not np.all(np.isfinite(values)):
        raise NonFiniteError("aggregation input is not finite")
    return float(WEIGHTS @ values)


def aggregate_at(path: np.ndarray, t: int) -> np.ndarray:
    """Quarterly aggregate ending at month *t* along the last axis of *path*.

    *path* is ``(..., T)``; works per draw when a leading draw axis is present.
    """
    if t < N_WEIGHTS - 1:
        raise DimensionError("quarter end needs four earlier months", t=t)
    window = np.asarray(path, dtype=float)[..., t - N_WEIGHTS + 1 : t + 1][..., ::-1]
    return window @ WEIGHTS
