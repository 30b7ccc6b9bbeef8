import numpy as np

from app.core.errors import DimensionError, InsufficientHistoryError, require_finite

DEFAULT_LAGS = 5


def build_lag_matrix(y: np.ndarray, p: int = DEFAULT_LAGS) -> np.ndarray:
    """Row ``t - p`` holds ``(y_{t-1}', ..., y_{t-p}')`` for ``t = p .. T-1``; K = M * p."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2:
        raise DimensionError("panel must be T x M", shape=y.shape)
    if p < 1:
        raise DimensionError("lag order must be positive", p=p)
    T = y.shape[0]
    if T <= p:
        raise InsufficientHistoryError("need more months than lags", T=T, p=p)
    require_finite("lag panel", y)
    return np.hstack([y[p - lag : T - lag] for lag in range(1, p + 1)])


def lag_row(history: np.ndarray, p: int = DEFAULT_LAGS) -> np.ndarray:
    """Covariate row for the month after the end of *history* (T x M)."""
    history = np.asarray(history, dtype=float)
    if history.shape[0] < p:
        raise InsufficientHistoryError("need p months of history", T=history.shape[0], p=p)
    return np.concatenate([history[-lag] for lag in range(1, p + 1)])


def lag_names(series, p: int = DEFAULT_LAGS) -> list:
    """Column labels of the lag matrix, e.g. ``IP_l1``."""
    return [f"{name}_l{lag}" for lag in range(1, p + 1) for name in series]
