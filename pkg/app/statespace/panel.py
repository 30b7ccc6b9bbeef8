"""
Mixed-frequency panel
=====================
A monthly grid of M series.  Monthly series carry their observed values with
NaN for unreleased/missing months; quarterly series carry the (already /3)
quarterly growth rate on the third month of each quarter and NaN elsewhere.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from app.core.errors import DimensionError, InsufficientHistoryError, SchemaError

logger = logging.getLogger(__name__)

MONTHLY = "M"
QUARTERLY = "Q"


def is_quarter_end(period: pd.Period) -> bool:
    return period.month % 3 == 0


@dataclass(frozen=True)
class MixedFrequencyPanel:
    dates: pd.PeriodIndex
    series: tuple
    frequencies: tuple
    values: np.ndarray  # (T, M), NaN = not observed
    latent: Optional[np.ndarray] = None  # (T, M_q) current draw of quarterly series at monthly frequency

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 2:
            raise DimensionError("panel values must be 2-D", shape=values.shape)
        if values.shape != (len(self.dates), len(self.series)):
            raise DimensionError(
                "panel values do not match dates x series",
                shape=values.shape,
                dates=len(self.dates),
                series=len(self.series),
            )
        if len(self.frequencies) != len(self.series):
            raise DimensionError("one frequency per series is required")
        for freq in self.frequencies:
            if freq not in (MONTHLY, QUARTERLY):
                raise SchemaError(f"unknown frequency {freq!r}")
        if len(self.dates) and not self.dates.is_monotonic_increasing:
            raise SchemaError("panel dates must be increasing")
        quarter_end = self.quarter_end_mask
        for j in self.quarterly_index:
            bad = np.isfinite(values[:, j]) & ~quarter_end
            if np.any(bad):
                first = self.dates[int(np.argmax(bad))]
                raise SchemaError(
                    "quarterly value on a non quarter-end month",
                    series=self.series[j],
                    date=str(first),
                )
        if self.latent is not None and np.asarray(self.latent).shape != (self.T, self.M_q):
            raise DimensionError("latent block must be T x M_q", shape=np.asarray(self.latent).shape)

    # ------------------------------------------------------------------
    # shape helpers
    # ------------------------------------------------------------------

    @property
    def T(self) -> int:
        return int(self.values.shape[0])

    @property
    def M(self) -> int:
        return int(self.values.shape[1])

    @property
    def monthly_index(self) -> List[int]:
        return [j for j, f in enumerate(self.frequencies) if f == MONTHLY]

    @property
    def quarterly_index(self) -> List[int]:
        return [j for j, f in enumerate(self.frequencies) if f == QUARTERLY]

    @property
    def M_m(self) -> int:
        return len(self.monthly_index)

    @property
    def M_q(self) -> int:
        return len(self.quarterly_index)

    @property
    def obs_mask(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def monthly(self) -> np.ndarray:
        return self.values[:, self.monthly_index]

    @property
    def quarterly(self) -> np.ndarray:
        return self.values[:, self.quarterly_index]

    @property
    def quarter_end_mask(self) -> np.ndarray:
        return np.array([is_quarter_end(d) for d in self.dates], dtype=bool)

    def index_of(self, period: pd.Period | str) -> int:
        period = pd.Period(period, freq="M")
        loc = self.dates.get_indexer([period])[0]
        if loc < 0:
            raise DimensionError("period outside the panel", period=str(period))
        return int(loc)

    def last_observed_index(self) -> int:
        """Index of the last month with any observation (the data edge)."""
        rows = np.flatnonzero(self.obs_mask.any(axis=1))
        if rows.size == 0:
            raise InsufficientHistoryError("panel has no observations")
        return int(rows[-1])

    # ------------------------------------------------------------------
    # derived panels
    # ------------------------------------------------------------------

    def with_values(self, values: np.ndarray) -> "MixedFrequencyPanel":
        return replace(self, values=np.asarray(values, dtype=float), latent=None)

    def with_latent(self, latent: np.ndarray) -> "MixedFrequencyPanel":
        return replace(self, latent=np.asarray(latent, dtype=float))

    def masked(self, mask: np.ndarray) -> "MixedFrequencyPanel":
        """Keep only cells where *mask* is true."""
        values = np.where(np.asarray(mask, dtype=bool), self.values, np.nan)
        return self.with_values(values)

    def truncate(self, end: int) -> "MixedFrequencyPanel":
        """Rows ``0 .. end`` inclusive."""
        return MixedFrequencyPanel(
            dates=self.dates[: end + 1],
            series=self.series,
            frequencies=self.frequencies,
            values=self.values[: end + 1].copy(),
            latent=None if self.latent is None else self.latent[: end + 1].copy(),
        )

    def extend_to(self, end: pd.Period | str) -> "MixedFrequencyPanel":
        """Append empty months up to *end*."""
        end = pd.Period(end, freq="M")
        if end <= self.dates[-1]:
            return self
        extra = pd.period_range(self.dates[-1] + 1, end, freq="M")
        values = np.vstack([self.values, np.full((len(extra), self.M), np.nan)])
        return MixedFrequencyPanel(
            dates=self.dates.append(extra),
            series=self.series,
            frequencies=self.frequencies,
            values=values,
        )

    def subset(self, names: Sequence[str]) -> "MixedFrequencyPanel":
        missing = [n for n in names if n not in self.series]
        if missing:
            raise SchemaError("unknown series requested", series=",".join(missing))
        cols = [self.series.index(n) for n in names]
        return MixedFrequencyPanel(
            dates=self.dates,
            series=tuple(names),
            frequencies=tuple(self.frequencies[c] for c in cols),
            values=self.values[:, cols].copy(),
        )

    def initial_fill(self) -> np.ndarray:
        """Complete T x M matrix used to start the sampler.

        Quarterly series repeat the quarter's value over its three months;
        monthly gaps are linearly interpolated and edge gaps carried.
        """
        frame = pd.DataFrame(self.values, index=self.dates, columns=list(self.series))
        for j in self.quarterly_index:
            col = frame.iloc[:, j]
            frame.iloc[:, j] = col.bfill(limit=2)
        frame = frame.interpolate(limit_direction="both")
        frame = frame.fillna(0.0)
        return frame.to_numpy(dtype=float)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=self.dates, columns=list(self.series))
