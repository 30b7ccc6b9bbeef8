"""
Release calendar and vintages
=============================
A value for reference month m is released ``days`` after the last day of m
(calendar days), or ``days`` working days after the last working day of m
when the rule is business-day based (-1 = next-to-last working day of m,
+1 = first working day of the next month).

A nowcast for month m is made at the origin: the first calendar day of
month m + 1.  A value is visible iff its release date <= origin.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
import pandas as pd

from app.core.errors import InsufficientHistoryError
from app.core.run_config import CalendarSettings, ReleaseRule
from app.statespace.panel import QUARTERLY, MixedFrequencyPanel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReleaseCalendar:
    rules: Dict[str, ReleaseRule]
    default_monthly_days: float = 0.0
    default_quarterly_days: float = 42.0

    @classmethod
    def from_settings(cls, settings: Optional[CalendarSettings] = None) -> "ReleaseCalendar":
        settings = settings or CalendarSettings()
        return cls(
            rules=dict(settings.rules),
            default_monthly_days=settings.default_monthly_days,
            default_quarterly_days=settings.default_quarterly_days,
        )

    def rule_for(self, series: str, frequency: str) -> ReleaseRule:
        if series in self.rules:
            return self.rules[series]
        days = self.default_quarterly_days if frequency == QUARTERLY else self.default_monthly_days
        return ReleaseRule(days=days)

    def release_date(self, series: str, frequency: str, period: pd.Period) -> pd.Timestamp:
        rule = self.rule_for(series, frequency)
        month_end = period.to_timestamp(how="end").normalize()
        if rule.business_days:
            last_working = pd.offsets.BMonthEnd().rollback(month_end)
            return last_working + pd.offsets.BDay(int(rule.days))
        return month_end + pd.Timedelta(days=rule.days)

    def release_dates(self, panel: MixedFrequencyPanel) -> np.ndarray:
        """(T, M) array of release timestamps."""
        out = np.empty((panel.T, panel.M), dtype="datetime64[ns]")
        for j, (name, freq) in enumerate(zip(panel.series, panel.frequencies)):
            out[:, j] = [self.release_date(name, freq, d).to_datetime64() for d in panel.dates]
        return out


def origin_date(nowcast_month: pd.Period) -> pd.Timestamp:
    return (nowcast_month + 1).to_timestamp(how="start")


def month_in_quarter(period: pd.Period) -> int:
    return (period.month - 1) % 3 + 1


@dataclass(frozen=True)
class Vintage:
    nowcast_month: pd.Period
    origin: pd.Timestamp
    panel: MixedFrequencyPanel  # masked; runs through the end of the nowcast quarter
    mask: np.ndarray

    @property
    def month_in_quarter(self) -> int:
        return month_in_quarter(self.nowcast_month)

    @property
    def target_quarter(self) -> pd.Period:
        return self.nowcast_month.asfreq("Q")

    @property
    def quarter_end(self) -> pd.Period:
        return self.target_quarter.asfreq("M", how="end")

    def fit_panel(self) -> MixedFrequencyPanel:
        """The masked panel cut at its data edge."""
        return self.panel.truncate(self.panel.last_observed_index())


def make_vintage(panel: MixedFrequencyPanel, calendar: ReleaseCalendar, nowcast_month) -> Vintage:
    nowcast_month = pd.Period(nowcast_month, freq="M")
    if nowcast_month < panel.dates[0]:
        raise InsufficientHistoryError("origin before the first observation", origin=str(nowcast_month))
    origin = origin_date(nowcast_month)
    quarter_end = nowcast_month.asfreq("Q").asfreq("M", how="end")
    extended = panel.extend_to(quarter_end)
    end = extended.index_of(quarter_end)
    extended = extended.truncate(end)

    released = calendar.release_dates(extended) <= origin.to_datetime64()
    mask = extended.obs_mask & released
    visible = extended.masked(mask)
    logger.debug(
        "Vintage %s: %d of %d values visible",
        nowcast_month,
        int(mask.sum()),
        int(extended.obs_mask.sum()),
        extra={"event": "vintage", "origin": str(nowcast_month)},
    )
    return Vintage(nowcast_month=nowcast_month, origin=origin, panel=visible, mask=mask)
