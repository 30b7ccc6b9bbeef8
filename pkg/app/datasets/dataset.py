"""
Long-format dataset files
=========================
One row per (date, series): ``date`` (YYYY-MM), ``series_id``, ``frequency``
(M or Q) and ``value`` (percent growth rate; an empty cell means missing).
Quarterly rows sit on the third month of their quarter.
"""

from __future__ import annotations

import logging
import math
import os
import re
from typing import Dict, List

import numpy as np
import pandas as pd

from app.core.errors import SchemaError
from app.statespace.panel import MONTHLY, QUARTERLY, MixedFrequencyPanel, is_quarter_end

logger = logging.getLogger(__name__)

COLUMNS = ("date", "series_id", "frequency", "value")
_DATE_RE = re.compile(r"^\d{4}-(0[1-9]|1[0-2])$")


def _row_number(index: int) -> int:
    # header is line 1
    return index + 2


def _parse_value(raw: str, row: int) -> float:
    text = raw.strip()
    if text == "":
        return float("nan")
    try:
        value = float(text)
    except ValueError:
        raise SchemaError("value is not a number", row=row, value=raw) from None
    if not math.isfinite(value):
        raise SchemaError("value must be finite; leave the cell empty for missing", row=row, value=raw)
    return value


def levels_to_growth(values: np.ndarray) -> np.ndarray:
    """Percent log-differences between consecutive observed values of one series."""
    out = np.full_like(values, np.nan)
    observed = np.flatnonzero(np.isfinite(values))
    if np.any(values[observed] <= 0.0):
        raise SchemaError("levels must be positive to take logs")
    for prev, cur in zip(observed[:-1], observed[1:]):
        out[cur] = 100.0 * (math.log(values[cur]) - math.log(values[prev]))
    return out


def load_dataset(
    path: str,
    quarterly_divide_by_3: bool = True,
    convert_levels: bool = False,
) -> MixedFrequencyPanel:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    missing = [c for c in COLUMNS if c not in frame.columns]
    if missing:
        raise SchemaError("dataset header is missing columns", columns=",".join(missing), row=1)
    if frame.empty:
        raise SchemaError("dataset has no rows", row=2)

    frequencies: Dict[str, str] = {}
    order: List[str] = []
    cells: Dict[tuple, float] = {}
    first_row: Dict[tuple, int] = {}
    for index, rec in enumerate(frame[list(COLUMNS)].itertuples(index=False)):
        row = _row_number(index)
        date, series, freq, raw = (str(v).strip() for v in rec)
        if not _DATE_RE.match(date):
            raise SchemaError("date must be YYYY-MM", row=row, date=date)
        if not series:
            raise SchemaError("series_id is empty", row=row)
        if freq not in (MONTHLY, QUARTERLY):
            raise SchemaError("frequency must be M or Q", row=row, frequency=freq)
        period = pd.Period(date, freq="M")
        if freq == QUARTERLY and not is_quarter_end(period):
            raise SchemaError("quarterly row dated a mid-quarter month", row=row, date=date, series=series)
        known = frequencies.setdefault(series, freq)
        if known != freq:
            raise SchemaError("series changes frequency", row=row, series=series)
        if series not in order:
            order.append(series)
        key = (period, series)
        if key in cells:
            raise SchemaError("duplicate (date, series) row", row=row, first_row=first_row[key], series=series)
        cells[key] = _parse_value(raw, row)
        first_row[key] = row

    periods = [k[0] for k in cells]
    start, end = min(periods), max(periods)
    if QUARTERLY in frequencies.values():
        # the first quarter needs its leading months on the grid
        start = min(start, start.asfreq("Q").asfreq("M", how="start"))
    dates = pd.period_range(start, end, freq="M")
    values = np.full((len(dates), len(order)), np.nan)
    col = {name: j for j, name in enumerate(order)}
    for (period, series), value in cells.items():
        values[period.ordinal - start.ordinal, col[series]] = value

    for j, name in enumerate(order):
        if convert_levels:
            values[:, j] = levels_to_growth(values[:, j])
        if quarterly_divide_by_3 and frequencies[name] == QUARTERLY:
            values[:, j] = values[:, j] / 3.0

    panel = MixedFrequencyPanel(
        dates=dates,
        series=tuple(order),
        frequencies=tuple(frequencies[n] for n in order),
        values=values,
    )
    logger.info(
        "Loaded %s: %d months, %d monthly + %d quarterly series",
        path,
        panel.T,
        panel.M_m,
        panel.M_q,
        extra={"event": "dataset"},
    )
    return panel


def write_dataset(panel: MixedFrequencyPanel, path: str, quarterly_divided_by_3: bool = True) -> str:
    """Write *panel* in long format; quarterly values are scaled back when they were divided on load."""
    rows = []
    quarter_end = panel.quarter_end_mask
    for t, period in enumerate(panel.dates):
        for j, (name, freq) in enumerate(zip(panel.series, panel.frequencies)):
            if freq == QUARTERLY and not quarter_end[t]:
                continue
            value = panel.values[t, j]
            if freq == QUARTERLY and quarterly_divided_by_3:
                value = 3.0 * value
            rows.append((str(period), name, freq, "" if not np.isfinite(value) else repr(float(value))))
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    pd.DataFrame(rows, columns=list(COLUMNS)).to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    logger.info("Dataset written to %s (%d rows)", path, len(rows), extra={"event": "dataset"})
    return path
