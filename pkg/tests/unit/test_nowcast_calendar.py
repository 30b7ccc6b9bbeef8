import numpy as np
import pandas as pd
import pytest

from app.core.errors import InsufficientHistoryError
from app.core.run_config import CalendarSettings, ReleaseRule
from app.nowcast.calendar import ReleaseCalendar, make_vintage, month_in_quarter, origin_date


@pytest.fixture
def calendar() -> ReleaseCalendar:
    return ReleaseCalendar.from_settings(CalendarSettings())


def test_release_dates(calendar):
    may = pd.Period("2010-05", freq="M")
    assert calendar.release_date("IP", "M", may) == pd.Timestamp("2010-07-12")
    assert calendar.release_date("CAR", "M", may) == pd.Timestamp("2010-06-17 12:00")
    assert calendar.release_date("EUR", "M", may) == pd.Timestamp("2010-05-31")
    # 2010-05-31 is a Monday
    assert calendar.release_date("ESI", "M", may) == pd.Timestamp("2010-05-28")
    assert calendar.release_date("PMI", "M", may) == pd.Timestamp("2010-06-01")
    # month ending on a Sunday rolls back to Friday first
    assert calendar.release_date("PMI", "M", pd.Period("2010-10", freq="M")) == pd.Timestamp("2010-11-01")


def test_unknown_series_use_the_defaults():
    cal = ReleaseCalendar(rules={}, default_monthly_days=5, default_quarterly_days=30)
    assert cal.rule_for("X", "M") == ReleaseRule(days=5)
    assert cal.release_date("Y", "Q", pd.Period("2010-03", freq="M")) == pd.Timestamp("2010-04-30")


def test_origin_and_month_in_quarter():
    assert origin_date(pd.Period("2010-05", freq="M")) == pd.Timestamp("2010-06-01")
    assert [month_in_quarter(pd.Period(f"2010-{m:02d}", freq="M")) for m in (1, 2, 3, 4, 12)] == [1, 2, 3, 1, 3]


def _six_series(rng):
    from app.core.run_config import SimulationSettings
    from app.datasets.simulate import simulate_panel

    return simulate_panel(SimulationSettings(start="2008-01", n_months=36, n_monthly=5), rng).panel


def test_vintage_masks_unreleased_values(calendar, rng):
    panel = _six_series(rng)
    vintage = make_vintage(panel, calendar, "2010-05")
    visible = vintage.panel
    assert str(visible.dates[-1]) == "2010-06"
    assert vintage.month_in_quarter == 2
    assert str(vintage.target_quarter) == "2010Q2"

    def last_seen(name):
        col = visible.series.index(name)
        return str(visible.dates[np.flatnonzero(np.isfinite(visible.values[:, col]))[-1]])

    assert last_seen("GDP") == "2010-03"
    assert last_seen("IP") == "2010-03"
    assert last_seen("CAR") == "2010-04"
    assert last_seen("ESI") == "2010-05"
    assert last_seen("PMI") == "2010-05"
    assert last_seen("EUR") == "2010-05"
    assert str(vintage.fit_panel().dates[-1]) == "2010-05"


def test_later_origins_see_more(calendar, rng):
    panel = _six_series(rng)
    months = [str(p) for p in pd.period_range("2009-01", "2010-12", freq="M")]
    previous = None
    for month in months:
        mask = make_vintage(panel, calendar, month).mask
        if previous is not None:
            rows = previous.shape[0]
            assert np.all(mask[:rows] >= previous)
        previous = mask


def test_origin_before_the_panel(calendar, rng):
    with pytest.raises(InsufficientHistoryError):
        make_vintage(_six_series(rng), calendar, "2007-06")
