import numpy as np
import pandas as pd
import pytest

from app.core.errors import DimensionError, SchemaError
from app.statespace.panel import MixedFrequencyPanel


def _panel(values) -> MixedFrequencyPanel:
    values = np.asarray(values, dtype=float)
    return MixedFrequencyPanel(
        dates=pd.period_range("2010-01", periods=values.shape[0], freq="M"),
        series=("GDP", "IP"),
        frequencies=("Q", "M"),
        values=values,
    )


def test_quarterly_value_off_quarter_end_is_rejected():
    nan = np.nan
    with pytest.raises(SchemaError):
        _panel([[1.0, 0.1], [nan, 0.2], [nan, 0.3]])


def test_shape_mismatch_is_rejected():
    with pytest.raises(DimensionError):
        MixedFrequencyPanel(
            dates=pd.period_range("2010-01", periods=2, freq="M"),
            series=("IP",),
            frequencies=("M",),
            values=np.zeros((3, 1)),
        )


def test_indices_and_edges():
    nan = np.nan
    panel = _panel([[nan, 0.1], [nan, 0.2], [0.5, nan], [nan, nan]])
    assert panel.quarterly_index == [0]
    assert panel.monthly_index == [1]
    assert panel.quarter_end_mask.tolist() == [False, False, True, False]
    assert panel.index_of("2010-03") == 2
    assert panel.last_observed_index() == 2
    with pytest.raises(DimensionError):
        panel.index_of("2011-01")


def test_truncate_extend_and_subset():
    nan = np.nan
    panel = _panel([[nan, 0.1], [nan, 0.2], [0.5, 0.3]])
    assert panel.truncate(1).T == 2
    longer = panel.extend_to("2010-06")
    assert longer.T == 6
    assert np.all(np.isnan(longer.values[3:]))
    only_ip = panel.subset(["IP"])
    assert only_ip.series == ("IP",)
    with pytest.raises(SchemaError):
        panel.subset(["CAR"])


def test_initial_fill_repeats_quarter_and_interpolates():
    nan = np.nan
    panel = _panel([[nan, 1.0], [nan, nan], [0.6, 3.0], [nan, nan]])
    filled = panel.initial_fill()
    assert filled[:3, 0].tolist() == [0.6, 0.6, 0.6]
    assert filled[1, 1] == pytest.approx(2.0)
    assert filled[3, 1] == pytest.approx(3.0)
    assert np.all(np.isfinite(filled))
