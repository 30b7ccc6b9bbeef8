import numpy as np
import pandas as pd
import pytest

from app.core.errors import DimensionError
from app.statespace.aggregation import WEIGHTS
from app.statespace.builder import build_state_space, companion_matrix, stack_state
from app.statespace.panel import MixedFrequencyPanel
from app.statespace.projection import EffectSizeMatrix


def _panel(T: int = 12) -> MixedFrequencyPanel:
    values = np.full((T, 2), np.nan)
    values[:, 1] = np.arange(T, dtype=float)
    values[5::3, 0] = 0.5
    values[2, 0] = 0.4  # before month 4: no room for five months
    return MixedFrequencyPanel(
        dates=pd.period_range("2001-01", periods=T, freq="M"),
        series=("GDP", "IP"),
        frequencies=("Q", "M"),
        values=values,
    )


def test_companion_matrix_layout():
    a1 = np.array([[0.5, 0.1], [0.2, 0.3]])
    a2 = np.array([[0.05, 0.0], [0.0, 0.04]])
    trans = companion_matrix(np.vstack([a1, a2]), M=2, n_blocks=5)
    assert trans.shape == (10, 10)
    assert np.allclose(trans[:2, :2], a1.T)
    assert np.allclose(trans[:2, 2:4], a2.T)
    assert np.allclose(trans[:2, 4:], 0.0)
    assert np.allclose(trans[2:, :8], np.eye(8))
    with pytest.raises(DimensionError):
        companion_matrix(np.zeros((3, 2)), M=2, n_blocks=5)


def test_measurement_rows():
    panel = _panel()
    effect = EffectSizeMatrix(a_tilde=0.1 * np.eye(2))
    spec = build_state_space(effect, np.eye(2), panel)
    assert spec.n_blocks == 5 and spec.t0 == 4 and spec.state_dim == 10
    assert len(spec.measurements) == panel.T - spec.t0

    first = spec.measurement_at(4)
    # five monthly values; the quarter ending at month 2 is skipped
    assert first.size == 5
    assert sorted(first.values.tolist()) == [0.0, 1.0, 2.0, 3.0, 4.0]

    fifth = spec.measurement_at(5)
    assert fifth.size == 2
    agg = fifth.rows[np.isclose(fifth.values, 0.5)][0]
    assert np.allclose(agg[0::2], WEIGHTS)
    assert np.allclose(agg[1::2], 0.0)
    sel = fifth.rows[np.isclose(fifth.values, 5.0)][0]
    assert sel[1] == 1.0 and sel.sum() == 1.0


def test_shock_only_enters_first_block():
    spec = build_state_space(EffectSizeMatrix(a_tilde=np.zeros((2, 2))), np.array([[1.0, 0.2], [0.2, 2.0]]), _panel())
    noise = spec.state_noise()
    assert np.allclose(noise[:2, :2], [[1.0, 0.2], [0.2, 2.0]])
    assert np.allclose(noise[2:], 0.0)
    assert np.allclose(spec.init_cov, 1e7 * np.eye(10))


def test_short_panel_and_bad_sigma_raise():
    effect = EffectSizeMatrix(a_tilde=np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        build_state_space(effect, np.eye(2), _panel(4))
    with pytest.raises(DimensionError):
        build_state_space(effect, np.eye(3), _panel())


def test_stack_state_orders_newest_first():
    filled = np.arange(12, dtype=float).reshape(6, 2)
    assert stack_state(filled, 5, 3).tolist() == [10.0, 11.0, 8.0, 9.0, 6.0, 7.0]
