import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from app.core.errors import DimensionError, NonFiniteError
from app.statespace.aggregation import WEIGHTS, aggregate_at, aggregate_quarterly

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


def test_weights_sum_to_one():
    assert WEIGHTS.sum() == pytest.approx(1.0)
    assert WEIGHTS.tolist() == pytest.approx([1 / 9, 2 / 9, 3 / 9, 2 / 9, 1 / 9])


def test_constant_growth_aggregates_to_itself():
    assert aggregate_quarterly([0.5] * 5) == pytest.approx(0.5)


def test_worked_example():
    # newest month first
    assert aggregate_quarterly([1.0, 0.0, 0.0, 0.0, 0.0]) == pytest.approx(1 / 9)
    assert aggregate_quarterly([0.9, 0.9, 0.9, 0.0, 0.0]) == pytest.approx(0.6)


def test_bad_input_raises():
    with pytest.raises(DimensionError):
        aggregate_quarterly([1.0, 2.0])
    with pytest.raises(NonFiniteError):
        aggregate_quarterly([1.0, 2.0, np.nan, 0.0, 0.0])
    with pytest.raises(DimensionError):
        aggregate_at(np.zeros(10), 3)


@given(st.lists(finite, min_size=5, max_size=5), st.lists(finite, min_size=5, max_size=5), finite)
def test_aggregation_is_linear(a, b, c):
    lhs = aggregate_quarterly(np.add(a, np.multiply(c, b)))
    rhs = aggregate_quarterly(a) + c * aggregate_quarterly(b)
    assert lhs == pytest.approx(rhs, abs=1e-6 * (1 + abs(c)) * 1e3)


@given(st.lists(finite, min_size=5, max_size=5))
def test_aggregation_is_symmetric_in_time(values):
    assert aggregate_quarterly(values) == pytest.approx(aggregate_quarterly(values[::-1]), abs=1e-9)


@given(st.lists(finite, min_size=8, max_size=20), st.data())
def test_aggregate_at_matches_window(path, data):
    t = data.draw(st.integers(min_value=4, max_value=len(path) - 1))
    expected = aggregate_quarterly(path[t - 4 : t + 1][::-1])
    assert float(aggregate_at(np.asarray(path), t)) == pytest.approx(expected, abs=1e-9)


def test_aggregate_at_works_per_draw():
    paths = np.array([[0.0] * 4 + [9.0], [1.0] * 5])
    assert aggregate_at(paths, 4).tolist() == pytest.approx([1.0, 1.0])
