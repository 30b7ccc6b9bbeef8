import numpy as np
import pytest

from app.core.errors import SchemaError
from app.datasets.dataset import levels_to_growth, load_dataset, write_dataset

HEADER = "date,series_id,frequency,value\n"


def _write(tmp_path, body: str):
    path = tmp_path / "data.csv"
    path.write_text(HEADER + body, encoding="utf-8")
    return str(path)


def test_long_format_is_pivoted(tmp_path):
    path = _write(
        tmp_path,
        "2020-01,IP,M,0.5\n2020-02,IP,M,\n2020-03,IP,M,-0.25\n2020-03,GDP,Q,0.9\n",
    )
    panel = load_dataset(path)
    assert panel.series == ("IP", "GDP")
    assert panel.frequencies == ("M", "Q")
    assert [str(d) for d in panel.dates] == ["2020-01", "2020-02", "2020-03"]
    assert np.isnan(panel.values[1, 0])
    assert panel.values[2, 1] == pytest.approx(0.3)
    assert load_dataset(path, quarterly_divide_by_3=False).values[2, 1] == 0.9


def test_grid_starts_at_the_first_quarter(tmp_path):
    panel = load_dataset(_write(tmp_path, "2020-03,GDP,Q,0.9\n2020-05,IP,M,0.1\n"))
    assert str(panel.dates[0]) == "2020-01"
    assert panel.T == 5


@pytest.mark.parametrize(
    "body, row",
    [
        ("2020-01,IP,M,abc\n", 2),
        ("2020-01,IP,M,0.1\n2020-01,IP,M,0.2\n", 3),
        ("2020-01,IP,M,0.1\n2020-02,GDP,Q,0.2\n", 3),
        ("2020-01,IP,M,0.1\n2020-02,IP,Q,0.2\n", 3),
        ("2020-13,IP,M,0.1\n", 2),
        ("2020-01,IP,W,0.1\n", 2),
        ("2020-01,IP,M,inf\n", 2),
    ],
)
def test_schema_errors_name_the_row(tmp_path, body, row):
    with pytest.raises(SchemaError) as info:
        load_dataset(_write(tmp_path, body))
    assert info.value.context["row"] == row


def test_missing_column_and_file(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("date,series_id,value\n2020-01,IP,1\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        load_dataset(str(path))
    with pytest.raises(FileNotFoundError):
        load_dataset(str(tmp_path / "absent.csv"))


def test_levels_become_percent_growth():
    growth = levels_to_growth(np.array([100.0, np.nan, 110.0, 121.0]))
    assert np.isnan(growth[0]) and np.isnan(growth[1])
    assert growth[2] == pytest.approx(100 * np.log(1.1))
    assert growth[3] == pytest.approx(100 * np.log(1.1))
    with pytest.raises(SchemaError):
        levels_to_growth(np.array([1.0, -1.0]))


def test_written_dataset_loads_back(sim_panel, tmp_path):
    path = str(tmp_path / "sim.csv")
    write_dataset(sim_panel.panel, path, quarterly_divided_by_3=False)
    loaded = load_dataset(path, quarterly_divide_by_3=False)
    assert loaded.series == sim_panel.panel.series
    assert loaded.dates.equals(sim_panel.panel.dates)
    assert np.array_equal(np.isnan(loaded.values), np.isnan(sim_panel.panel.values))
    assert np.array_equal(np.nan_to_num(loaded.values), np.nan_to_num(sim_panel.panel.values))

    write_dataset(sim_panel.panel, path)
    rescaled = load_dataset(path)
    assert np.allclose(np.nan_to_num(rescaled.values), np.nan_to_num(sim_panel.panel.values), rtol=1e-12, atol=1e-12)
