import json

import pytest

from app.nowcast.backtest import write_backtest
from cli import build_parser, main

TINY = {
    "sampler": {"lags": 2, "sweeps": 4, "burn": 2, "seed": 5},
    "bart": {"trees": 2},
    "simulation": {"n_months": 48, "n_monthly": 2, "seed": 3},
    "evaluation": {"bootstrap_reps": 200},
}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(TINY), encoding="utf-8")
    return str(path)


@pytest.fixture
def dataset(tmp_path, tiny_config):
    path = tmp_path / "sim.csv"
    assert main(["simulate", "-c", tiny_config, "-o", str(path)]) == 0
    return str(path)


def test_simulate_writes_dataset_and_truth(dataset, tmp_path):
    assert (tmp_path / "sim.truth.npz").exists()
    header = open(dataset, encoding="utf-8").readline().strip()
    assert header == "date,series_id,frequency,value"


def test_fit_writes_summary_and_checkpoint(dataset, tiny_config, tmp_path):
    out = tmp_path / "fit"
    assert main(["fit", "-c", tiny_config, "--dataset", dataset, "-o", str(out)]) == 0
    summary = json.loads((out / "fit_summary.json").read_text(encoding="utf-8"))
    assert summary["stored_draws"] == 2
    assert summary["series"] == ["GDP", "IP", "ESI"]
    assert summary["max_constraint_violation"] < 1e-6
    assert (out / "chain_0.json").exists()
    assert (out / "config.json").exists()


def test_single_tree_fit_prints_the_tree(dataset, tiny_config, tmp_path, capsys):
    out = tmp_path / "fit"
    assert main(["fit", "-c", tiny_config, "--dataset", dataset, "-o", str(out), "--trees", "1", "--loose-prior"]) == 0
    printed = capsys.readouterr().out
    assert "GDP" in printed and "ESI" in printed


def test_nowcast_prints_quantiles(dataset, tiny_config, tmp_path, capsys):
    out = tmp_path / "nowcast.json"
    assert main(["nowcast", "-c", tiny_config, "--dataset", dataset, "--origin", "2003-05", "-o", str(out)]) == 0
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert payload["quarter"] == "2003Q2"
    assert payload["month_in_quarter"] == 2
    values = [payload["quantiles"][k] for k in sorted(payload["quantiles"])]
    assert values == sorted(values)


def test_nowcast_from_a_fit_checkpoint(dataset, tiny_config, tmp_path):
    fit_dir = tmp_path / "fit"
    assert main(["fit", "-c", tiny_config, "--dataset", dataset, "-o", str(fit_dir)]) == 0
    out = tmp_path / "nowcast.json"
    argv = ["nowcast", "-c", tiny_config, "--dataset", dataset, "--origin", "2003-05", "-o", str(out)]
    assert main(argv + ["--checkpoint", str(fit_dir / "chain_0.json")]) == 0
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert payload["quarter"] == "2003Q2"
    assert payload["n_draws"] == 2


def test_nowcast_with_missing_checkpoint_is_an_input_error(dataset, tiny_config, tmp_path):
    argv = ["nowcast", "-c", tiny_config, "--dataset", dataset, "--origin", "2003-05"]
    assert main(argv + ["--checkpoint", str(tmp_path / "absent.json")]) == 2


def test_evaluate_then_report(synthetic_backtest, tiny_config, tmp_path):
    run = tmp_path / "bt"
    write_backtest(synthetic_backtest, str(run))
    assert main(["evaluate", "-c", tiny_config, "--backtest", str(run), "--compare", str(run)]) == 0
    assert (run / "report.json").exists() and (run / "report.md").exists()
    assert (run / "densities.svg").exists()
    assert (run / "nowcast_bands.svg").exists()
    difference = json.loads((run / "lps_difference.json").read_text(encoding="utf-8"))
    assert difference["cumulative"][-1] == pytest.approx(0.0)

    regenerated = tmp_path / "again"
    assert main(["report", "-i", str(run), "-o", str(regenerated), "--no-plots"]) == 0
    assert (regenerated / "report.md").read_text(encoding="utf-8") == (run / "report.md").read_text(encoding="utf-8")


def test_invalid_config_exits_with_input_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"sampler": {"sweeps": 2, "burn": 5}}), encoding="utf-8")
    assert main(["simulate", "-c", str(bad), "-o", str(tmp_path / "x.csv")]) == 2
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert payload["error"] == "config"
    assert payload["exit_code"] == 2


def test_missing_dataset_is_an_input_error(tiny_config, capsys):
    assert main(["fit", "-c", tiny_config]) == 2


def test_missing_subcommand():
    assert main([]) == 2


def test_parser_knows_every_command():
    parser = build_parser()
    argv = {
        "simulate": [],
        "fit": [],
        "nowcast": ["--origin", "2003-05"],
        "backtest": ["--origins", "2003-04", "2003-05"],
        "evaluate": ["--backtest", "runs/bt"],
        "report": ["-i", "runs/bt"],
    }
    for command, extra in argv.items():
        assert parser.parse_args([command, *extra]).command == command


def test_evaluate_with_windows(synthetic_backtest, tiny_config, tmp_path):
    run = tmp_path / "bt"
    write_backtest(synthetic_backtest, str(run))
    assert main(["evaluate", "-c", tiny_config, "--backtest", str(run), "--no-plots", "--window-end", "2015-06"]) == 0
    report = json.loads((run / "report.json").read_text(encoding="utf-8"))
    assert report["windows"]["through_2015-06"]["groups"]["all"]["n"] == 6
    assert main(["evaluate", "-c", tiny_config, "--backtest", str(run), "--window-end", "June"]) == 2


@pytest.mark.slow
def test_pipeline_reruns_give_identical_reports(tmp_path):
    config = dict(TINY, sampler={"lags": 2, "sweeps": 110, "burn": 10, "seed": 5})
    config_path = tmp_path / "scored.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    dataset = tmp_path / "sim.csv"
    assert main(["simulate", "-c", str(config_path), "-o", str(dataset)]) == 0

    reports = []
    for name in ("first", "second"):
        out = tmp_path / name
        argv = ["-c", str(config_path), "--dataset", str(dataset), "-o", str(out)]
        assert main(["backtest", *argv, "--origins", "2003-04", "2003-05", "2003-06", "--n-jobs", "1"]) == 0
        assert main(["evaluate", "-c", str(config_path), "--backtest", str(out), "--no-plots"]) == 0
        reports.append((out / "report.json").read_bytes())
    assert reports[0] == reports[1]
