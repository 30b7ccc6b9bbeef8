from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Any, Dict, Optional, Sequence

import numpy as np

from app.core.config import settings
from app.core.errors import ConfigError, classify_error
from app.core.logging_utils import configure_logging
from app.core.provenance import provenance_block
from app.core.run_config import RunConfig, load_run_config, save_run_config


class Colors:
    HEADER = "\033[95m"
    BLUE = "\033[94m"
    CYAN = "\033[96m"
    GREEN = "\033[92m"
    WARNING = "\033[93m"
    FAIL = "\033[91m"
    ENDC = "\033[0m"
    BOLD = "\033[1m"


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def _resolve_config(args: argparse.Namespace) -> RunConfig:
    config = load_run_config(getattr(args, "config", None))
    data = config.model_dump()
    sampler, bart, sim = data["sampler"], data["bart"], data["simulation"]
    if getattr(args, "dataset", None):
        data["dataset"] = args.dataset
    if getattr(args, "mode", None):
        sampler["mode"] = args.mode
    if getattr(args, "seed", None) is not None:
        sampler["seed"] = args.seed
        sim["seed"] = args.seed
    if getattr(args, "sweeps", None) is not None:
        sampler["sweeps"] = args.sweeps
    if getattr(args, "burn", None) is not None:
        sampler["burn"] = args.burn
    if getattr(args, "chains", None) is not None:
        sampler["chains"] = args.chains
    if getattr(args, "trees", None) is not None:
        bart["trees"] = args.trees
    if getattr(args, "loose_prior", False):
        bart["loose_prior"] = True
    if getattr(args, "dgp", None):
        sim["dgp"] = args.dgp
    if getattr(args, "months", None) is not None:
        sim["n_months"] = args.months
    if getattr(args, "refit", None):
        data["backtest"]["refit"] = args.refit
    if getattr(args, "origins", None):
        data["backtest"]["origins"] = list(args.origins)
    if getattr(args, "lps", None):
        data["evaluation"]["lps_method"] = args.lps
    if getattr(args, "window_ends", None):
        data["evaluation"]["window_ends"] = list(args.window_ends)
    try:
        return RunConfig(**data)
    except ValueError as exc:
        raise ConfigError(f"invalid command-line override: {exc}") from exc


def _load_panel(config: RunConfig):
    from app.datasets.dataset import load_dataset

    if not config.dataset:
        raise ConfigError("no dataset given (config 'dataset' or --dataset)")
    panel = load_dataset(
        config.dataset,
        quarterly_divide_by_3=config.quarterly_divide_by_3,
        convert_levels=config.levels_to_growth,
    )
    return panel.subset(config.series) if config.series else panel


def _write_json(path: str, payload: Dict[str, Any]) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    from app.datasets.dataset import write_dataset
    from app.datasets.simulate import simulate_panel

    config = _resolve_config(args)
    sim = simulate_panel(config.simulation, np.random.default_rng(config.simulation.seed))
    output = args.output or os.path.join(config.output_dir, "simulated.csv")
    write_dataset(sim.panel, output, quarterly_divided_by_3=config.quarterly_divide_by_3)
    root, _ = os.path.splitext(output)
    np.savez_compressed(root + ".truth.npz", truth=sim.truth, coefficients=sim.coefficients, shock_cov=sim.shock_cov)
    print(f"{Colors.GREEN}Simulated {sim.dgp} panel -> {output}{Colors.ENDC}")
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    from app.bart.tree import render_tree, split_variable_counts
    from app.system.chain import pool_chains
    from app.system.checkpoint import save_chain
    from app.system.lags import lag_names
    from app.system.mcmc import run_chains, run_mcmc

    config = _resolve_config(args)
    panel = _load_panel(config)
    out = args.output or config.output_dir
    os.makedirs(out, exist_ok=True)
    save_run_config(config, os.path.join(out, "config.json"))

    if args.resume:
        chains = [run_mcmc(panel, config, checkpoint_path=os.path.join(out, "chain_0.json"), resume=args.resume)]
    elif config.sampler.chains == 1:
        chains = [run_mcmc(panel, config, checkpoint_path=os.path.join(out, "chain_0.json"))]
    else:
        chains = run_chains(panel, config)
        for chain in chains:
            save_chain(chain, os.path.join(out, f"chain_{chain.chain_id}.json"))
    pooled = pool_chains(chains)

    names = lag_names(panel.series, config.sampler.lags)
    summary: Dict[str, Any] = {
        "provenance": provenance_block(config),
        "mode": config.sampler.mode,
        "series": list(panel.series),
        "chains": len(chains),
        "stored_draws": pooled.n_draws,
        "mean_acceptance": float(np.mean([d.acceptance for d in pooled.diagnostics if not d.failed] or [0.0])),
        "max_constraint_violation": float(
            max([d.max_violation for d in pooled.diagnostics if not d.failed] or [0.0])
        ),
    }
    if config.sampler.mode == "bavart" and pooled.draws:
        usage = {}
        for j, name in enumerate(panel.series):
            counts = split_variable_counts([d.forests[j] for d in pooled.draws], len(names))
            usage[name] = {names[k]: int(c) for k, c in enumerate(counts) if c}
        summary["split_variable_counts"] = usage
    _write_json(os.path.join(out, "fit_summary.json"), summary)

    if config.bart.trees == 1 and config.sampler.mode == "bavart" and pooled.draws:
        from app.system.lags import build_lag_matrix

        last = pooled.draws[-1]
        x = build_lag_matrix(pooled.filled[-1], config.sampler.lags)
        for j, name in enumerate(panel.series):
            scale = pooled.hyper.scales[j]
            print(f"{Colors.BOLD}{name}{Colors.ENDC}")
            print(render_tree(last.forests[j].trees[0], names, x, scale=scale.scale, offset=scale.offset))
    print(f"{Colors.GREEN}Fit done: {pooled.n_draws} draws -> {out}{Colors.ENDC}")
    return 0


def cmd_nowcast(args: argparse.Namespace) -> int:
    from app.nowcast.calendar import ReleaseCalendar, make_vintage
    from app.nowcast.backtest import QUANTILE_COLUMNS
    from app.nowcast.predict import predict_quarter, refresh_latents
    from app.system.checkpoint import load_chain
    from app.system.mcmc import run_mcmc

    config = _resolve_config(args)
    panel = _load_panel(config)
    vintage = make_vintage(panel, ReleaseCalendar.from_settings(config.calendar), args.origin)
    fit_panel = vintage.fit_panel()
    fit_seed, predict_seed = np.random.SeedSequence(config.sampler.seed).spawn(2)
    if args.checkpoint:
        chain = load_chain(args.checkpoint)
        if chain.dates != tuple(str(d) for d in fit_panel.dates):
            chain = refresh_latents(chain, fit_panel, config, np.random.default_rng(fit_seed))
    else:
        chain = run_mcmc(fit_panel, config, seed=fit_seed)
    draws = predict_quarter(
        chain, vintage, np.random.default_rng(predict_seed), target_series=config.backtest.target_series
    )
    factor = 3.0 if config.quarterly_divide_by_3 else 1.0
    payload = {
        "provenance": provenance_block(config),
        "origin": str(vintage.nowcast_month),
        "quarter": str(draws.target_quarter),
        "series": draws.series,
        "month_in_quarter": vintage.month_in_quarter,
        "mean": float(factor * draws.mean),
        "quantiles": {name: float(factor * v) for name, v in zip(QUANTILE_COLUMNS, draws.quantiles())},
        "n_draws": draws.n_draws,
    }
    if args.output:
        _write_json(args.output, payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_backtest(args: argparse.Namespace) -> int:
    from app.nowcast.backtest import run_backtest, write_backtest

    config = _resolve_config(args)
    panel = _load_panel(config)
    result = run_backtest(panel, config, n_jobs=args.n_jobs)
    out = args.output or config.output_dir
    write_backtest(result, out)
    save_run_config(config, os.path.join(out, "config.json"))
    ok = len(result.records) - len(result.failures)
    color = Colors.GREEN if not result.failures else Colors.WARNING
    print(f"{color}Backtest: {ok}/{len(result.records)} origins ok -> {out}{Colors.ENDC}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    from app.evaluation.plots import plot_cumulative_lps, plot_predictive_densities
    from app.evaluation.report import format_metric, build_report, cumulative_lps_difference, write_report
    from app.nowcast.backtest import load_backtest

    config = _resolve_config(args)
    result = load_backtest(args.backtest)
    report = build_report(result, config.evaluation)
    out = args.output or args.backtest
    write_report(report, out, with_plots=not args.no_plots)
    if not args.no_plots:
        realized = {r.origin: r.realized for r in result.records}
        plot_predictive_densities(result.draws, realized, os.path.join(out, "densities.svg"))
    if args.compare:
        other = build_report(load_backtest(args.compare), config.evaluation)
        origins, cumulative = cumulative_lps_difference(report, other)
        _write_json(
            os.path.join(out, "lps_difference.json"),
            {"origins": origins, "cumulative": [float(v) for v in cumulative]},
        )
        if not args.no_plots:
            plot_cumulative_lps(origins, cumulative, os.path.join(out, "lps_difference.svg"), label="this - other")
    g = report.groups["all"]
    print(f"{Colors.BOLD}RMSE{Colors.ENDC} {format_metric(g.rmse)}  {Colors.BOLD}LPS{Colors.ENDC} {format_metric(g.lps)}  {Colors.BOLD}CRPS{Colors.ENDC} {format_metric(g.crps)}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    from app.evaluation.report import REPORT_JSON, load_report, render_report

    path = args.input if args.input.endswith(".json") else os.path.join(args.input, REPORT_JSON)
    report = load_report(path)
    render_report(report, args.output or os.path.dirname(os.path.abspath(path)), with_plots=not args.no_plots)
    print(f"{Colors.GREEN}Report regenerated from {path}{Colors.ENDC}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("-c", "--config", default=None, help="Run config (TOML or JSON)")
    p.add_argument("--seed", type=int, default=None, help="Master seed")
    p.add_argument("-o", "--output", default=None, help="Output path or directory")


def _add_model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", default=None, help="Long-format dataset CSV")
    p.add_argument("--mode", choices=["bavart", "linear"], default=None)
    p.add_argument("--sweeps", type=int, default=None)
    p.add_argument("--burn", type=int, default=None)
    p.add_argument("--trees", type=int, default=None)
    p.add_argument("--loose-prior", action="store_true", help="Weak depth penalty (single-tree illustration)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bavart", description=settings.PROJECT_NAME)
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    subparsers = parser.add_subparsers(dest="command", required=True)

    simulate = subparsers.add_parser("simulate", help="Write a synthetic dataset.")
    _add_common(simulate)
    simulate.add_argument("--dgp", choices=["linear", "threshold", "outlier", "threshold_outlier"], default=None)
    simulate.add_argument("--months", type=int, default=None)

    fit = subparsers.add_parser("fit", help="Run the MCMC and write checkpoints.")
    _add_common(fit)
    _add_model(fit)
    fit.add_argument("--chains", type=int, default=None)
    fit.add_argument("--resume", default=None, help="Checkpoint to resume from")

    nowcast = subparsers.add_parser("nowcast", help="Nowcast the quarter of one origin month.")
    _add_common(nowcast)
    _add_model(nowcast)
    nowcast.add_argument("--origin", required=True, help="Nowcast month, YYYY-MM")
    nowcast.add_argument("--checkpoint", default=None, help="Chain checkpoint to predict from instead of refitting")

    backtest = subparsers.add_parser("backtest", help="Pseudo-real-time backtest.")
    _add_common(backtest)
    _add_model(backtest)
    backtest.add_argument("--origins", nargs="+", default=None, help="Nowcast months, YYYY-MM")
    backtest.add_argument("--refit", choices=["origin", "quarterly"], default=None)
    backtest.add_argument("--n-jobs", type=int, default=None)

    evaluate = subparsers.add_parser("evaluate", help="Score a backtest and write the report.")
    _add_common(evaluate)
    evaluate.add_argument("--backtest", required=True, help="Backtest output directory")
    evaluate.add_argument("--compare", default=None, help="Second backtest for the LPS comparison")
    evaluate.add_argument("--lps", choices=["kde", "normal"], default=None)
    evaluate.add_argument("--window-end", dest="window_ends", nargs="+", default=None, help="Also score origins through each month, YYYY-MM")
    evaluate.add_argument("--no-plots", action="store_true")

    report = subparsers.add_parser("report", help="Regenerate markdown and plots from report.json.")
    report.add_argument("-i", "--input", required=True, help="report.json or its directory")
    report.add_argument("-o", "--output", default=None)
    report.add_argument("--no-plots", action="store_true")

    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "nowcast": cmd_nowcast,
    "backtest": cmd_backtest,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    if os.name == "nt":
        os.system("color")

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    configure_logging(args.log_level or settings.LOG_LEVEL)
    try:
        return COMMANDS[args.command](args)
    except KeyboardInterrupt:
        print(f"{Colors.WARNING}Interrupted.{Colors.ENDC}", file=sys.stderr)
        return 130
    except Exception as exc:
        classified = classify_error(exc)
        print(classified.to_json(), file=sys.stderr)
        return classified.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
