"""
Evaluation report
=================
Per-origin scores are computed once from the backtest output; every
aggregate in the report is recomputed from those records, so the JSON is a
pure function of the backtest files and the evaluation settings.
"""

from __future__ import annotations

import json
import logging
import math
import os
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from app.core.errors import DegenerateDrawsError
from app.core.run_config import EvalSettings
from app.evaluation.pit import PitSeries, pit_diagnostics, pit_value
from app.evaluation.scores import crps, log_score, rmse
from app.nowcast.backtest import BacktestResult

logger = logging.getLogger(__name__)

REPORT_JSON = "report.json"
REPORT_MD = "report.md"
BAND_PROBS = (0.05, 0.25, 0.75, 0.95)
GROUP_ORDER = ("month_1", "month_2", "month_3", "all")


def _clean(value: float) -> Optional[float]:
    return float(value) if value is not None and math.isfinite(value) else None


class OriginScore(BaseModel):
    origin: str
    quarter: str
    month_in_quarter: int
    mean: float
    realized: float
    log_score: float
    crps: float
    pit: float
    degenerate: bool = False
    q05: Optional[float] = None
    q25: Optional[float] = None
    q75: Optional[float] = None
    q95: Optional[float] = None


class MetricSummary(BaseModel):
    n: int
    rmse: Optional[float] = None
    lps: Optional[float] = None
    crps: Optional[float] = None
    degenerate_lps: int = 0


class PitSummary(BaseModel):
    n: int
    mean: float
    variance: float
    ar1: float
    mean_interval: Tuple[float, float]
    variance_interval: Tuple[float, float]
    ar1_interval: Tuple[float, float]
    n_clipped: int = 0


class WindowSummary(BaseModel):
    """Scores of the origins up to and including *end*."""

    end: str
    groups: Dict[str, MetricSummary] = Field(default_factory=dict)
    pit: Dict[str, Optional[PitSummary]] = Field(default_factory=dict)


class EvalReport(BaseModel):
    provenance: Dict[str, object] = Field(default_factory=dict)
    lps_method: str = "kde"
    groups: Dict[str, MetricSummary] = Field(default_factory=dict)
    pit: Dict[str, Optional[PitSummary]] = Field(default_factory=dict)
    origins: List[OriginScore] = Field(default_factory=list)
    failed_origins: List[str] = Field(default_factory=list)
    windows: Dict[str, WindowSummary] = Field(default_factory=dict)

    def lps_by_origin(self) -> Dict[str, float]:
        return {o.origin: o.log_score for o in self.origins}


def score_origins(result: BacktestResult, settings: EvalSettings) -> List[OriginScore]:
    rng = np.random.default_rng(settings.seed)
    scores: List[OriginScore] = []
    for record in sorted(result.records, key=lambda r: r.origin):
        draws = result.draws.get(record.origin)
        if record.status != "ok" or draws is None or not math.isfinite(record.realized):
            continue
        value, degenerate = log_score(draws, record.realized, settings.lps_method)
        bands = np.quantile(draws, BAND_PROBS)
        scores.append(
            OriginScore(
                origin=record.origin,
                quarter=record.quarter,
                month_in_quarter=record.month_in_quarter,
                mean=float(np.mean(draws)),
                realized=record.realized,
                log_score=value,
                crps=crps(draws, record.realized),
                pit=pit_value(draws, record.realized, rng),
                degenerate=degenerate,
                q05=_clean(bands[0]),
                q25=_clean(bands[1]),
                q75=_clean(bands[2]),
                q95=_clean(bands[3]),
            )
        )
    return scores


def summarize(scores: List[OriginScore]) -> MetricSummary:
    if not scores:
        return MetricSummary(n=0)
    return MetricSummary(
        n=len(scores),
        rmse=rmse([s.mean for s in scores], [s.realized for s in scores]),
        lps=float(sum(s.log_score for s in scores)),
        crps=float(np.mean([s.crps for s in scores])),
        degenerate_lps=sum(1 for s in scores if s.degenerate),
    )


def _pit_summary(scores: List[OriginScore], n_draws: int, settings: EvalSettings) -> Optional[PitSummary]:
    if len(scores) < 8:
        return None
    series = PitSeries.from_pits(np.array([s.pit for s in scores]), n_draws)
    stats_ = pit_diagnostics(series, settings.bootstrap_reps, settings.block_length, settings.seed)
    return PitSummary(
        n=stats_.n,
        mean=stats_.mean,
        variance=stats_.variance,
        ar1=stats_.ar1,
        mean_interval=stats_.intervals["mean"],
        variance_interval=stats_.intervals["variance"],
        ar1_interval=stats_.intervals["ar1"],
        n_clipped=stats_.n_clipped,
    )


def _group_scores(
    scores: List[OriginScore], n_draws: int, settings: EvalSettings
) -> Tuple[Dict[str, MetricSummary], Dict[str, Optional[PitSummary]]]:
    groups = {"all": summarize(scores)}
    pit = {"all": _pit_summary(scores, n_draws, settings)}
    for month in (1, 2, 3):
        subset = [s for s in scores if s.month_in_quarter == month]
        groups[f"month_{month}"] = summarize(subset)
        pit[f"month_{month}"] = _pit_summary(subset, n_draws, settings)
    return groups, pit


def build_report(result: BacktestResult, settings: Optional[EvalSettings] = None) -> EvalReport:
    settings = settings or EvalSettings()
    scores = score_origins(result, settings)
    if not scores:
        raise DegenerateDrawsError("no scorable origins in the backtest output")
    n_draws = min(int(result.draws[s.origin].size) for s in scores)

    groups, pit = _group_scores(scores, n_draws, settings)
    windows: Dict[str, WindowSummary] = {}
    for end in settings.window_ends:
        window_groups, window_pit = _group_scores([s for s in scores if s.origin <= end], n_draws, settings)
        windows[f"through_{end}"] = WindowSummary(end=end, groups=window_groups, pit=window_pit)

    report = EvalReport(
        provenance=dict(result.provenance),
        lps_method=settings.lps_method,
        groups=groups,
        pit=pit,
        origins=scores,
        failed_origins=[r.origin for r in result.failures],
        windows=windows,
    )
    logger.info(
        "Report: %d origins, RMSE %.4f, LPS %.3f",
        len(scores),
        groups["all"].rmse,
        groups["all"].lps,
        extra={"event": "report"},
    )
    return report


def cumulative_lps_difference(report_a: EvalReport, report_b: EvalReport) -> Tuple[List[str], np.ndarray]:
    """Running sum of LPS(a) - LPS(b) over the origins both reports scored."""
    a, b = report_a.lps_by_origin(), report_b.lps_by_origin()
    common = sorted(set(a) & set(b))
    diffs = np.array([a[o] - b[o] for o in common], dtype=float)
    return common, np.cumsum(diffs)


def report_to_json(report: EvalReport) -> str:
    payload = report.model_dump(mode="json")
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def load_report(path: str) -> EvalReport:
    with open(path, "r", encoding="utf-8") as f:
        return EvalReport(**json.load(f))


def format_metric(value: Optional[float], digits: int = 4) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def _score_lines(groups: Dict[str, MetricSummary], pit: Dict[str, Optional[PitSummary]]) -> List[str]:
    lines = ["| group | n | RMSE | LPS | CRPS |", "|---|---:|---:|---:|---:|"]
    for name in GROUP_ORDER:
        g = groups.get(name)
        if g is None:
            continue
        lines.append(f"| {name} | {g.n} | {format_metric(g.rmse)} | {format_metric(g.lps, 3)} | {format_metric(g.crps)} |")
    lines += ["", "| group | PIT mean | PIT variance | PIT AR(1) |", "|---|---|---|---|"]
    for name in GROUP_ORDER:
        p = pit.get(name)
        if p is None:
            lines.append(f"| {name} | n/a | n/a | n/a |")
            continue
        lines.append(
            f"| {name} | {p.mean:.3f} [{p.mean_interval[0]:.3f}, {p.mean_interval[1]:.3f}] "
            f"| {p.variance:.3f} [{p.variance_interval[0]:.3f}, {p.variance_interval[1]:.3f}] "
            f"| {p.ar1:.3f} [{p.ar1_interval[0]:.3f}, {p.ar1_interval[1]:.3f}] |"
        )
    return lines


def report_to_markdown(report: EvalReport) -> str:
    lines = ["# Nowcast evaluation", ""]
    prov = report.provenance
    if prov:
        lines.append(
            f"config `{str(prov.get('config_hash', ''))[:12]}`, code {prov.get('code_version', '?')}, "
            f"format {prov.get('format_version', '?')}"
        )
        lines.append("")
    lines += [f"## Scores (LPS via {report.lps_method})", ""]
    lines += _score_lines(report.groups, report.pit)
    for name in sorted(report.windows):
        window = report.windows[name]
        lines += ["", f"## Origins through {window.end}", ""]
        lines += _score_lines(window.groups, window.pit)
    if report.failed_origins:
        lines += ["", f"Failed origins: {', '.join(report.failed_origins)}"]
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, directory: str, with_plots: bool = True) -> str:
    os.makedirs(directory, exist_ok=True)
    json_path = os.path.join(directory, REPORT_JSON)
    with open(json_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(report_to_json(report))
    render_report(report, directory, with_plots=with_plots)
    return json_path


def render_report(report: EvalReport, directory: str, with_plots: bool = True) -> None:
    """Human-facing outputs (markdown and SVG) derived from the JSON report."""
    with open(os.path.join(directory, REPORT_MD), "w", encoding="utf-8", newline="\n") as f:
        f.write(report_to_markdown(report))
    if with_plots:
        from app.evaluation.plots import plot_scores

        plot_scores(report, directory)
