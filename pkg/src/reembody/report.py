"""Report rendering: summary table, structured summary, and figures.

Figures are bar charts per condition with sample-SD error bars, written
with the non-interactive matplotlib backend so reports render headless.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import GroupStats, MetricsSummary, render_table, summarize
from .telemetry import TelemetryRecord

FIGURE_DPI = 150


@dataclass(frozen=True)
class ReportPaths:
    out_dir: Path
    summary_txt: Path
    summary_json: Path
    figures: tuple[Path, ...]

    def all_files(self) -> tuple[Path, ...]:
        return (self.summary_txt, self.summary_json) + self.figures


def _bar_chart(
    path: Path,
    title: str,
    ylabel: str,
    groups: Sequence[GroupStats],
    values: Sequence[float],
    errors: Sequence[float | None] | None = None,
) -> None:
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    labels = [g.key for g in groups]
    xs = range(len(labels))
    yerr = None
    if errors is not None:
        yerr = [0.0 if e is None else e for e in errors]
    ax.bar(xs, values, yerr=yerr, capsize=4, color="#4878a8")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.margins(y=0.15)
    fig.tight_layout()
    fig.savefig(path, dpi=FIGURE_DPI)
    plt.close(fig)


def write_figures(summary: MetricsSummary, out_dir: Path) -> tuple[Path, ...]:
    groups = summary.by_condition
    task_path = out_dir / "task_time.png"
    _bar_chart(
        task_path,
        "Task completion time by condition",
        "seconds",
        groups,
        [g.mean_task_time_s or 0.0 for g in groups],
        [g.task_time_sd_s for g in groups],
    )
    interactions_path = out_dir / "interactions.png"
    _bar_chart(
        interactions_path,
        "User inputs per trial by condition",
        "interactions",
        groups,
        [g.mean_interactions for g in groups],
        [g.interactions_sd for g in groups],
    )
    error_path = out_dir / "error_rate.png"
    _bar_chart(
        error_path,
        "Trials with route deviations by condition",
        "% of trials",
        groups,
        [g.error_rate_pct for g in groups],
    )
    return (task_path, interactions_path, error_path)


def write_report(
    records: Iterable[TelemetryRecord],
    out_dir: str | Path,
) -> tuple[ReportPaths, MetricsSummary]:
    """Summarize records and write table, JSON, and figures under out_dir."""
    summary = summarize(records)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary_txt = out / "summary.txt"
    summary_txt.write_text(render_table(summary), encoding="utf-8")
    summary_json = out / "summary.json"
    summary_json.write_text(
        json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    figures = write_figures(summary, out)
    paths = ReportPaths(
        out_dir=out,
        summary_txt=summary_txt,
        summary_json=summary_json,
        figures=figures,
    )
    return paths, summary
