"""Study metrics: per-trial measurements rolled up per condition and route.

A trial is one (participant, condition, route) triple; its telemetry rows
are measured with two anchors: the first interaction event starts the task
clock and the arrival event stops it.  A trial counts as errored when it
contains at least one deviation event.  Interactions count every user
input, the transfer request included.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Iterable, Sequence

from .telemetry import NO_CONTEXT, TelemetryRecord

METRIC_ROWS = (
    "Mean task time (s)",
    "Task time SD (s)",
    "Error rate (%)",
    "Mean interactions",
    "Interactions SD",
    "Trials",
)


class MetricsError(Exception):
    pass


@dataclass(frozen=True)
class TrialMetrics:
    participant: str
    condition: str
    route: str
    interactions: int
    deviations: int
    arrived: bool
    task_time_ms: int | None

    @property
    def errored(self) -> bool:
        return self.deviations > 0


@dataclass(frozen=True)
class GroupStats:
    """One column of the summary table."""

    key: str
    trials: int
    arrived: int
    mean_task_time_s: float | None
    task_time_sd_s: float | None
    error_rate_pct: float
    mean_interactions: float
    interactions_sd: float | None
    total_interactions: int

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "trials": self.trials,
            "arrived": self.arrived,
            "mean_task_time_s": self.mean_task_time_s,
            "task_time_sd_s": self.task_time_sd_s,
            "error_rate_pct": self.error_rate_pct,
            "mean_interactions": self.mean_interactions,
            "interactions_sd": self.interactions_sd,
            "total_interactions": self.total_interactions,
        }


@dataclass(frozen=True)
class MetricsSummary:
    trials: tuple[TrialMetrics, ...]
    by_condition: tuple[GroupStats, ...]
    by_route: tuple[GroupStats, ...]

    @property
    def total_interactions(self) -> int:
        return sum(t.interactions for t in self.trials)

    def condition(self, name: str) -> GroupStats:
        for group in self.by_condition:
            if group.key == name:
                return group
        raise MetricsError(f"no condition {name!r} in summary")

    def to_dict(self) -> dict:
        return {
            "trials": [
                {
                    "participant": t.participant,
                    "condition": t.condition,
                    "route": t.route,
                    "interactions": t.interactions,
                    "deviations": t.deviations,
                    "errored": t.errored,
                    "arrived": t.arrived,
                    "task_time_ms": t.task_time_ms,
                }
                for t in self.trials
            ],
            "by_condition": [g.to_dict() for g in self.by_condition],
            "by_route": [g.to_dict() for g in self.by_route],
            "total_interactions": self.total_interactions,
        }


def collect_trials(records: Iterable[TelemetryRecord]) -> list[TrialMetrics]:
    """Group rows into trials, ordered by first appearance.

    Rows without full study context (participant, condition and route all
    set) belong to no trial and are skipped.
    """
    order: list[tuple[str, str, str]] = []
    grouped: dict[tuple[str, str, str], list[TelemetryRecord]] = {}
    for record in records:
        key = (record.participant, record.condition, record.route)
        if NO_CONTEXT in key:
            continue
        if key not in grouped:
            grouped[key] = []
            order.append(key)
        grouped[key].append(record)
    trials = []
    for key in order:
        rows = grouped[key]
        interactions = sum(1 for r in rows if r.event == "interaction")
        deviations = sum(1 for r in rows if r.event == "deviation")
        first_interaction = next(
            (r.ts_ms for r in rows if r.event == "interaction"), None
        )
        arrival = next((r.ts_ms for r in rows if r.event == "arrival"), None)
        task_time = None
        if first_interaction is not None and arrival is not None:
            task_time = arrival - first_interaction
        trials.append(
            TrialMetrics(
                participant=key[0],
                condition=key[1],
                route=key[2],
                interactions=interactions,
                deviations=deviations,
                arrived=arrival is not None,
                task_time_ms=task_time,
            )
        )
    return trials


def _sd(values: Sequence[float]) -> float | None:
    if len(values) < 2:
        return None
    return statistics.stdev(values)


def _group(key: str, trials: Sequence[TrialMetrics]) -> GroupStats:
    times_s = [t.task_time_ms / 1000.0 for t in trials if t.task_time_ms is not None]
    counts = [float(t.interactions) for t in trials]
    return GroupStats(
        key=key,
        trials=len(trials),
        arrived=sum(1 for t in trials if t.arrived),
        mean_task_time_s=statistics.mean(times_s) if times_s else None,
        task_time_sd_s=_sd(times_s),
        error_rate_pct=100.0 * sum(1 for t in trials if t.errored) / len(trials),
        mean_interactions=statistics.mean(counts),
        interactions_sd=_sd(counts),
        total_interactions=sum(t.interactions for t in trials),
    )


def _roll_up(trials: Sequence[TrialMetrics], attr: str) -> tuple[GroupStats, ...]:
    order: list[str] = []
    buckets: dict[str, list[TrialMetrics]] = {}
    for trial in trials:
        key = getattr(trial, attr)
        if key not in buckets:
            buckets[key] = []
            order.append(key)
        buckets[key].append(trial)
    return tuple(_group(key, buckets[key]) for key in order)


def summarize(records: Iterable[TelemetryRecord]) -> MetricsSummary:
    trials = collect_trials(records)
    if not trials:
        raise MetricsError("no telemetry rows with study context to summarize")
    return MetricsSummary(
        trials=tuple(trials),
        by_condition=_roll_up(trials, "condition"),
        by_route=_roll_up(trials, "route"),
    )


def _fmt(value: float | None, digits: int = 1) -> str:
    if value is None:
        return "-"
    return f"{value:.{digits}f}"


def _table(title: str, groups: Sequence[GroupStats]) -> list[str]:
    headers = [title] + [g.key for g in groups]
    rows = [
        ["Mean task time (s)"] + [_fmt(g.mean_task_time_s) for g in groups],
        ["Task time SD (s)"] + [_fmt(g.task_time_sd_s) for g in groups],
        ["Error rate (%)"] + [_fmt(g.error_rate_pct) for g in groups],
        ["Mean interactions"] + [_fmt(g.mean_interactions) for g in groups],
        ["Interactions SD"] + [_fmt(g.interactions_sd) for g in groups],
        ["Trials"] + [str(g.trials) for g in groups],
    ]
    widths = [
        max(len(row[col]) for row in [headers] + rows)
        for col in range(len(headers))
    ]
    lines = []
    for row in [headers] + rows:
        cells = [row[0].ljust(widths[0])] + [
            cell.rjust(widths[i + 1]) for i, cell in enumerate(row[1:])
        ]
        lines.append("  ".join(cells).rstrip())
    return lines


def render_table(summary: MetricsSummary) -> str:
    """Aligned text: metric rows as lines, one column per condition/route."""
    lines = _table("By condition", summary.by_condition)
    lines.append("")
    lines.extend(_table("By route", summary.by_route))
    return "\n".join(lines) + "\n"
