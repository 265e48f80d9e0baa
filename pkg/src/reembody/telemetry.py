"""Telemetry events and their CSV form.

One row per event: ``ts_ms,participant,condition,route,event,detail``.
``detail`` is a compact sorted-key JSON object so files diff cleanly and
identical runs are byte-identical.  Events without study context (live
serving) carry "-" in the participant, condition, and route columns.
"""

from __future__ import annotations

import csv
import io
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

CSV_COLUMNS = ("ts_ms", "participant", "condition", "route", "event", "detail")

EVENT_KINDS = ("interaction", "response", "handoff", "deviation", "arrival")

NO_CONTEXT = "-"


class TelemetryError(Exception):
    pass


@dataclass(frozen=True)
class TelemetryRecord:
    ts_ms: int
    participant: str
    condition: str
    route: str
    event: str
    detail: dict

    def __post_init__(self) -> None:
        if self.ts_ms < 0:
            raise TelemetryError("ts_ms must be non-negative")
        if self.event not in EVENT_KINDS:
            raise TelemetryError(f"unknown event kind {self.event!r}")
        for name in ("participant", "condition", "route"):
            if not getattr(self, name):
                raise TelemetryError(f"{name} must be non-empty (use '-')")

    def detail_json(self) -> str:
        return json.dumps(self.detail, sort_keys=True, separators=(",", ":"))


class TelemetrySink:
    """Append-only, thread-safe event collector."""

    def __init__(self) -> None:
        self._records: list[TelemetryRecord] = []
        self._lock = threading.Lock()

    def emit(
        self,
        ts_ms: int,
        event: str,
        detail: Mapping,
        participant: str = NO_CONTEXT,
        condition: str = NO_CONTEXT,
        route: str = NO_CONTEXT,
    ) -> TelemetryRecord:
        record = TelemetryRecord(
            ts_ms=ts_ms,
            participant=participant,
            condition=condition,
            route=route,
            event=event,
            detail=dict(detail),
        )
        with self._lock:
            self._records.append(record)
        return record

    def records(self) -> list[TelemetryRecord]:
        with self._lock:
            return list(self._records)

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)


def render_csv(records: Iterable[TelemetryRecord]) -> str:
    """Rows in emission order; within one scenario that is timestamp order."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for record in records:
        writer.writerow(
            (
                record.ts_ms,
                record.participant,
                record.condition,
                record.route,
                record.event,
                record.detail_json(),
            )
        )
    return buffer.getvalue()


def write_csv(records: Iterable[TelemetryRecord], path: str | Path) -> Path:
    path = Path(path)
    path.write_text(render_csv(records), encoding="utf-8")
    return path


def read_csv(path: str | Path) -> list[TelemetryRecord]:
    rows: list[TelemetryRecord] = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise TelemetryError(
                f"expected columns {','.join(CSV_COLUMNS)}, "
                f"got {reader.fieldnames}"
            )
        for line in reader:
            rows.append(
                TelemetryRecord(
                    ts_ms=int(line["ts_ms"]),
                    participant=line["participant"],
                    condition=line["condition"],
                    route=line["route"],
                    event=line["event"],
                    detail=json.loads(line["detail"]),
                )
            )
    return rows
