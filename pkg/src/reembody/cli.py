"""Command-line entry points: serve, simulate, report, validate, schedule.

Exit codes are a stable contract: 0 success, 2 configuration problem
(missing or invalid files, bad flag values), 3 runtime failure.
"""

from __future__ import annotations

import argparse
import asyncio
import csv as csv_module
import json
import logging
import os
import signal
import sys
from pathlib import Path

from . import __version__
from .client import EndpointError, parse_endpoint, run_scenarios_endpoint
from .clock import MonotonicClock
from .dialogue import ConfigError, TriggerConfig, load_triggers
from .gateway import Gateway
from .metrics import MetricsError, render_table, summarize
from .model import DeviceKind, VoiceConfig
from .report import write_report
from .routes import RouteError, RouteGraph, default_campus_graph, load_route_graph_file, plan_route
from .schedule import ScheduleError, latin_square_schedule
from .server import GatewayServer
from .sim import (
    STUDY_HANDOFF_JITTER,
    STUDY_LATENCY,
    ConditionKind,
    ScriptError,
    generate_scripts,
    latency_models,
    load_scenarios,
    run_batch,
)
from .speech import ErrorModel
from .telemetry import TelemetryError, read_csv, write_csv

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

DEFAULT_ADDR = "127.0.0.1:8787"

CONFIG_ERRORS = (
    ConfigError,
    RouteError,
    ScheduleError,
    ScriptError,
    MetricsError,
    TelemetryError,
    FileNotFoundError,
    IsADirectoryError,
    PermissionError,
)


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG) -> None:
        super().__init__(message)
        self.code = code


def _parse_addr(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not host:
        raise CliError(f"--addr must be host:port, got {addr!r}")
    try:
        number = int(port)
    except ValueError:
        raise CliError(f"--addr port is not a number: {addr!r}") from None
    if not 0 <= number <= 65535:
        raise CliError(f"--addr port out of range: {addr!r}")
    return host, number


def _load_graph(path: str | None) -> RouteGraph:
    if path is None:
        return default_campus_graph()
    try:
        return load_route_graph_file(path)
    except FileNotFoundError:
        raise CliError(f"route file not found: {path}") from None
    except RouteError as exc:
        raise CliError(f"{path}: {exc}") from None


def _load_triggers(path: str | None) -> TriggerConfig:
    if path is None:
        return load_triggers()
    try:
        return load_triggers(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CliError(f"trigger file not found: {path}") from None
    except ConfigError as exc:
        raise CliError(f"{path}: {exc}") from None


def _add_common_flags(parser: argparse.ArgumentParser, *names: str) -> None:
    if "routes" in names:
        parser.add_argument("--routes", metavar="PATH", help="route graph JSON file (default: packaged campus graph)")
    if "triggers" in names:
        parser.add_argument("--triggers", metavar="PATH", help="hand-off trigger YAML file (default: packaged triggers)")
    if "seed" in names:
        parser.add_argument("--seed", type=int, default=1, help="random seed (default: 1)")
    if "stt-sub-rate" in names:
        parser.add_argument(
            "--stt-sub-rate",
            type=float,
            default=0.0,
            metavar="RATE",
            help="per-word recognition substitution rate in [0,1] (default: 0)",
        )
    if "handoff-latency-ms" in names:
        parser.add_argument(
            "--handoff-latency-ms",
            type=int,
            default=3960,
            metavar="MS",
            help="device transfer duration in milliseconds (default: 3960)",
        )
    if "speaking-rate" in names:
        parser.add_argument(
            "--speaking-rate",
            type=float,
            default=1.0,
            metavar="RATE",
            help="speech synthesis rate multiplier (default: 1.0)",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reembody",
        description="Conversational navigation that follows you between a robot and a watch.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    serve = commands.add_parser("serve", help="run the gateway server")
    serve.add_argument(
        "--addr",
        default=os.environ.get("REEMBODY_ADDR", DEFAULT_ADDR),
        help=f"host:port to bind (default: $REEMBODY_ADDR or {DEFAULT_ADDR})",
    )
    serve.add_argument("--ui-dir", metavar="DIR", help="serve static device panels from this directory")
    serve.add_argument("--out", metavar="PATH", help="write telemetry CSV here on shutdown")
    _add_common_flags(serve, "routes", "triggers", "seed", "stt-sub-rate", "handoff-latency-ms", "speaking-rate")

    simulate = commands.add_parser("simulate", help="run scripted study scenarios")
    simulate.add_argument("scenario_path", nargs="?", help="scenario YAML file (omit with --generate)")
    simulate.add_argument(
        "--generate",
        type=int,
        metavar="N",
        help="generate a counterbalanced batch for N participants instead of reading a file",
    )
    simulate.add_argument("--out", default="telemetry.csv", metavar="PATH", help="telemetry CSV output (default: telemetry.csv)")
    simulate.add_argument(
        "--endpoint",
        metavar="HOST:PORT",
        help="run against a live server over sockets instead of in process (real time)",
    )
    _add_common_flags(simulate, "routes", "triggers", "seed", "stt-sub-rate", "handoff-latency-ms", "speaking-rate")

    report = commands.add_parser("report", help="summarize a telemetry CSV into tables and figures")
    report.add_argument("csv_path", help="telemetry CSV produced by simulate or serve")
    report.add_argument("--out", default="report", metavar="DIR", help="output directory (default: report)")

    validate = commands.add_parser("validate-routes", help="check a route graph file")
    validate.add_argument("path", nargs="?", help="route graph JSON file (default: packaged campus graph)")

    schedule = commands.add_parser("schedule", help="print the counterbalanced assignment table")
    schedule.add_argument("--generate", type=int, default=24, metavar="N", help="participant count (default: 24)")
    schedule.add_argument("--out", metavar="PATH", help="also write the table as CSV")
    _add_common_flags(schedule, "routes")

    return parser


# -- commands ------------------------------------------------------------------


def cmd_serve(args) -> int:
    host, port = _parse_addr(args.addr)
    graph = _load_graph(args.routes)
    triggers = _load_triggers(args.triggers)
    if args.ui_dir is not None and not Path(args.ui_dir).is_dir():
        raise CliError(f"--ui-dir is not a directory: {args.ui_dir}")
    try:
        stt_error = ErrorModel(substitution_rate=args.stt_sub_rate)
        voice = VoiceConfig(speaking_rate=args.speaking_rate)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    gateway = Gateway(
        graph,
        triggers=triggers,
        clock=MonotonicClock(),
        seed=args.seed,
        stt_error=stt_error,
        handoff_latency_ms=args.handoff_latency_ms,
        default_voice=voice,
    )
    server = GatewayServer(
        gateway, host=host, port=port, ui_dir=args.ui_dir, telemetry_path=args.out
    )

    async def serve() -> None:
        stop = asyncio.Event()
        loop = asyncio.get_running_loop()
        for signum in (signal.SIGINT, signal.SIGTERM):
            try:
                loop.add_signal_handler(signum, stop.set)
            except NotImplementedError:
                pass
        await server.serve_until(stop)

    try:
        asyncio.run(serve())
    except OSError as exc:
        raise CliError(f"cannot bind {args.addr}: {exc}", EXIT_RUNTIME) from None
    return EXIT_OK


def _simulate_scripts(args, graph: RouteGraph):
    if (args.scenario_path is None) == (args.generate is None):
        raise CliError("simulate needs a scenario file or --generate N, not both or neither")
    if args.generate is not None:
        if args.generate <= 0:
            raise CliError("--generate needs a positive participant count")
        return generate_scripts(args.generate, seed=args.seed, graph=graph), None
    return load_scenarios(args.scenario_path)


def cmd_simulate(args) -> int:
    graph = _load_graph(args.routes)
    triggers = _load_triggers(args.triggers)
    try:
        stt_error = ErrorModel(substitution_rate=args.stt_sub_rate)
        voice = VoiceConfig(speaking_rate=args.speaking_rate)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    scripts, raw_latency = _simulate_scripts(args, graph)
    if args.endpoint is not None:
        try:
            parse_endpoint(args.endpoint)
        except EndpointError as exc:
            raise CliError(str(exc)) from None
        try:
            records = run_scenarios_endpoint(
                scripts, graph, args.endpoint, seed=args.seed, latency=raw_latency
            )
        except EndpointError as exc:
            raise CliError(str(exc), EXIT_RUNTIME) from None
    else:
        latency = latency_models(raw_latency)
        records = run_batch(
            scripts,
            graph,
            seed=args.seed,
            stt_error=stt_error,
            latency=latency if latency is not None else STUDY_LATENCY,
            handoff_latency_ms=args.handoff_latency_ms,
            handoff_jitter_fraction=STUDY_HANDOFF_JITTER,
            triggers=triggers,
            default_voice=voice,
        ).records
    out = write_csv(records, args.out)
    print(render_table(summarize(records)))
    print(f"{len(records)} telemetry rows -> {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        records = read_csv(args.csv_path)
    except FileNotFoundError:
        raise CliError(f"telemetry file not found: {args.csv_path}") from None
    except TelemetryError as exc:
        raise CliError(f"{args.csv_path}: {exc}") from None
    paths, summary = write_report(records, args.out)
    print(render_table(summary))
    written = ", ".join(str(p) for p in paths.all_files())
    print(f"report files: {written}")
    return EXIT_OK


def cmd_validate_routes(args) -> int:
    graph = _load_graph(args.path)
    start = graph.start or "(none)"
    print(f"nodes: {len(graph.nodes)}")
    print(f"edges: {len(graph.edges)}")
    print(f"start: {start}")
    for destination in graph.study_destinations:
        plan = plan_route(graph, graph.start, destination)
        print(
            f"destination {destination}: {len(plan.legs)} legs, "
            f"{plan.total_cost_m:.1f} m from {graph.start}"
        )
    print("route graph OK")
    return EXIT_OK


def cmd_schedule(args) -> int:
    graph = _load_graph(args.routes)
    routes = list(graph.study_destinations)
    if len(routes) != 3:
        raise CliError("schedule needs a graph with exactly three study destinations")
    conditions = [c.value for c in ConditionKind]
    rows = latin_square_schedule(args.generate, conditions, routes)
    widths = (
        max(len("participant"), max(len(a.participant) for a in rows)),
        max(len("condition"), max(len(a.condition) for a in rows)),
    )
    print(f"{'participant':<{widths[0]}}  pos  {'condition':<{widths[1]}}  route")
    for a in rows:
        print(
            f"{a.participant:<{widths[0]}}  {a.position:>3}  "
            f"{a.condition:<{widths[1]}}  {a.route}"
        )
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as handle:
            writer = csv_module.writer(handle, lineterminator="\n")
            writer.writerow(["participant", "position", "condition", "route"])
            for a in rows:
                writer.writerow([a.participant, a.position, a.condition, a.route])
        print(f"schedule -> {args.out}")
    return EXIT_OK


COMMANDS = {
    "serve": cmd_serve,
    "simulate": cmd_simulate,
    "report": cmd_report,
    "validate-routes": cmd_validate_routes,
    "schedule": cmd_schedule,
}


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("REEMBODY_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        return EXIT_OK
    except Exception as exc:  # pragma: no cover - last-resort diagnostics
        log.exception("unhandled failure")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
