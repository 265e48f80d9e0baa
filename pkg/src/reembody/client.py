"""Operator-side scenario client for live servers.

Runs a scripted scenario against a real listening server over
newline-delimited JSON sockets, in real time: walking is slept, replies are
awaited on the wire, and the telemetry stream is measured from the client's
vantage point (send times, observed reply times, observed transfer
greetings).  The in-process path in the simulation harness stays the fast
default; this path exists to exercise real sockets end to end.

Transfer tracking parses the script's own utterances with the same intent
configuration the server loads, so a transfer request is known to be one
before it is sent; the greeting arriving on the target device marks the
moment the client may speak there.
"""

from __future__ import annotations

import json
import socket
import time
from dataclasses import dataclass, field
from random import Random

from .dialogue import DialogueConfig, IntentParser, TriggerConfig, load_dialogue_config, load_triggers
from .model import DeviceKind, IntentKind, LatencyModel
from .routes import RouteGraph, plan_route
from .sim import AT_ARRIVAL, AT_START, ConditionKind, ScenarioScript, ScriptError
from .telemetry import TelemetryRecord, TelemetrySink

DEFAULT_IO_TIMEOUT_S = 30.0


class EndpointError(Exception):
    pass


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, sep, port = endpoint.rpartition(":")
    if not sep or not host:
        raise EndpointError(f"endpoint must be host:port, got {endpoint!r}")
    try:
        return host, int(port)
    except ValueError:
        raise EndpointError(f"endpoint port is not a number: {endpoint!r}") from None


@dataclass
class _Conn:
    device_id: str
    sock: socket.socket
    reader: object
    seq: int = 0
    pending: list[dict] = field(default_factory=list)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class EndpointRunner:
    """One scripted scenario against a live server."""

    def __init__(
        self,
        script: ScenarioScript,
        graph: RouteGraph,
        endpoint: str,
        seed: int = 0,
        latency: dict[str, dict] | None = None,
        dialogue_config: DialogueConfig | None = None,
        triggers: TriggerConfig | None = None,
        io_timeout_s: float = DEFAULT_IO_TIMEOUT_S,
    ) -> None:
        if graph.start is None:
            raise ScriptError("scenario graphs need a designated start node")
        self.script = script
        self.graph = graph
        self.host, self.port = parse_endpoint(endpoint)
        self.latency = latency or {}
        self.io_timeout_s = io_timeout_s
        config = dialogue_config or load_dialogue_config()
        self.templates = config.templates
        self.parser = IntentParser(graph, config, triggers or load_triggers())
        key = f"{seed}:{script.participant}:{script.condition.value}:{script.route_id}"
        self.walk_rng = Random(f"{key}:walk")
        self.telemetry = TelemetrySink()
        self.session_id = f"{script.participant}-{script.condition.value}"
        self._t0 = time.monotonic()
        self.position = graph.start
        self.legs_walked = 0
        self.pending_target: DeviceKind | None = None
        self.transfer_sent_ms: int | None = None

    # -- wire plumbing -------------------------------------------------------

    def now_ms(self) -> int:
        return round((time.monotonic() - self._t0) * 1000)

    def _connect(self, device_id: str) -> _Conn:
        try:
            sock = socket.create_connection((self.host, self.port), timeout=self.io_timeout_s)
        except OSError as exc:
            raise EndpointError(f"cannot reach {self.host}:{self.port}: {exc}") from None
        sock.settimeout(self.io_timeout_s)
        return _Conn(device_id=device_id, sock=sock, reader=sock.makefile("rb"))

    def _send(self, conn: _Conn, mtype: str, payload: dict, session_id: str | None = None) -> int:
        conn.seq += 1
        line = json.dumps(
            {
                "type": mtype,
                "session_id": session_id,
                "device_id": conn.device_id,
                "seq": conn.seq,
                "payload": payload,
            },
            separators=(",", ":"),
        )
        try:
            conn.sock.sendall(line.encode("utf-8") + b"\n")
        except OSError as exc:
            raise EndpointError(f"send to {conn.device_id} failed: {exc}") from None
        return conn.seq

    def _recv(self, conn: _Conn) -> dict:
        if conn.pending:
            return conn.pending.pop(0)
        try:
            line = conn.reader.readline()
        except OSError as exc:
            raise EndpointError(f"read from {conn.device_id} failed: {exc}") from None
        if not line:
            raise EndpointError(f"server closed the {conn.device_id} connection")
        return json.loads(line)

    def _recv_until(self, conn: _Conn, predicate) -> dict:
        deadline = time.monotonic() + self.io_timeout_s
        while True:
            if time.monotonic() > deadline:
                raise EndpointError(f"timed out waiting on {conn.device_id}")
            message = self._recv(conn)
            if predicate(message):
                return message

    # -- scenario ------------------------------------------------------------

    def _emit(self, event: str, detail: dict) -> None:
        self.telemetry.emit(
            self.now_ms(),
            event,
            detail,
            participant=self.script.participant,
            condition=self.script.condition.value,
            route=self.script.route_id,
        )

    def _hello(self, conn: _Conn, kind: DeviceKind) -> None:
        payload: dict = {"kind": kind.value}
        override = self.latency.get(kind.value.lower())
        if override:
            payload["latency"] = dict(override)
        seq = self._send(conn, "hello", payload)
        reply = self._recv_until(conn, lambda m: m["payload"].get("in_reply_to") == seq)
        if reply["type"] != "hello_ack":
            raise EndpointError(f"hello rejected: {reply['payload']}")

    def _settle_transfer(self) -> None:
        if self.pending_target is None:
            return
        target = self.by_kind[self.pending_target]
        greeting = self._recv_until(
            target,
            lambda m: m["type"] == "assistant_say" and m["payload"].get("in_reply_to") is None,
        )
        observed = self.now_ms()
        self._emit(
            "handoff",
            {
                "from": self.active.device_id,
                "to": target.device_id,
                "outcome": "ActiveOnTarget",
                "latency_ms": observed - (self.transfer_sent_ms or observed),
                "greeting": greeting["payload"]["text"],
            },
        )
        self.active = target
        self.pending_target = None
        self.transfer_sent_ms = None

    def _speak(self, text: str) -> None:
        self._settle_transfer()
        if self.script.behavior.return_to_robot:
            self._round_trip_to_start()
        conn = self.active
        intent = self.parser.parse(text)
        sent_at = self.now_ms()
        seq = self._send(conn, "ptt_utterance", {"text": text, "lang": "en"}, self.session_id)
        reply = self._recv_until(conn, lambda m: m["payload"].get("in_reply_to") == seq)
        if reply["type"] == "error":
            raise EndpointError(f"utterance rejected: {reply['payload']}")
        received_at = self.now_ms()
        self._emit("interaction", {"device": conn.device_id, "seq": seq, "text": text})
        self._emit(
            "response",
            {"in_reply_to": seq, "ms": received_at - sent_at, "device": conn.device_id},
        )
        if (
            intent.kind is IntentKind.HANDOFF_REQUEST
            and reply["payload"]["text"] == self.templates.render("handoff_confirm")
        ):
            self.pending_target = intent.target
            self.transfer_sent_ms = sent_at

    def _walk_time_s(self, meters: float) -> float:
        return meters / self.script.behavior.walking_speed_mps

    def _round_trip_to_start(self) -> None:
        if self.position == self.graph.start or self.position not in self.plan.checkpoints:
            return
        idx = self.plan.checkpoints.index(self.position)
        distance = 0.0
        for a, b in zip(self.plan.checkpoints[:idx], self.plan.checkpoints[1 : idx + 1]):
            edge = self.graph.edge_between(a, b)
            if edge is not None:
                distance += edge.cost_m
        time.sleep(self._walk_time_s(distance * 2.0))

    def _walk_edge(self, src: str, dst: str, intended: str, and_back: bool) -> None:
        edge = self.graph.edge_between(src, dst)
        if edge is None:
            raise ScriptError(f"cannot walk missing edge {src}->{dst}")
        time.sleep(self._walk_time_s(edge.cost_m * (2.0 if and_back else 1.0)))
        if dst != intended:
            self._emit(
                "deviation",
                {"at": src, "expected": intended, "walked": dst, "leg": self.legs_walked},
            )

    def _maybe_deviate(self, src: str, intended: str) -> None:
        if self.walk_rng.random() >= self.script.behavior.deviation_probability:
            return
        wrong = [e for e in self.graph.adjacency.get(src, ()) if e.dst != intended]
        if not wrong:
            return
        edge = self.walk_rng.choice(sorted(wrong, key=lambda e: e.dst))
        self._walk_edge(src, edge.dst, intended, and_back=True)

    def run(self) -> list[TelemetryRecord]:
        robot = self._connect("robot1")
        watch = self._connect("watch1")
        self.by_kind = {DeviceKind.STATIONARY: robot, DeviceKind.WEARABLE: watch}
        try:
            self._hello(robot, DeviceKind.STATIONARY)
            self._hello(watch, DeviceKind.WEARABLE)
            self.active = (
                watch
                if self.script.condition is ConditionKind.WEARABLE_ONLY
                else robot
            )
            meta = {
                "participant": self.script.participant,
                "condition": self.script.condition.value,
                "route": self.script.route_id,
            }
            seq = self._send(self.active, "start_session", {"meta": meta}, self.session_id)
            started = self._recv_until(
                self.active, lambda m: m["payload"].get("in_reply_to") == seq
            )
            if started["type"] != "session_started":
                raise EndpointError(f"session rejected: {started['payload']}")
            self.plan = plan_route(self.graph, self.graph.start, self.script.route_id)

            queue = list(self.script.utterances)

            def speak_slot(slot: str) -> None:
                while queue and queue[0].at == slot:
                    self._speak(queue.pop(0).text)

            speak_slot(AT_START)
            while self.position != self.plan.destination:
                idx = self.plan.checkpoints.index(self.position)
                intended = self.plan.checkpoints[idx + 1]
                self._maybe_deviate(self.position, intended)
                self._walk_edge(self.position, intended, intended, and_back=False)
                self.position = intended
                self.legs_walked += 1
                speak_slot(f"after_leg:{self.legs_walked - 1}")
            self._emit("arrival", {"at": self.position})
            speak_slot(AT_ARRIVAL)
            self._settle_transfer()
            return self.telemetry.records()
        finally:
            robot.close()
            watch.close()


def run_scenarios_endpoint(
    scripts,
    graph: RouteGraph,
    endpoint: str,
    seed: int = 0,
    latency: dict[str, dict] | None = None,
) -> list[TelemetryRecord]:
    records: list[TelemetryRecord] = []
    for script in scripts:
        runner = EndpointRunner(script, graph, endpoint, seed=seed, latency=latency)
        records.extend(runner.run())
    return records
