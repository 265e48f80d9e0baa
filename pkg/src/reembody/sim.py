"""Study simulation: scripted participants walking simulated routes.

Each scenario gets a fresh gateway, a virtual clock at zero, and two device
clients (a stationary robot at the start node, a wearable carried along).
The runner interprets a scenario script: it speaks planned utterances over
the wire protocol, walks route legs at the behavior's walking speed, and
never reaches into the dialogue engine except through the gateway.

Deviations are handled by two deliberately separate pieces: an injector that
decides (per leg, from the scenario's seeded RNG) to walk a wrong edge
first, and an observer that flags any walked edge differing from the plan.
The error-rate pipeline consumes only the observer's telemetry.

When ``Behavior.return_to_robot`` is set, every utterance spoken after
leaving the start costs a round trip back to the start first, modeling a
user whose only interface is the stationary robot.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from random import Random
from typing import Iterable, Sequence

from .clock import VirtualClock
from .dialogue import TriggerConfig
from .gateway import DEFAULT_LATENCY, Gateway
from .handoff import DEFAULT_HANDOFF_LATENCY_MS, HandoffRecord
from .model import DeviceKind, LatencyModel, SessionState, VoiceConfig
from .routes import RouteGraph, plan_route
from .schedule import Assignment, latin_square_schedule
from .speech import ErrorModel
from .telemetry import TelemetryRecord, TelemetrySink

DEFAULT_TIMEOUT_MS = 600_000

AT_START = "start"
AT_ARRIVAL = "arrival"

# Study-batch defaults: the reference mean response times with mild seeded
# jitter, so generated datasets vary per turn while staying reproducible
# per seed.
STUDY_LATENCY = {
    DeviceKind.STATIONARY: LatencyModel(1156, 578, 1156, jitter_fraction=0.15),
    DeviceKind.WEARABLE: LatencyModel(1704, 852, 1704, jitter_fraction=0.15),
}
STUDY_HANDOFF_JITTER = 0.1


class ConditionKind(str, Enum):
    ROBOT_ONLY = "RobotOnly"
    WEARABLE_ONLY = "WearableOnly"
    HANDOFF = "Handoff"


class ScriptError(Exception):
    pass


@dataclass(frozen=True)
class Behavior:
    walking_speed_mps: float = 1.4
    deviation_probability: float = 0.0
    return_to_robot: bool = False

    def __post_init__(self) -> None:
        if self.walking_speed_mps <= 0:
            raise ScriptError("walking_speed_mps must be positive")
        if not 0.0 <= self.deviation_probability <= 1.0:
            raise ScriptError("deviation_probability must be in [0, 1]")


@dataclass(frozen=True)
class PlannedUtterance:
    """One scripted push-to-talk input.

    ``at`` is "start" (before walking), "after_leg:<k>" (once leg k of the
    intended route is walked, 0-based), or "arrival" (at the destination).
    """

    at: str
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ScriptError("scripted utterance must carry text")
        if self.at in (AT_START, AT_ARRIVAL):
            return
        if self.at.startswith("after_leg:"):
            try:
                leg = int(self.at.split(":", 1)[1])
            except ValueError:
                raise ScriptError(f"bad utterance slot {self.at!r}") from None
            if leg < 0:
                raise ScriptError(f"bad utterance slot {self.at!r}")
            return
        raise ScriptError(f"bad utterance slot {self.at!r}")


@dataclass(frozen=True)
class ScenarioScript:
    participant: str
    condition: ConditionKind
    route_id: str
    utterances: tuple[PlannedUtterance, ...]
    behavior: Behavior = Behavior()
    position: int = 0

    def __post_init__(self) -> None:
        if not self.utterances:
            raise ScriptError("a scenario needs at least one utterance")
        if self.behavior.return_to_robot and self.condition is not ConditionKind.ROBOT_ONLY:
            raise ScriptError("only robot-only scenarios return to the robot")


@dataclass
class ScenarioResult:
    script: ScenarioScript
    session_id: str
    records: list[TelemetryRecord]
    injected_deviations: list[dict]
    arrived: bool
    task_time_ms: int | None
    final_state: SessionState
    handoff_records: list[HandoffRecord]
    inboxes: dict[str, list[dict]]

    @property
    def interaction_count(self) -> int:
        return sum(1 for r in self.records if r.event == "interaction")

    def displays(self, device_id: str) -> list[dict]:
        return [
            m["payload"]
            for m in self.inboxes.get(device_id, [])
            if m["type"] == "display_update"
        ]


class LoopbackClient:
    """In-process protocol client with its own inbox and sequence counter."""

    def __init__(self, gateway: Gateway, conn_id: str, device_id: str) -> None:
        self.gateway = gateway
        self.conn_id = conn_id
        self.device_id = device_id
        self.inbox: list[dict] = []
        self._seq = 0
        gateway.attach(conn_id)

    def send(self, mtype: str, payload: dict, session_id: str | None = None) -> int:
        self._seq += 1
        self.gateway.receive(
            self.conn_id,
            {
                "type": mtype,
                "session_id": session_id,
                "device_id": self.device_id,
                "seq": self._seq,
                "payload": payload,
            },
        )
        return self._seq

    def hello(self, kind: DeviceKind, latency: dict | None = None) -> int:
        payload: dict = {"kind": kind.value}
        if latency:
            payload["latency"] = latency
        return self.send("hello", payload)

    def reply_to(self, seq: int) -> dict | None:
        for message in self.inbox:
            if message["payload"].get("in_reply_to") == seq:
                return message
        return None


class ScenarioRunner:
    """Drives one scripted scenario against a fresh gateway."""

    def __init__(
        self,
        script: ScenarioScript,
        graph: RouteGraph,
        seed: int = 0,
        stt_error: ErrorModel | None = None,
        latency: dict[DeviceKind, LatencyModel] | None = None,
        handoff_latency_ms: int = DEFAULT_HANDOFF_LATENCY_MS,
        handoff_jitter_fraction: float = 0.0,
        timeout_ms: int = DEFAULT_TIMEOUT_MS,
        triggers: TriggerConfig | None = None,
        default_voice: VoiceConfig | None = None,
    ) -> None:
        if graph.start is None:
            raise ScriptError("scenario graphs need a designated start node")
        self.script = script
        self.graph = graph
        self.timeout_ms = timeout_ms
        self.clock = VirtualClock()
        self.telemetry = TelemetrySink()
        scenario_key = f"{seed}:{script.participant}:{script.condition.value}:{script.route_id}"
        self.gateway = Gateway(
            graph,
            triggers=triggers,
            clock=self.clock,
            telemetry=self.telemetry,
            seed=scenario_key,
            stt_error=stt_error,
            default_latency=latency if latency is not None else DEFAULT_LATENCY,
            handoff_latency_ms=handoff_latency_ms,
            handoff_jitter_fraction=handoff_jitter_fraction,
            default_voice=default_voice,
        )
        self.walk_rng = Random(f"{scenario_key}:walk")
        self.robot = LoopbackClient(self.gateway, "conn-robot", "robot1")
        self.watch = LoopbackClient(self.gateway, "conn-watch", "watch1")
        self._clients = {"conn-robot": self.robot, "conn-watch": self.watch}
        self._by_device = {"robot1": self.robot, "watch1": self.watch}
        self.session_id = f"{script.participant}-{script.condition.value}"
        self.position = graph.start
        self.legs_walked = 0
        self.injected: list[dict] = []
        self.first_interaction_ms: int | None = None
        self.arrival_ms: int | None = None

    # -- plumbing ----------------------------------------------------------

    def _dispatch(self) -> None:
        for conn_id, message in self.gateway.pump():
            self._clients[conn_id].inbox.append(message)

    def _step_to_next_due(self) -> bool:
        due = self.gateway.next_due()
        if due is None:
            return False
        self.clock.advance_to(max(due, self.clock.now_ms()))
        self._dispatch()
        return True

    def _await_reply(self, client: LoopbackClient, seq: int) -> dict:
        self._dispatch()
        while client.reply_to(seq) is None:
            if self.clock.now_ms() > self.timeout_ms:
                raise ScriptError(f"timed out waiting for reply to seq {seq}")
            if not self._step_to_next_due():
                raise ScriptError(f"no reply pending for seq {seq}")
        return client.reply_to(seq)

    def _await_transfer_settled(self) -> None:
        while self.gateway.manager.has_pending(self.session_id):
            if not self._step_to_next_due():
                raise ScriptError("transfer pending but timeline is empty")
            if self.clock.now_ms() > self.timeout_ms:
                raise ScriptError("timed out waiting for transfer")

    # -- study actions -------------------------------------------------------

    def _meta(self) -> dict:
        return {
            "participant": self.script.participant,
            "condition": self.script.condition.value,
            "route": self.script.route_id,
        }

    def setup(self) -> None:
        self.robot.hello(DeviceKind.STATIONARY)
        self.watch.hello(DeviceKind.WEARABLE)
        opener = (
            self.watch
            if self.script.condition is ConditionKind.WEARABLE_ONLY
            else self.robot
        )
        seq = opener.send(
            "start_session",
            {"meta": self._meta()},
            session_id=self.session_id,
        )
        reply = self._await_reply(opener, seq)
        if reply["type"] != "session_started":
            raise ScriptError(f"could not start session: {reply['payload']}")

    def speak(self, text: str) -> dict:
        self._await_transfer_settled()
        if self.script.behavior.return_to_robot:
            self._round_trip_to_start()
        active = self.gateway.manager.get(self.session_id).active_device
        client = self._by_device[active]
        if self.first_interaction_ms is None:
            self.first_interaction_ms = self.clock.now_ms()
        seq = client.send(
            "ptt_utterance", {"text": text, "lang": "en"}, session_id=self.session_id
        )
        reply = self._await_reply(client, seq)
        return reply

    def _walk_time_ms(self, meters: float) -> int:
        return max(1, round(meters * 1000.0 / self.script.behavior.walking_speed_mps))

    def _round_trip_to_start(self) -> None:
        """Walk back to the start node and out again before speaking there."""
        if self.position == self.graph.start:
            return
        state = self.gateway.manager.get(self.session_id)
        plan = state.route_plan
        if plan is None or self.position not in plan.checkpoints:
            return
        idx = plan.checkpoints.index(self.position)
        distance = 0.0
        for a, b in zip(plan.checkpoints[: idx], plan.checkpoints[1 : idx + 1]):
            edge = self.graph.edge_between(a, b)
            if edge is not None:
                distance += edge.cost_m
        self.clock.advance(self._walk_time_ms(distance * 2.0))
        self._dispatch()

    def _walk_edge(self, src: str, dst: str, intended_dst: str, and_back: bool) -> None:
        edge = self.graph.edge_between(src, dst)
        if edge is None:
            raise ScriptError(f"cannot walk missing edge {src}->{dst}")
        meters = edge.cost_m * (2.0 if and_back else 1.0)
        self.clock.advance(self._walk_time_ms(meters))
        # observer: any walked edge that is not the planned one is a deviation
        if dst != intended_dst:
            ctx = self._meta()
            self.telemetry.emit(
                self.clock.now_ms(),
                "deviation",
                {
                    "at": src,
                    "expected": intended_dst,
                    "walked": dst,
                    "leg": self.legs_walked,
                },
                participant=ctx["participant"],
                condition=ctx["condition"],
                route=ctx["route"],
            )
        self._dispatch()

    def _maybe_inject_deviation(self, src: str, intended_dst: str) -> None:
        if self.walk_rng.random() >= self.script.behavior.deviation_probability:
            return
        wrong = [e for e in self.graph.adjacency.get(src, ()) if e.dst != intended_dst]
        if not wrong:
            return  # nowhere wrong to go from here
        edge = self.walk_rng.choice(sorted(wrong, key=lambda e: e.dst))
        self.injected.append(
            {"at": src, "expected": intended_dst, "walked": edge.dst, "leg": self.legs_walked}
        )
        self._walk_edge(src, edge.dst, intended_dst, and_back=True)

    def _pending_utterances(self, queue: deque, slot: str) -> Iterable[str]:
        while queue and queue[0].at == slot:
            yield queue.popleft().text

    def run(self) -> ScenarioResult:
        self.setup()
        queue = deque(self.script.utterances)
        for text in self._pending_utterances(queue, AT_START):
            self.speak(text)
        while self.clock.now_ms() <= self.timeout_ms:
            state = self.gateway.manager.get(self.session_id)
            plan = state.route_plan
            if plan is None:
                break  # the script never established guidance
            if self.position == plan.destination:
                break
            if self.position not in plan.checkpoints:
                raise ScriptError(
                    f"walker at {self.position!r} is off the plan {plan.checkpoints}"
                )
            idx = plan.checkpoints.index(self.position)
            intended_dst = plan.checkpoints[idx + 1]
            self._maybe_inject_deviation(self.position, intended_dst)
            self._walk_edge(self.position, intended_dst, intended_dst, and_back=False)
            self.position = intended_dst
            self.legs_walked += 1
            for text in self._pending_utterances(queue, f"after_leg:{self.legs_walked - 1}"):
                self.speak(text)
        state = self.gateway.manager.get(self.session_id)
        arrived = (
            state.route_plan is not None and self.position == state.route_plan.destination
        )
        if arrived:
            self.arrival_ms = self.clock.now_ms()
            ctx = self._meta()
            self.telemetry.emit(
                self.arrival_ms,
                "arrival",
                {"at": self.position},
                participant=ctx["participant"],
                condition=ctx["condition"],
                route=ctx["route"],
            )
            for text in self._pending_utterances(queue, AT_ARRIVAL):
                self.speak(text)
        # drain the timeline so late replies and transfers land in the capture
        while self._step_to_next_due():
            pass
        task_time = None
        if arrived and self.first_interaction_ms is not None:
            task_time = self.arrival_ms - self.first_interaction_ms
        return ScenarioResult(
            script=self.script,
            session_id=self.session_id,
            records=self.telemetry.records(),
            injected_deviations=list(self.injected),
            arrived=arrived,
            task_time_ms=task_time,
            final_state=self.gateway.manager.get(self.session_id),
            handoff_records=self.gateway.manager.records(),
            inboxes={
                "robot1": list(self.robot.inbox),
                "watch1": list(self.watch.inbox),
            },
        )


def run_scenario(
    script: ScenarioScript,
    graph: RouteGraph,
    **runner_kwargs,
) -> ScenarioResult:
    return ScenarioRunner(script, graph, **runner_kwargs).run()


# -- script generation -------------------------------------------------------


def _style_rng(seed: int, participant: str, condition: ConditionKind) -> Random:
    return Random(f"{seed}:{participant}:{condition.value}:script")


_ASK_FORMS = (
    "hi where is the {}",
    "where is the {}",
    "take me to the {}",
    "how do i get to the {}",
)
_NEXT_FORMS = ("next", "what's next", "next step")
_FULL_FORMS = ("give me the full route", "tell me all the steps")
_ARRIVAL_FORMS = ("i have arrived", "found it")
_MUMBLE = "um so er anyway"
_FULL_ROUTE_PROBABILITY = {
    ConditionKind.ROBOT_ONLY: 0.7,
    ConditionKind.WEARABLE_ONLY: 0.35,
    ConditionKind.HANDOFF: 0.2,
}
_TRANSFER_TO_WEARABLE = "can we continue on my watch"
_TRANSFER_TO_ROBOT = "continue on the robot"


def build_script(
    assignment: Assignment,
    seed: int,
    graph: RouteGraph,
    deviation_probability: float = 0.2,
) -> ScenarioScript:
    """One participant's scripted behavior for one condition and route."""
    condition = ConditionKind(assignment.condition)
    rng = _style_rng(seed, assignment.participant, condition)
    destination = assignment.route
    dest_label = graph.node(destination).label
    start_label = graph.node(graph.start).label if graph.start else "start"
    legs = len(plan_route(graph, graph.start, destination).legs)

    utterances: list[PlannedUtterance] = []
    if rng.random() < 0.25:
        utterances.append(PlannedUtterance(AT_START, _MUMBLE))
    if condition is ConditionKind.WEARABLE_ONLY:
        utterances.append(PlannedUtterance(AT_START, f"i am at the {start_label}"))
    utterances.append(PlannedUtterance(AT_START, rng.choice(_ASK_FORMS).format(dest_label)))
    wants_full_route = rng.random() < _FULL_ROUTE_PROBABILITY[condition]
    if wants_full_route:
        utterances.append(PlannedUtterance(AT_START, rng.choice(_FULL_FORMS)))
    if condition is ConditionKind.HANDOFF:
        utterances.append(PlannedUtterance("after_leg:0", _TRANSFER_TO_WEARABLE))
    if not wants_full_route:
        for walked in range(legs - 1):
            utterances.append(
                PlannedUtterance(f"after_leg:{walked}", rng.choice(_NEXT_FORMS))
            )
    if condition is not ConditionKind.ROBOT_ONLY:
        utterances.append(PlannedUtterance(AT_ARRIVAL, rng.choice(_ARRIVAL_FORMS)))
    return ScenarioScript(
        participant=assignment.participant,
        condition=condition,
        route_id=destination,
        utterances=tuple(utterances),
        behavior=Behavior(
            deviation_probability=deviation_probability,
            return_to_robot=condition is ConditionKind.ROBOT_ONLY,
        ),
        position=assignment.position,
    )


def generate_scripts(
    participants: int,
    seed: int,
    graph: RouteGraph,
    routes: Sequence[str] | None = None,
    deviation_probability: float = 0.2,
) -> list[ScenarioScript]:
    chosen = tuple(routes) if routes else graph.study_destinations
    if len(chosen) != 3:
        raise ScriptError("script generation needs exactly three routes")
    assignments = latin_square_schedule(
        participants, [c.value for c in ConditionKind], list(chosen)
    )
    return [
        build_script(a, seed, graph, deviation_probability=deviation_probability)
        for a in assignments
    ]


def generate_paired_scripts(
    destination: str,
    seed: int,
    graph: RouteGraph,
    participant: str = "PX",
) -> tuple[ScenarioScript, ScenarioScript]:
    """A wearable script and its hand-off twin.

    The twin speaks the same lines plus exactly one inserted transfer
    request.  It runs as the hand-off condition, so it opens on the
    stationary device and actually moves to the wearable mid-route; the two
    runs must differ by exactly one interaction.
    """
    rng = Random(f"{seed}:{participant}:paired")
    dest_label = graph.node(destination).label
    start_label = graph.node(graph.start).label if graph.start else "start"
    legs = len(plan_route(graph, graph.start, destination).legs)

    base: list[PlannedUtterance] = [
        PlannedUtterance(AT_START, f"i am at the {start_label}"),
        PlannedUtterance(AT_START, rng.choice(_ASK_FORMS).format(dest_label)),
    ]
    for walked in range(legs - 1):
        base.append(PlannedUtterance(f"after_leg:{walked}", rng.choice(_NEXT_FORMS)))
    base.append(PlannedUtterance(AT_ARRIVAL, rng.choice(_ARRIVAL_FORMS)))

    handoff = list(base)
    insert_at = next(
        (i for i, u in enumerate(handoff) if u.at == "after_leg:0"), len(handoff) - 1
    )
    handoff.insert(insert_at, PlannedUtterance("after_leg:0", _TRANSFER_TO_WEARABLE))

    wearable_script = ScenarioScript(
        participant=participant,
        condition=ConditionKind.WEARABLE_ONLY,
        route_id=destination,
        utterances=tuple(base),
    )
    handoff_script = ScenarioScript(
        participant=participant,
        condition=ConditionKind.HANDOFF,
        route_id=destination,
        utterances=tuple(handoff),
    )
    return wearable_script, handoff_script


# -- scenario files ----------------------------------------------------------


def _require(mapping, key, where):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ScriptError(f"{where} needs a {key!r} field")
    return mapping[key]


def parse_scenario_doc(doc) -> tuple[list[ScenarioScript], dict | None]:
    """Validate a scenario document; returns (scripts, raw latency block)."""
    if not isinstance(doc, dict):
        raise ScriptError("scenario file must be a mapping at the top level")
    raw_list = _require(doc, "scenarios", "scenario file")
    if not isinstance(raw_list, list) or not raw_list:
        raise ScriptError("'scenarios' must be a non-empty list")
    latency = doc.get("latency")
    if latency is not None:
        if not isinstance(latency, dict) or not set(latency) <= {"stationary", "wearable"}:
            raise ScriptError("'latency' allows only 'stationary' and 'wearable' blocks")
    scripts = []
    for i, entry in enumerate(raw_list):
        where = f"scenario #{i + 1}"
        condition_raw = _require(entry, "condition", where)
        try:
            condition = ConditionKind(condition_raw)
        except ValueError:
            names = ", ".join(c.value for c in ConditionKind)
            raise ScriptError(
                f"{where}: condition must be one of {names}, got {condition_raw!r}"
            ) from None
        raw_utterances = _require(entry, "utterances", where)
        if not isinstance(raw_utterances, list) or not raw_utterances:
            raise ScriptError(f"{where}: 'utterances' must be a non-empty list")
        utterances = tuple(
            PlannedUtterance(
                at=str(_require(u, "at", f"{where} utterance #{j + 1}")),
                text=str(_require(u, "text", f"{where} utterance #{j + 1}")),
            )
            for j, u in enumerate(raw_utterances)
        )
        behavior_raw = entry.get("behavior") or {}
        if not isinstance(behavior_raw, dict):
            raise ScriptError(f"{where}: 'behavior' must be a mapping")
        behavior = Behavior(
            walking_speed_mps=float(behavior_raw.get("walking_speed_mps", 1.4)),
            deviation_probability=float(behavior_raw.get("deviation_probability", 0.0)),
            return_to_robot=bool(behavior_raw.get("return_to_robot", False)),
        )
        scripts.append(
            ScenarioScript(
                participant=str(_require(entry, "participant", where)),
                condition=condition,
                route_id=str(_require(entry, "route", where)),
                utterances=utterances,
                behavior=behavior,
                position=int(entry.get("position", 0)),
            )
        )
    return scripts, latency


def load_scenarios(path) -> tuple[list[ScenarioScript], dict | None]:
    import yaml

    with open(path, "r", encoding="utf-8") as handle:
        try:
            doc = yaml.safe_load(handle)
        except yaml.YAMLError as exc:
            raise ScriptError(f"{path}: {exc}") from None
    try:
        return parse_scenario_doc(doc)
    except ScriptError as exc:
        raise ScriptError(f"{path}: {exc}") from None


def latency_models(raw: dict | None) -> dict[DeviceKind, LatencyModel] | None:
    """Turn a scenario file's latency block into models for the gateway."""
    if raw is None:
        return None
    kinds = {"stationary": DeviceKind.STATIONARY, "wearable": DeviceKind.WEARABLE}
    out: dict[DeviceKind, LatencyModel] = {}
    for name, kind in kinds.items():
        block = raw.get(name)
        if block is None:
            continue
        out[kind] = LatencyModel(
            stt_ms=int(block.get("stt_ms", 0)),
            dialogue_ms=int(block.get("dialogue_ms", 0)),
            tts_ms=int(block.get("tts_ms", 0)),
            jitter_fraction=float(block.get("jitter_fraction", 0.0)),
        )
    return out or None


@dataclass
class BatchResult:
    results: list[ScenarioResult]

    @property
    def records(self) -> list[TelemetryRecord]:
        out: list[TelemetryRecord] = []
        for result in self.results:
            out.extend(result.records)
        return out


def run_batch(
    scripts: Sequence[ScenarioScript],
    graph: RouteGraph,
    **runner_kwargs,
) -> BatchResult:
    results = [run_scenario(script, graph, **runner_kwargs) for script in scripts]
    return BatchResult(results=results)
