"""Message-framed gateway: the transport-independent conversation engine.

Every inbound message is an envelope ``{type, session_id, device_id, seq,
payload}``.  The engine validates it, runs the speech/dialogue/hand-off
pipeline, and schedules outbound envelopes on a virtual timeline; a pump
drains everything due at the current clock reading.  Servers and simulators
differ only in how they move the clock and deliver the pumped messages, so
one engine serves both.

Exactly one direct response (matching ``in_reply_to``) is produced per
inbound message.  Display updates and hand-off greetings are auxiliary
messages without ``in_reply_to``.
"""

from __future__ import annotations

import itertools
import heapq
import logging
from dataclasses import dataclass, field
from random import Random
from typing import Any, Callable, Mapping

from .clock import Clock, VirtualClock
from .dialogue import (
    AgentReply,
    DialogueConfig,
    IntentParser,
    SideEffectKind,
    TriggerConfig,
    load_dialogue_config,
    load_triggers,
)
from .handoff import (
    DEFAULT_HANDOFF_LATENCY_MS,
    ClientRegistry,
    HandoffState,
    RequestStatus,
    SessionManager,
)
from .model import (
    HANDOFF_SOURCE_PHASES,
    DeviceKind,
    DeviceProfile,
    DisplayMode,
    LatencyModel,
    SessionError,
    SessionState,
    Speaker,
    Utterance,
    VoiceConfig,
    append_turn,
    display_mode_for,
)
from .routes import RouteGraph
from .speech import ErrorModel, MockStt, MockTts, SttAdapter, TtsAdapter
from .telemetry import NO_CONTEXT, TelemetrySink

log = logging.getLogger(__name__)

ENVELOPE_FIELDS = ("type", "session_id", "device_id", "seq", "payload")

INBOUND_TYPES = ("hello", "start_session", "ptt_utterance", "proximity_event")

# Reference mean response times, split 40/20/40 across the mocked
# recognizer, dialogue step, and synthesizer.
DEFAULT_LATENCY = {
    DeviceKind.STATIONARY: LatencyModel(stt_ms=1156, dialogue_ms=578, tts_ms=1156),
    DeviceKind.WEARABLE: LatencyModel(stt_ms=1704, dialogue_ms=852, tts_ms=1704),
}


class ProtocolError(Exception):
    def __init__(self, code: str, detail: str) -> None:
        super().__init__(detail)
        self.code = code
        self.detail = detail


@dataclass
class _Connection:
    conn_id: str
    device_id: str | None = None
    last_in_seq: int | None = None
    next_out_seq: int = 1


@dataclass(frozen=True)
class TurnTiming:
    session_id: str
    ptt_seq: int
    received_ms: int
    responded_ms: int

    @property
    def response_ms(self) -> int:
        return self.responded_ms - self.received_ms


@dataclass(frozen=True)
class _StudyContext:
    participant: str = NO_CONTEXT
    condition: str = NO_CONTEXT
    route: str = NO_CONTEXT


class Gateway:
    """Validates envelopes and turns them into scheduled replies."""

    def __init__(
        self,
        graph: RouteGraph,
        dialogue_config: DialogueConfig | None = None,
        triggers: TriggerConfig | None = None,
        clock: Clock | None = None,
        telemetry: TelemetrySink | None = None,
        stt: SttAdapter | None = None,
        tts: TtsAdapter | None = None,
        seed: int | str = 0,
        stt_error: ErrorModel | None = None,
        default_latency: Mapping[DeviceKind, LatencyModel] | None = None,
        handoff_latency_ms: int = DEFAULT_HANDOFF_LATENCY_MS,
        handoff_jitter_fraction: float = 0.0,
        default_voice: VoiceConfig | None = None,
    ) -> None:
        self.graph = graph
        self.dialogue_config = dialogue_config or load_dialogue_config()
        self.triggers = triggers or load_triggers()
        self.clock: Clock = clock if clock is not None else VirtualClock()
        # explicit None check: an empty sink is falsy via __len__
        self.telemetry = telemetry if telemetry is not None else TelemetrySink()
        self.stt = stt or MockStt(stt_error or ErrorModel(), seed=seed)
        self.tts = tts or MockTts()
        self.registry = ClientRegistry()
        self.manager = SessionManager(self.registry, handoff_latency_ms)
        self.parser = IntentParser(graph, self.dialogue_config, self.triggers)
        self.default_latency = dict(default_latency or DEFAULT_LATENCY)
        self.default_voice = default_voice or VoiceConfig()
        if not 0.0 <= handoff_jitter_fraction < 1.0:
            raise ValueError("handoff_jitter_fraction must be in [0, 1)")
        self.handoff_jitter_fraction = handoff_jitter_fraction
        self._rng = Random(seed)
        self._heap: list[tuple[int, int, str, Any]] = []
        self._tie = itertools.count()
        self._connections: dict[str, _Connection] = {}
        self._device_conn: dict[str, str] = {}
        self._contexts: dict[str, _StudyContext] = {}
        self._turns: dict[str, list[TurnTiming]] = {}

    @property
    def templates(self):
        return self.dialogue_config.templates

    # -- connections -------------------------------------------------------

    def attach(self, conn_id: str) -> None:
        if conn_id in self._connections:
            raise ProtocolError("bad_request", f"connection {conn_id!r} already attached")
        self._connections[conn_id] = _Connection(conn_id=conn_id)

    def connection_lost(self, conn_id: str) -> None:
        conn = self._connections.pop(conn_id, None)
        if conn is None or conn.device_id is None:
            return
        if self._device_conn.get(conn.device_id) == conn_id:
            del self._device_conn[conn.device_id]
            try:
                self.registry.set_connected(conn.device_id, False)
            except SessionError:
                pass

    def connection_for(self, device_id: str) -> str | None:
        return self._device_conn.get(device_id)

    # -- scheduling --------------------------------------------------------

    def _schedule_message(self, emit_at_ms: int, conn_id: str, message: dict) -> None:
        heapq.heappush(self._heap, (emit_at_ms, next(self._tie), conn_id, message))

    def _schedule_action(self, run_at_ms: int, action: Callable[[int], None]) -> None:
        heapq.heappush(self._heap, (run_at_ms, next(self._tie), "", action))

    def next_due(self) -> int | None:
        return self._heap[0][0] if self._heap else None

    def pending_count(self) -> int:
        return len(self._heap)

    def pump(self, now_ms: int | None = None) -> list[tuple[str, dict]]:
        """Emit everything due at or before now, running due internal actions.

        Outbound sequence numbers are stamped here, in emission order, so
        they are strictly increasing per connection even when replies were
        scheduled out of order.
        """
        now = self.clock.now_ms() if now_ms is None else now_ms
        out: list[tuple[str, dict]] = []
        while self._heap and self._heap[0][0] <= now:
            emit_at, _, conn_id, item = heapq.heappop(self._heap)
            if callable(item):
                item(emit_at)
                continue
            conn = self._connections.get(conn_id)
            if conn is None:
                continue  # connection closed while the reply was in flight
            message = dict(item)
            message["seq"] = conn.next_out_seq
            conn.next_out_seq += 1
            out.append((conn_id, message))
        return out

    # -- inbound -----------------------------------------------------------

    def receive(self, conn_id: str, message: Mapping) -> None:
        """Accept one inbound envelope; all effects land on the timeline."""
        if conn_id not in self._connections:
            self.attach(conn_id)
        conn = self._connections[conn_id]
        now = self.clock.now_ms()
        seq = message.get("seq") if isinstance(message, Mapping) else None
        if not isinstance(seq, int) or isinstance(seq, bool):
            seq = None
        try:
            envelope = self._validate_envelope(conn, message)
            handler = {
                "hello": self._on_hello,
                "start_session": self._on_start_session,
                "ptt_utterance": self._on_ptt,
                "proximity_event": self._on_proximity,
            }[envelope["type"]]
            handler(conn, envelope, now)
        except ProtocolError as exc:
            log.debug("rejected message on %s: %s", conn_id, exc.detail)
            self._send_error(conn, seq, exc, now)

    def handle_message(self, conn_id: str, message: Mapping) -> list[tuple[str, dict]]:
        """Receive and immediately pump whatever is already due."""
        self.receive(conn_id, message)
        return self.pump()

    def _validate_envelope(self, conn: _Connection, message: Mapping) -> dict:
        if not isinstance(message, Mapping):
            raise ProtocolError("bad_request", "message must be a JSON object")
        missing = [f for f in ENVELOPE_FIELDS if f not in message]
        if missing:
            raise ProtocolError("bad_request", f"missing fields: {', '.join(missing)}")
        mtype = message["type"]
        if mtype not in INBOUND_TYPES:
            raise ProtocolError("unknown_type", f"unknown message type {mtype!r}")
        seq = message["seq"]
        if not isinstance(seq, int) or isinstance(seq, bool):
            raise ProtocolError("bad_request", "seq must be an integer")
        if conn.last_in_seq is not None and seq <= conn.last_in_seq:
            raise ProtocolError(
                "bad_seq",
                f"seq {seq} not greater than previous {conn.last_in_seq}",
            )
        conn.last_in_seq = seq
        device_id = message["device_id"]
        if not isinstance(device_id, str) or not device_id:
            raise ProtocolError("bad_request", "device_id must be a non-empty string")
        session_id = message["session_id"]
        if session_id is not None and (not isinstance(session_id, str) or not session_id):
            raise ProtocolError("bad_request", "session_id must be null or a non-empty string")
        payload = message["payload"]
        if not isinstance(payload, Mapping):
            raise ProtocolError("bad_request", "payload must be an object")
        return {
            "type": mtype,
            "session_id": session_id,
            "device_id": device_id,
            "seq": seq,
            "payload": payload,
        }

    def _send_error(
        self, conn: _Connection, in_reply_to: int | None, exc: ProtocolError, now: int
    ) -> None:
        self._schedule_message(
            now,
            conn.conn_id,
            {
                "type": "error",
                "session_id": None,
                "device_id": conn.device_id,
                "payload": {
                    "code": exc.code,
                    "detail": exc.detail,
                    "in_reply_to": in_reply_to,
                },
            },
        )

    def _outbound(
        self,
        mtype: str,
        session_id: str | None,
        device_id: str | None,
        payload: dict,
    ) -> dict:
        return {
            "type": mtype,
            "session_id": session_id,
            "device_id": device_id,
            "payload": payload,
        }

    # -- handlers ------------------------------------------------------------

    def _on_hello(self, conn: _Connection, envelope: dict, now: int) -> None:
        payload = envelope["payload"]
        device_id = envelope["device_id"]
        try:
            kind = DeviceKind(payload.get("kind"))
        except ValueError:
            raise ProtocolError(
                "bad_request",
                f"hello payload needs kind in {[k.value for k in DeviceKind]}",
            ) from None
        latency = self.default_latency.get(kind) or DEFAULT_LATENCY[kind]
        raw_latency = payload.get("latency")
        if raw_latency is not None:
            if not isinstance(raw_latency, Mapping):
                raise ProtocolError("bad_request", "latency must be an object")
            try:
                latency = LatencyModel(
                    stt_ms=int(raw_latency.get("stt_ms", latency.stt_ms)),
                    dialogue_ms=int(raw_latency.get("dialogue_ms", latency.dialogue_ms)),
                    tts_ms=int(raw_latency.get("tts_ms", latency.tts_ms)),
                    jitter_fraction=float(
                        raw_latency.get("jitter_fraction", latency.jitter_fraction)
                    ),
                )
            except (TypeError, ValueError) as exc:
                raise ProtocolError("bad_request", f"bad latency: {exc}") from None
        mode = payload.get("display_mode")
        try:
            display_mode = DisplayMode(mode) if mode is not None else display_mode_for(kind)
            profile = DeviceProfile(
                device_id=device_id,
                kind=kind,
                display_mode=display_mode,
                latency=latency,
                connected=True,
            )
        except ValueError as exc:
            raise ProtocolError("bad_request", str(exc)) from None
        previous_conn = self._device_conn.get(device_id)
        if previous_conn is not None and previous_conn != conn.conn_id:
            old = self._connections.get(previous_conn)
            if old is not None:
                old.device_id = None
        self.registry.register(profile)
        conn.device_id = device_id
        self._device_conn[device_id] = conn.conn_id
        log.info(
            "device registered: %s (%s, %s) on %s",
            device_id,
            kind.value,
            profile.display_mode.value,
            conn.conn_id,
        )
        self._schedule_message(
            now,
            conn.conn_id,
            self._outbound(
                "hello_ack",
                None,
                device_id,
                {
                    "device": {
                        "device_id": device_id,
                        "kind": kind.value,
                        "display_mode": profile.display_mode.value,
                        "latency": {
                            "stt_ms": latency.stt_ms,
                            "dialogue_ms": latency.dialogue_ms,
                            "tts_ms": latency.tts_ms,
                            "jitter_fraction": latency.jitter_fraction,
                        },
                    },
                    "in_reply_to": envelope["seq"],
                },
            ),
        )

    def _require_bound_device(self, conn: _Connection, envelope: dict) -> DeviceProfile:
        device_id = envelope["device_id"]
        if conn.device_id is None or conn.device_id != device_id:
            raise ProtocolError(
                "unknown_device",
                f"connection has not introduced device {device_id!r} (send hello first)",
            )
        profile = self.registry.get(device_id)
        if profile is None:
            raise ProtocolError("unknown_device", f"device {device_id!r} never said hello")
        return profile

    def _on_start_session(self, conn: _Connection, envelope: dict, now: int) -> None:
        profile = self._require_bound_device(conn, envelope)
        session_id = envelope["session_id"]
        if session_id is None:
            raise ProtocolError("bad_request", "start_session needs a session_id")
        payload = envelope["payload"]
        try:
            voice = VoiceConfig(
                voice_id=str(payload.get("voice_id", self.default_voice.voice_id)),
                speaking_rate=float(
                    payload.get("speaking_rate", self.default_voice.speaking_rate)
                ),
            )
        except ValueError as exc:
            raise ProtocolError("bad_request", f"bad voice: {exc}") from None
        known_location = None
        if profile.kind is DeviceKind.STATIONARY:
            known_location = self.graph.start
        try:
            state = self.manager.create_session(
                profile, voice, session_id=session_id, known_location=known_location
            )
        except SessionError as exc:
            raise ProtocolError("session_exists", str(exc)) from None
        meta = payload.get("meta") or {}
        if isinstance(meta, Mapping):
            self._contexts[session_id] = _StudyContext(
                participant=str(meta.get("participant", NO_CONTEXT)),
                condition=str(meta.get("condition", NO_CONTEXT)),
                route=str(meta.get("route", NO_CONTEXT)),
            )
        self._schedule_message(
            now,
            conn.conn_id,
            self._outbound(
                "session_started",
                session_id,
                profile.device_id,
                {"session": state.to_dict(), "in_reply_to": envelope["seq"]},
            ),
        )

    def _context(self, session_id: str | None) -> _StudyContext:
        if session_id is None:
            return _StudyContext()
        return self._contexts.get(session_id, _StudyContext())

    @staticmethod
    def _append_clamped(
        state: SessionState, speaker: Speaker, text: str, device_id: str, ts_ms: int
    ) -> SessionState:
        # Replies carry their emission timestamp, and a user may speak again
        # before a slow reply lands; clamp so no turn time-travels behind the
        # transcript tail.
        if state.transcript:
            ts_ms = max(ts_ms, state.transcript[-1].timestamp_ms)
        return append_turn(
            state,
            Utterance(speaker=speaker, text=text, device_id=device_id, timestamp_ms=ts_ms),
        )

    def _append_assistant(
        self, state: SessionState, text: str, device_id: str, ts_ms: int
    ) -> SessionState:
        return self._append_clamped(state, Speaker.ASSISTANT, text, device_id, ts_ms)

    def _display_payload(
        self, profile: DeviceProfile, user_text: str | None, assistant_text: str
    ) -> dict:
        if profile.display_mode is DisplayMode.FULL_TRANSCRIPT:
            bubbles = []
            if user_text is not None:
                bubbles.append({"speaker": "User", "text": user_text})
            bubbles.append({"speaker": "Assistant", "text": assistant_text})
            return {"directive": "append_bubble", "bubbles": bubbles}
        return {
            "directive": "show_last_turn",
            "user_text": user_text,
            "assistant_text": assistant_text,
        }

    def _on_ptt(self, conn: _Connection, envelope: dict, now: int) -> None:
        profile = self._require_bound_device(conn, envelope)
        session_id = envelope["session_id"]
        if session_id is None:
            raise ProtocolError("bad_request", "ptt_utterance needs a session_id")
        if not self.manager.has_session(session_id):
            raise ProtocolError("no_session", f"no session {session_id!r}")
        state = self.manager.get(session_id)
        if state.active_device != profile.device_id:
            raise ProtocolError(
                "not_active_device",
                f"session {session_id!r} is active on {state.active_device!r}",
            )
        payload = envelope["payload"]
        text = payload.get("text")
        if not isinstance(text, str) or not text.strip():
            raise ProtocolError("bad_request", "ptt payload needs non-empty text")

        ctx = self._context(session_id)
        self.telemetry.emit(
            now,
            "interaction",
            {"device": profile.device_id, "seq": envelope["seq"], "text": text},
            participant=ctx.participant,
            condition=ctx.condition,
            route=ctx.route,
        )
        heard = self.stt.transcribe(text).text
        intent = self.parser.parse(heard)
        stt_ms, dialogue_ms, tts_ms = profile.latency.sample(self._rng)
        emit_at = now + stt_ms + dialogue_ms + tts_ms

        with_user = self._append_clamped(
            state, Speaker.USER, heard, profile.device_id, now
        )
        stepped, reply = self._step(with_user, intent)
        reply_text = reply.text
        effect = reply.side_effect
        if effect is not None and effect.kind is SideEffectKind.BEGIN_HANDOFF:
            self.manager.set(session_id, stepped)
            reply_text = self._begin_handoff(session_id, effect.target, now, ctx)
            stepped = self.manager.get(session_id)
        else:
            self.manager.set(session_id, stepped)

        synthesis = self.tts.synthesize(reply_text, stepped.voice)
        final = self._append_assistant(stepped, reply_text, profile.device_id, emit_at)
        self.manager.set(session_id, final)

        self._schedule_message(
            emit_at,
            conn.conn_id,
            self._outbound(
                "assistant_say",
                session_id,
                profile.device_id,
                {
                    "text": reply_text,
                    "voice_id": synthesis.voice_id,
                    "audio_ref": synthesis.audio_ref,
                    "duration_ms": synthesis.duration_ms,
                    "in_reply_to": envelope["seq"],
                },
            ),
        )
        self._schedule_message(
            emit_at,
            conn.conn_id,
            self._outbound(
                "display_update",
                session_id,
                profile.device_id,
                self._display_payload(profile, heard, reply_text),
            ),
        )
        self.telemetry.emit(
            emit_at,
            "response",
            {
                "in_reply_to": envelope["seq"],
                "ms": emit_at - now,
                "device": profile.device_id,
            },
            participant=ctx.participant,
            condition=ctx.condition,
            route=ctx.route,
        )
        self._turns.setdefault(session_id, []).append(
            TurnTiming(
                session_id=session_id,
                ptt_seq=envelope["seq"],
                received_ms=now,
                responded_ms=emit_at,
            )
        )

    def _step(self, state: SessionState, intent) -> tuple[SessionState, AgentReply]:
        from .dialogue import step_dialogue

        return step_dialogue(state, intent, self.graph, self.templates)

    def _begin_handoff(
        self,
        session_id: str,
        target_kind: DeviceKind | None,
        now: int,
        ctx: _StudyContext,
    ) -> str:
        assert target_kind is not None
        latency = self.manager.handoff_latency_ms
        if self.handoff_jitter_fraction > 0.0:
            low = 1.0 - self.handoff_jitter_fraction
            high = 1.0 + self.handoff_jitter_fraction
            latency = max(0, round(latency * self._rng.uniform(low, high)))
        outcome = self.manager.request_handoff(
            session_id, target_kind, now, latency_ms=latency
        )
        if outcome.status is RequestStatus.CONFIRMED:
            self._schedule_action(
                outcome.due_at_ms,
                lambda at, sid=session_id: self._finish_handoff(sid, at),
            )
            return self.templates.render("handoff_confirm")
        if outcome.status is RequestStatus.NO_TARGET:
            self.telemetry.emit(
                now,
                "handoff",
                {
                    "from": outcome.source_device,
                    "to": None,
                    "outcome": HandoffState.ABORTED.value,
                    "latency_ms": 0,
                    "record_id": outcome.record.record_id if outcome.record else None,
                },
                participant=ctx.participant,
                condition=ctx.condition,
                route=ctx.route,
            )
            return self.templates.render("handoff_no_target", kind=target_kind.value)
        if outcome.status is RequestStatus.SAME_KIND:
            return self.templates.render("handoff_same_kind")
        if outcome.status is RequestStatus.ALREADY_PENDING:
            return self.templates.render("handoff_in_progress")
        return self.templates.render("handoff_not_ready")

    def _finish_handoff(self, session_id: str, now: int) -> None:
        greeting = self.templates.render("handoff_greeting")
        state = self.manager.get(session_id)
        if state.transcript:
            # keep the greeting's timestamp monotonic within the transcript
            now_for_turn = max(now, state.transcript[-1].timestamp_ms)
        else:
            now_for_turn = now
        outcome = self.manager.complete_handoff(session_id, greeting, now_for_turn)
        ctx = self._context(session_id)
        record = outcome.record
        if outcome.status is HandoffState.ACTIVE_ON_TARGET:
            target_profile = self.registry.require(outcome.target_device)
            target_conn = self._device_conn.get(outcome.target_device)
            synthesis = self.tts.synthesize(greeting, outcome.state.voice)
            if target_conn is not None:
                self._schedule_message(
                    now,
                    target_conn,
                    self._outbound(
                        "assistant_say",
                        session_id,
                        outcome.target_device,
                        {
                            "text": greeting,
                            "voice_id": synthesis.voice_id,
                            "audio_ref": synthesis.audio_ref,
                            "duration_ms": synthesis.duration_ms,
                            "in_reply_to": None,
                        },
                    ),
                )
                if target_profile.display_mode is DisplayMode.FULL_TRANSCRIPT:
                    display = {
                        "directive": "show_transcript",
                        "bubbles": [
                            {"speaker": u.speaker.value, "text": u.text}
                            for u in outcome.state.transcript
                        ],
                    }
                else:
                    display = {
                        "directive": "show_last_turn",
                        "user_text": None,
                        "assistant_text": greeting,
                    }
                self._schedule_message(
                    now,
                    target_conn,
                    self._outbound(
                        "display_update", session_id, outcome.target_device, display
                    ),
                )
            source_conn = self._device_conn.get(outcome.source_device)
            if source_conn is not None:
                self._schedule_message(
                    now,
                    source_conn,
                    self._outbound(
                        "display_update",
                        session_id,
                        outcome.source_device,
                        {"directive": "show_watch_icon"},
                    ),
                )
        else:
            apology = self.templates.render("handoff_aborted")
            restored = self._append_assistant(
                outcome.state, apology, outcome.source_device, now
            )
            self.manager.set(session_id, restored)
            source_conn = self._device_conn.get(outcome.source_device)
            source_profile = self.registry.get(outcome.source_device)
            if source_conn is not None and source_profile is not None:
                synthesis = self.tts.synthesize(apology, outcome.state.voice)
                self._schedule_message(
                    now,
                    source_conn,
                    self._outbound(
                        "assistant_say",
                        session_id,
                        outcome.source_device,
                        {
                            "text": apology,
                            "voice_id": synthesis.voice_id,
                            "audio_ref": synthesis.audio_ref,
                            "duration_ms": synthesis.duration_ms,
                            "in_reply_to": None,
                        },
                    ),
                )
                self._schedule_message(
                    now,
                    source_conn,
                    self._outbound(
                        "display_update",
                        session_id,
                        outcome.source_device,
                        self._display_payload(source_profile, None, apology),
                    ),
                )
        self.telemetry.emit(
            now,
            "handoff",
            {
                "from": outcome.source_device,
                "to": outcome.target_device,
                "outcome": outcome.status.value,
                "latency_ms": now - record.requested_at_ms,
                "record_id": record.record_id,
            },
            participant=ctx.participant,
            condition=ctx.condition,
            route=ctx.route,
        )

    def _on_proximity(self, conn: _Connection, envelope: dict, now: int) -> None:
        profile = self._require_bound_device(conn, envelope)
        session_id = envelope["session_id"]
        if session_id is None:
            raise ProtocolError("bad_request", "proximity_event needs a session_id")
        if not self.manager.has_session(session_id):
            raise ProtocolError("no_session", f"no session {session_id!r}")
        payload = envelope["payload"]
        distance = payload.get("distance_m")
        if not isinstance(distance, (int, float)) or distance < 0:
            raise ProtocolError("bad_request", "distance_m must be a non-negative number")
        self._schedule_message(
            now,
            conn.conn_id,
            self._outbound(
                "proximity_ack",
                session_id,
                profile.device_id,
                {"in_reply_to": envelope["seq"], "distance_m": distance},
            ),
        )
        if not self.triggers.proximity_enabled:
            return
        state = self.manager.get(session_id)
        if (
            profile.kind is not DeviceKind.STATIONARY
            or state.active_device != profile.device_id
            or state.phase not in HANDOFF_SOURCE_PHASES
            or distance <= self.triggers.proximity_threshold_m
            or self.manager.has_pending(session_id)
        ):
            return
        ctx = self._context(session_id)
        announce = self.templates.render("handoff_proximity")
        reply_text = self._begin_handoff(session_id, DeviceKind.WEARABLE, now, ctx)
        if reply_text != self.templates.render("handoff_confirm"):
            return  # no reachable wearable; stay silent on a passive event
        synthesis = self.tts.synthesize(announce, state.voice)
        updated = self._append_assistant(
            self.manager.get(session_id), announce, profile.device_id, now
        )
        self.manager.set(session_id, updated)
        self._schedule_message(
            now,
            conn.conn_id,
            self._outbound(
                "assistant_say",
                session_id,
                profile.device_id,
                {
                    "text": announce,
                    "voice_id": synthesis.voice_id,
                    "audio_ref": synthesis.audio_ref,
                    "duration_ms": synthesis.duration_ms,
                    "in_reply_to": None,
                },
            ),
        )
        self._schedule_message(
            now,
            conn.conn_id,
            self._outbound(
                "display_update",
                session_id,
                profile.device_id,
                self._display_payload(profile, None, announce),
            ),
        )

    # -- introspection -------------------------------------------------------

    def response_times(self, session_id: str) -> list[int]:
        return [t.response_ms for t in self._turns.get(session_id, [])]

    def measure_response_time(self, session_id: str, ptt_seq: int) -> int:
        for timing in self._turns.get(session_id, []):
            if timing.ptt_seq == ptt_seq:
                return timing.response_ms
        raise SessionError(
            f"no recorded turn with seq {ptt_seq} in session {session_id!r}"
        )
