"""Shared conversational-session vocabulary used by every other module.

A session is a single ongoing conversation between one user and the guidance
agent.  The agent is re-embodied when the conversation moves between a
stationary robot and a wearable; the session object is what survives that
move, so everything a device needs to resume the dialogue lives here and
round-trips through canonical JSON.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field, replace
from enum import Enum
from random import Random
from typing import Mapping, Optional

from .routes import RoutePlan


class DeviceKind(str, Enum):
    STATIONARY = "Stationary"
    WEARABLE = "Wearable"

    @property
    def other(self) -> "DeviceKind":
        if self is DeviceKind.STATIONARY:
            return DeviceKind.WEARABLE
        return DeviceKind.STATIONARY


class DisplayMode(str, Enum):
    """How much conversation history a device's screen can carry."""

    FULL_TRANSCRIPT = "FullTranscript"
    LAST_TURN_ONLY = "LastTurnOnly"


def display_mode_for(kind: DeviceKind) -> DisplayMode:
    if kind is DeviceKind.STATIONARY:
        return DisplayMode.FULL_TRANSCRIPT
    return DisplayMode.LAST_TURN_ONLY


class DisplayDirective(str, Enum):
    """Rendering commands sent to device screens.

    ``show_watch_icon`` marks the embodiment a conversation just left;
    ``show_transcript`` replays full history onto a freshly active screen.
    """

    APPEND_BUBBLE = "append_bubble"
    SHOW_LAST_TURN = "show_last_turn"
    SHOW_WATCH_ICON = "show_watch_icon"
    SHOW_TRANSCRIPT = "show_transcript"


@dataclass(frozen=True)
class LatencyModel:
    """Per-turn processing delays in integer milliseconds.

    ``jitter_fraction`` spreads each sampled component uniformly within
    +-fraction of its nominal value; zero makes sampling exact.
    """

    stt_ms: int
    dialogue_ms: int
    tts_ms: int
    jitter_fraction: float = 0.0

    def __post_init__(self) -> None:
        for name in ("stt_ms", "dialogue_ms", "tts_ms"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 <= self.jitter_fraction < 1.0:
            raise ValueError("jitter_fraction must be in [0, 1)")

    @property
    def total_ms(self) -> int:
        return self.stt_ms + self.dialogue_ms + self.tts_ms

    def sample(self, rng: Random) -> tuple[int, int, int]:
        if self.jitter_fraction == 0.0:
            return (self.stt_ms, self.dialogue_ms, self.tts_ms)
        low, high = 1.0 - self.jitter_fraction, 1.0 + self.jitter_fraction
        return tuple(  # type: ignore[return-value]
            max(0, round(part * rng.uniform(low, high)))
            for part in (self.stt_ms, self.dialogue_ms, self.tts_ms)
        )


@dataclass(frozen=True)
class DeviceProfile:
    device_id: str
    kind: DeviceKind
    display_mode: DisplayMode
    latency: LatencyModel
    connected: bool = True

    def __post_init__(self) -> None:
        if not self.device_id:
            raise ValueError("device_id must be non-empty")
        if self.kind is DeviceKind.STATIONARY and (
            self.display_mode is not DisplayMode.FULL_TRANSCRIPT
        ):
            raise ValueError("a stationary device must show the full transcript")


@dataclass(frozen=True)
class VoiceConfig:
    """Synthetic voice identity; preserved verbatim across re-embodiment."""

    voice_id: str = "apope_low"
    speaking_rate: float = 1.0

    def __post_init__(self) -> None:
        if not self.voice_id:
            raise ValueError("voice_id must be non-empty")
        if self.speaking_rate <= 0:
            raise ValueError("speaking_rate must be positive")


class Speaker(str, Enum):
    USER = "User"
    ASSISTANT = "Assistant"


@dataclass(frozen=True)
class Utterance:
    speaker: Speaker
    text: str
    device_id: str
    timestamp_ms: int

    def __post_init__(self) -> None:
        if self.speaker is Speaker.ASSISTANT and not self.text:
            raise ValueError("assistant turns must carry text")
        if self.timestamp_ms < 0:
            raise ValueError("timestamp_ms must be non-negative")

    def to_dict(self) -> dict:
        return {
            "speaker": self.speaker.value,
            "text": self.text,
            "device_id": self.device_id,
            "timestamp_ms": self.timestamp_ms,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Utterance":
        return cls(
            speaker=Speaker(d["speaker"]),
            text=str(d["text"]),
            device_id=str(d["device_id"]),
            timestamp_ms=int(d["timestamp_ms"]),
        )


class IntentKind(str, Enum):
    GREET = "Greet"
    PROVIDE_LOCATION = "ProvideLocation"
    ASK_DESTINATION = "AskDestination"
    ASK_FULL_ROUTE = "AskFullRoute"
    ASK_NEXT_STEP = "AskNextStep"
    HANDOFF_REQUEST = "HandoffRequest"
    CONFIRM_ARRIVAL = "ConfirmArrival"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class Intent:
    """A recognized user intention with its slot, if the kind carries one.

    ``landmark`` and ``place`` are node ids of the active route graph;
    ``target`` is the embodiment kind a hand-off request names.  Unknown
    intents never carry a payload.
    """

    kind: IntentKind
    landmark: str | None = None
    place: str | None = None
    target: DeviceKind | None = None

    def __post_init__(self) -> None:
        allowed = {
            IntentKind.PROVIDE_LOCATION: "landmark",
            IntentKind.ASK_DESTINATION: "place",
            IntentKind.HANDOFF_REQUEST: "target",
        }
        expected = allowed.get(self.kind)
        for name in ("landmark", "place", "target"):
            value = getattr(self, name)
            if name == expected:
                if value is None:
                    raise ValueError(f"{self.kind.value} intent needs {name}")
            elif value is not None:
                raise ValueError(f"{self.kind.value} intent cannot carry {name}")

    @classmethod
    def greet(cls) -> "Intent":
        return cls(IntentKind.GREET)

    @classmethod
    def provide_location(cls, landmark: str) -> "Intent":
        return cls(IntentKind.PROVIDE_LOCATION, landmark=landmark)

    @classmethod
    def ask_destination(cls, place: str) -> "Intent":
        return cls(IntentKind.ASK_DESTINATION, place=place)

    @classmethod
    def ask_full_route(cls) -> "Intent":
        return cls(IntentKind.ASK_FULL_ROUTE)

    @classmethod
    def ask_next_step(cls) -> "Intent":
        return cls(IntentKind.ASK_NEXT_STEP)

    @classmethod
    def handoff_request(cls, target: DeviceKind) -> "Intent":
        return cls(IntentKind.HANDOFF_REQUEST, target=target)

    @classmethod
    def confirm_arrival(cls) -> "Intent":
        return cls(IntentKind.CONFIRM_ARRIVAL)

    @classmethod
    def unknown(cls) -> "Intent":
        return cls(IntentKind.UNKNOWN)


class DialoguePhase(str, Enum):
    GREETING = "Greeting"
    ELICITING_LOCATION = "ElicitingLocation"
    ELICITING_DESTINATION = "ElicitingDestination"
    GUIDING = "Guiding"
    HANDOFF_PENDING = "HandoffPending"
    ARRIVED = "Arrived"


HANDOFF_SOURCE_PHASES = frozenset(
    {
        DialoguePhase.ELICITING_LOCATION,
        DialoguePhase.ELICITING_DESTINATION,
        DialoguePhase.GUIDING,
    }
)


class SessionError(Exception):
    """An operation violated a session-state invariant."""


@dataclass(frozen=True)
class SessionState:
    """Everything the agent knows mid-conversation.

    ``step_index`` counts completed legs of the route plan; it equals the
    index of the next leg to announce.  The transcript is append-only with
    non-decreasing timestamps.
    """

    session_id: str
    active_device: str
    phase: DialoguePhase
    voice: VoiceConfig
    known_location: str | None = None
    destination: str | None = None
    route_plan: RoutePlan | None = None
    step_index: int = 0
    transcript: tuple[Utterance, ...] = ()

    def __post_init__(self) -> None:
        if not self.session_id:
            raise SessionError("session_id must be non-empty")
        if not self.active_device:
            raise SessionError("active_device must be non-empty")
        if self.route_plan is not None:
            if not 0 <= self.step_index <= len(self.route_plan.legs):
                raise SessionError(
                    f"step_index {self.step_index} out of range for "
                    f"{len(self.route_plan.legs)} legs"
                )
        elif self.step_index != 0:
            raise SessionError("step_index must be 0 without a route plan")
        if self.phase is DialoguePhase.GUIDING and self.route_plan is None:
            raise SessionError("guiding requires a route plan")
        for earlier, later in zip(self.transcript, self.transcript[1:]):
            if later.timestamp_ms < earlier.timestamp_ms:
                raise SessionError("transcript timestamps must not decrease")

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "active_device": self.active_device,
            "phase": self.phase.value,
            "voice": {
                "voice_id": self.voice.voice_id,
                "speaking_rate": self.voice.speaking_rate,
            },
            "known_location": self.known_location,
            "destination": self.destination,
            "route_plan": self.route_plan.to_dict() if self.route_plan else None,
            "step_index": self.step_index,
            "transcript": [u.to_dict() for u in self.transcript],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SessionState":
        plan = d.get("route_plan")
        return cls(
            session_id=str(d["session_id"]),
            active_device=str(d["active_device"]),
            phase=DialoguePhase(d["phase"]),
            voice=VoiceConfig(
                voice_id=str(d["voice"]["voice_id"]),
                speaking_rate=float(d["voice"]["speaking_rate"]),
            ),
            known_location=d.get("known_location"),
            destination=d.get("destination"),
            route_plan=RoutePlan.from_dict(plan) if plan is not None else None,
            step_index=int(d.get("step_index", 0)),
            transcript=tuple(Utterance.from_dict(u) for u in d.get("transcript", ())),
        )


def new_session(
    device: DeviceProfile,
    voice: VoiceConfig,
    session_id: str | None = None,
    known_location: str | None = None,
) -> SessionState:
    """Open a fresh conversation on a connected device.

    A stationary robot knows where it stands, so callers may seed
    ``known_location`` with the device's own position; a wearable cannot.
    """
    if not device.connected:
        raise SessionError(f"device {device.device_id!r} is not connected")
    return SessionState(
        session_id=session_id or uuid.uuid4().hex,
        active_device=device.device_id,
        phase=DialoguePhase.GREETING,
        voice=voice,
        known_location=known_location,
    )


def append_turn(state: SessionState, utterance: Utterance) -> SessionState:
    if state.transcript and utterance.timestamp_ms < state.transcript[-1].timestamp_ms:
        raise SessionError("utterance timestamp precedes the transcript tail")
    return replace(state, transcript=state.transcript + (utterance,))


def clear_transcript(state: SessionState) -> SessionState:
    """Drop conversation history while keeping task progress intact."""
    return replace(state, transcript=())


def session_to_json(state: SessionState) -> str:
    """Canonical serialization: sorted keys, compact separators, no NaN."""
    return json.dumps(
        state.to_dict(), sort_keys=True, separators=(",", ":"), allow_nan=False
    )


def session_from_json(text: str) -> SessionState:
    return SessionState.from_dict(json.loads(text))
