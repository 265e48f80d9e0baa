"""Conversation hand-off: device registry, transfer records, session manager.

A hand-off moves one live session between embodiments.  The transfer is
atomic from the dialogue's point of view: the session is parked in the
hand-off-pending phase while in flight, and at completion exactly two things
change in the canonical serialization: the active device, and one appended
greeting turn.  An aborted transfer restores the parked phase instead.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

from .model import (
    HANDOFF_SOURCE_PHASES,
    DeviceKind,
    DeviceProfile,
    DialoguePhase,
    SessionError,
    SessionState,
    Speaker,
    Utterance,
    VoiceConfig,
    append_turn,
    new_session,
)

DEFAULT_HANDOFF_LATENCY_MS = 3960


class HandoffState(str, Enum):
    ACTIVE_ON_SOURCE = "ActiveOnSource"
    CONFIRMED = "Confirmed"
    TRANSFERRING = "Transferring"
    ACTIVE_ON_TARGET = "ActiveOnTarget"
    ABORTED = "Aborted"


class RequestStatus(str, Enum):
    CONFIRMED = "Confirmed"
    ALREADY_PENDING = "AlreadyPending"
    NO_TARGET = "NoTarget"
    SAME_KIND = "SameKind"
    NOT_ALLOWED = "NotAllowed"


@dataclass
class HandoffRecord:
    """One attempted transfer; outcome stays None while in flight."""

    record_id: str
    session_id: str
    source_device: str
    target_device: str | None
    requested_at_ms: int
    completed_at_ms: int | None = None
    outcome: HandoffState | None = None

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "session_id": self.session_id,
            "source_device": self.source_device,
            "target_device": self.target_device,
            "requested_at_ms": self.requested_at_ms,
            "completed_at_ms": self.completed_at_ms,
            "outcome": self.outcome.value if self.outcome else None,
        }


@dataclass(frozen=True)
class PendingHandoff:
    session_id: str
    source_device: str
    target_device: str
    prior_phase: DialoguePhase
    requested_at_ms: int
    due_at_ms: int
    record_id: str
    state: HandoffState = HandoffState.CONFIRMED


@dataclass(frozen=True)
class RequestOutcome:
    status: RequestStatus
    source_device: str
    target_device: str | None = None
    due_at_ms: int | None = None
    record: HandoffRecord | None = None


@dataclass(frozen=True)
class CompletionOutcome:
    status: HandoffState
    state: SessionState
    record: HandoffRecord
    source_device: str
    target_device: str


class ClientRegistry:
    """Known devices and their connectivity."""

    def __init__(self) -> None:
        self._devices: dict[str, DeviceProfile] = {}
        self._lock = threading.Lock()

    def register(self, profile: DeviceProfile) -> None:
        with self._lock:
            self._devices[profile.device_id] = profile

    def get(self, device_id: str) -> DeviceProfile | None:
        with self._lock:
            return self._devices.get(device_id)

    def require(self, device_id: str) -> DeviceProfile:
        profile = self.get(device_id)
        if profile is None:
            raise SessionError(f"unknown device {device_id!r}")
        return profile

    def set_connected(self, device_id: str, connected: bool) -> DeviceProfile:
        with self._lock:
            profile = self._devices.get(device_id)
            if profile is None:
                raise SessionError(f"unknown device {device_id!r}")
            updated = replace(profile, connected=connected)
            self._devices[device_id] = updated
            return updated

    def connected_of_kind(
        self, kind: DeviceKind, exclude_device: str | None = None
    ) -> DeviceProfile | None:
        """Deterministic pick: the connected device of that kind with the
        smallest id."""
        with self._lock:
            candidates = [
                p
                for p in self._devices.values()
                if p.kind is kind and p.connected and p.device_id != exclude_device
            ]
        if not candidates:
            return None
        return min(candidates, key=lambda p: p.device_id)

    def device_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._devices)


def execute_handoff(
    state: SessionState,
    target_device: str,
    greeting_text: str,
    now_ms: int,
) -> SessionState:
    """Atomic re-embodiment of a session: swap device, append greeting.

    Pure state-to-state core of a completed transfer.  Everything else
    (voice, transcript history, location, destination, plan, progress)
    passes through untouched.
    """
    if not greeting_text:
        raise SessionError("a hand-off greeting must carry text")
    moved = replace(state, active_device=target_device)
    return append_turn(
        moved,
        Utterance(
            speaker=Speaker.ASSISTANT,
            text=greeting_text,
            device_id=target_device,
            timestamp_ms=now_ms,
        ),
    )


class SessionManager:
    """Owner of live session states and the hand-off machine.

    All mutation goes through this class under one lock, so a transfer can
    never interleave with a dialogue turn on a half-moved session.
    """

    def __init__(
        self,
        registry: ClientRegistry,
        handoff_latency_ms: int = DEFAULT_HANDOFF_LATENCY_MS,
    ) -> None:
        if handoff_latency_ms < 0:
            raise ValueError("handoff_latency_ms must be non-negative")
        self.registry = registry
        self.handoff_latency_ms = handoff_latency_ms
        self._sessions: dict[str, SessionState] = {}
        self._pending: dict[str, PendingHandoff] = {}
        self._records: list[HandoffRecord] = []
        self._lock = threading.RLock()

    # -- session store ----------------------------------------------------

    def create_session(
        self,
        device: DeviceProfile,
        voice: VoiceConfig,
        session_id: str,
        known_location: str | None = None,
    ) -> SessionState:
        with self._lock:
            if session_id in self._sessions:
                raise SessionError(f"session {session_id!r} already exists")
            state = new_session(
                device, voice, session_id=session_id, known_location=known_location
            )
            self._sessions[session_id] = state
            return state

    def get(self, session_id: str) -> SessionState:
        with self._lock:
            try:
                return self._sessions[session_id]
            except KeyError:
                raise SessionError(f"no session {session_id!r}") from None

    def has_session(self, session_id: str) -> bool:
        with self._lock:
            return session_id in self._sessions

    def set(self, session_id: str, state: SessionState) -> None:
        with self._lock:
            if session_id not in self._sessions:
                raise SessionError(f"no session {session_id!r}")
            if state.session_id != session_id:
                raise SessionError("session_id mismatch on store")
            self._sessions[session_id] = state

    def apply(
        self, session_id: str, fn: Callable[[SessionState], SessionState]
    ) -> SessionState:
        with self._lock:
            state = fn(self.get(session_id))
            self._sessions[session_id] = state
            return state

    def session_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._sessions)

    # -- hand-off machine --------------------------------------------------

    def has_pending(self, session_id: str) -> bool:
        with self._lock:
            return session_id in self._pending

    def pending_for(self, session_id: str) -> PendingHandoff | None:
        with self._lock:
            return self._pending.get(session_id)

    def records(self) -> list[HandoffRecord]:
        with self._lock:
            return list(self._records)

    def _new_record(
        self,
        session_id: str,
        source: str,
        target: str | None,
        now_ms: int,
    ) -> HandoffRecord:
        record = HandoffRecord(
            record_id=f"h{len(self._records) + 1}",
            session_id=session_id,
            source_device=source,
            target_device=target,
            requested_at_ms=now_ms,
        )
        self._records.append(record)
        return record

    def request_handoff(
        self,
        session_id: str,
        target_kind: DeviceKind,
        now_ms: int,
        latency_ms: int | None = None,
    ) -> RequestOutcome:
        """Confirm a transfer and park the session until it completes.

        Duplicate requests while one transfer is in flight are answered
        idempotently: no second record, no second timer.  ``latency_ms``
        overrides the configured transfer duration for this one request.
        """
        with self._lock:
            state = self.get(session_id)
            source = state.active_device
            existing = self._pending.get(session_id)
            if existing is not None:
                return RequestOutcome(
                    status=RequestStatus.ALREADY_PENDING,
                    source_device=source,
                    target_device=existing.target_device,
                    due_at_ms=existing.due_at_ms,
                )
            if state.phase not in HANDOFF_SOURCE_PHASES:
                return RequestOutcome(
                    status=RequestStatus.NOT_ALLOWED, source_device=source
                )
            source_profile = self.registry.require(source)
            if source_profile.kind is target_kind:
                return RequestOutcome(
                    status=RequestStatus.SAME_KIND, source_device=source
                )
            target = self.registry.connected_of_kind(
                target_kind, exclude_device=source
            )
            if target is None:
                record = self._new_record(session_id, source, None, now_ms)
                record.completed_at_ms = now_ms
                record.outcome = HandoffState.ABORTED
                return RequestOutcome(
                    status=RequestStatus.NO_TARGET,
                    source_device=source,
                    record=record,
                )
            record = self._new_record(session_id, source, target.device_id, now_ms)
            duration = self.handoff_latency_ms if latency_ms is None else latency_ms
            due = now_ms + duration
            self._pending[session_id] = PendingHandoff(
                session_id=session_id,
                source_device=source,
                target_device=target.device_id,
                prior_phase=state.phase,
                requested_at_ms=now_ms,
                due_at_ms=due,
                record_id=record.record_id,
            )
            self._sessions[session_id] = replace(
                state, phase=DialoguePhase.HANDOFF_PENDING
            )
            return RequestOutcome(
                status=RequestStatus.CONFIRMED,
                source_device=source,
                target_device=target.device_id,
                due_at_ms=due,
                record=record,
            )

    def _record_by_id(self, record_id: str) -> HandoffRecord:
        for record in self._records:
            if record.record_id == record_id:
                return record
        raise SessionError(f"no hand-off record {record_id!r}")

    def complete_handoff(
        self, session_id: str, greeting_text: str, now_ms: int
    ) -> CompletionOutcome:
        """Finish an in-flight transfer, or abort it if the target vanished."""
        with self._lock:
            pending = self._pending.pop(session_id, None)
            if pending is None:
                raise SessionError(f"no transfer in flight for {session_id!r}")
            state = self.get(session_id)
            record = self._record_by_id(pending.record_id)
            record.completed_at_ms = now_ms
            target = self.registry.get(pending.target_device)
            restored = replace(state, phase=pending.prior_phase)
            if target is None or not target.connected:
                record.outcome = HandoffState.ABORTED
                self._sessions[session_id] = restored
                return CompletionOutcome(
                    status=HandoffState.ABORTED,
                    state=restored,
                    record=record,
                    source_device=pending.source_device,
                    target_device=pending.target_device,
                )
            record.outcome = HandoffState.ACTIVE_ON_TARGET
            moved = execute_handoff(
                restored, pending.target_device, greeting_text, now_ms
            )
            self._sessions[session_id] = moved
            return CompletionOutcome(
                status=HandoffState.ACTIVE_ON_TARGET,
                state=moved,
                record=record,
                source_device=pending.source_device,
                target_device=pending.target_device,
            )

    def abort_handoff(self, session_id: str, now_ms: int) -> CompletionOutcome:
        """Cancel an in-flight transfer and restore the parked phase."""
        with self._lock:
            pending = self._pending.pop(session_id, None)
            if pending is None:
                raise SessionError(f"no transfer in flight for {session_id!r}")
            state = self.get(session_id)
            record = self._record_by_id(pending.record_id)
            record.completed_at_ms = now_ms
            record.outcome = HandoffState.ABORTED
            restored = replace(state, phase=pending.prior_phase)
            self._sessions[session_id] = restored
            return CompletionOutcome(
                status=HandoffState.ABORTED,
                state=restored,
                record=record,
                source_device=pending.source_device,
                target_device=pending.target_device,
            )
