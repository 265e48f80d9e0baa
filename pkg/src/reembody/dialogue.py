"""Closed-domain dialogue: keyword intent parsing and the phase machine.

Parsing is deliberately not statistical.  The intent set is closed, patterns
are keyword templates matched at word boundaries in a fixed priority order,
and landmark references resolve against the active route graph.  The phase
machine is a pure function from (state, intent) to (state, reply), which is
what makes mid-conversation re-embodiment safe: there is no hidden context
outside the session object.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources

import yaml

from .model import (
    HANDOFF_SOURCE_PHASES,
    DeviceKind,
    DialoguePhase,
    DisplayDirective,
    Intent,
    IntentKind,
    SessionState,
)
from .routes import (
    InstructionMode,
    NoRouteError,
    RouteGraph,
    UnknownNodeError,
    plan_route,
    render_instruction,
)

DEFAULT_DIALOGUE_RESOURCE = "dialogue_default.yaml"
DEFAULT_TRIGGERS_RESOURCE = "triggers_default.yaml"

REQUIRED_TEMPLATE_KEYS = (
    "handoff_confirm",
    "handoff_greeting",
    "greet_ask_location",
    "greet_ask_destination",
    "greet_again",
    "location_ack_ask_destination",
    "location_noted",
    "relocated",
    "destination_noted_ask_location",
    "guiding_started",
    "next_instruction",
    "full_route",
    "route_exhausted",
    "already_there",
    "no_route",
    "arrival_confirmed",
    "arrived_terminal",
    "not_navigating",
    "need_location_first",
    "need_destination_first",
    "reprompt_location",
    "reprompt_destination",
    "reprompt_guiding",
    "reprompt_generic",
    "handoff_not_ready",
    "handoff_same_kind",
    "handoff_no_target",
    "handoff_in_progress",
    "handoff_aborted",
    "handoff_proximity",
)

_PATTERN_KEYS = {
    "greet": IntentKind.GREET,
    "provide_location": IntentKind.PROVIDE_LOCATION,
    "ask_destination": IntentKind.ASK_DESTINATION,
    "ask_full_route": IntentKind.ASK_FULL_ROUTE,
    "ask_next_step": IntentKind.ASK_NEXT_STEP,
    "confirm_arrival": IntentKind.CONFIRM_ARRIVAL,
}


class ConfigError(Exception):
    """A dialogue or trigger configuration document is unusable."""


class SideEffectKind(str, Enum):
    BEGIN_HANDOFF = "BeginHandoff"
    ADVANCE_STEP = "AdvanceStep"
    COMPLETE = "Complete"


@dataclass(frozen=True)
class SideEffect:
    kind: SideEffectKind
    target: DeviceKind | None = None


@dataclass(frozen=True)
class AgentReply:
    """What the agent says plus how clients should show it."""

    text: str
    directives: tuple[DisplayDirective, ...] = (DisplayDirective.APPEND_BUBBLE,)
    side_effect: SideEffect | None = None

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("a reply must carry text")


@dataclass(frozen=True)
class ReplyTemplates:
    by_key: dict[str, str]

    def render(self, key: str, **slots: str) -> str:
        try:
            template = self.by_key[key]
        except KeyError:
            raise ConfigError(f"no reply template named {key!r}") from None
        try:
            return template.format(**slots)
        except (KeyError, IndexError) as exc:
            raise ConfigError(f"template {key!r} needs slot {exc}") from exc


@dataclass(frozen=True)
class PhraseTrigger:
    phrase: str
    target: DeviceKind

    def __post_init__(self) -> None:
        if not self.phrase.strip():
            raise ConfigError("trigger phrase must be non-empty")


@dataclass(frozen=True)
class TriggerConfig:
    phrase_triggers: tuple[PhraseTrigger, ...]
    proximity_enabled: bool = False
    proximity_threshold_m: float = 3.0

    def __post_init__(self) -> None:
        if not self.phrase_triggers:
            raise ConfigError("at least one phrase trigger is required")
        if self.proximity_threshold_m <= 0:
            raise ConfigError("proximity threshold must be positive")


@dataclass(frozen=True)
class DialogueConfig:
    patterns: dict[IntentKind, tuple[str, ...]]
    templates: ReplyTemplates


def _read_default(name: str) -> str:
    return resources.files("reembody.data").joinpath(name).read_text(encoding="utf-8")


def load_dialogue_config(text: str | None = None) -> DialogueConfig:
    doc = yaml.safe_load(text if text is not None else _read_default(DEFAULT_DIALOGUE_RESOURCE))
    if not isinstance(doc, dict):
        raise ConfigError("dialogue config must be a mapping")
    raw_intents = doc.get("intents")
    if not isinstance(raw_intents, dict):
        raise ConfigError("dialogue config needs an 'intents' mapping")
    patterns: dict[IntentKind, tuple[str, ...]] = {}
    for key, listed in raw_intents.items():
        if key not in _PATTERN_KEYS:
            raise ConfigError(f"unknown intent {key!r} in dialogue config")
        if not isinstance(listed, list) or not listed:
            raise ConfigError(f"intent {key!r} needs a non-empty pattern list")
        patterns[_PATTERN_KEYS[key]] = tuple(str(p) for p in listed)
    missing_intents = set(_PATTERN_KEYS.values()) - set(patterns)
    if missing_intents:
        names = ", ".join(sorted(k.value for k in missing_intents))
        raise ConfigError(f"dialogue config missing patterns for: {names}")
    raw_templates = doc.get("templates")
    if not isinstance(raw_templates, dict):
        raise ConfigError("dialogue config needs a 'templates' mapping")
    missing = [k for k in REQUIRED_TEMPLATE_KEYS if k not in raw_templates]
    if missing:
        raise ConfigError(f"missing reply templates: {', '.join(missing)}")
    templates = ReplyTemplates({str(k): str(v) for k, v in raw_templates.items()})
    return DialogueConfig(patterns=patterns, templates=templates)


def load_triggers(text: str | None = None) -> TriggerConfig:
    doc = yaml.safe_load(text if text is not None else _read_default(DEFAULT_TRIGGERS_RESOURCE))
    if not isinstance(doc, dict):
        raise ConfigError("trigger config must be a mapping")
    raw = doc.get("phrase_triggers")
    if not isinstance(raw, list) or not raw:
        raise ConfigError("trigger config needs a non-empty 'phrase_triggers' list")
    triggers = []
    for entry in raw:
        if not isinstance(entry, dict) or "phrase" not in entry or "target" not in entry:
            raise ConfigError(f"bad phrase trigger entry: {entry!r}")
        try:
            target = DeviceKind(entry["target"])
        except ValueError:
            raise ConfigError(
                f"trigger target must be one of {[k.value for k in DeviceKind]}, "
                f"got {entry['target']!r}"
            ) from None
        triggers.append(PhraseTrigger(phrase=str(entry["phrase"]), target=target))
    proximity = doc.get("proximity") or {}
    return TriggerConfig(
        phrase_triggers=tuple(triggers),
        proximity_enabled=bool(proximity.get("enabled", False)),
        proximity_threshold_m=float(proximity.get("threshold_m", 3.0)),
    )


def normalize(text: str) -> str:
    lowered = text.lower()
    cleaned = re.sub(r"[^a-z0-9' ]+", " ", lowered)
    return re.sub(r" +", " ", cleaned).strip()


def _contains(text_norm: str, phrase_norm: str) -> bool:
    return f" {text_norm} ".find(f" {phrase_norm} ") >= 0


class IntentParser:
    """Resolves utterance text to one intent of the closed set.

    Priority: hand-off triggers, arrival confirmation, destination requests,
    location statements, full-route and next-step requests, greetings; the
    first match wins, anything else is Unknown.
    """

    def __init__(
        self,
        graph: RouteGraph,
        config: DialogueConfig,
        triggers: TriggerConfig,
    ) -> None:
        self.graph = graph
        self.config = config
        self.triggers = triggers
        self._aliases = self._build_aliases(graph)

    @staticmethod
    def _build_aliases(graph: RouteGraph) -> list[tuple[str, bool, str]]:
        """(alias, alias-is-exact-label, node_id), longest and exact first."""
        entries: list[tuple[str, bool, str]] = []
        for node in graph.nodes.values():
            label = normalize(node.label)
            seen = {label}
            entries.append((label, True, node.node_id))
            if node.shape is not None and node.color is not None:
                shape_word = "circle" if node.shape.value == "Disk" else node.shape.value.lower()
                alias = f"{node.color.value.lower()} {shape_word}"
                if alias not in seen:
                    seen.add(alias)
                    entries.append((alias, False, node.node_id))
            id_alias = normalize(node.node_id.replace("_", " "))
            if id_alias not in seen:
                entries.append((id_alias, False, node.node_id))
        entries.sort(key=lambda e: (-len(e[0]), not e[1], e[2]))
        return entries

    def resolve_node(self, text_norm: str) -> str | None:
        """Most specific landmark or place mentioned anywhere in the text."""
        for alias, _is_label, node_id in self._aliases:
            if _contains(text_norm, alias):
                return node_id
        return None

    def _match_patterns(self, text_norm: str, kind: IntentKind) -> tuple[bool, str | None]:
        """(pattern literal matched, resolved slot node or None)."""
        node: str | None = None
        for pattern in self.config.patterns[kind]:
            literal = normalize(pattern.replace("{place}", " ").replace("{landmark}", " "))
            if not literal or not _contains(text_norm, literal):
                continue
            if "{place}" in pattern or "{landmark}" in pattern:
                node = self.resolve_node(text_norm)
                if node is None:
                    continue
            return True, node
        return False, None

    def parse(self, text: str) -> Intent:
        text_norm = normalize(text)
        if not text_norm:
            return Intent.unknown()
        for trigger in self.triggers.phrase_triggers:
            if _contains(text_norm, normalize(trigger.phrase)):
                return Intent.handoff_request(trigger.target)
        matched, _ = self._match_patterns(text_norm, IntentKind.CONFIRM_ARRIVAL)
        if matched:
            return Intent.confirm_arrival()
        matched, place = self._match_patterns(text_norm, IntentKind.ASK_DESTINATION)
        if matched and place is not None:
            return Intent.ask_destination(place)
        matched, landmark = self._match_patterns(text_norm, IntentKind.PROVIDE_LOCATION)
        if matched and landmark is not None:
            return Intent.provide_location(landmark)
        matched, _ = self._match_patterns(text_norm, IntentKind.ASK_FULL_ROUTE)
        if matched:
            return Intent.ask_full_route()
        matched, _ = self._match_patterns(text_norm, IntentKind.ASK_NEXT_STEP)
        if matched:
            return Intent.ask_next_step()
        matched, _ = self._match_patterns(text_norm, IntentKind.GREET)
        if matched:
            return Intent.greet()
        return Intent.unknown()


def _label(graph: RouteGraph, node_id: str | None) -> str:
    if node_id is None:
        return "there"
    try:
        return graph.node(node_id).label
    except UnknownNodeError:
        return node_id


def _join_instructions(texts: list[str]) -> str:
    if not texts:
        return ""
    parts = [texts[0]]
    for text in texts[1:]:
        parts.append(" Then, " + text[0].lower() + text[1:])
    return "".join(parts)


def _reply(text: str, side_effect: SideEffect | None = None) -> AgentReply:
    return AgentReply(text=text, side_effect=side_effect)


def _elicit(state: SessionState, t: ReplyTemplates, text: str) -> tuple[SessionState, AgentReply]:
    """Move to whichever eliciting phase matches the missing slot."""
    if state.known_location is None:
        return replace(state, phase=DialoguePhase.ELICITING_LOCATION), _reply(text)
    return replace(state, phase=DialoguePhase.ELICITING_DESTINATION), _reply(text)


def _start_guiding(
    state: SessionState,
    graph: RouteGraph,
    t: ReplyTemplates,
    start: str,
    destination: str,
    template_key: str,
    **extra_slots: str,
) -> tuple[SessionState, AgentReply]:
    try:
        plan = plan_route(graph, start, destination)
    except NoRouteError:
        return state, _reply(
            t.render(
                "no_route",
                place=_label(graph, destination),
                landmark=_label(graph, start),
            )
        )
    guided = replace(
        state,
        phase=DialoguePhase.GUIDING,
        destination=destination,
        route_plan=plan,
        step_index=1,
    )
    text = t.render(
        template_key,
        place=_label(graph, destination),
        instruction=plan.legs[0].text,
        **extra_slots,
    )
    return guided, _reply(text)


def step_dialogue(
    state: SessionState,
    intent: Intent,
    graph: RouteGraph,
    templates: ReplyTemplates,
) -> tuple[SessionState, AgentReply]:
    """Advance one user turn.  Pure: no clock, no registry, no I/O.

    Hand-off requests never change the phase here; they surface as a
    BeginHandoff side effect for the session manager to act on, so the
    dialogue core stays ignorant of device registries and timing.
    """
    t = templates
    phase = state.phase

    if phase is DialoguePhase.ARRIVED:
        return state, _reply(t.render("arrived_terminal"))

    if phase is DialoguePhase.HANDOFF_PENDING:
        return state, _reply(t.render("handoff_in_progress"))

    if intent.kind is IntentKind.HANDOFF_REQUEST:
        if phase in HANDOFF_SOURCE_PHASES:
            effect = SideEffect(SideEffectKind.BEGIN_HANDOFF, target=intent.target)
            return state, _reply(t.render("handoff_confirm"), effect)
        return state, _reply(t.render("handoff_not_ready"))

    if intent.kind is IntentKind.GREET:
        if phase is DialoguePhase.GUIDING:
            return state, _reply(t.render("greet_again"))
        if state.known_location is None:
            return (
                replace(state, phase=DialoguePhase.ELICITING_LOCATION),
                _reply(t.render("greet_ask_location")),
            )
        return (
            replace(state, phase=DialoguePhase.ELICITING_DESTINATION),
            _reply(t.render("greet_ask_destination")),
        )

    if intent.kind is IntentKind.PROVIDE_LOCATION:
        landmark = intent.landmark
        assert landmark is not None
        if phase is DialoguePhase.GUIDING:
            assert state.route_plan is not None
            if landmark == state.destination:
                return (
                    replace(state, known_location=landmark),
                    _reply(t.render("route_exhausted", place=_label(graph, landmark))),
                )
            return _start_guiding(
                replace(state, known_location=landmark),
                graph,
                t,
                landmark,
                state.destination or "",
                "relocated",
                landmark=_label(graph, landmark),
            )
        located = replace(state, known_location=landmark)
        if located.destination is not None:
            return _start_guiding(
                located, graph, t, landmark, located.destination, "guiding_started"
            )
        return (
            replace(located, phase=DialoguePhase.ELICITING_DESTINATION),
            _reply(
                t.render("location_ack_ask_destination", landmark=_label(graph, landmark))
            ),
        )

    if intent.kind is IntentKind.ASK_DESTINATION:
        place = intent.place
        assert place is not None
        if phase is DialoguePhase.GUIDING:
            assert state.route_plan is not None
            anchor = state.route_plan.checkpoints[state.step_index]
            if place == anchor:
                return state, _reply(t.render("already_there", place=_label(graph, place)))
            return _start_guiding(state, graph, t, anchor, place, "guiding_started")
        if state.known_location is not None:
            if place == state.known_location:
                return state, _reply(t.render("already_there", place=_label(graph, place)))
            return _start_guiding(
                state, graph, t, state.known_location, place, "guiding_started"
            )
        return (
            replace(state, destination=place, phase=DialoguePhase.ELICITING_LOCATION),
            _reply(t.render("destination_noted_ask_location", place=_label(graph, place))),
        )

    if intent.kind is IntentKind.ASK_FULL_ROUTE:
        if phase is DialoguePhase.GUIDING:
            assert state.route_plan is not None
            remaining = render_instruction(
                graph, state.route_plan, state.step_index, InstructionMode.FULL_ROUTE
            )
            if not remaining:
                return state, _reply(
                    t.render("route_exhausted", place=_label(graph, state.destination))
                )
            advanced = replace(state, step_index=len(state.route_plan.legs))
            text = t.render(
                "full_route",
                instructions=_join_instructions([leg.text for leg in remaining]),
            )
            return advanced, _reply(text, SideEffect(SideEffectKind.ADVANCE_STEP))
        if state.destination is None:
            return _elicit(state, t, t.render("need_destination_first"))
        return _elicit(state, t, t.render("need_location_first"))

    if intent.kind is IntentKind.ASK_NEXT_STEP:
        if phase is DialoguePhase.GUIDING:
            assert state.route_plan is not None
            if state.step_index >= len(state.route_plan.legs):
                return state, _reply(
                    t.render("route_exhausted", place=_label(graph, state.destination))
                )
            leg = state.route_plan.legs[state.step_index]
            advanced = replace(state, step_index=state.step_index + 1)
            return advanced, _reply(
                t.render("next_instruction", instruction=leg.text),
                SideEffect(SideEffectKind.ADVANCE_STEP),
            )
        if state.destination is None:
            return _elicit(state, t, t.render("need_destination_first"))
        return _elicit(state, t, t.render("need_location_first"))

    if intent.kind is IntentKind.CONFIRM_ARRIVAL:
        if phase is DialoguePhase.GUIDING:
            arrived = replace(state, phase=DialoguePhase.ARRIVED)
            return arrived, _reply(
                t.render("arrival_confirmed", place=_label(graph, state.destination)),
                SideEffect(SideEffectKind.COMPLETE),
            )
        return _elicit(state, t, t.render("not_navigating"))

    # Unknown: reprompt in context.
    if phase is DialoguePhase.ELICITING_LOCATION:
        return state, _reply(t.render("reprompt_location"))
    if phase is DialoguePhase.ELICITING_DESTINATION:
        return state, _reply(t.render("reprompt_destination"))
    if phase is DialoguePhase.GUIDING:
        return state, _reply(t.render("reprompt_guiding"))
    return state, _reply(t.render("reprompt_generic"))
