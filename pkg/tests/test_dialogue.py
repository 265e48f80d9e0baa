"""Dialogue tests: config loading, intent parsing, and phase transitions."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reembody.dialogue import (
    AgentReply,
    ConfigError,
    IntentParser,
    SideEffectKind,
    _join_instructions,
    load_dialogue_config,
    load_triggers,
    normalize,
    step_dialogue,
)
from reembody.model import (
    DeviceKind,
    DialoguePhase,
    Intent,
    IntentKind,
    SessionState,
    VoiceConfig,
)
from reembody.routes import default_campus_graph


@pytest.fixture(scope="module")
def graph():
    return default_campus_graph()


@pytest.fixture(scope="module")
def config():
    return load_dialogue_config()


@pytest.fixture(scope="module")
def triggers():
    return load_triggers()


@pytest.fixture(scope="module")
def parser(graph, config, triggers):
    return IntentParser(graph, config, triggers)


def session(phase=DialoguePhase.GREETING, **kw) -> SessionState:
    defaults = dict(
        session_id="s1",
        active_device="robot1",
        phase=phase,
        voice=VoiceConfig(),
    )
    defaults.update(kw)
    return SessionState(**defaults)


class TestConfigLoading:
    def test_default_config_loads(self, config):
        assert config.templates.render("handoff_confirm") == "Okay!"
        assert (
            config.templates.render("handoff_greeting")
            == "Hi, I'm here. Let's continue."
        )

    def test_missing_template_named(self):
        text = "intents:\n  greet: ['hi']\ntemplates:\n  greet_again: 'x'\n"
        with pytest.raises(ConfigError, match="missing patterns"):
            load_dialogue_config(text)

    def test_missing_template_key_reported(self):
        full = load_dialogue_config()
        doc = {
            "intents": {k.name.lower(): ["x"] for k in ()},
        }
        # build a config with all intents but one template missing
        intents = {
            "greet": ["hi"],
            "provide_location": ["i am at {landmark}"],
            "ask_destination": ["where is {place}"],
            "ask_full_route": ["full route"],
            "ask_next_step": ["next"],
            "confirm_arrival": ["arrived"],
        }
        templates = dict(full.templates.by_key)
        templates.pop("no_route")
        import yaml

        text = yaml.safe_dump({"intents": intents, "templates": templates})
        with pytest.raises(ConfigError, match="no_route"):
            load_dialogue_config(text)

    def test_unknown_intent_rejected(self):
        text = "intents:\n  teleport: ['beam me up']\ntemplates: {}\n"
        with pytest.raises(ConfigError, match="teleport"):
            load_dialogue_config(text)

    def test_template_slot_errors_are_named(self, config):
        with pytest.raises(ConfigError, match="guiding_started"):
            config.templates.render("guiding_started")

    def test_triggers_load(self, triggers):
        phrases = [t.phrase for t in triggers.phrase_triggers]
        assert "can we continue on my watch" in phrases
        assert "hop over to my watch" in phrases
        assert "can you come with me" in phrases

    def test_trigger_target_validated(self):
        text = "phrase_triggers:\n  - phrase: 'x'\n    target: Toaster\n"
        with pytest.raises(ConfigError, match="Toaster"):
            load_triggers(text)

    def test_empty_triggers_rejected(self):
        with pytest.raises(ConfigError, match="non-empty"):
            load_triggers("phrase_triggers: []\n")


class TestNormalize:
    def test_punctuation_and_case(self):
        assert normalize("Hi, where IS the Student Cafe?") == (
            "hi where is the student cafe"
        )

    def test_apostrophes_survive(self):
        assert normalize("I've arrived!") == "i've arrived"


class TestIntentParsing:
    def test_storyboard_opening_is_destination_ask(self, parser):
        intent = parser.parse("Hi, where is the student cafe?")
        assert intent == Intent.ask_destination("cafe")

    def test_trigger_phrases_map_to_handoff(self, parser):
        for text, target in [
            ("Can we continue on my watch?", DeviceKind.WEARABLE),
            ("Can you come with me?", DeviceKind.WEARABLE),
            ("Hop over to my watch", DeviceKind.WEARABLE),
            ("please go back to the robot now", DeviceKind.STATIONARY),
        ]:
            intent = parser.parse(text)
            assert intent.kind is IntentKind.HANDOFF_REQUEST, text
            assert intent.target is target

    def test_trigger_outranks_next_step(self, parser):
        # "continue" alone is a next-step ask; the trigger phrase wins.
        assert parser.parse("continue").kind is IntentKind.ASK_NEXT_STEP
        assert (
            parser.parse("can we continue on my watch").kind
            is IntentKind.HANDOFF_REQUEST
        )

    def test_greeting_requires_word_boundary(self, parser):
        assert parser.parse("hi there").kind is IntentKind.GREET
        assert parser.parse("this way then").kind is IntentKind.UNKNOWN

    def test_provide_location(self, parser):
        intent = parser.parse("I am at the green circle by the stairs")
        assert intent == Intent.provide_location("stairs_green_circle")

    def test_longest_alias_wins(self, parser):
        intent = parser.parse("take me to the second red square")
        assert intent == Intent.ask_destination("decoy_red_square")

    def test_exact_label_outranks_partial(self, parser):
        # three green circles exist; the plain label owns the plain name
        intent = parser.parse("where is the green circle")
        assert intent == Intent.ask_destination("green_circle")

    def test_ambiguous_alias_resolves_to_smallest_id(self, parser):
        intent = parser.parse("where is the red square")
        assert intent == Intent.ask_destination("decoy_red_square")

    def test_unresolvable_place_is_unknown(self, parser):
        assert parser.parse("where is the waffle house").kind is IntentKind.UNKNOWN

    def test_arrival_confirmations(self, parser):
        for text in ("I have arrived", "found it!", "I've arrived."):
            assert parser.parse(text).kind is IntentKind.CONFIRM_ARRIVAL, text

    def test_full_route_and_next(self, parser):
        assert parser.parse("give me the full route").kind is IntentKind.ASK_FULL_ROUTE
        assert parser.parse("what's next?").kind is IntentKind.ASK_NEXT_STEP

    def test_destination_outranks_location(self, parser):
        intent = parser.parse("i am at the entrance take me to the blue square")
        assert intent.kind is IntentKind.ASK_DESTINATION

    def test_empty_is_unknown(self, parser):
        assert parser.parse("").kind is IntentKind.UNKNOWN
        assert parser.parse("!!!").kind is IntentKind.UNKNOWN

    @settings(deadline=None, max_examples=80)
    @given(st.text(max_size=80))
    def test_parser_total_over_arbitrary_text(self, text):
        parser = IntentParser(
            default_campus_graph(), load_dialogue_config(), load_triggers()
        )
        intent = parser.parse(text)
        assert intent.kind in set(IntentKind)


class TestGreetingPhase:
    def test_greet_without_location_asks_location(self, graph, config):
        state, reply = step_dialogue(session(), Intent.greet(), graph, config.templates)
        assert state.phase is DialoguePhase.ELICITING_LOCATION
        assert "Where are you" in reply.text

    def test_greet_with_seeded_location_asks_destination(self, graph, config):
        start = session(known_location="entrance")
        state, reply = step_dialogue(start, Intent.greet(), graph, config.templates)
        assert state.phase is DialoguePhase.ELICITING_DESTINATION
        assert "Where would you like to go" in reply.text

    def test_destination_ask_with_seeded_location_starts_guiding(self, graph, config):
        start = session(known_location="entrance")
        state, reply = step_dialogue(
            start, Intent.ask_destination("cafe"), graph, config.templates
        )
        assert state.phase is DialoguePhase.GUIDING
        assert state.destination == "cafe"
        assert state.step_index == 1
        assert state.route_plan is not None
        assert state.route_plan.legs[0].text in reply.text

    def test_destination_ask_without_location_elicits_location(self, graph, config):
        state, reply = step_dialogue(
            session(), Intent.ask_destination("cafe"), graph, config.templates
        )
        assert state.phase is DialoguePhase.ELICITING_LOCATION
        assert state.destination == "cafe"
        assert "Where are you" in reply.text

    def test_handoff_in_greeting_is_refused_without_side_effect(self, graph, config):
        state, reply = step_dialogue(
            session(),
            Intent.handoff_request(DeviceKind.WEARABLE),
            graph,
            config.templates,
        )
        assert state.phase is DialoguePhase.GREETING
        assert reply.side_effect is None


class TestElicitingPhases:
    def test_location_then_destination_flow(self, graph, config):
        s0 = session(DialoguePhase.ELICITING_LOCATION)
        s1, r1 = step_dialogue(
            s0, Intent.provide_location("entrance"), graph, config.templates
        )
        assert s1.phase is DialoguePhase.ELICITING_DESTINATION
        assert "entrance" in r1.text
        s2, r2 = step_dialogue(
            s1, Intent.ask_destination("blue_square"), graph, config.templates
        )
        assert s2.phase is DialoguePhase.GUIDING
        assert s2.route_plan.checkpoints == (
            "entrance",
            "stairs_green_circle",
            "lift_red_square",
            "blue_square",
        )

    def test_location_with_pending_destination_starts_guiding(self, graph, config):
        s0 = session(DialoguePhase.ELICITING_LOCATION, destination="cafe")
        s1, r1 = step_dialogue(
            s0, Intent.provide_location("entrance"), graph, config.templates
        )
        assert s1.phase is DialoguePhase.GUIDING
        assert s1.destination == "cafe"

    def test_next_step_before_destination_redirects(self, graph, config):
        s0 = session(DialoguePhase.ELICITING_DESTINATION, known_location="entrance")
        s1, r1 = step_dialogue(s0, Intent.ask_next_step(), graph, config.templates)
        assert s1.phase is DialoguePhase.ELICITING_DESTINATION
        assert "destination" in r1.text

    def test_unknown_reprompts_in_context(self, graph, config):
        s0 = session(DialoguePhase.ELICITING_LOCATION)
        _, r = step_dialogue(s0, Intent.unknown(), graph, config.templates)
        assert "landmark" in r.text

    def test_handoff_from_eliciting_carries_side_effect(self, graph, config):
        s0 = session(DialoguePhase.ELICITING_DESTINATION, known_location="entrance")
        s1, r1 = step_dialogue(
            s0, Intent.handoff_request(DeviceKind.WEARABLE), graph, config.templates
        )
        assert r1.text == "Okay!"
        assert r1.side_effect is not None
        assert r1.side_effect.kind is SideEffectKind.BEGIN_HANDOFF
        assert r1.side_effect.target is DeviceKind.WEARABLE
        assert s1.phase is DialoguePhase.ELICITING_DESTINATION


def guiding_session(graph, config, destination="blue_square"):
    start = session(known_location="entrance")
    state, _ = step_dialogue(
        start, Intent.ask_destination(destination), graph, config.templates
    )
    return state


class TestGuidingPhase:
    def test_next_step_walks_the_plan(self, graph, config):
        state = guiding_session(graph, config)
        legs = state.route_plan.legs
        state, r1 = step_dialogue(state, Intent.ask_next_step(), graph, config.templates)
        assert legs[1].text in r1.text
        assert state.step_index == 2
        assert r1.side_effect.kind is SideEffectKind.ADVANCE_STEP
        state, r2 = step_dialogue(state, Intent.ask_next_step(), graph, config.templates)
        assert legs[2].text in r2.text
        assert state.step_index == 3
        state, r3 = step_dialogue(state, Intent.ask_next_step(), graph, config.templates)
        assert "last step" in r3.text
        assert state.step_index == 3

    def test_full_route_announces_remaining_and_exhausts(self, graph, config):
        state = guiding_session(graph, config)
        state, reply = step_dialogue(
            state, Intent.ask_full_route(), graph, config.templates
        )
        assert state.step_index == len(state.route_plan.legs)
        for leg in state.route_plan.legs[1:]:
            assert leg.text[5:] in reply.text  # decapitalized joins keep the tail

    def test_confirm_arrival_completes(self, graph, config):
        state = guiding_session(graph, config)
        state, reply = step_dialogue(
            state, Intent.confirm_arrival(), graph, config.templates
        )
        assert state.phase is DialoguePhase.ARRIVED
        assert reply.side_effect.kind is SideEffectKind.COMPLETE
        assert "blue square" in reply.text

    def test_confirm_arrival_after_full_route(self, graph, config):
        state = guiding_session(graph, config)
        state, _ = step_dialogue(state, Intent.ask_full_route(), graph, config.templates)
        state, reply = step_dialogue(
            state, Intent.confirm_arrival(), graph, config.templates
        )
        assert state.phase is DialoguePhase.ARRIVED

    def test_mid_route_destination_change_replans_from_anchor(self, graph, config):
        state = guiding_session(graph, config)
        state, _ = step_dialogue(state, Intent.ask_next_step(), graph, config.templates)
        # anchor after two announced legs is lift_red_square
        anchor = state.route_plan.checkpoints[state.step_index]
        assert anchor == "lift_red_square"
        state, reply = step_dialogue(
            state, Intent.ask_destination("cafe"), graph, config.templates
        )
        assert state.destination == "cafe"
        assert state.route_plan.checkpoints[0] == anchor
        assert state.step_index == 1

    def test_destination_change_to_anchor_says_already_there(self, graph, config):
        state = guiding_session(graph, config)
        state, _ = step_dialogue(state, Intent.ask_next_step(), graph, config.templates)
        state2, reply = step_dialogue(
            state, Intent.ask_destination("lift_red_square"), graph, config.templates
        )
        assert state2 == state
        assert "already" in reply.text

    def test_relocation_replans(self, graph, config):
        state = guiding_session(graph, config)
        state2, reply = step_dialogue(
            state,
            Intent.provide_location("hall_green_square"),
            graph,
            config.templates,
        )
        assert state2.known_location == "hall_green_square"
        assert state2.route_plan.checkpoints[0] == "hall_green_square"
        assert state2.route_plan.checkpoints[-1] == "blue_square"
        assert state2.step_index == 1
        assert "Got it" in reply.text

    def test_greet_mid_guiding_keeps_state(self, graph, config):
        state = guiding_session(graph, config)
        state2, reply = step_dialogue(state, Intent.greet(), graph, config.templates)
        assert state2 == state
        assert "again" in reply.text


class TestTerminalAndPending:
    def test_arrived_is_terminal_for_everything(self, graph, config):
        state = guiding_session(graph, config)
        state, _ = step_dialogue(state, Intent.confirm_arrival(), graph, config.templates)
        for intent in (
            Intent.greet(),
            Intent.ask_next_step(),
            Intent.handoff_request(DeviceKind.WEARABLE),
            Intent.unknown(),
        ):
            after, reply = step_dialogue(state, intent, graph, config.templates)
            assert after == state
            assert reply.side_effect is None
            assert "finished" in reply.text

    def test_handoff_pending_parks_every_intent(self, graph, config):
        state = guiding_session(graph, config)
        from dataclasses import replace

        pending = replace(state, phase=DialoguePhase.HANDOFF_PENDING)
        for intent in (
            Intent.handoff_request(DeviceKind.WEARABLE),
            Intent.ask_next_step(),
            Intent.unknown(),
        ):
            after, reply = step_dialogue(pending, intent, graph, config.templates)
            assert after == pending
            assert reply.side_effect is None
            assert "One moment" in reply.text


class TestJoin:
    def test_join_decapitalizes_tail(self):
        joined = _join_instructions(["Go left.", "Go right.", "Stop."])
        assert joined == "Go left. Then, go right. Then, stop."

    def test_join_empty(self):
        assert _join_instructions([]) == ""


class TestReplyInvariants:
    @settings(deadline=None, max_examples=120)
    @given(st.data())
    def test_every_intent_yields_nonempty_reply_and_legal_phase(self, data):
        graph = default_campus_graph()
        config = load_dialogue_config()
        phase = data.draw(st.sampled_from(list(DialoguePhase)))
        known = data.draw(st.sampled_from([None, "entrance", "cafe"]))
        kind = data.draw(st.sampled_from(list(IntentKind)))
        intent = {
            IntentKind.GREET: Intent.greet(),
            IntentKind.PROVIDE_LOCATION: Intent.provide_location("entrance"),
            IntentKind.ASK_DESTINATION: Intent.ask_destination("cafe"),
            IntentKind.ASK_FULL_ROUTE: Intent.ask_full_route(),
            IntentKind.ASK_NEXT_STEP: Intent.ask_next_step(),
            IntentKind.HANDOFF_REQUEST: Intent.handoff_request(DeviceKind.WEARABLE),
            IntentKind.CONFIRM_ARRIVAL: Intent.confirm_arrival(),
            IntentKind.UNKNOWN: Intent.unknown(),
        }[kind]
        plan = None
        step = 0
        if phase in (DialoguePhase.GUIDING, DialoguePhase.HANDOFF_PENDING):
            from reembody.routes import plan_route

            plan = plan_route(graph, "entrance", "blue_square")
            step = data.draw(st.integers(min_value=0, max_value=len(plan.legs)))
            known = "entrance"
        state = session(
            phase,
            known_location=known,
            destination="blue_square" if plan else None,
            route_plan=plan,
            step_index=step,
        )
        after, reply = step_dialogue(state, intent, graph, config.templates)
        assert reply.text
        assert isinstance(reply, AgentReply)
        # phase machine never invents a handoff-pending or arrived phase here
        if phase is not DialoguePhase.HANDOFF_PENDING:
            assert after.phase is not DialoguePhase.HANDOFF_PENDING
        if phase is not DialoguePhase.ARRIVED and kind is not IntentKind.CONFIRM_ARRIVAL:
            assert after.phase is not DialoguePhase.ARRIVED
        # transcript untouched by the phase machine itself
        assert after.transcript == state.transcript
