"""Scripted-scenario runner: walking, deviations, transfers, determinism."""

from __future__ import annotations

import pytest

from reembody.routes import default_campus_graph
from reembody.sim import (
    AT_ARRIVAL,
    AT_START,
    Behavior,
    ConditionKind,
    PlannedUtterance,
    ScenarioScript,
    ScriptError,
    build_script,
    generate_paired_scripts,
    generate_scripts,
    run_batch,
    run_scenario,
)
from reembody.telemetry import render_csv

GRAPH = default_campus_graph()


def simple_script(condition=ConditionKind.WEARABLE_ONLY, deviation=0.0, **kwargs):
    utterances = []
    if condition is ConditionKind.WEARABLE_ONLY:
        utterances.append(PlannedUtterance(AT_START, "i am at the entrance"))
    utterances.append(PlannedUtterance(AT_START, "take me to the blue square"))
    if condition is ConditionKind.HANDOFF:
        utterances.append(PlannedUtterance("after_leg:0", "can we continue on my watch"))
    utterances.append(PlannedUtterance(AT_ARRIVAL, "i have arrived"))
    return ScenarioScript(
        participant="P99",
        condition=condition,
        route_id="blue_square",
        utterances=tuple(utterances),
        behavior=Behavior(deviation_probability=deviation),
        **kwargs,
    )


class TestScriptValidation:
    def test_bad_slot_rejected(self):
        with pytest.raises(ScriptError):
            PlannedUtterance("someday", "hello")
        with pytest.raises(ScriptError):
            PlannedUtterance("after_leg:x", "hello")
        with pytest.raises(ScriptError):
            PlannedUtterance("after_leg:-1", "hello")

    def test_empty_text_rejected(self):
        with pytest.raises(ScriptError):
            PlannedUtterance(AT_START, "   ")

    def test_return_to_robot_only_for_robot_condition(self):
        with pytest.raises(ScriptError):
            ScenarioScript(
                participant="P1",
                condition=ConditionKind.HANDOFF,
                route_id="blue_square",
                utterances=(PlannedUtterance(AT_START, "hi"),),
                behavior=Behavior(return_to_robot=True),
            )

    def test_behavior_bounds(self):
        with pytest.raises(ScriptError):
            Behavior(walking_speed_mps=0)
        with pytest.raises(ScriptError):
            Behavior(deviation_probability=1.5)


class TestSingleScenario:
    def test_wearable_walkthrough_arrives(self):
        result = run_scenario(simple_script(), GRAPH, seed=3)
        assert result.arrived
        assert result.final_state.phase.value == "Arrived"
        assert result.task_time_ms and result.task_time_ms > 0
        assert result.interaction_count == 3

    def test_handoff_walkthrough_transfers_and_arrives(self):
        result = run_scenario(simple_script(ConditionKind.HANDOFF), GRAPH, seed=3)
        assert result.arrived
        assert result.final_state.active_device == "watch1"
        record, = result.handoff_records
        assert record.outcome.value == "ActiveOnTarget"
        assert any(r.event == "handoff" for r in result.records)

    def test_walker_time_is_walking_plus_reply_waits(self):
        from reembody.routes import plan_route

        result = run_scenario(simple_script(), GRAPH, seed=3)
        plan = plan_route(GRAPH, "entrance", "blue_square")
        walk_ms = sum(
            max(1, round(GRAPH.edge_between(a, b).cost_m * 1000 / 1.4))
            for a, b in zip(plan.checkpoints, plan.checkpoints[1:])
        )
        # two scripted turns before walking starts, each awaited in full
        assert result.task_time_ms == walk_ms + 2 * 4260

    def test_telemetry_rows_carry_study_context(self):
        result = run_scenario(simple_script(), GRAPH, seed=3)
        for record in result.records:
            assert record.participant == "P99"
            assert record.condition == "WearableOnly"
            assert record.route == "blue_square"

    def test_arrival_event_present_exactly_once(self):
        result = run_scenario(simple_script(), GRAPH, seed=3)
        arrivals = [r for r in result.records if r.event == "arrival"]
        assert len(arrivals) == 1
        assert arrivals[0].detail["at"] == "blue_square"


class TestDeviationPipeline:
    def test_zero_probability_never_flags(self):
        for seed in range(5):
            result = run_scenario(simple_script(deviation=0.0), GRAPH, seed=seed)
            assert result.injected_deviations == []
            assert not any(r.event == "deviation" for r in result.records)

    def test_certain_probability_flags_every_leg(self):
        result = run_scenario(simple_script(deviation=1.0), GRAPH, seed=3)
        flagged = [r for r in result.records if r.event == "deviation"]
        assert len(flagged) == 3  # one per leg of the blue-square route
        assert len(result.injected_deviations) == 3
        assert result.arrived  # the walker recovers and still finishes

    def test_flagged_rows_match_injected_wrong_edges(self):
        result = run_scenario(simple_script(deviation=1.0), GRAPH, seed=11)
        flagged = [r.detail for r in result.records if r.event == "deviation"]
        for injected, observed in zip(result.injected_deviations, flagged):
            assert observed["walked"] == injected["walked"]
            assert observed["expected"] == injected["expected"]


class TestRobotOnly:
    def test_return_trips_make_robot_condition_slower(self):
        fast = run_scenario(simple_script(), GRAPH, seed=3)
        robot_script = ScenarioScript(
            participant="P99",
            condition=ConditionKind.ROBOT_ONLY,
            route_id="blue_square",
            utterances=(
                PlannedUtterance(AT_START, "take me to the blue square"),
                PlannedUtterance("after_leg:0", "next"),
                PlannedUtterance("after_leg:1", "next"),
            ),
            behavior=Behavior(return_to_robot=True),
        )
        slow = run_scenario(robot_script, GRAPH, seed=3)
        assert slow.arrived
        assert slow.task_time_ms > fast.task_time_ms

    def test_return_trip_arithmetic_from_coordinates(self):
        import math

        from reembody.model import DeviceKind, LatencyModel

        robot_script = ScenarioScript(
            participant="P99",
            condition=ConditionKind.ROBOT_ONLY,
            route_id="blue_square",
            utterances=(
                PlannedUtterance(AT_START, "take me to the blue square"),
                PlannedUtterance("after_leg:0", "next"),
                PlannedUtterance("after_leg:1", "next"),
            ),
            behavior=Behavior(return_to_robot=True),
        )
        zero = {
            DeviceKind.STATIONARY: LatencyModel(0, 0, 0),
            DeviceKind.WEARABLE: LatencyModel(0, 0, 0),
        }
        result = run_scenario(robot_script, GRAPH, seed=3, latency=zero)
        assert result.arrived

        def dist(a, b):
            na, nb = GRAPH.node(a), GRAPH.node(b)
            return math.hypot(nb.x - na.x, nb.y - na.y)

        path = ["entrance", "stairs_green_circle", "lift_red_square", "blue_square"]
        forward = sum(dist(a, b) for a, b in zip(path, path[1:]))
        returns = 2 * dist(*path[:2]) + 2 * (dist(*path[:2]) + dist(path[1], path[2]))
        expected_ms = (forward + returns) * 1000 / 1.4
        assert result.task_time_ms == pytest.approx(expected_ms, rel=0.01)

    def test_robot_knows_location_without_being_told(self):
        robot_script = ScenarioScript(
            participant="P99",
            condition=ConditionKind.ROBOT_ONLY,
            route_id="blue_square",
            utterances=(PlannedUtterance(AT_START, "take me to the blue square"),),
        )
        result = run_scenario(robot_script, GRAPH, seed=3)
        assert result.arrived


class TestGeneratedScripts:
    def test_batch_covers_schedule(self):
        scripts = generate_scripts(24, seed=1, graph=GRAPH)
        assert len(scripts) == 72
        handoffs = [s for s in scripts if s.condition is ConditionKind.HANDOFF]
        assert len(handoffs) == 24
        assert all(
            any(u.text == "can we continue on my watch" for u in s.utterances)
            for s in handoffs
        )

    def test_all_generated_scenarios_arrive(self):
        scripts = generate_scripts(6, seed=1, graph=GRAPH)
        batch = run_batch(scripts, GRAPH, seed=1)
        assert all(r.arrived for r in batch.results)

    def test_batch_is_deterministic(self):
        def run():
            scripts = generate_scripts(8, seed=42, graph=GRAPH)
            return render_csv(run_batch(scripts, GRAPH, seed=42).records)

        assert run() == run()

    def test_different_seeds_differ(self):
        a = render_csv(
            run_batch(generate_scripts(4, seed=1, graph=GRAPH), GRAPH, seed=1).records
        )
        b = render_csv(
            run_batch(generate_scripts(4, seed=2, graph=GRAPH), GRAPH, seed=2).records
        )
        assert a != b

    def test_build_script_sets_position(self):
        from reembody.schedule import latin_square_schedule

        assignment = latin_square_schedule(
            1, [c.value for c in ConditionKind], list(GRAPH.study_destinations)
        )[1]
        script = build_script(assignment, seed=0, graph=GRAPH)
        assert script.position == 1


class TestPairedScripts:
    @pytest.mark.parametrize("destination", GRAPH.study_destinations)
    def test_twins_differ_by_exactly_one_transfer(self, destination):
        wearable, handoff = generate_paired_scripts(destination, seed=5, graph=GRAPH)
        base = list(wearable.utterances)
        twin = list(handoff.utterances)
        extras = [u for u in twin if u not in base]
        assert len(twin) == len(base) + 1
        assert len(extras) == 1
        assert "watch" in extras[0].text

    def test_paired_runs_interaction_delta_is_one(self):
        wearable, handoff = generate_paired_scripts("green_circle", seed=5, graph=GRAPH)
        rw = run_scenario(wearable, GRAPH, seed=5)
        rh = run_scenario(handoff, GRAPH, seed=5)
        assert rw.arrived and rh.arrived
        assert rh.interaction_count == rw.interaction_count + 1
        # the twin's extra input is a real transfer, not a refused request
        assert [r.outcome.value for r in rh.handoff_records] == ["ActiveOnTarget"]
        assert rh.final_state.active_device == "watch1"
        assert rw.final_state.active_device == "watch1"
        assert not rw.handoff_records
