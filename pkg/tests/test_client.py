"""Live-socket scenario client driven against a real server in a thread."""

import asyncio
import threading

import pytest

from reembody.client import EndpointError, EndpointRunner, parse_endpoint, run_scenarios_endpoint
from reembody.clock import MonotonicClock
from reembody.gateway import Gateway
from reembody.routes import default_campus_graph
from reembody.server import GatewayServer
from reembody.sim import Behavior, ConditionKind, PlannedUtterance, ScenarioRunner, ScenarioScript

FAST_LATENCY = {
    "stationary": {"stt_ms": 1, "dialogue_ms": 1, "tts_ms": 1, "jitter_fraction": 0.0},
    "wearable": {"stt_ms": 2, "dialogue_ms": 1, "tts_ms": 2, "jitter_fraction": 0.0},
}
SPRINT = Behavior(walking_speed_mps=800.0)


class LiveServer:
    """Runs a GatewayServer on its own event loop thread."""

    def __init__(self, gateway: Gateway) -> None:
        self.server = GatewayServer(gateway, port=0)
        self._loop: asyncio.AbstractEventLoop | None = None
        self._stop: asyncio.Event | None = None
        self._ready = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)

    def _run(self) -> None:
        asyncio.run(self._main())

    async def _main(self) -> None:
        self._loop = asyncio.get_running_loop()
        self._stop = asyncio.Event()
        await self.server.start()
        self._ready.set()
        await self._stop.wait()
        await self.server.stop()

    def __enter__(self) -> "LiveServer":
        self._thread.start()
        if not self._ready.wait(10):
            raise RuntimeError("server thread did not come up")
        return self

    def __exit__(self, *exc) -> None:
        self._loop.call_soon_threadsafe(self._stop.set)
        self._thread.join(10)

    @property
    def endpoint(self) -> str:
        return f"127.0.0.1:{self.server.bound_port}"


@pytest.fixture()
def graph():
    return default_campus_graph()


@pytest.fixture()
def live(graph):
    gateway = Gateway(graph, clock=MonotonicClock(), handoff_latency_ms=40)
    with LiveServer(gateway) as server:
        yield server


def wearable_script(participant="P01"):
    return ScenarioScript(
        participant=participant,
        condition=ConditionKind.WEARABLE_ONLY,
        route_id="blue_square",
        utterances=(
            PlannedUtterance("start", "i am at the entrance"),
            PlannedUtterance("start", "where is the blue square"),
            PlannedUtterance("after_leg:1", "next"),
            PlannedUtterance("arrival", "i have arrived"),
        ),
        behavior=SPRINT,
    )


def handoff_script(participant="P02"):
    return ScenarioScript(
        participant=participant,
        condition=ConditionKind.HANDOFF,
        route_id="blue_square",
        utterances=(
            PlannedUtterance("start", "where is the blue square"),
            PlannedUtterance("after_leg:0", "can we continue on my watch"),
            PlannedUtterance("after_leg:1", "next"),
            PlannedUtterance("arrival", "i have arrived"),
        ),
        behavior=SPRINT,
    )


def events(records, name):
    return [r for r in records if r.event == name]


class TestEndpointParsing:
    def test_host_port(self):
        assert parse_endpoint("10.0.0.5:900") == ("10.0.0.5", 900)

    def test_missing_port(self):
        with pytest.raises(EndpointError):
            parse_endpoint("just-a-host")

    def test_unreachable_endpoint(self, graph):
        runner = EndpointRunner(wearable_script(), graph, "127.0.0.1:1", latency=FAST_LATENCY)
        with pytest.raises(EndpointError):
            runner.run()


class TestLiveScenario:
    def test_wearable_scenario_arrives(self, graph, live):
        runner = EndpointRunner(wearable_script(), graph, live.endpoint, latency=FAST_LATENCY)
        records = runner.run()
        assert len(events(records, "interaction")) == 4
        assert len(events(records, "arrival")) == 1
        assert all(r.detail["ms"] >= 0 for r in events(records, "response"))
        arrival = events(records, "arrival")[0]
        assert arrival.detail["at"] == "blue_square"

    def test_handoff_scenario_transfers(self, graph, live):
        runner = EndpointRunner(handoff_script(), graph, live.endpoint, latency=FAST_LATENCY)
        records = runner.run()
        handoffs = events(records, "handoff")
        assert len(handoffs) == 1
        detail = handoffs[0].detail
        assert detail["outcome"] == "ActiveOnTarget"
        assert detail["from"] == "robot1"
        assert detail["to"] == "watch1"
        assert detail["latency_ms"] >= 40
        late = [r for r in events(records, "interaction") if r.ts_ms > handoffs[0].ts_ms]
        assert late and all(r.detail["device"] == "watch1" for r in late)

    def test_interaction_counts_match_in_process(self, graph, live):
        script = handoff_script("P03")
        live_records = EndpointRunner(script, graph, live.endpoint, latency=FAST_LATENCY).run()
        local = ScenarioRunner(script, graph, handoff_latency_ms=40).run()
        assert len(events(live_records, "interaction")) == local.interaction_count
        assert len(events(live_records, "arrival")) == 1
        assert local.arrived

    def test_batch_concatenates_sessions(self, graph, live):
        scripts = [wearable_script("P04"), handoff_script("P05")]
        records = run_scenarios_endpoint(scripts, graph, live.endpoint, latency=FAST_LATENCY)
        assert {r.participant for r in records} == {"P04", "P05"}
        assert len(events(records, "arrival")) == 2
