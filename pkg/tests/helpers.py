"""Shared test fixtures: brute-force route oracle and random graph generation.

The oracle enumerates every simple path and picks the minimum of
(total cost, checkpoint sequence), which is the planner's documented
contract.  Random graphs use integer edge costs so that cost sums are exact
and tie-breaking is decided by the path sequence alone, never by float
rounding noise.

This module also hosts the acceptance-criteria registry that conftest
prints as a summary block after every run.
"""

from __future__ import annotations

import math
from random import Random

from reembody.model import (
    DialoguePhase,
    SessionState,
    Speaker,
    Utterance,
    VoiceConfig,
)
from reembody.routes import Edge, Landmark, NoRouteError, RouteGraph, plan_route

# criterion number -> "passed"/"failed", and the measured one-line detail
ACCEPTANCE_OUTCOME: dict[int, str] = {}
ACCEPTANCE_DETAIL: dict[int, str] = {}


def acceptance_detail(criterion: int, text: str) -> None:
    ACCEPTANCE_DETAIL[criterion] = text


def brute_force_route(
    graph: RouteGraph, start: str, destination: str
) -> tuple[float, tuple[str, ...]]:
    """Minimum (cost, path) over all simple paths; raises NoRouteError."""
    best: tuple[float, tuple[str, ...]] | None = None

    def extend(path: tuple[str, ...], cost: float) -> None:
        nonlocal best
        node = path[-1]
        if node == destination:
            candidate = (cost, path)
            if best is None or candidate < best:
                best = candidate
            return
        for edge in graph.adjacency.get(node, ()):
            if edge.dst not in path:
                extend(path + (edge.dst,), cost + edge.cost_m)

    extend((start,), 0.0)
    if best is None:
        raise NoRouteError(f"no route from {start!r} to {destination!r}")
    return best


def random_graph(rng: Random, max_nodes: int = 10) -> RouteGraph:
    """Connected-ish random graph with integer costs and consistent headings."""
    n = rng.randint(3, max_nodes)
    ids = [f"n{i}" for i in range(n)]
    coords = {}
    taken = set()
    for node_id in ids:
        while True:
            point = (rng.randint(0, 40), rng.randint(0, 40))
            if point not in taken:
                taken.add(point)
                break
        coords[node_id] = point
    nodes = {
        node_id: Landmark(
            node_id=node_id,
            label=f"marker {node_id}",
            x=float(coords[node_id][0]),
            y=float(coords[node_id][1]),
        )
        for node_id in ids
    }

    def heading(a: str, b: str) -> float:
        (x1, y1), (x2, y2) = coords[a], coords[b]
        return math.degrees(math.atan2(x2 - x1, y2 - y1)) % 360.0

    pairs: set[tuple[str, str]] = set()
    for i in range(1, n):
        # spanning tree keeps most node pairs reachable
        j = rng.randrange(i)
        pairs.add((ids[j], ids[i]))
        pairs.add((ids[i], ids[j]))
    extra = rng.randint(0, n)
    for _ in range(extra):
        a, b = rng.sample(ids, 2)
        if rng.random() < 0.5:
            pairs.add((a, b))  # one-way extras exercise directedness
        else:
            pairs.add((a, b))
            pairs.add((b, a))
    edges = tuple(
        Edge(src=a, dst=b, cost_m=float(rng.randint(1, 30)), heading_deg=heading(a, b))
        for a, b in sorted(pairs)
    )
    return RouteGraph(nodes=nodes, edges=edges, start=ids[0])


def random_session(rng: Random, graph: RouteGraph) -> SessionState:
    """A structurally valid session with random phase, plan, and transcript."""
    ids = sorted(graph.nodes)
    phase = rng.choice(list(DialoguePhase))
    plan = None
    step = 0
    destination = None
    if phase is DialoguePhase.GUIDING or rng.random() < 0.6:
        while plan is None:
            start, dest = rng.sample(ids, 2)
            try:
                plan = plan_route(graph, start, dest)
            except NoRouteError:
                continue
        destination = plan.destination
        step = rng.randrange(len(plan.legs) + 1)
    ts = 0
    transcript = []
    for i in range(rng.randrange(7)):
        ts += rng.randrange(5001)
        transcript.append(
            Utterance(
                speaker=Speaker.USER if i % 2 == 0 else Speaker.ASSISTANT,
                text=f"turn {i}",
                device_id=rng.choice(("robot1", "watch1")),
                timestamp_ms=ts,
            )
        )
    return SessionState(
        session_id=rng.choice(("s1", "s2", "fuzz")),
        active_device=rng.choice(("robot1", "watch1")),
        phase=phase,
        voice=VoiceConfig(
            voice_id=rng.choice(("apope_low", "ljspeech", "vctk_p239")),
            speaking_rate=rng.choice((0.5, 0.8, 1.0, 1.3, 2.0)),
        ),
        known_location=rng.choice([None] + ids),
        destination=destination,
        route_plan=plan,
        step_index=step,
        transcript=tuple(transcript),
    )


def _named_graph(node_ids: str, edge_spec: dict[tuple[str, str], float]) -> RouteGraph:
    nodes = {
        name: Landmark(node_id=name, label=f"marker {name}", x=float(i), y=0.0)
        for i, name in enumerate(node_ids)
    }
    edges = tuple(
        Edge(src=s, dst=d, cost_m=c, heading_deg=90.0)
        for (s, d), c in sorted(edge_spec.items())
    )
    return RouteGraph(nodes=nodes, edges=edges)


def fixed_small_graphs() -> list[RouteGraph]:
    """Named graphs of at most ten nodes for exhaustive planner checks."""
    diamond = {("a", "b"): 1.0, ("b", "d"): 1.0, ("a", "c"): 1.0, ("c", "d"): 1.0}
    chain = {}
    for left, right in zip("abcde", "bcdef"):
        chain[(left, right)] = 2.0
        chain[(right, left)] = 2.0
    one_way_ring = {("a", "b"): 1.0, ("b", "c"): 1.0, ("c", "a"): 1.0}
    two_rooms = {
        ("a", "b"): 1.0, ("b", "a"): 1.0,
        ("b", "c"): 1.0, ("c", "b"): 1.0,
        ("c", "a"): 2.0, ("a", "c"): 2.0,
        ("c", "d"): 9.0, ("d", "c"): 9.0,  # single expensive bridge
        ("d", "e"): 1.0, ("e", "d"): 1.0,
        ("e", "f"): 1.0, ("f", "e"): 1.0,
        ("f", "d"): 2.0, ("d", "f"): 2.0,
    }
    wheel = {}
    rim = "bcdefghij"
    for left, right in zip(rim, rim[1:] + rim[0]):
        wheel[(left, right)] = 3.0
        wheel[(right, left)] = 3.0
    for spoke in rim:
        wheel[("a", spoke)] = 5.0
        wheel[(spoke, "a")] = 5.0
    return [
        _named_graph("abcd", diamond),
        _named_graph("abcd", {**diamond, ("a", "b"): 5.0}),
        _named_graph("abcd", {**diamond, ("c", "d"): 10.0}),
        _named_graph("abcdef", chain),
        _named_graph("abc", one_way_ring),
        _named_graph("abcdef", two_rooms),
        _named_graph("abcdefghij", wheel),
    ]
