"""Landmark world model: route graphs, shortest-path planning, spoken instructions.

The world is a directed graph of visual landmarks (colored shapes mounted in a
building) plus named places such as a cafe.  Edges carry a walking cost in
meters and the compass heading a walker faces while traversing them.  A route
plan is an ordered list of checkpoints with one spoken instruction per leg.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

DEFAULT_GRAPH_RESOURCE = "campus_default.json"


class RouteError(Exception):
    """Base class for world-model failures."""


class RouteParseError(RouteError):
    """A route document is malformed; the message names the offending element."""


class UnknownNodeError(RouteError):
    """A referenced node id does not exist in the graph."""


class NoRouteError(RouteError):
    """No path connects the requested start and destination."""


class Shape(str, Enum):
    SQUARE = "Square"
    DISK = "Disk"
    TRIANGLE = "Triangle"


class Color(str, Enum):
    RED = "Red"
    GREEN = "Green"
    BLUE = "Blue"


class Turn(str, Enum):
    """Relative turn at the start of a leg, from the walker's point of view."""

    STRAIGHT = "Straight"
    LEFT = "Left"
    RIGHT = "Right"
    BACK = "Back"


class InstructionMode(str, Enum):
    STEP_BY_STEP = "StepByStep"
    FULL_ROUTE = "FullRoute"


@dataclass(frozen=True)
class Landmark:
    """A node in the world: a colored shape, or a shapeless named place.

    Positions are in meters on an arbitrary local grid and exist only to make
    headings and costs mutually consistent in authored files.
    """

    node_id: str
    label: str
    x: float
    y: float
    shape: Shape | None = None
    color: Color | None = None

    def __post_init__(self) -> None:
        if not self.node_id:
            raise RouteParseError("node with empty id")
        if not self.label:
            raise RouteParseError(f"node {self.node_id!r} has an empty label")
        if (self.shape is None) != (self.color is None):
            raise RouteParseError(
                f"node {self.node_id!r} must set shape and color together"
            )


@dataclass(frozen=True)
class Edge:
    """Directed walkable link.  Heading is a compass bearing in [0, 360)."""

    src: str
    dst: str
    cost_m: float
    heading_deg: float

    def __post_init__(self) -> None:
        if self.cost_m <= 0:
            raise RouteParseError(f"edge {self.src}->{self.dst} has non-positive cost")
        if not 0.0 <= self.heading_deg < 360.0:
            raise RouteParseError(
                f"edge {self.src}->{self.dst} heading {self.heading_deg} out of [0, 360)"
            )


@dataclass(frozen=True)
class Instruction:
    """One spoken guidance step covering a single leg of a plan."""

    leg_index: int
    text: str
    relative_turn: Turn

    def to_dict(self) -> dict:
        return {
            "leg_index": self.leg_index,
            "text": self.text,
            "relative_turn": self.relative_turn.value,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Instruction":
        return cls(
            leg_index=int(d["leg_index"]),
            text=str(d["text"]),
            relative_turn=Turn(d["relative_turn"]),
        )


@dataclass(frozen=True)
class RoutePlan:
    """Checkpoint sequence plus one instruction per consecutive pair."""

    checkpoints: tuple[str, ...]
    legs: tuple[Instruction, ...]
    total_cost_m: float

    def __post_init__(self) -> None:
        if len(self.checkpoints) < 2:
            raise RouteError("a plan needs at least a start and a destination")
        if len(self.legs) != len(self.checkpoints) - 1:
            raise RouteError("plan must carry exactly one instruction per leg")

    @property
    def start(self) -> str:
        return self.checkpoints[0]

    @property
    def destination(self) -> str:
        return self.checkpoints[-1]

    def to_dict(self) -> dict:
        return {
            "checkpoints": list(self.checkpoints),
            "legs": [leg.to_dict() for leg in self.legs],
            "total_cost_m": self.total_cost_m,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RoutePlan":
        return cls(
            checkpoints=tuple(str(c) for c in d["checkpoints"]),
            legs=tuple(Instruction.from_dict(leg) for leg in d["legs"]),
            total_cost_m=float(d["total_cost_m"]),
        )


@dataclass(frozen=True)
class RouteGraph:
    """Validated directed landmark graph with an optional designated start node."""

    nodes: dict[str, Landmark]
    edges: tuple[Edge, ...]
    start: str | None = None
    study_destinations: tuple[str, ...] = ()
    adjacency: dict[str, tuple[Edge, ...]] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        seen: set[tuple[str, str]] = set()
        adj: dict[str, list[Edge]] = {node_id: [] for node_id in self.nodes}
        for edge in self.edges:
            for endpoint in (edge.src, edge.dst):
                if endpoint not in self.nodes:
                    raise RouteParseError(
                        f"edge {edge.src}->{edge.dst} references unknown node {endpoint!r}"
                    )
            if (edge.src, edge.dst) in seen:
                raise RouteParseError(f"duplicate edge {edge.src}->{edge.dst}")
            seen.add((edge.src, edge.dst))
            adj[edge.src].append(edge)
        if self.start is not None and self.start not in self.nodes:
            raise RouteParseError(f"start node {self.start!r} does not exist")
        for dest in self.study_destinations:
            if dest not in self.nodes:
                raise RouteParseError(f"destination {dest!r} does not exist")
        object.__setattr__(
            self,
            "adjacency",
            {node_id: tuple(edges) for node_id, edges in adj.items()},
        )

    def node(self, node_id: str) -> Landmark:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f"unknown node {node_id!r}") from None

    def edge_between(self, src: str, dst: str) -> Edge | None:
        for edge in self.adjacency.get(src, ()):
            if edge.dst == dst:
                return edge
        return None


def _node_from_dict(d: Mapping) -> Landmark:
    if "id" not in d:
        raise RouteParseError(f"node missing id: {dict(d)!r}")
    node_id = str(d["id"])
    for key in ("label", "x", "y"):
        if key not in d:
            raise RouteParseError(f"node {node_id!r} missing {key!r}")
    shape = d.get("shape")
    color = d.get("color")
    try:
        return Landmark(
            node_id=node_id,
            label=str(d["label"]),
            x=float(d["x"]),
            y=float(d["y"]),
            shape=Shape(shape) if shape is not None else None,
            color=Color(color) if color is not None else None,
        )
    except ValueError as exc:
        raise RouteParseError(f"node {node_id!r}: {exc}") from exc


def _edge_from_dict(d: Mapping) -> Edge:
    for key in ("from", "to", "cost_m", "heading_deg"):
        if key not in d:
            raise RouteParseError(f"edge missing {key!r}: {dict(d)!r}")
    try:
        return Edge(
            src=str(d["from"]),
            dst=str(d["to"]),
            cost_m=float(d["cost_m"]),
            heading_deg=float(d["heading_deg"]),
        )
    except (TypeError, ValueError) as exc:
        raise RouteParseError(f"edge {d.get('from')}->{d.get('to')}: {exc}") from exc


def load_route_graph(text: str) -> RouteGraph:
    """Parse a JSON route document into a validated graph.

    Unknown top-level keys are ignored so documents can carry annotations.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RouteParseError(f"route document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise RouteParseError("route document must be a JSON object")
    raw_nodes = doc.get("nodes")
    raw_edges = doc.get("edges")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise RouteParseError("route document needs a non-empty 'nodes' list")
    if not isinstance(raw_edges, list):
        raise RouteParseError("route document needs an 'edges' list")
    nodes: dict[str, Landmark] = {}
    for raw in raw_nodes:
        node = _node_from_dict(raw)
        if node.node_id in nodes:
            raise RouteParseError(f"duplicate node id {node.node_id!r}")
        nodes[node.node_id] = node
    edges = tuple(_edge_from_dict(raw) for raw in raw_edges)
    start = doc.get("start")
    destinations = tuple(str(d) for d in doc.get("destinations", ()))
    return RouteGraph(
        nodes=nodes,
        edges=edges,
        start=str(start) if start is not None else None,
        study_destinations=destinations,
    )


def load_route_graph_file(path: str | Path) -> RouteGraph:
    return load_route_graph(Path(path).read_text(encoding="utf-8"))


def default_campus_graph() -> RouteGraph:
    """The packaged demo building: 13 nodes, duplicate shapes, one start."""
    text = (
        resources.files("reembody.data")
        .joinpath(DEFAULT_GRAPH_RESOURCE)
        .read_text(encoding="utf-8")
    )
    return load_route_graph(text)


def relative_turn(prev_heading: float | None, heading: float) -> Turn:
    """Quantize the signed heading change into a spoken turn direction.

    Positive change is clockwise, i.e. a right turn.  Within 45 degrees of
    straight ahead no turn is announced; beyond 135 degrees the walker is told
    to turn around.
    """
    if prev_heading is None:
        return Turn.STRAIGHT
    delta = (heading - prev_heading) % 360.0
    if delta > 180.0:
        delta -= 360.0
    if abs(delta) <= 45.0:
        return Turn.STRAIGHT
    if 45.0 < delta <= 135.0:
        return Turn.RIGHT
    if -135.0 <= delta < -45.0:
        return Turn.LEFT
    return Turn.BACK


_TURN_TEMPLATES = {
    Turn.STRAIGHT: "Walk straight ahead to the {target}.",
    Turn.RIGHT: "Turn right and walk to the {target}; it is on your right.",
    Turn.LEFT: "Turn left and walk to the {target}; it is on your left.",
    Turn.BACK: "Turn around and walk back to the {target}.",
}

_FINAL_SUFFIX = " That is your destination."


def _leg_instruction(
    graph: RouteGraph,
    checkpoints: tuple[str, ...],
    leg_index: int,
) -> Instruction:
    src, dst = checkpoints[leg_index], checkpoints[leg_index + 1]
    edge = graph.edge_between(src, dst)
    if edge is None:
        raise NoRouteError(f"no edge {src}->{dst}")
    if leg_index == 0:
        turn = Turn.STRAIGHT
    else:
        prev = graph.edge_between(checkpoints[leg_index - 1], src)
        assert prev is not None
        turn = relative_turn(prev.heading_deg, edge.heading_deg)
    text = _TURN_TEMPLATES[turn].format(target=graph.node(dst).label)
    if leg_index == len(checkpoints) - 2:
        text += _FINAL_SUFFIX
    return Instruction(leg_index=leg_index, text=text, relative_turn=turn)


def build_plan(graph: RouteGraph, checkpoints: Iterable[str]) -> RoutePlan:
    """Assemble a plan along explicit checkpoints, validating every edge."""
    points = tuple(checkpoints)
    for point in points:
        graph.node(point)
    legs = tuple(_leg_instruction(graph, points, i) for i in range(len(points) - 1))
    total = 0.0
    for i in range(len(points) - 1):
        edge = graph.edge_between(points[i], points[i + 1])
        assert edge is not None
        total += edge.cost_m
    return RoutePlan(checkpoints=points, legs=legs, total_cost_m=total)


def plan_route(graph: RouteGraph, start: str, destination: str) -> RoutePlan:
    """Cheapest route from start to destination.

    Cost ties are broken by the lexicographically smallest checkpoint
    sequence, which keeps planning deterministic across runs and platforms.
    """
    graph.node(start)
    graph.node(destination)
    if start == destination:
        raise NoRouteError("start and destination are the same node")
    # Dijkstra over (cost, path) keyed lexicographically.  Paths are simple
    # because costs are strictly positive, so the tuple ordering is total.
    import heapq

    best: dict[str, tuple[float, tuple[str, ...]]] = {}
    heap: list[tuple[float, tuple[str, ...]]] = [(0.0, (start,))]
    while heap:
        cost, path = heapq.heappop(heap)
        node_id = path[-1]
        if node_id in best and best[node_id] <= (cost, path):
            continue
        best[node_id] = (cost, path)
        if node_id == destination:
            continue
        for edge in graph.adjacency.get(node_id, ()):
            if edge.dst in path:
                continue
            candidate = (cost + edge.cost_m, path + (edge.dst,))
            known = best.get(edge.dst)
            if known is None or candidate < known:
                heapq.heappush(heap, candidate)
    if destination not in best:
        raise NoRouteError(f"no route from {start!r} to {destination!r}")
    _, path = best[destination]
    return build_plan(graph, path)


def render_instruction(
    graph: RouteGraph,
    plan: RoutePlan,
    leg_index: int,
    mode: InstructionMode,
) -> list[Instruction]:
    """Instructions to speak at a given progress point.

    Step-by-step mode yields exactly the one leg at ``leg_index``; full-route
    mode yields every remaining leg from there onward.
    """
    if leg_index < 0:
        raise RouteError(f"leg index {leg_index} is negative")
    if mode is InstructionMode.STEP_BY_STEP:
        if leg_index >= len(plan.legs):
            raise RouteError(
                f"leg index {leg_index} out of range for {len(plan.legs)} legs"
            )
        return [plan.legs[leg_index]]
    return list(plan.legs[leg_index:])
