"""Constraint-aware route planning with right-angle turn-by-turn rendering.

Routes minimize total distance over the directed map; among equal-cost
paths the lexicographically smallest node-id sequence wins, which makes
plans reproducible across runs and platforms.  Preference filtering is a
hard exclusion: nodes or edges carrying an avoided tag (and, by default,
edges flagged blocked) simply drop out of the search graph.  The start
node is exempt from tag exclusion because the traveler is already standing
on it.

Turn convention: directions are absolute, counterclockwise-positive, with
0 degrees along +x.  The relative turn for a leg is
``(edge_direction - heading) mod 360`` mapped as 0 -> straight,
90 -> left, 270 -> right, 180 -> turn around.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import Enum

from .topomap import Edge, TopoMap, fmt_real

# Absorbs forward-vs-backward float accumulation when testing whether an
# edge lies on a shortest path; exact for integer-valued fixture distances.
_TIE_EPS = 1e-9


class TurnCommand(Enum):
    STRAIGHT = "straight"
    LEFT = "left"
    RIGHT = "right"
    TURN_AROUND = "turn_around"

    @property
    def phrase(self) -> str:
        return "around" if self is TurnCommand.TURN_AROUND else self.value


_TURN_BY_DELTA = {
    0: TurnCommand.STRAIGHT,
    90: TurnCommand.LEFT,
    270: TurnCommand.RIGHT,
    180: TurnCommand.TURN_AROUND,
}

TURN_DELTA = {turn: delta for delta, turn in _TURN_BY_DELTA.items()}


class PlanningError(ValueError):
    pass


class Unreachable(PlanningError):
    """Goal cannot be reached; distinguishes constraint-caused unreachability."""

    def __init__(self, start: str, goal: str, due_to_constraints: bool):
        self.start = start
        self.goal = goal
        self.due_to_constraints = due_to_constraints
        if due_to_constraints:
            message = f"no route from {start} to {goal} under the current constraints"
        else:
            message = f"no route from {start} to {goal} exists on this map"
        super().__init__(message)


@dataclass(frozen=True)
class PlanConstraints:
    avoid_tags: frozenset[str] = frozenset()
    avoid_blocked: bool = True
    max_routes: int = 3

    def __post_init__(self):
        if self.max_routes < 1:
            raise PlanningError("max_routes must be >= 1")

    def with_avoid(self, tags) -> "PlanConstraints":
        return PlanConstraints(frozenset(tags), self.avoid_blocked, self.max_routes)


@dataclass(frozen=True)
class RouteLeg:
    turn: TurnCommand
    edge: Edge
    distance: float
    to: str
    to_label: str
    absolute_direction: int


@dataclass(frozen=True)
class Route:
    start: str
    goal: str
    legs: tuple[RouteLeg, ...]
    total_distance: float
    description: str

    @property
    def node_sequence(self) -> tuple[str, ...]:
        return (self.start,) + tuple(leg.to for leg in self.legs)

    def is_empty(self) -> bool:
        return not self.legs


def relative_turn(heading: int, edge_direction: int) -> TurnCommand:
    """Turn needed to face ``edge_direction`` from ``heading``."""
    for value, name in ((heading, "heading"), (edge_direction, "edge direction")):
        if value not in (0, 90, 180, 270):
            raise PlanningError(f"{name} must be one of 0/90/180/270, got {value}")
    return _TURN_BY_DELTA[(edge_direction - heading) % 360]


def _node_allowed(topo: TopoMap, node_id: str, constraints: PlanConstraints) -> bool:
    return not (topo.nodes[node_id].tags & constraints.avoid_tags)


def _edge_allowed(edge: Edge, constraints: PlanConstraints, banned_edges: frozenset) -> bool:
    if edge.key in banned_edges:
        return False
    if constraints.avoid_blocked and edge.blocked:
        return False
    return not (edge.tags & constraints.avoid_tags)


def _cost_to_goal(
    topo: TopoMap,
    start: str,
    goal: str,
    constraints: PlanConstraints,
    banned_nodes: frozenset,
    banned_edges: frozenset,
) -> dict[str, float]:
    """Dijkstra over the reversed allowed graph: node -> distance to goal.

    Edges out of ``start`` stay usable even when the start node carries an
    avoided tag; every other node on a path must be allowed.
    """
    reverse: dict[str, list[Edge]] = {}
    for edge in topo.edges.values():
        if not _edge_allowed(edge, constraints, banned_edges):
            continue
        if edge.src in banned_nodes or edge.dst in banned_nodes:
            continue
        if edge.src != start and not _node_allowed(topo, edge.src, constraints):
            continue
        if not _node_allowed(topo, edge.dst, constraints):
            continue
        reverse.setdefault(edge.dst, []).append(edge)

    costs: dict[str, float] = {}
    heap: list[tuple[float, str]] = [(0.0, goal)]
    while heap:
        cost, node = heapq.heappop(heap)
        if node in costs:
            continue
        costs[node] = cost
        for edge in reverse.get(node, ()):
            if edge.src not in costs:
                heapq.heappush(heap, (cost + edge.distance, edge.src))
    return costs


def _lex_shortest(
    topo: TopoMap,
    start: str,
    goal: str,
    constraints: PlanConstraints,
    banned_nodes: frozenset = frozenset(),
    banned_edges: frozenset = frozenset(),
) -> list[Edge] | None:
    """Minimum-distance path as an edge list, lexicographic tie-break.

    Among all minimum-cost paths the lexicographically smallest node-id
    sequence is produced by walking greedily: at each node take the
    smallest-id neighbor that still lies on some shortest completion.
    """
    if start in banned_nodes or goal in banned_nodes:
        return None
    if not _node_allowed(topo, goal, constraints):
        return None
    if start == goal:
        return []
    to_goal = _cost_to_goal(topo, start, goal, constraints, banned_nodes, banned_edges)
    if start not in to_goal:
        return None
    total = to_goal[start]

    path: list[Edge] = []
    node = start
    spent = 0.0
    visited = {start}
    while node != goal:
        chosen: Edge | None = None
        for edge in sorted((e for e in topo.edges.values() if e.src == node), key=lambda e: e.dst):
            if not _edge_allowed(edge, constraints, banned_edges):
                continue
            if edge.dst in banned_nodes or not _node_allowed(topo, edge.dst, constraints):
                continue
            remaining = to_goal.get(edge.dst)
            if remaining is None:
                continue
            if abs(spent + edge.distance + remaining - total) <= _TIE_EPS * max(1.0, total):
                chosen = edge
                break
        if chosen is None or chosen.dst in visited:
            # Positive edge weights make shortest walks simple, so this is
            # unreachable in a consistent map; guard against degenerate input.
            return None
        path.append(chosen)
        spent += chosen.distance
        visited.add(chosen.dst)
        node = chosen.dst
    return path


def _build_route(topo: TopoMap, start: str, goal: str, edges: list[Edge], initial_heading: int) -> Route:
    legs = []
    heading = initial_heading
    for edge in edges:
        turn = relative_turn(heading, edge.direction)
        legs.append(
            RouteLeg(
                turn=turn,
                edge=edge,
                distance=edge.distance,
                to=edge.dst,
                to_label=topo.display_name(edge.dst),
                absolute_direction=edge.direction,
            )
        )
        heading = edge.direction
    total = sum(leg.distance for leg in legs)
    description = _render_description(topo.display_name(goal), legs)
    return Route(start=start, goal=goal, legs=tuple(legs), total_distance=total, description=description)


def _render_description(goal_label: str, legs) -> str:
    if not legs:
        return f"You are already at {goal_label}."
    lines = [
        f"Leg {i}: turn {leg.turn.phrase}, walk {fmt_real(leg.distance)} m to {leg.to_label}."
        for i, leg in enumerate(legs, start=1)
    ]
    return "\n".join(lines)


def describe_route(route: Route) -> str:
    """Deterministic one-line-per-leg text; this is the text the agent reads."""
    goal_label = route.legs[-1].to_label if route.legs else route.goal
    if not route.legs:
        # An empty route keeps only the goal id; Route.description rendered at
        # plan time carries the label when one exists.
        return route.description
    return _render_description(goal_label, route.legs)


def plan_route(
    topo: TopoMap,
    start: str,
    goal: str,
    initial_heading: int = 0,
    constraints: PlanConstraints = PlanConstraints(),
) -> Route:
    """Minimum-distance constrained route from start to goal.

    Raises :class:`Unreachable` when no path survives; its
    ``due_to_constraints`` flag tells whether relaxing the constraints
    (avoid tags, blocked edges) would make the goal reachable, which the
    agent uses to explain trade-offs.
    """
    topo.node(start)
    topo.node(goal)
    if initial_heading not in (0, 90, 180, 270):
        raise PlanningError(f"initial heading must be quantized, got {initial_heading}")
    if start == goal:
        return _build_route(topo, start, goal, [], initial_heading)
    edges = _lex_shortest(topo, start, goal, constraints)
    if edges is None:
        unconstrained = PlanConstraints(frozenset(), avoid_blocked=False)
        reachable_at_all = _lex_shortest(topo, start, goal, unconstrained) is not None
        raise Unreachable(start, goal, due_to_constraints=reachable_at_all)
    return _build_route(topo, start, goal, edges, initial_heading)


def k_alternative_routes(
    topo: TopoMap,
    start: str,
    goal: str,
    k: int,
    initial_heading: int = 0,
    constraints: PlanConstraints = PlanConstraints(),
) -> list[Route]:
    """Up to k loop-free routes in nondecreasing total distance.

    Yen-style deviation search over the same cost and tie-break order as
    :func:`plan_route`; element 0 always equals the plan_route result.
    """
    if k < 1:
        raise PlanningError("k must be >= 1")
    first = plan_route(topo, start, goal, initial_heading, constraints)
    if first.is_empty():
        return [first]

    accepted_edges: list[list[Edge]] = [[leg.edge for leg in first.legs]]
    accepted_seqs = [first.node_sequence]
    candidates: list[tuple[float, tuple[str, ...], list[Edge]]] = []
    seen_seqs = {first.node_sequence}

    while len(accepted_edges) < k:
        prev = accepted_edges[-1]
        prev_nodes = accepted_seqs[-1]
        for i in range(len(prev)):
            spur_node = prev_nodes[i]
            root = prev[:i]
            root_nodes = prev_nodes[: i + 1]
            banned_edges = set()
            for seq, edges in zip(accepted_seqs, accepted_edges):
                if seq[: i + 1] == root_nodes:
                    banned_edges.add(edges[i].key)
            banned_nodes = frozenset(root_nodes[:-1])
            spur = _lex_shortest(
                topo, spur_node, goal, constraints, banned_nodes, frozenset(banned_edges)
            )
            if spur is None:
                continue
            edges = root + spur
            seq = (start,) + tuple(e.dst for e in edges)
            if seq in seen_seqs:
                continue
            seen_seqs.add(seq)
            cost = sum(e.distance for e in edges)
            heapq.heappush(candidates, (cost, seq, edges))
        if not candidates:
            break
        _, seq, edges = heapq.heappop(candidates)
        accepted_edges.append(edges)
        accepted_seqs.append(seq)

    return [_build_route(topo, start, goal, edges, initial_heading) for edges in accepted_edges]
