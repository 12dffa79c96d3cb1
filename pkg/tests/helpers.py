"""Shared test utilities: the random map generator and independent oracles.

The oracles here deliberately avoid the library's search code: route
optimality is checked by exhaustive DFS over simple paths, and top-k
retrieval by a pure-Python cosine scan.
"""

from __future__ import annotations

import math

from guidenav.planner import PlanConstraints
from guidenav.rng import Xoshiro256pp, hash_text
from guidenav.topomap import Coordinate, Edge, Node, TopoMap

_DIR_UNIT = {0: (1, 0), 90: (0, 1), 180: (-1, 0), 270: (0, -1)}


def _direction_between(a, b) -> int:
    if b[0] > a[0]:
        return 0
    if b[0] < a[0]:
        return 180
    if b[1] > a[1]:
        return 90
    return 270


def random_map(seed: int, max_nodes: int = 10, grid: int = 4, spacing: float = 3.0) -> TopoMap:
    """Geometrically consistent, connected random map on a grid.

    Cells are collected by a random axis-aligned walk, whose steps become a
    bidirectional skeleton (so every node pair is mutually reachable); extra
    axis-aligned edges, occasionally one-way, add cycles and cost ties.
    Integer-valued coordinates keep every path cost exactly representable,
    so tie-breaking comparisons are exact in both the planner and oracles.
    """
    rng = Xoshiro256pp(hash_text(f"genmap|{seed}"))
    n = 2 + rng.next_u64() % (max_nodes - 1)

    def neighbors_in_grid(cell):
        x, y = cell
        return [
            (nx_, ny_)
            for nx_, ny_ in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1))
            if 0 <= nx_ < grid and 0 <= ny_ < grid
        ]

    current = (rng.next_u64() % grid, rng.next_u64() % grid)
    chosen = [current]
    skeleton: set[tuple[tuple[int, int], tuple[int, int]]] = set()
    while len(chosen) < n:
        options = neighbors_in_grid(current)
        step = options[rng.next_u64() % len(options)]
        if step not in chosen:
            chosen.append(step)
            skeleton.add((current, step))
        current = step

    cell_id = {cell: f"n{index:02d}" for index, cell in enumerate(chosen)}
    nodes = {}
    for cell, node_id in cell_id.items():
        tags = frozenset({"stairs"}) if rng.uniform() < 0.15 else frozenset()
        nodes[node_id] = Node(node_id, Coordinate(cell[0] * spacing, cell[1] * spacing), tags)

    def add_pair(edges, cell_a, cell_b, one_way: bool):
        a, b = cell_id[cell_a], cell_id[cell_b]
        pa = (nodes[a].position.x, nodes[a].position.y)
        pb = (nodes[b].position.x, nodes[b].position.y)
        dist = abs(pa[0] - pb[0]) + abs(pa[1] - pb[1])
        d_ab = _direction_between(pa, pb)
        edges[(a, b)] = Edge(a, b, dist, d_ab)
        if not one_way:
            edges[(b, a)] = Edge(b, a, dist, (d_ab + 180) % 360)

    edges: dict = {}
    for cell_a, cell_b in sorted(skeleton):
        add_pair(edges, cell_a, cell_b, one_way=False)
    ordered = sorted(cell_id)
    for i, cell_a in enumerate(ordered):
        for cell_b in ordered[i + 1 :]:
            if cell_a[0] != cell_b[0] and cell_a[1] != cell_b[1]:
                continue
            a, b = cell_id[cell_a], cell_id[cell_b]
            if (a, b) in edges or (b, a) in edges:
                continue
            if rng.uniform() >= 0.4:
                continue
            add_pair(edges, cell_a, cell_b, one_way=rng.uniform() < 0.2)
    return TopoMap(nodes=nodes, edges=edges, name=f"gen{seed}")


def enumerate_best(topo: TopoMap, start: str, goal: str, constraints: PlanConstraints | None = None):
    """Exhaustive simple-path search: (min cost, lex-min node sequence) or None."""
    avoid = constraints.avoid_tags if constraints else frozenset()
    avoid_blocked = constraints.avoid_blocked if constraints else True

    outgoing: dict[str, list[Edge]] = {}
    for edge in topo.edges.values():
        outgoing.setdefault(edge.src, []).append(edge)
    for lst in outgoing.values():
        lst.sort(key=lambda e: e.dst)

    best_cost = [math.inf]
    best_paths: list[tuple[str, ...]] = []

    def node_ok(node_id: str) -> bool:
        return node_id == start or not (topo.nodes[node_id].tags & avoid)

    def edge_ok(edge: Edge) -> bool:
        if avoid_blocked and edge.blocked:
            return False
        return not (edge.tags & avoid)

    if not node_ok(goal) and goal != start:
        return None

    def dfs(node: str, cost: float, path: list[str], visited: set[str]):
        if node == goal:
            if cost < best_cost[0]:
                best_cost[0] = cost
                best_paths.clear()
            if cost == best_cost[0]:
                best_paths.append(tuple(path))
            return
        if cost >= best_cost[0]:
            return  # any completion adds positive distance
        for edge in outgoing.get(node, ()):
            if edge.dst in visited or not edge_ok(edge) or not node_ok(edge.dst):
                continue
            visited.add(edge.dst)
            path.append(edge.dst)
            dfs(edge.dst, cost + edge.distance, path, visited)
            path.pop()
            visited.remove(edge.dst)

    dfs(start, 0.0, [start], {start})
    if not best_paths:
        return None
    return best_cost[0], min(best_paths)


def enumerate_all_paths(topo: TopoMap, start: str, goal: str, constraints: PlanConstraints | None = None):
    """Every simple path as (cost, node sequence), sorted by (cost, sequence)."""
    avoid = constraints.avoid_tags if constraints else frozenset()
    avoid_blocked = constraints.avoid_blocked if constraints else True
    outgoing: dict[str, list[Edge]] = {}
    for edge in topo.edges.values():
        outgoing.setdefault(edge.src, []).append(edge)
    for lst in outgoing.values():
        lst.sort(key=lambda e: e.dst)
    results: list[tuple[float, tuple[str, ...]]] = []

    def dfs(node, cost, path, visited):
        if node == goal:
            results.append((cost, tuple(path)))
            return
        for edge in outgoing.get(node, ()):
            if edge.dst in visited:
                continue
            if (avoid_blocked and edge.blocked) or (edge.tags & avoid):
                continue
            if edge.dst != start and (topo.nodes[edge.dst].tags & avoid):
                continue
            visited.add(edge.dst)
            path.append(edge.dst)
            dfs(edge.dst, cost + edge.distance, path, visited)
            path.pop()
            visited.remove(edge.dst)

    dfs(start, 0.0, [start], {start})
    results.sort(key=lambda item: (item[0], item[1]))
    return results


def brute_force_top_k(records, probe, k: int):
    """Pure-Python cosine ranking oracle: [(record id, similarity)]."""

    def cosine(a, b):
        dot = sum(x * y for x, y in zip(a, b))
        na = math.sqrt(sum(x * x for x in a))
        nb = math.sqrt(sum(y * y for y in b))
        return dot / (na * nb)

    scored = [(record.id, cosine(list(record.embedding), list(probe))) for record in records]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]


def rectangle_map() -> TopoMap:
    """The 4-node rectangle used across planner tests: A(0,0) B(4,0) C(4,3) D(0,3)."""
    nodes = {
        "A": Node("A", Coordinate(0, 0)),
        "B": Node("B", Coordinate(4, 0)),
        "C": Node("C", Coordinate(4, 3)),
        "D": Node("D", Coordinate(0, 3)),
    }
    pairs = [("A", "B", 4.0, 0), ("B", "C", 3.0, 90), ("D", "C", 4.0, 0), ("A", "D", 3.0, 90)]
    edges = {}
    for src, dst, dist, direction in pairs:
        edges[(src, dst)] = Edge(src, dst, dist, direction)
        edges[(dst, src)] = Edge(dst, src, dist, (direction + 180) % 360)
    return TopoMap(nodes=nodes, edges=edges, name="rectangle")
