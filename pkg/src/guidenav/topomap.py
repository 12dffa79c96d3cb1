"""Text-based topological map: parsing, validation, and queries.

Map files are line-oriented UTF-8 (MAP v1)::

    MAP v1
    # comment
    NODE <id> <x> <y> [tag=<token>]... [label="<free text>"]
    EDGE <from> <to> dist=<positive real> dir=<0|90|180|270> [tag=<token>]...

Reals use a ``.`` decimal separator.  Directions are absolute degrees,
counterclockwise-positive with 0 along +x, quantized to right angles.  An
edge from ``i`` to ``j`` is geometrically consistent when

    position(j) == position(i) + (dist * cos(dir), dist * sin(dir))

within a relative tolerance.  Canonical serialization sorts nodes by id and
edges by (from, to) and prints reals in their minimal decimal form, so
``serialize(parse(serialize(m))) == serialize(m)``.

Loaded maps are treated as immutable; :func:`set_edge_blocked` returns a new
map value so the runtime hazard overlay never mutates shared state.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

QUANTIZED_DIRECTIONS = (0, 90, 180, 270)

# Exact unit displacement per right-angle direction; avoids cos/sin rounding.
_DIRECTION_UNIT = {0: (1.0, 0.0), 90: (0.0, 1.0), 180: (-1.0, 0.0), 270: (0.0, -1.0)}

_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")
_TAG_RE = re.compile(r"^[a-z0-9_-]+$")


class MapError(ValueError):
    """Malformed map content or a query against a missing node/edge."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        suffix = ""
        if line is not None:
            suffix = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + suffix)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Coordinate:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise MapError(f"coordinate must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class Node:
    id: str
    position: Coordinate
    tags: frozenset[str] = frozenset()
    label: str | None = None

    @property
    def display_name(self) -> str:
        return self.label if self.label else self.id


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    distance: float
    direction: int
    tags: frozenset[str] = frozenset()
    blocked: bool = False

    def __post_init__(self):
        if self.direction not in QUANTIZED_DIRECTIONS:
            raise MapError(f"direction must be one of {QUANTIZED_DIRECTIONS}, got {self.direction}")
        if not (math.isfinite(self.distance) and self.distance > 0):
            raise MapError(f"edge distance must be a positive real, got {self.distance}")

    @property
    def key(self) -> tuple[str, str]:
        return (self.src, self.dst)


@dataclass(frozen=True)
class Violation:
    """One edge whose endpoint disagrees with its declared distance/direction."""

    src: str
    dst: str
    expected: tuple[float, float]
    actual: tuple[float, float]
    residual: float

    def describe(self) -> str:
        return (
            f"edge {self.src}->{self.dst}: endpoint {self.actual} differs from "
            f"expected {self.expected} by {self.residual:.6g} m"
        )


@dataclass(frozen=True)
class TopoMap:
    nodes: dict[str, Node]
    edges: dict[tuple[str, str], Edge]
    name: str = field(default="map", compare=False)

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise MapError(f"unknown node {node_id!r}") from None

    def edge(self, src: str, dst: str) -> Edge:
        try:
            return self.edges[(src, dst)]
        except KeyError:
            raise MapError(f"unknown edge {src!r}->{dst!r}") from None

    def has_edge(self, src: str, dst: str) -> bool:
        return (src, dst) in self.edges

    def display_name(self, node_id: str) -> str:
        return self.node(node_id).display_name


def fmt_real(value: float) -> str:
    """Minimal decimal representation: integral values drop the fraction."""
    if value == int(value):
        return str(int(value))
    return repr(value)


def _tokenize(line: str, line_no: int) -> list[tuple[str, int]]:
    """Split a line into (token, column) pairs, keeping quoted spans whole."""
    tokens: list[tuple[str, int]] = []
    i = 0
    n = len(line)
    while i < n:
        if line[i].isspace():
            i += 1
            continue
        if line[i] == "#":
            break
        start = i
        quoted = False
        while i < n and (quoted or not line[i].isspace()):
            if line[i] == '"':
                quoted = not quoted
            i += 1
        if quoted:
            raise MapError("unterminated quote", line_no, start + 1)
        tokens.append((line[start:i], start + 1))
    return tokens


def _parse_real(text: str, what: str, line_no: int, column: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MapError(f"{what} is not a real number: {text!r}", line_no, column) from None
    if not math.isfinite(value):
        raise MapError(f"{what} must be finite: {text!r}", line_no, column)
    return value


def _parse_tag(value: str, line_no: int, column: int) -> str:
    if not _TAG_RE.match(value):
        raise MapError(f"invalid tag {value!r} (lowercase tokens only)", line_no, column)
    return value


def parse_map(text: str, name: str = "map") -> TopoMap:
    """Parse MAP v1 content into a :class:`TopoMap`.

    Raises :class:`MapError` with line/column context on syntax errors,
    duplicate ids, unknown edge endpoints, non-quantized directions, and
    unknown directives.
    """
    nodes: dict[str, Node] = {}
    edges: dict[tuple[str, str], Edge] = {}
    edge_lines: dict[tuple[str, str], int] = {}
    saw_header = False

    for line_no, raw in enumerate(text.splitlines(), start=1):
        tokens = _tokenize(raw, line_no)
        if not tokens:
            continue
        keyword, col = tokens[0]
        if not saw_header:
            if keyword != "MAP" or len(tokens) < 2 or tokens[1][0] != "v1":
                raise MapError("file must start with 'MAP v1'", line_no, col)
            if len(tokens) > 2:
                raise MapError("unexpected tokens after map header", line_no, tokens[2][1])
            saw_header = True
            continue

        if keyword == "NODE":
            if len(tokens) < 4:
                raise MapError("NODE requires: NODE <id> <x> <y>", line_no, col)
            node_id, id_col = tokens[1]
            if not _ID_RE.match(node_id):
                raise MapError(f"invalid node id {node_id!r}", line_no, id_col)
            if node_id in nodes:
                raise MapError(f"duplicate node id {node_id!r}", line_no, id_col)
            x = _parse_real(tokens[2][0], "x coordinate", line_no, tokens[2][1])
            y = _parse_real(tokens[3][0], "y coordinate", line_no, tokens[3][1])
            tags: set[str] = set()
            label: str | None = None
            for token, tcol in tokens[4:]:
                if token.startswith("tag="):
                    tags.add(_parse_tag(token[4:], line_no, tcol))
                elif token.startswith('label="') and token.endswith('"') and len(token) >= 8:
                    label = token[7:-1]
                else:
                    raise MapError(f"unexpected token {token!r} in NODE", line_no, tcol)
            nodes[node_id] = Node(node_id, Coordinate(x, y), frozenset(tags), label)
        elif keyword == "EDGE":
            if len(tokens) < 5:
                raise MapError("EDGE requires: EDGE <from> <to> dist=<d> dir=<deg>", line_no, col)
            src, src_col = tokens[1]
            dst, dst_col = tokens[2]
            for node_id, ncol in ((src, src_col), (dst, dst_col)):
                if not _ID_RE.match(node_id):
                    raise MapError(f"invalid node id {node_id!r}", line_no, ncol)
            distance: float | None = None
            direction: int | None = None
            tags = set()
            for token, tcol in tokens[3:]:
                if token.startswith("dist="):
                    distance = _parse_real(token[5:], "dist", line_no, tcol)
                    if distance <= 0:
                        raise MapError(f"dist must be positive, got {token[5:]}", line_no, tcol)
                elif token.startswith("dir="):
                    try:
                        direction = int(token[4:])
                    except ValueError:
                        raise MapError(f"dir is not an integer: {token[4:]!r}", line_no, tcol) from None
                    if direction not in QUANTIZED_DIRECTIONS:
                        raise MapError(
                            f"dir must be one of {QUANTIZED_DIRECTIONS}, got {direction}", line_no, tcol
                        )
                elif token.startswith("tag="):
                    tags.add(_parse_tag(token[4:], line_no, tcol))
                else:
                    raise MapError(f"unexpected token {token!r} in EDGE", line_no, tcol)
            if distance is None or direction is None:
                raise MapError("EDGE requires both dist= and dir=", line_no, col)
            key = (src, dst)
            if key in edges:
                raise MapError(f"duplicate edge {src}->{dst}", line_no, src_col)
            edges[key] = Edge(src, dst, distance, direction, frozenset(tags))
            edge_lines[key] = line_no
        else:
            raise MapError(f"unknown directive {keyword!r}", line_no, col)

    if not saw_header:
        raise MapError("file must start with 'MAP v1'", 1, 1)

    for (src, dst), edge in edges.items():
        for endpoint in (src, dst):
            if endpoint not in nodes:
                raise MapError(f"edge {src}->{dst} references unknown node {endpoint!r}", edge_lines[(src, dst)])

    return TopoMap(nodes=nodes, edges=edges, name=name)


def serialize_map(topo: TopoMap) -> str:
    """Canonical MAP v1 text: nodes sorted by id, edges by (from, to)."""
    lines = ["MAP v1"]
    for node_id in sorted(topo.nodes):
        node = topo.nodes[node_id]
        parts = ["NODE", node.id, fmt_real(node.position.x), fmt_real(node.position.y)]
        parts.extend(f"tag={tag}" for tag in sorted(node.tags))
        if node.label is not None:
            if '"' in node.label:
                raise MapError(f"label for node {node.id!r} may not contain double quotes")
            parts.append(f'label="{node.label}"')
        lines.append(" ".join(parts))
    for key in sorted(topo.edges):
        edge = topo.edges[key]
        parts = ["EDGE", edge.src, edge.dst, f"dist={fmt_real(edge.distance)}", f"dir={edge.direction}"]
        parts.extend(f"tag={tag}" for tag in sorted(edge.tags))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def load_map(path) -> TopoMap:
    from pathlib import Path

    p = Path(path)
    return parse_map(p.read_text(encoding="utf-8"), name=p.stem)


def validate_geometry(topo: TopoMap, rel_tol: float = 1e-6) -> list[Violation]:
    """Check every edge against the planar displacement it declares.

    Returns one :class:`Violation` per edge whose destination coordinate
    differs from ``src + dist * (cos dir, sin dir)`` by more than
    ``rel_tol * max(dist, 1)``.  An empty list means the map is consistent.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    violations = []
    for key in sorted(topo.edges):
        edge = topo.edges[key]
        ux, uy = _DIRECTION_UNIT[edge.direction]
        src = topo.nodes[edge.src].position
        dst = topo.nodes[edge.dst].position
        expected = (src.x + edge.distance * ux, src.y + edge.distance * uy)
        residual = math.hypot(dst.x - expected[0], dst.y - expected[1])
        if residual > rel_tol * max(edge.distance, 1.0):
            violations.append(Violation(edge.src, edge.dst, expected, (dst.x, dst.y), residual))
    return violations


def reverse_edge_warnings(topo: TopoMap) -> list[str]:
    """Warnings (not failures) for edges lacking an explicit reverse edge."""
    warnings = []
    for key in sorted(topo.edges):
        src, dst = key
        if (dst, src) not in topo.edges:
            warnings.append(f"edge {src}->{dst} has no reverse edge {dst}->{src}")
    return warnings


def neighbors(topo: TopoMap, node_id: str) -> list[Edge]:
    """Outgoing edges of a node, sorted by destination id."""
    topo.node(node_id)
    return sorted(
        (edge for edge in topo.edges.values() if edge.src == node_id),
        key=lambda e: e.dst,
    )


def set_edge_blocked(topo: TopoMap, src: str, dst: str, blocked: bool) -> TopoMap:
    """Return a map view with the edge (and its reverse, if any) re-flagged.

    The input map is left untouched; callers own the returned overlay.
    """
    topo.edge(src, dst)
    edges = dict(topo.edges)
    edges[(src, dst)] = replace(edges[(src, dst)], blocked=blocked)
    if (dst, src) in edges:
        edges[(dst, src)] = replace(edges[(dst, src)], blocked=blocked)
    return TopoMap(nodes=topo.nodes, edges=edges, name=topo.name)
