"""Deterministic kinematic world: executes move commands, produces observations,
and injects faults (kidnap teleports, observation noise, hazard objects).

Resolution is node-level: the robot is always at a map node with a
quantized heading, movement follows one edge at a time, and time is a
virtual clock (distance / speed), so suites run in milliseconds.  Kidnap
teleports fire silently after a completed leg and add no odometry, which
is exactly the asymmetry arrival verification exploits.

Object visibility is heading-gated: an observation lists the labels of
objects lying on edges that leave the true node in the current heading.
Aliased nodes (visually identical places) share a descriptor, so their
embeddings collide by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .agent import MoveCommand
from .planner import TURN_DELTA, Route
from .rng import Xoshiro256pp, hash_text
from .topomap import QUANTIZED_DIRECTIONS, Edge, TopoMap
from .vector_store import (
    DEFAULT_DIM,
    ENVIRONMENT,
    NAVIGATIONAL,
    EmbeddingRecord,
    RecordMeta,
    VectorStore,
    pose_descriptor,
    stub_embed,
)


class SimError(ValueError):
    pass


@dataclass
class Pose:
    node: str
    heading: int

    def __post_init__(self):
        if self.heading not in QUANTIZED_DIRECTIONS:
            raise SimError(f"heading must be one of {QUANTIZED_DIRECTIONS}")


@dataclass(frozen=True)
class WorldObject:
    label: str
    at_edge: tuple[str, str]
    hazard_ground_truth: bool


@dataclass(frozen=True)
class Kidnap:
    trigger_leg: int
    teleport_to: str
    new_heading: int


@dataclass(frozen=True)
class MoveResult:
    kind: str  # arrived | turned | blocked
    distance: float
    duration_s: float
    heading: int


@dataclass(frozen=True)
class SimObservation:
    embedding: np.ndarray
    object_labels: tuple[str, ...]


@dataclass
class SimWorld:
    topo: TopoMap
    pose: Pose
    objects: list[WorldObject] = field(default_factory=list)
    kidnaps: list[Kidnap] = field(default_factory=list)
    sigma: float = 0.0
    seed: int = 0
    aliases: dict[str, str] = field(default_factory=dict)
    dim: int = DEFAULT_DIM
    odometer: float = 0.0
    clock_s: float = 0.0
    completed_legs: int = 0

    def __post_init__(self):
        if self.pose.node not in self.topo.nodes:
            raise SimError(f"start node {self.pose.node!r} is not on the map")
        for obj in self.objects:
            if obj.at_edge not in self.topo.edges:
                raise SimError(f"object {obj.label!r} references unknown edge {obj.at_edge}")
        for kidnap in self.kidnaps:
            if kidnap.teleport_to not in self.topo.nodes:
                raise SimError(f"kidnap target {kidnap.teleport_to!r} is not on the map")
            if kidnap.new_heading not in QUANTIZED_DIRECTIONS:
                raise SimError("kidnap heading must be quantized")
        self._fired: set[int] = set()
        self._noise_rng = Xoshiro256pp(hash_text(f"world|{self.seed}"))

    def descriptor_node(self, node: str) -> str:
        return self.aliases.get(node, node)


def execute(world: SimWorld, command: MoveCommand) -> MoveResult:
    """Apply a turn and (optionally) walk one edge.

    A zero-distance command is a turn in place.  A positive distance
    requires an edge leaving the current node in the post-turn heading;
    otherwise the move is blocked and the pose is left untouched.
    """
    new_heading = (world.pose.heading + TURN_DELTA[command.turn]) % 360
    if command.distance == 0.0:
        world.pose.heading = new_heading
        return MoveResult("turned", 0.0, 0.0, new_heading)
    if command.speed_mps <= 0:
        raise SimError("speed must be positive")
    edge = _edge_in_heading(world.topo, world.pose.node, new_heading)
    if edge is None:
        return MoveResult("blocked", 0.0, 0.0, new_heading)
    world.pose.heading = new_heading
    world.pose.node = edge.dst
    world.odometer += edge.distance
    duration = edge.distance / command.speed_mps
    world.clock_s += duration
    world.completed_legs += 1
    _fire_kidnaps(world)
    return MoveResult("arrived", edge.distance, duration, new_heading)


def _edge_in_heading(topo: TopoMap, node: str, heading: int) -> Edge | None:
    for edge in sorted((e for e in topo.edges.values() if e.src == node), key=lambda e: e.dst):
        if edge.direction == heading:
            return edge
    return None


def _fire_kidnaps(world: SimWorld) -> None:
    for index, kidnap in enumerate(world.kidnaps):
        if index in world._fired or kidnap.trigger_leg != world.completed_legs:
            continue
        world.pose.node = kidnap.teleport_to
        world.pose.heading = kidnap.new_heading
        world._fired.add(index)


def observe(world: SimWorld) -> SimObservation:
    """Embedding of the true pose's descriptor plus visible object labels."""
    descriptor = pose_descriptor(world.descriptor_node(world.pose.node), world.pose.heading)
    if world.sigma > 0:
        embedding = stub_embed(descriptor, world.sigma, seed=world._noise_rng.next_u64(), dim=world.dim)
    else:
        embedding = stub_embed(descriptor, 0.0, dim=world.dim)
    labels = sorted(
        obj.label
        for obj in world.objects
        if obj.at_edge[0] == world.pose.node
        and world.topo.edges[obj.at_edge].direction == world.pose.heading
    )
    return SimObservation(embedding=embedding, object_labels=tuple(labels))


def visible_objects(world: SimWorld) -> list[WorldObject]:
    return [
        obj
        for obj in world.objects
        if obj.at_edge[0] == world.pose.node
        and world.topo.edges[obj.at_edge].direction == world.pose.heading
    ]


def build_environment_store(
    topo: TopoMap,
    dim: int = DEFAULT_DIM,
    sigma: float = 0.0,
    aliases: dict[str, str] | None = None,
    seed: int = 0,
) -> VectorStore:
    """One record per (node, orientation): the static full-coverage store."""
    aliases = aliases or {}
    store = VectorStore(ENVIRONMENT, dim)
    rng = Xoshiro256pp(hash_text(f"store|{seed}"))
    for node_id in sorted(topo.nodes):
        for orientation in QUANTIZED_DIRECTIONS:
            descriptor = pose_descriptor(aliases.get(node_id, node_id), orientation)
            if sigma > 0:
                embedding = stub_embed(descriptor, sigma, seed=rng.next_u64(), dim=dim)
            else:
                embedding = stub_embed(descriptor, 0.0, dim=dim)
            store.insert(
                EmbeddingRecord(
                    id=pose_descriptor(node_id, orientation),
                    embedding=embedding,
                    meta=RecordMeta(node=node_id, orientation=orientation, kind=ENVIRONMENT, source=descriptor),
                )
            )
    return store


def build_navigational_store(env_store: VectorStore, route: Route) -> VectorStore:
    """The per-route slice of the environment store, re-kinded as navigational."""
    store = VectorStore(NAVIGATIONAL, env_store.dim)
    for leg in route.legs:
        record = env_store.get_by_pose(leg.to, leg.absolute_direction)
        if record is None:
            continue
        store.insert(
            EmbeddingRecord(
                id=record.id,
                embedding=record.embedding,
                meta=RecordMeta(
                    node=record.meta.node,
                    orientation=record.meta.orientation,
                    kind=NAVIGATIONAL,
                    source=record.meta.source,
                ),
            )
        )
    return store
