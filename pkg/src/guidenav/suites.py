"""Programmatic scenario suites over the shipped fixture maps.

These generators build the deterministic evaluation suites: scripted
destination runs, kidnap/recovery runs (clean and noisy), hazard runs with
and without confusion injection, and the curated personalization set.
Given the same arguments they always produce the same specs, so suites can
be written to disk, run through the CLI, and replayed bit-for-bit.
"""

from __future__ import annotations

import json
from pathlib import Path

from .gateway import BENIGN_LABELS, HAZARD_REASONS, resolve_place
from .planner import PlanConstraints, plan_route
from .rng import Xoshiro256pp, hash_text
from .scenario import (
    ConfusionSpec,
    ExpectedSpec,
    KidnapSpec,
    NoiseSpec,
    ObjectSpec,
    PrefsSpec,
    ScenarioSpec,
    ScriptStep,
    resolve_map_path,
)
from .topomap import QUANTIZED_DIRECTIONS, TopoMap

HAZARD_LABEL_CYCLE = sorted(HAZARD_REASONS)
BENIGN_LABEL_CYCLE = sorted(BENIGN_LABELS)


def _labeled_goals(topo: TopoMap) -> list[tuple[str, str]]:
    """(node id, label) pairs whose label resolves back to exactly that node."""
    goals = []
    for node_id in sorted(topo.nodes):
        label = topo.nodes[node_id].label
        if label and resolve_place(label, topo) == node_id:
            goals.append((node_id, label))
    return goals


def _pick(rng: Xoshiro256pp, items):
    return items[rng.next_u64() % len(items)]


def destination_suite(map_name: str, count: int, seed: int = 0) -> list[ScenarioSpec]:
    """Scripted single-destination scenarios on a fixture map."""
    topo = resolve_map_path(f"builtin:{map_name}")
    goals = _labeled_goals(topo)
    nodes = sorted(topo.nodes)
    rng = Xoshiro256pp(hash_text(f"dest|{map_name}|{seed}"))
    specs = []
    for index in range(count):
        goal, label = _pick(rng, goals)
        start = _pick(rng, [n for n in nodes if n != goal])
        specs.append(
            ScenarioSpec(
                name=f"{map_name}_dest_{index:02d}",
                map_path=f"builtin:{map_name}",
                start_node=start,
                start_heading=0,
                script=[ScriptStep(say=f"take me to the {label}")],
                expected=ExpectedSpec(goal_node=goal),
            )
        )
    return specs


def kidnap_suite(count: int, seed: int = 0, sigma: float = 0.0) -> list[ScenarioSpec]:
    """Kidnapped-robot scenarios on the office map.

    Each run teleports the robot after a completed leg to a node other than
    the one the agent expects, and asserts both detection and recovery.
    """
    topo = resolve_map_path("builtin:office")
    goals = _labeled_goals(topo)
    nodes = sorted(topo.nodes)
    rng = Xoshiro256pp(hash_text(f"kidnap|{seed}"))
    specs = []
    while len(specs) < count:
        goal, label = _pick(rng, goals)
        start = _pick(rng, [n for n in nodes if n != goal])
        route = plan_route(topo, start, goal, 0, PlanConstraints())
        if len(route.legs) < 2:
            continue
        trigger = 1 + rng.next_u64() % (len(route.legs) - 1)
        expected_node = route.node_sequence[trigger]
        candidates = [n for n in nodes if n not in (expected_node, goal)]
        teleport_to = _pick(rng, candidates)
        heading = _pick(rng, list(QUANTIZED_DIRECTIONS))
        faults: list = [KidnapSpec(trigger_leg=trigger, teleport_to=teleport_to, new_heading=heading)]
        if sigma > 0:
            faults.append(NoiseSpec(sigma=sigma))
        specs.append(
            ScenarioSpec(
                name=f"office_kidnap_{len(specs):03d}",
                map_path="builtin:office",
                start_node=start,
                start_heading=0,
                script=[ScriptStep(say=f"take me to the {label}")],
                faults=faults,
                expected=ExpectedSpec(goal_node=goal, should_detect_kidnap=True, should_recover=True),
            )
        )
    return specs


def aliased_kidnap_scenario() -> ScenarioSpec:
    """Two visually identical corridor nodes: the miss the threshold cannot see.

    nc4 shares nc1's descriptor, so a kidnap from nc1 to nc4 (same heading)
    verifies at similarity 1.0 and the error surfaces only at the next node.
    """
    return ScenarioSpec(
        name="office_kidnap_aliased",
        map_path="builtin:office",
        start_node="nc0",
        start_heading=0,
        script=[ScriptStep(say="take me to the north corridor 3")],
        faults=[KidnapSpec(trigger_leg=1, teleport_to="nc4", new_heading=0)],
        aliases={"nc4": "nc1"},
        expected=ExpectedSpec(goal_node="nc3", should_detect_kidnap=True, should_recover=True),
    )


def hazard_suite(
    hazardous: bool,
    count: int,
    seed: int = 0,
    confusion: ConfusionSpec | None = None,
) -> list[ScenarioSpec]:
    """Hazard-protocol scenarios: one object on one route edge per run.

    The object sits on a planned leg so exactly one labelled scan happens
    per run; scripts answer any prompt with "proceed" so runs terminate
    under confusion flips as well.
    """
    topo = resolve_map_path("builtin:office")
    goals = _labeled_goals(topo)
    nodes = sorted(topo.nodes)
    labels = HAZARD_LABEL_CYCLE if hazardous else BENIGN_LABEL_CYCLE
    rng = Xoshiro256pp(hash_text(f"hazard|{hazardous}|{seed}"))
    kind = "potential" if hazardous else "benign"
    specs = []
    while len(specs) < count:
        goal, label = _pick(rng, goals)
        start = _pick(rng, [n for n in nodes if n != goal])
        route = plan_route(topo, start, goal, 0, PlanConstraints())
        if len(route.legs) < 2:
            continue
        leg = route.legs[rng.next_u64() % len(route.legs)]
        specs.append(
            ScenarioSpec(
                name=f"office_hazard_{kind}_{len(specs):03d}",
                map_path="builtin:office",
                start_node=start,
                start_heading=0,
                script=[ScriptStep(say=f"take me to the {label}"), ScriptStep(say="proceed")],
                objects=[
                    ObjectSpec(
                        label=labels[len(specs) % len(labels)],
                        edge=(leg.edge.src, leg.edge.dst),
                        hazardous=hazardous,
                    )
                ],
                confusion=confusion,
                expected=ExpectedSpec(goal_node=goal, hazard_ground_truth=hazardous),
            )
        )
    return specs


def personalization_suite() -> list[ScenarioSpec]:
    """Ten curated preference scenarios, including the 3x-detour fixture."""

    def spec(name, map_name, start, script, expected_goal, prefs=None):
        return ScenarioSpec(
            name=name,
            map_path=f"builtin:{map_name}",
            start_node=start,
            start_heading=0,
            script=[ScriptStep(say=s) for s in script],
            prefs=prefs or PrefsSpec(),
            expected=ExpectedSpec(goal_node=expected_goal),
        )

    return [
        # Compliant route is 24 m vs 8 m direct: exactly 3x longer.
        spec(
            "pers_01_avoid_stairs_3x",
            "office",
            "sc3",
            ["avoid stairs", "take me to the north corridor 3"],
            "nc3",
        ),
        spec(
            "pers_02_avoid_elevator_3x",
            "office",
            "sc2",
            ["take me to the north corridor 2"],
            "nc2",
            prefs=PrefsSpec(avoid_tags=["elevator"]),
        ),
        spec(
            "pers_03_avoid_noise_from_noisy_start",
            "office",
            "r_food",
            ["avoid noisy_area", "take me to the library"],
            "r_library",
        ),
        spec(
            "pers_04_avoid_stairs_long_haul",
            "office",
            "r_lobby",
            ["take me to the gym"],
            "gym",
            prefs=PrefsSpec(avoid_tags=["stairs"]),
        ),
        spec(
            "pers_05_avoid_both_crossings",
            "office",
            "sc0",
            ["avoid stairs", "avoid elevator", "take me to the office 104"],
            "o104",
        ),
        spec(
            "pers_06_nonbinding_constraint",
            "office",
            "nc0",
            ["avoid noisy_area", "take me to the north corridor 5"],
            "nc5",
        ),
        spec(
            "pers_07_avoid_quiet_from_quiet_start",
            "office",
            "o101",
            ["avoid quiet_area", "take me to the concert hall"],
            "r_concert",
        ),
        spec(
            "pers_08_tie_break_unchanged",
            "office",
            "sc1",
            ["avoid elevator", "take me to the north corridor 1"],
            "nc1",
        ),
        spec(
            "pers_09_speed_changes",
            "house",
            "entry",
            ["slow down", "slow down", "slow down", "speed up", "take me to the kitchen"],
            "kitchen",
        ),
        spec(
            "pers_10_avoid_then_clear",
            "office",
            "sc3",
            ["avoid stairs", "don't avoid stairs", "take me to the north corridor 3"],
            "nc3",
        ),
    ]


def write_suite(specs: list[ScenarioSpec], directory) -> list[Path]:
    """Serialize specs as one JSON file each (the run_suite input format)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for spec in specs:
        path = directory / f"{spec.name}.json"
        path.write_text(
            json.dumps(spec.model_dump(exclude_none=True), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        paths.append(path)
    return paths
