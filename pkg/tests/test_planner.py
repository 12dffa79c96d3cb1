import pytest
from hypothesis import given
from hypothesis import strategies as st

from guidenav.planner import (
    PlanConstraints,
    PlanningError,
    TurnCommand,
    Unreachable,
    describe_route,
    k_alternative_routes,
    plan_route,
    relative_turn,
)
from guidenav.topomap import parse_map
from helpers import enumerate_all_paths, enumerate_best, random_map, rectangle_map

QUANT = [0, 90, 180, 270]


# --- relative_turn ------------------------------------------------------------


def test_relative_turn_convention():
    assert relative_turn(0, 0) is TurnCommand.STRAIGHT
    assert relative_turn(0, 90) is TurnCommand.LEFT
    assert relative_turn(0, 270) is TurnCommand.RIGHT
    assert relative_turn(0, 180) is TurnCommand.TURN_AROUND
    # (0 - 270) mod 360 = 90: a left turn
    assert relative_turn(270, 0) is TurnCommand.LEFT


def test_relative_turn_rejects_unquantized():
    with pytest.raises(PlanningError):
        relative_turn(45, 0)
    with pytest.raises(PlanningError):
        relative_turn(0, 13)


@given(st.sampled_from(QUANT))
def test_relative_turn_identity(heading):
    assert relative_turn(heading, heading) is TurnCommand.STRAIGHT


@given(st.sampled_from(QUANT), st.sampled_from(QUANT))
def test_turn_algebra_recovers_direction(heading, direction):
    from guidenav.planner import TURN_DELTA

    turn = relative_turn(heading, direction)
    assert (heading + TURN_DELTA[turn]) % 360 == direction


# --- plan_route ----------------------------------------------------------------


def test_rectangle_tie_break():
    topo = rectangle_map()
    route = plan_route(topo, "A", "C", 0)
    assert route.total_distance == 7
    assert route.node_sequence == ("A", "B", "C")
    best = enumerate_best(topo, "A", "C", PlanConstraints())
    assert best == (7.0, ("A", "B", "C"))


def test_plan_to_self_is_empty():
    topo = rectangle_map()
    route = plan_route(topo, "A", "A", 0)
    assert route.is_empty() and route.total_distance == 0
    assert route.description == "You are already at A."


def test_avoid_tag_forces_detour():
    topo = rectangle_map()
    tagged = parse_map(
        "MAP v1\n"
        "NODE A 0 0\nNODE B 4 0 tag=stairs\nNODE C 4 3\nNODE D 0 3\n"
        "EDGE A B dist=4 dir=0\nEDGE B A dist=4 dir=180\n"
        "EDGE B C dist=3 dir=90\nEDGE C B dist=3 dir=270\n"
        "EDGE A D dist=3 dir=90\nEDGE D A dist=3 dir=270\n"
        "EDGE D C dist=4 dir=0\nEDGE C D dist=4 dir=180\n"
    )
    constraints = PlanConstraints(avoid_tags=frozenset({"stairs"}))
    route = plan_route(tagged, "A", "C", 0, constraints)
    assert route.node_sequence == ("A", "D", "C")
    assert route.total_distance == 7
    assert enumerate_best(tagged, "A", "C", constraints) == (7.0, ("A", "D", "C"))
    # sanity: unconstrained still prefers the lexicographically smaller tie
    assert plan_route(tagged, "A", "C", 0).node_sequence == ("A", "B", "C")


def test_unreachable_reports_constraint_cause():
    text = (
        "MAP v1\nNODE A 0 0\nNODE B 4 0 tag=stairs\nNODE C 8 0\n"
        "EDGE A B dist=4 dir=0\nEDGE B C dist=4 dir=0\n"
    )
    topo = parse_map(text)
    with pytest.raises(Unreachable) as constrained:
        plan_route(topo, "A", "C", 0, PlanConstraints(avoid_tags=frozenset({"stairs"})))
    assert constrained.value.due_to_constraints

    island = parse_map("MAP v1\nNODE A 0 0\nNODE B 4 0\n")
    with pytest.raises(Unreachable) as disconnected:
        plan_route(island, "A", "B", 0)
    assert not disconnected.value.due_to_constraints


def test_goal_with_avoided_tag_is_constraint_unreachable():
    topo = parse_map(
        "MAP v1\nNODE A 0 0\nNODE B 4 0 tag=stairs\nEDGE A B dist=4 dir=0\nEDGE B A dist=4 dir=180\n"
    )
    with pytest.raises(Unreachable) as excinfo:
        plan_route(topo, "A", "B", 0, PlanConstraints(avoid_tags=frozenset({"stairs"})))
    assert excinfo.value.due_to_constraints


def test_oracle_equivalence_random_maps():
    agreements = 0
    for seed in range(60):
        topo = random_map(seed)
        ids = sorted(topo.nodes)
        start, goal = ids[0], ids[-1]
        oracle = enumerate_best(topo, start, goal, PlanConstraints())
        try:
            route = plan_route(topo, start, goal, 0)
        except Unreachable:
            assert oracle is None
            continue
        assert oracle is not None
        assert route.total_distance == oracle[0]
        assert route.node_sequence == oracle[1]
        agreements += 1
    assert agreements >= 20  # generated maps are frequently connected


def test_constraint_soundness_on_random_maps():
    constraints = PlanConstraints(avoid_tags=frozenset({"stairs"}))
    for seed in range(40):
        topo = random_map(seed)
        ids = sorted(topo.nodes)
        try:
            route = plan_route(topo, ids[0], ids[-1], 0, constraints)
        except Unreachable:
            continue
        for leg in route.legs:
            assert not (topo.nodes[leg.to].tags & constraints.avoid_tags)
            assert not (leg.edge.tags & constraints.avoid_tags)


# --- k_alternative_routes -------------------------------------------------------


def test_rectangle_two_alternatives():
    topo = rectangle_map()
    routes = k_alternative_routes(topo, "A", "C", 2)
    assert [r.node_sequence for r in routes] == [("A", "B", "C"), ("A", "D", "C")]
    assert [r.total_distance for r in routes] == [7, 7]


def test_k1_equals_plan_route():
    topo = rectangle_map()
    assert k_alternative_routes(topo, "A", "C", 1)[0] == plan_route(topo, "A", "C", 0)


def test_single_path_graph_caps_output():
    topo = parse_map(
        "MAP v1\nNODE A 0 0\nNODE B 4 0\nNODE C 8 0\n"
        "EDGE A B dist=4 dir=0\nEDGE B C dist=4 dir=0\n"
    )
    routes = k_alternative_routes(topo, "A", "C", 3)
    assert len(routes) == 1


def test_alternatives_match_enumeration(office_map):
    routes = k_alternative_routes(office_map, "sc0", "nc2", 4)
    enumerated = enumerate_all_paths(office_map, "sc0", "nc2")
    assert [(r.total_distance, r.node_sequence) for r in routes] == enumerated[:4]
    distances = [r.total_distance for r in routes]
    assert distances == sorted(distances)


def test_alternatives_are_loop_free_random_maps():
    for seed in range(20):
        topo = random_map(seed)
        ids = sorted(topo.nodes)
        try:
            routes = k_alternative_routes(topo, ids[0], ids[-1], 3)
        except Unreachable:
            continue
        for route in routes:
            seq = route.node_sequence
            assert len(seq) == len(set(seq))


# --- describe_route --------------------------------------------------------------


def test_description_golden():
    topo = rectangle_map()
    route = plan_route(topo, "A", "C", 0)
    assert route.description == (
        "Leg 1: turn straight, walk 4 m to B.\nLeg 2: turn left, walk 3 m to C."
    )
    assert describe_route(route) == route.description


def test_description_is_pure():
    topo = rectangle_map()
    a = plan_route(topo, "A", "C", 0)
    b = plan_route(topo, "A", "C", 0)
    assert describe_route(a) == describe_route(b)
    assert a.description.encode() == b.description.encode()


def test_description_uses_labels():
    topo = parse_map(
        'MAP v1\nNODE A 0 0\nNODE B 4 0 label="Grand Hall"\nEDGE A B dist=4 dir=0\nEDGE B A dist=4 dir=180\n'
    )
    route = plan_route(topo, "A", "B", 0)
    assert route.description == "Leg 1: turn straight, walk 4 m to Grand Hall."


def test_total_distance_is_leg_sum():
    for seed in range(20):
        topo = random_map(seed)
        ids = sorted(topo.nodes)
        try:
            route = plan_route(topo, ids[0], ids[-1], 0)
        except Unreachable:
            continue
        assert route.total_distance == sum(leg.distance for leg in route.legs)
