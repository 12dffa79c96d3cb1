"""Session state machine: plan, traverse leg by leg, verify, recover, prompt.

Phases: idle, planning, traversing, verifying, awaiting_decision,
recovering, completed, failed.  Within traversing the agent tracks a
sub-step so the per-leg protocol stays explicit:

    start leg   -> MoveCommand(turn, 0)            (orient toward the leg)
    "scan"      <- Observation                      (hazard check, labels only)
    clear       -> MoveCommand(straight, distance)  (walk the corridor)
    "arrival"   <- ArrivalReport                    -> verifying + QueryImages
    "verify"    <- Observation                      (one similarity check/leg)

Transition table (events not listed for a phase get a spoken reply and no
transition; nothing ever raises out of handle_event):

    phase             event          outcome
    ----------------- -------------- ------------------------------------------
    idle/completed    UserUtterance  navigate -> adopt route -> traversing;
                                     preferences/status/unknown -> Say
    failed            UserUtterance  status/preferences only; navigation refused
    traversing(scan)  Observation    hazard -> awaiting_decision + HazardPrompt;
                                     clear -> MoveCommand(straight, leg)
    traversing(arr.)  ArrivalReport  -> verifying + QueryImages(navigational)
    verifying         Observation    similarity >= tau -> advance (next leg or
                                     completed); below tau -> recovering + Say
    recovering        Observation    env top-1 >= tau_r -> relocate + replan ->
                                     traversing; else retry, then failed
    awaiting_decision UserDecision   proceed -> unblock + walk current leg;
                                     reroute -> adopt alternative (stays blocked)
    traversing        MoveBlocked    -> failed (no corridor where one was
                                     believed; mislocalization surfaced late)

The believed pose only advances on a verified arrival; recovery replans
from the relocated node rather than resuming the stale route.  All
planning performed here honors the session's avoid tags and the runtime
blocked-edge overlay, both of which live in the session state.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import gateway as gw
from .planner import (
    PlanConstraints,
    Route,
    TurnCommand,
    Unreachable,
    k_alternative_routes,
    plan_route,
    relative_turn,
)
from .topomap import TopoMap, set_edge_blocked
from .vector_store import (
    ENVIRONMENT,
    NAVIGATIONAL,
    EmbeddingRecord,
    RecordMeta,
    VectorStore,
    cosine_similarity,
)

PHASES = (
    "idle",
    "planning",
    "traversing",
    "verifying",
    "awaiting_decision",
    "recovering",
    "completed",
    "failed",
)

SPEED_FASTER_FACTOR = 1.25
SPEED_SLOWER_FACTOR = 0.8
SPEED_MIN = 0.3
SPEED_MAX = 2.0
MAX_RECOVERY_FAILURES = 2


@dataclass(frozen=True)
class SessionPrefs:
    avoid_tags: frozenset[str] = frozenset()
    speed_mps: float = 1.0
    verbosity: str = "brief"
    arrival_threshold: float = 0.85
    reloc_threshold: float = 0.80

    def __post_init__(self):
        if not 0.0 < self.arrival_threshold < 1.0:
            raise ValueError("arrival threshold must lie in (0, 1)")
        if not 0.0 < self.reloc_threshold < 1.0:
            raise ValueError("relocation threshold must lie in (0, 1)")
        if self.speed_mps <= 0:
            raise ValueError("speed must be positive")
        if self.verbosity not in ("brief", "detailed"):
            raise ValueError("verbosity must be 'brief' or 'detailed'")


# --- Events (inbound) --------------------------------------------------------


@dataclass(frozen=True)
class UserUtterance:
    text: str


@dataclass(frozen=True)
class ArrivalReport:
    odometry_distance: float


@dataclass(frozen=True)
class Observation:
    embedding: np.ndarray
    object_labels: tuple[str, ...] = ()


@dataclass(frozen=True)
class UserDecision:
    prompt_id: str
    choice: str  # proceed | reroute


@dataclass(frozen=True)
class MoveBlocked:
    heading: int


AgentEvent = UserUtterance | ArrivalReport | Observation | UserDecision | MoveBlocked


# --- Outputs (outbound) ------------------------------------------------------


@dataclass(frozen=True)
class Say:
    text: str


@dataclass(frozen=True)
class MoveCommand:
    turn: TurnCommand
    distance: float
    speed_mps: float


@dataclass(frozen=True)
class QueryImages:
    store_kind: str
    node: str | None = None
    orientation: int | None = None


@dataclass(frozen=True)
class HazardPrompt:
    prompt_id: str
    verdict: gw.HazardVerdict
    alternative: Route | None


@dataclass(frozen=True)
class SessionResult:
    success: bool
    reason: str


AgentOutput = Say | MoveCommand | QueryImages | HazardPrompt | SessionResult


@dataclass(frozen=True)
class PendingPrompt:
    prompt_id: str
    edge_key: tuple[str, str]
    alternative: Route | None
    verdict: gw.HazardVerdict


@dataclass(frozen=True)
class AgentState:
    believed_node: str
    believed_heading: int
    prefs: SessionPrefs = SessionPrefs()
    phase: str = "idle"
    route: Route | None = None
    leg_index: int = 0
    awaiting: str | None = None  # scan | arrival | verify | recovery
    goal: str | None = None
    pending_prompt: PendingPrompt | None = None
    queued_hazards: tuple[gw.HazardVerdict, ...] = ()
    blocked_edges: frozenset[tuple[str, str]] = frozenset()
    recovery_failures: int = 0
    next_prompt_seq: int = 1
    needs_replan: bool = False

    def remaining_legs(self) -> int:
        if self.route is None:
            return 0
        return len(self.route.legs) - self.leg_index


@dataclass
class AgentDeps:
    """Dependency snapshot for one transition; the navigational store is the
    only member the agent rewrites (on route adoption)."""

    topo: TopoMap
    env_store: VectorStore
    nav_store: VectorStore
    gateway: object
    no_planner: bool = False


@dataclass(frozen=True)
class ArrivalCheck:
    arrived: bool
    similarity: float


def verify_arrival(expected: EmbeddingRecord | None, observation: np.ndarray, threshold: float) -> ArrivalCheck:
    """Arrived iff cosine similarity to the expected record reaches the
    threshold; a missing record counts as a mismatch with similarity -1."""
    if expected is None:
        return ArrivalCheck(False, -1.0)
    similarity = cosine_similarity(expected.embedding, observation)
    return ArrivalCheck(similarity >= threshold, similarity)


def apply_preference(prefs: SessionPrefs, intent: gw.Intent) -> SessionPrefs:
    """Pure preference update; speed adjustments clamp to [0.3, 2.0] m/s."""
    if intent.kind == gw.SET_AVOID_TAG:
        return replace(prefs, avoid_tags=prefs.avoid_tags | {intent.tag})
    if intent.kind == gw.CLEAR_AVOID_TAG:
        return replace(prefs, avoid_tags=prefs.avoid_tags - {intent.tag})
    if intent.kind == gw.ADJUST_SPEED:
        factor = SPEED_FASTER_FACTOR if intent.delta == "faster" else SPEED_SLOWER_FACTOR
        return replace(prefs, speed_mps=_clamp_speed(prefs.speed_mps * factor))
    if intent.kind == gw.SET_SPEED:
        return replace(prefs, speed_mps=_clamp_speed(intent.speed_mps))
    if intent.kind == gw.SET_VERBOSITY:
        return replace(prefs, verbosity=intent.verbosity)
    raise ValueError(f"not a preference intent: {intent.kind}")


def _clamp_speed(value: float) -> float:
    return min(SPEED_MAX, max(SPEED_MIN, value))


def _planning_map(state: AgentState, deps: AgentDeps) -> TopoMap:
    topo = deps.topo
    for src, dst in sorted(state.blocked_edges):
        if topo.has_edge(src, dst):
            topo = set_edge_blocked(topo, src, dst, True)
    return topo


def _constraints(state: AgentState) -> PlanConstraints:
    return PlanConstraints(avoid_tags=state.prefs.avoid_tags, avoid_blocked=True)


def _rebuild_nav_store(deps: AgentDeps, route: Route) -> None:
    deps.nav_store.clear()
    for leg in route.legs:
        source = deps.env_store.get_by_pose(leg.to, leg.absolute_direction)
        if source is None:
            continue  # verification will read this as a mismatch
        deps.nav_store.insert(
            EmbeddingRecord(
                id=source.id,
                embedding=source.embedding,
                meta=RecordMeta(
                    node=source.meta.node,
                    orientation=source.meta.orientation,
                    kind=NAVIGATIONAL,
                    source=source.meta.source,
                ),
            )
        )


def _say(state: AgentState, event) -> Say:
    return Say(gw.compose_user_message(event, state.prefs.verbosity))


def _status_say(state: AgentState, deps: AgentDeps) -> Say:
    return _say(
        state,
        gw.StatusMsg(
            phase=state.phase,
            node_label=deps.topo.display_name(state.believed_node),
            heading=state.believed_heading,
            goal_label=deps.topo.display_name(state.goal) if state.goal else None,
            legs_remaining=state.remaining_legs(),
        ),
    )


def _start_leg(state: AgentState) -> tuple[AgentState, list[AgentOutput]]:
    leg = state.route.legs[state.leg_index]
    turn = relative_turn(state.believed_heading, leg.absolute_direction)
    outputs: list[AgentOutput] = [
        _say(
            state,
            gw.LegStartMsg(
                index=state.leg_index + 1,
                count=len(state.route.legs),
                turn_phrase=turn.phrase,
                distance=leg.distance,
                to_label=leg.to_label,
            ),
        ),
        MoveCommand(turn=turn, distance=0.0, speed_mps=state.prefs.speed_mps),
    ]
    return replace(state, phase="traversing", awaiting="scan"), outputs


def _adopt_route(
    state: AgentState, deps: AgentDeps, route: Route, announce: bool = True
) -> tuple[AgentState, list[AgentOutput]]:
    outputs: list[AgentOutput] = []
    if route.is_empty():
        next_state = replace(
            state, phase="completed", route=None, leg_index=0, awaiting=None, goal=route.goal, needs_replan=False
        )
        outputs.append(Say(route.description))
        outputs.append(SessionResult(True, f"already at {route.goal}"))
        return next_state, outputs
    _rebuild_nav_store(deps, route)
    if announce:
        outputs.append(
            _say(
                state,
                gw.RoutePlannedMsg(
                    goal_label=route.legs[-1].to_label,
                    leg_count=len(route.legs),
                    total_distance=route.total_distance,
                    description=route.description,
                ),
            )
        )
    next_state = replace(state, route=route, leg_index=0, goal=route.goal, needs_replan=False)
    leg_state, leg_outputs = _start_leg(next_state)
    return leg_state, outputs + leg_outputs


def _fail(state: AgentState, reason: str) -> tuple[AgentState, list[AgentOutput]]:
    next_state = replace(state, phase="failed", awaiting=None, pending_prompt=None)
    return next_state, [_say(state, gw.FailureMsg(reason)), SessionResult(False, reason)]


# --- Intent handling ---------------------------------------------------------


def _handle_navigate(state: AgentState, deps: AgentDeps, intent: gw.Intent) -> tuple[AgentState, list[AgentOutput]]:
    if state.phase not in ("idle", "completed"):
        if state.phase == "failed":
            return state, [Say("This session has failed; start a new one to navigate again.")]
        return state, [Say("Navigation is already in progress; ask for status or wait for arrival.")]
    if not intent.destination_resolved:
        return state, [Say(f"I could not find {intent.destination!r} on this map.")]
    goal = intent.destination
    if deps.no_planner:
        from .topomap import serialize_map

        text = deps.gateway.infer_route_text(serialize_map(deps.topo), state.believed_node, goal)
        if text is None:
            return _fail(state, "route planning is disabled and no route could be inferred from the raw map")
        return _fail(state, "route planning is disabled; inferred directions cannot be executed")
    try:
        route = plan_route(
            _planning_map(state, deps), state.believed_node, goal, state.believed_heading, _constraints(state)
        )
    except Unreachable as exc:
        if exc.due_to_constraints:
            return state, [
                Say(
                    f"{deps.topo.display_name(goal)} is unreachable under your current preferences "
                    f"(avoiding: {', '.join(sorted(state.prefs.avoid_tags)) or 'nothing'}). "
                    "Relax a preference to continue."
                )
            ]
        return state, [Say(f"{deps.topo.display_name(goal)} cannot be reached from here on this map.")]
    fresh = replace(state, recovery_failures=0, pending_prompt=None, queued_hazards=())
    outputs = [Say(f"Destination set to {deps.topo.display_name(goal)}.")]
    adopted_state, adopt_outputs = _adopt_route(fresh, deps, route)
    return adopted_state, outputs + adopt_outputs


def _handle_preference(state: AgentState, deps: AgentDeps, intent: gw.Intent) -> tuple[AgentState, list[AgentOutput]]:
    prefs = apply_preference(state.prefs, intent)
    if intent.kind == gw.SET_AVOID_TAG:
        change = f"avoiding {intent.tag}"
    elif intent.kind == gw.CLEAR_AVOID_TAG:
        change = f"no longer avoiding {intent.tag}"
    elif intent.kind in (gw.ADJUST_SPEED, gw.SET_SPEED):
        change = f"walking speed {prefs.speed_mps:g} m/s"
    else:
        change = f"{prefs.verbosity} guidance"
    needs_replan = state.needs_replan
    if intent.kind in (gw.SET_AVOID_TAG, gw.CLEAR_AVOID_TAG) and state.phase in (
        "traversing",
        "verifying",
        "awaiting_decision",
        "recovering",
    ):
        needs_replan = True
    next_state = replace(state, prefs=prefs, needs_replan=needs_replan)
    return next_state, [_say(next_state, gw.PrefAckMsg(change))]


def _handle_utterance(state: AgentState, deps: AgentDeps, event: UserUtterance) -> tuple[AgentState, list[AgentOutput]]:
    if not event.text or not event.text.strip():
        return state, [Say("I did not hear anything.")]
    intent = deps.gateway.interpret_query(event.text, deps.topo)
    if intent.kind == gw.NAVIGATE_TO:
        return _handle_navigate(state, deps, intent)
    if intent.kind in (gw.SET_AVOID_TAG, gw.CLEAR_AVOID_TAG, gw.SET_SPEED, gw.ADJUST_SPEED, gw.SET_VERBOSITY):
        return _handle_preference(state, deps, intent)
    if intent.kind == gw.ASK_STATUS:
        return state, [_status_say(state, deps)]
    if intent.kind == gw.HAZARD_DECISION:
        if state.phase == "awaiting_decision" and state.pending_prompt is not None:
            return _handle_decision(state, deps, UserDecision(state.pending_prompt.prompt_id, intent.decision))
        return state, [Say("There is nothing to decide right now.")]
    return state, [Say("I did not understand that. Try 'take me to <place>' or 'avoid <area>'.")]


# --- Traversal steps ---------------------------------------------------------


def _handle_scan(state: AgentState, deps: AgentDeps, event: Observation) -> tuple[AgentState, list[AgentOutput]]:
    leg = state.route.legs[state.leg_index]
    if event.object_labels:
        verdict = deps.gateway.classify_hazard(
            list(event.object_labels), context=f"approaching {leg.to_label} from {state.believed_node}"
        )
        if verdict.hazardous:
            return _raise_hazard(state, deps, verdict)
    return (
        replace(state, awaiting="arrival"),
        [MoveCommand(turn=TurnCommand.STRAIGHT, distance=leg.distance, speed_mps=state.prefs.speed_mps)],
    )


def _raise_hazard(state: AgentState, deps: AgentDeps, verdict: gw.HazardVerdict) -> tuple[AgentState, list[AgentOutput]]:
    leg = state.route.legs[state.leg_index]
    blocked = state.blocked_edges | {leg.edge.key, (leg.edge.dst, leg.edge.src)}
    probe = replace(state, blocked_edges=blocked)
    alternative: Route | None = None
    try:
        candidates = k_alternative_routes(
            _planning_map(probe, deps),
            state.believed_node,
            state.goal,
            k=1,
            initial_heading=state.believed_heading,
            constraints=_constraints(probe),
        )
        alternative = candidates[0] if candidates else None
    except Unreachable:
        alternative = None
    prompt_id = f"hz-{state.next_prompt_seq}"
    prompt = PendingPrompt(prompt_id, leg.edge.key, alternative, verdict)
    next_state = replace(
        state,
        phase="awaiting_decision",
        awaiting=None,
        blocked_edges=blocked,
        pending_prompt=prompt,
        next_prompt_seq=state.next_prompt_seq + 1,
    )
    outputs = [
        _say(
            state,
            gw.HazardMsg(
                reason=verdict.reason,
                confidence=verdict.confidence,
                alternative_description=alternative.description if alternative else None,
            ),
        ),
        HazardPrompt(prompt_id, verdict, alternative),
    ]
    return next_state, outputs


def _handle_decision(state: AgentState, deps: AgentDeps, event: UserDecision) -> tuple[AgentState, list[AgentOutput]]:
    prompt = state.pending_prompt
    if state.phase != "awaiting_decision" or prompt is None:
        return state, [Say("There is no open prompt to answer.")]
    if event.prompt_id != prompt.prompt_id:
        return state, [Say(f"Prompt {event.prompt_id} is stale or unknown; the open prompt is {prompt.prompt_id}.")]
    if event.choice not in ("proceed", "reroute"):
        return state, [Say("Please answer proceed or reroute.")]

    if event.choice == "proceed":
        unblocked = state.blocked_edges - {prompt.edge_key, (prompt.edge_key[1], prompt.edge_key[0])}
        cleared = replace(state, blocked_edges=unblocked, pending_prompt=None)
        followup_state, followup = _next_queued_hazard(cleared, deps)
        if followup:
            return followup_state, [Say("Proceeding past the reported hazard.")] + followup
        leg = cleared.route.legs[cleared.leg_index]
        return (
            replace(followup_state, phase="traversing", awaiting="arrival"),
            [
                Say("Proceeding past the reported hazard."),
                MoveCommand(turn=TurnCommand.STRAIGHT, distance=leg.distance, speed_mps=cleared.prefs.speed_mps),
            ],
        )

    if prompt.alternative is None:
        return state, [Say("No alternative route exists. Say proceed to continue past the hazard.")]
    cleared = replace(state, pending_prompt=None, queued_hazards=())
    return _adopt_route(cleared, deps, prompt.alternative)


def _next_queued_hazard(state: AgentState, deps: AgentDeps) -> tuple[AgentState, list[AgentOutput]]:
    if not state.queued_hazards:
        return state, []
    verdict, rest = state.queued_hazards[0], state.queued_hazards[1:]
    dequeued = replace(state, queued_hazards=rest)
    return _raise_hazard(dequeued, deps, verdict)


def _expected_record(state: AgentState, deps: AgentDeps) -> EmbeddingRecord | None:
    leg = state.route.legs[state.leg_index]
    return deps.nav_store.get_by_pose(leg.to, leg.absolute_direction)


def detect_localization_error(state: AgentState, observation: Observation, deps: AgentDeps) -> bool:
    """True iff the arrival check for the current leg comes back a mismatch."""
    check = verify_arrival(_expected_record(state, deps), observation.embedding, state.prefs.arrival_threshold)
    return not check.arrived


def _handle_verify(state: AgentState, deps: AgentDeps, event: Observation) -> tuple[AgentState, list[AgentOutput]]:
    leg = state.route.legs[state.leg_index]
    check = verify_arrival(_expected_record(state, deps), event.embedding, state.prefs.arrival_threshold)
    if not check.arrived:
        next_state = replace(state, phase="recovering", awaiting="recovery")
        return next_state, [
            _say(state, gw.MismatchMsg(expected_label=leg.to_label, similarity=check.similarity)),
            QueryImages(ENVIRONMENT),
        ]
    arrived = replace(
        state,
        believed_node=leg.to,
        believed_heading=leg.absolute_direction,
        leg_index=state.leg_index + 1,
    )
    if arrived.leg_index >= len(arrived.route.legs):
        done = replace(arrived, phase="completed", awaiting=None, route=None, leg_index=0)
        outputs = [
            _say(arrived, gw.ArrivalMsg(label=leg.to_label, total_distance=state.route.total_distance)),
            SessionResult(True, f"arrived at {arrived.goal}"),
        ]
        return done, outputs
    if arrived.needs_replan:
        return _replan_in_place(arrived, deps)
    return _start_leg(arrived)


def _replan_in_place(state: AgentState, deps: AgentDeps) -> tuple[AgentState, list[AgentOutput]]:
    try:
        route = plan_route(
            _planning_map(state, deps),
            state.believed_node,
            state.goal,
            state.believed_heading,
            _constraints(state),
        )
    except Unreachable as exc:
        cleared = replace(state, needs_replan=False)
        if exc.due_to_constraints:
            say = Say(
                f"Your preferences make {deps.topo.display_name(state.goal)} unreachable; "
                "keeping the current route."
            )
        else:
            say = Say(f"{deps.topo.display_name(state.goal)} is no longer reachable; keeping the current route.")
        leg_state, leg_outputs = _start_leg(cleared)
        return leg_state, [say] + leg_outputs
    return _adopt_route(state, deps, route)


def recover_localization(state: AgentState, observation: Observation, deps: AgentDeps) -> tuple[AgentState, list[AgentOutput]]:
    """Broad search against the environment store; relocate and replan, or fail."""
    if len(deps.env_store) == 0:
        return _fail(state, "LocalizationLost: the environment store is empty")
    top = deps.env_store.query_top_k(observation.embedding, 1)[0]
    if top.similarity < state.prefs.reloc_threshold:
        failures = state.recovery_failures + 1
        if failures >= MAX_RECOVERY_FAILURES:
            return _fail(state, "LocalizationLost: no confident match in the environment store")
        retry = replace(state, recovery_failures=failures)
        return retry, [
            Say("Still unsure of our location; looking again."),
            QueryImages(ENVIRONMENT),
        ]
    relocated = replace(
        state,
        believed_node=top.record.meta.node,
        believed_heading=top.record.meta.orientation,
        awaiting=None,
    )
    try:
        route = plan_route(
            _planning_map(relocated, deps),
            relocated.believed_node,
            relocated.goal,
            relocated.believed_heading,
            _constraints(relocated),
        )
    except Unreachable:
        return _fail(relocated, f"relocated to {relocated.believed_node} but the goal is now unreachable")
    notice = _say(
        relocated,
        gw.RecoveryMsg(
            label=deps.topo.display_name(relocated.believed_node),
            similarity=top.similarity,
            leg_count=len(route.legs),
            total_distance=route.total_distance,
            description=route.description,
        ),
    )
    adopted, outputs = _adopt_route(relocated, deps, route, announce=False)
    return adopted, [notice] + outputs


# --- Dispatcher ---------------------------------------------------------------


def handle_event(state: AgentState, event: AgentEvent, deps: AgentDeps) -> tuple[AgentState, list[AgentOutput]]:
    """Total transition function: every (phase, event) pair has an outcome,
    failures become the failed phase, and nothing escapes as an exception."""
    if isinstance(event, UserUtterance):
        return _handle_utterance(state, deps, event)

    if isinstance(event, UserDecision):
        return _handle_decision(state, deps, event)

    if isinstance(event, ArrivalReport):
        if state.phase == "traversing" and state.awaiting == "arrival":
            leg = state.route.legs[state.leg_index]
            next_state = replace(state, phase="verifying", awaiting="verify")
            return next_state, [QueryImages(NAVIGATIONAL, node=leg.to, orientation=leg.absolute_direction)]
        return state, [_status_say(state, deps)]

    if isinstance(event, Observation):
        if state.phase == "traversing" and state.awaiting == "scan":
            return _handle_scan(state, deps, event)
        if state.phase == "verifying" and state.awaiting == "verify":
            return _handle_verify(state, deps, event)
        if state.phase == "recovering" and state.awaiting == "recovery":
            return recover_localization(state, event, deps)
        if state.phase == "awaiting_decision" and event.object_labels:
            verdict = deps.gateway.classify_hazard(list(event.object_labels), context="while awaiting a decision")
            if verdict.hazardous:
                queued = replace(state, queued_hazards=state.queued_hazards + (verdict,))
                return queued, [Say("Noted another possible hazard; answer the open prompt first.")]
        return state, [_status_say(state, deps)]

    if isinstance(event, MoveBlocked):
        if state.phase == "traversing":
            return _fail(
                state,
                f"no corridor heading {event.heading} from where I believed we were ({state.believed_node})",
            )
        return state, [_status_say(state, deps)]

    return state, [Say("Ignoring an event I do not recognize.")]


def initial_state(start_node: str, start_heading: int, prefs: SessionPrefs | None = None) -> AgentState:
    return AgentState(
        believed_node=start_node,
        believed_heading=start_heading,
        prefs=prefs if prefs is not None else SessionPrefs(),
    )
