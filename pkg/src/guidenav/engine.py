"""Session engine: drives one agent against one simulated world.

The engine owns the per-session event queue.  User input (utterances,
prompt decisions) enters through ``post_*``; every agent output is acted
on immediately -- move commands run in the simulator, image queries
produce observations -- and the induced events are processed in FIFO
order until the session quiesces (nothing pending, or a hazard prompt is
waiting on the user).

Everything observable lands in one append-only transcript of typed
entries with strictly increasing sequence numbers and no wall-clock
timestamps, so a (scenario, seed) pair replays byte-for-byte.  The
transcript doubles as the service's event log.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .agent import (
    AgentDeps,
    AgentState,
    ArrivalReport,
    HazardPrompt,
    MoveBlocked,
    MoveCommand,
    Observation,
    QueryImages,
    Say,
    SessionPrefs,
    SessionResult,
    UserDecision,
    UserUtterance,
    handle_event,
    initial_state,
)
from .planner import Route
from .rng import fnv1a_64
from .simulator import SimWorld, execute, observe, visible_objects
from .topomap import TopoMap
from .vector_store import NAVIGATIONAL, VectorStore

MAX_STEPS_PER_INPUT = 2000


class EngineError(RuntimeError):
    pass


def route_to_json(route: Route) -> dict:
    return {
        "start": route.start,
        "goal": route.goal,
        "total_distance": route.total_distance,
        "node_sequence": list(route.node_sequence),
        "description": route.description,
        "legs": [
            {
                "turn": leg.turn.value,
                "from": leg.edge.src,
                "to": leg.to,
                "to_label": leg.to_label,
                "distance": leg.distance,
                "direction": leg.absolute_direction,
            }
            for leg in route.legs
        ],
    }


def _embedding_fingerprint(embedding: np.ndarray) -> str:
    return f"{fnv1a_64(np.asarray(embedding, dtype=np.float64).tobytes()):016x}"


@dataclass
class HazardTrial:
    ground_truth: bool
    verdict_hazardous: bool
    labels: tuple[str, ...]


class GuidanceSession:
    """One agent, one world, one ordered transcript."""

    def __init__(
        self,
        topo: TopoMap,
        env_store: VectorStore,
        gateway,
        world: SimWorld,
        prefs: SessionPrefs | None = None,
        no_planner: bool = False,
        include_truth: bool = True,
        on_entry=None,
    ):
        self.topo = topo
        self.world = world
        self.include_truth = include_truth
        self.nav_store = VectorStore(NAVIGATIONAL, env_store.dim)
        self.deps = AgentDeps(
            topo=topo, env_store=env_store, nav_store=self.nav_store, gateway=gateway, no_planner=no_planner
        )
        self.state: AgentState = initial_state(world.pose.node, world.pose.heading, prefs)
        self.log: list[dict] = []
        self.seq = 0
        self.hazard_trials: list[HazardTrial] = []
        self._on_entry = on_entry
        self.closed = False
        self._emit(
            "session_created",
            {
                "map": topo.name,
                "start_node": world.pose.node,
                "start_heading": world.pose.heading,
            },
        )

    # -- transcript -----------------------------------------------------------

    def _emit(self, entry_type: str, data: dict) -> dict:
        self.seq += 1
        entry = {"seq": self.seq, "type": entry_type, "data": data}
        self.log.append(entry)
        if self._on_entry is not None:
            self._on_entry(entry)
        return entry

    def open_prompt(self) -> str | None:
        prompt = self.state.pending_prompt
        return prompt.prompt_id if prompt is not None else None

    # -- user input ------------------------------------------------------------

    def post_utterance(self, text: str) -> list[dict]:
        if self.closed:
            raise EngineError("session is closed")
        start = len(self.log)
        self._emit("user_utterance", {"text": text})
        self._run(UserUtterance(text))
        return self.log[start:]

    def post_decision(self, prompt_id: str, choice: str) -> list[dict]:
        if self.closed:
            raise EngineError("session is closed")
        open_id = self.open_prompt()
        if open_id is None:
            raise EngineError("no open hazard prompt")
        if prompt_id != open_id:
            raise EngineError(f"prompt {prompt_id!r} is stale or unknown (open prompt is {open_id!r})")
        if choice not in ("proceed", "reroute"):
            raise EngineError("choice must be 'proceed' or 'reroute'")
        start = len(self.log)
        self._emit("user_decision", {"prompt_id": prompt_id, "choice": choice})
        self._run(UserDecision(prompt_id, choice))
        return self.log[start:]

    def expire(self) -> None:
        if not self.closed:
            self.closed = True
            self._emit("session_result", {"success": False, "reason": "expired"})

    # -- event loop -------------------------------------------------------------

    def _run(self, first_event) -> None:
        queue: deque = deque([first_event])
        steps = 0
        while queue:
            steps += 1
            if steps > MAX_STEPS_PER_INPUT:
                self._emit("session_result", {"success": False, "reason": "runaway event loop"})
                self.closed = True
                return
            event = queue.popleft()
            old_state = self.state
            scan_pending = old_state.phase == "traversing" and old_state.awaiting == "scan"
            self.state, outputs = handle_event(old_state, event, self.deps)
            self._note_state_changes(old_state, self.state)
            if scan_pending and isinstance(event, Observation) and event.object_labels:
                self._record_hazard_trial(event, outputs)
            for output in outputs:
                self._handle_output(output, queue)

    def _note_state_changes(self, old: AgentState, new: AgentState) -> None:
        if new.route is not None and new.route is not old.route:
            self._emit("route_planned", {"route": route_to_json(new.route)})
        if new.phase != old.phase:
            self._emit("phase_change", {"phase": new.phase})
            if old.phase == "verifying" and new.phase in ("traversing", "completed"):
                arrived_at = old.route.legs[old.leg_index].to if old.route else new.believed_node
                self._emit("arrival", {"node": arrived_at})
            if old.phase == "recovering" and new.phase in ("traversing", "completed"):
                data = {"node": new.believed_node}
                if self.include_truth:
                    data["matches_truth"] = new.believed_node == self.world.pose.node
                self._emit("recovery", data)

    def _record_hazard_trial(self, event: Observation, outputs) -> None:
        ground_truth = any(obj.hazard_ground_truth for obj in visible_objects(self.world))
        verdict_hazardous = any(isinstance(out, HazardPrompt) for out in outputs)
        self.hazard_trials.append(HazardTrial(ground_truth, verdict_hazardous, tuple(event.object_labels)))

    def _handle_output(self, output, queue: deque) -> None:
        if isinstance(output, Say):
            self._emit("chat_message", {"role": "agent", "text": output.text})
        elif isinstance(output, SessionResult):
            self._emit("session_result", {"success": output.success, "reason": output.reason})
        elif isinstance(output, HazardPrompt):
            self._emit(
                "hazard_prompt",
                {
                    "prompt_id": output.prompt_id,
                    "reason": output.verdict.reason,
                    "confidence": output.verdict.confidence,
                    "alternative": route_to_json(output.alternative) if output.alternative else None,
                },
            )
        elif isinstance(output, QueryImages):
            self._emit(
                "query_images",
                {"store": output.store_kind, "node": output.node, "orientation": output.orientation},
            )
            sim_obs = observe(self.world)
            self._emit(
                "observation",
                {
                    "labels": list(sim_obs.object_labels),
                    "embedding": _embedding_fingerprint(sim_obs.embedding),
                },
            )
            queue.append(Observation(sim_obs.embedding, sim_obs.object_labels))
        elif isinstance(output, MoveCommand):
            self._emit(
                "move",
                {"turn": output.turn.value, "distance": output.distance, "speed_mps": output.speed_mps},
            )
            result = execute(self.world, output)
            self._emit_pose_update()
            if result.kind == "arrived":
                self._emit(
                    "arrival_report",
                    {"odometry": result.distance, "duration_s": result.duration_s},
                )
                queue.append(ArrivalReport(result.distance))
            elif result.kind == "turned":
                sim_obs = observe(self.world)
                self._emit(
                    "observation",
                    {
                        "labels": list(sim_obs.object_labels),
                        "embedding": _embedding_fingerprint(sim_obs.embedding),
                    },
                )
                queue.append(Observation(sim_obs.embedding, sim_obs.object_labels))
            else:  # blocked
                self._emit("blocked_move", {"heading": result.heading})
                queue.append(MoveBlocked(result.heading))
        else:  # pragma: no cover - defensive
            self._emit("chat_message", {"role": "agent", "text": f"[unhandled output {type(output).__name__}]"})

    def _emit_pose_update(self) -> None:
        data = {
            "believed_node": self.state.believed_node,
            "believed_heading": self.state.believed_heading,
        }
        if self.include_truth:
            data["true_node"] = self.world.pose.node
            data["true_heading"] = self.world.pose.heading
        data["odometer"] = self.world.odometer
        data["clock_s"] = self.world.clock_s
        self._emit("pose_update", data)
