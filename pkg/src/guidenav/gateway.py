"""Language gateway: utterances to intents, hazard verdicts, user-facing text.

Two implementations share one surface.  :class:`MockGateway` is fully
deterministic (pattern rules plus a shipped hazard table) so every suite
runs offline; :class:`RemoteGateway` speaks the common chat-completion
wire shape to a configured endpoint and validates tool calls against the
declared schemas before anything reaches the agent.  Message composition
is template-based and shared by both paths.
"""

from __future__ import annotations

import json
import logging
import os
import re
import time
from dataclasses import dataclass

import httpx
import jsonschema

from .rng import Xoshiro256pp, hash_text
from .topomap import TopoMap, fmt_real

logger = logging.getLogger(__name__)

# Intent kinds
NAVIGATE_TO = "navigate_to"
SET_AVOID_TAG = "set_avoid_tag"
CLEAR_AVOID_TAG = "clear_avoid_tag"
SET_SPEED = "set_speed"
ADJUST_SPEED = "adjust_speed"
SET_VERBOSITY = "set_verbosity"
HAZARD_DECISION = "hazard_decision"
ASK_STATUS = "ask_status"
UNKNOWN = "unknown"

INTENT_KINDS = (
    NAVIGATE_TO,
    SET_AVOID_TAG,
    CLEAR_AVOID_TAG,
    SET_SPEED,
    ADJUST_SPEED,
    SET_VERBOSITY,
    HAZARD_DECISION,
    ASK_STATUS,
    UNKNOWN,
)


class GatewayError(RuntimeError):
    pass


@dataclass(frozen=True)
class Intent:
    kind: str
    destination: str | None = None  # resolved node id, or free text when unresolved
    destination_resolved: bool = False
    tag: str | None = None
    speed_mps: float | None = None
    delta: str | None = None  # faster | slower
    decision: str | None = None  # proceed | reroute
    verbosity: str | None = None  # brief | detailed

    def __post_init__(self):
        if self.kind not in INTENT_KINDS:
            raise GatewayError(f"unknown intent kind {self.kind!r}")


@dataclass(frozen=True)
class HazardVerdict:
    hazardous: bool
    reason: str
    confidence: float

    def __post_init__(self):
        if self.hazardous and not self.reason:
            raise GatewayError("hazardous verdicts require a reason")
        if not 0.0 <= self.confidence <= 1.0:
            raise GatewayError("confidence must be in [0, 1]")


# Shipped rule table for the deterministic hazard classifier.
HAZARD_REASONS = {
    "wet_floor_sign": "a wet floor sign marks a slippery area ahead",
    "warning_tape": "warning tape is blocking the way ahead",
    "barrier": "a physical barrier is blocking the path",
    "broken_glass": "broken glass is on the floor ahead",
}
BENIGN_LABELS = frozenset({"chair", "pot", "poster", "trash_can"})


@dataclass(frozen=True)
class ConfusionConfig:
    """Seeded verdict flips for metrics-pipeline tests (fp/fn probabilities)."""

    fp: float = 0.0
    fn: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant | tool
    content: str


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: dict


@dataclass(frozen=True)
class PromptBundle:
    system_prompt: str
    conversation: tuple[ChatMessage, ...]
    tools: tuple[dict, ...] = ()

    def messages(self) -> list[dict]:
        msgs = []
        if self.system_prompt:
            msgs.append({"role": "system", "content": self.system_prompt})
        msgs.extend({"role": m.role, "content": m.content} for m in self.conversation)
        return msgs


TOOL_SCHEMAS: tuple[dict, ...] = (
    {
        "type": "function",
        "function": {
            "name": "plan_route",
            "description": "Plan a route to a destination on the loaded map.",
            "parameters": {
                "type": "object",
                "properties": {
                    "destination": {"type": "string", "description": "Node id, label, or tag of the goal."},
                    "avoid_tags": {"type": "array", "items": {"type": "string"}},
                },
                "required": ["destination"],
                "additionalProperties": False,
            },
        },
    },
    {
        "type": "function",
        "function": {
            "name": "query_images",
            "description": "Retrieve the stored reference image for a node and orientation.",
            "parameters": {
                "type": "object",
                "properties": {
                    "store": {"type": "string", "enum": ["environment", "navigational"]},
                    "node": {"type": "string"},
                    "orientation": {"type": "integer", "enum": [0, 90, 180, 270]},
                },
                "required": ["store"],
                "additionalProperties": False,
            },
        },
    },
    {
        "type": "function",
        "function": {
            "name": "send_user_message",
            "description": "Say something to the traveler.",
            "parameters": {
                "type": "object",
                "properties": {"text": {"type": "string"}},
                "required": ["text"],
                "additionalProperties": False,
            },
        },
    },
    {
        "type": "function",
        "function": {
            "name": "issue_move",
            "description": "Command the robot to turn and walk along the current corridor.",
            "parameters": {
                "type": "object",
                "properties": {
                    "turn": {"type": "string", "enum": ["straight", "left", "right", "turn_around"]},
                    "distance_m": {"type": "number", "minimum": 0},
                },
                "required": ["turn", "distance_m"],
                "additionalProperties": False,
            },
        },
    },
)

_TOOL_PARAMETERS = {t["function"]["name"]: t["function"]["parameters"] for t in TOOL_SCHEMAS}


def load_system_prompt() -> str:
    from pathlib import Path

    return (Path(__file__).parent / "prompts" / "system_prompt_v1.txt").read_text(encoding="utf-8")


def build_prompt_bundle(
    utterance: str,
    route_text: str = "",
    map_name: str = "",
    include_system_prompt: bool = True,
    history: tuple[ChatMessage, ...] = (),
) -> PromptBundle:
    system = ""
    if include_system_prompt:
        system = load_system_prompt().replace("{map_name}", map_name).replace("{route_text}", route_text)
    conversation = tuple(history) + (ChatMessage("user", utterance),)
    return PromptBundle(system_prompt=system, conversation=conversation, tools=TOOL_SCHEMAS)


# --- Place resolution -------------------------------------------------------

_ARTICLE_RE = re.compile(r"^(the|a|an)\s+")

_NAVIGATE_RE = re.compile(
    r"^(?:please\s+)?(?:go to|take me to|navigate to|guide me to|bring me to|walk me to)\s+(.+?)[.!?]?$"
)
_AVOID_RE = re.compile(r"^(?:please\s+)?avoid\s+(?:the\s+)?(.+?)[.!?]?$")
_CLEAR_AVOID_RE = re.compile(
    r"^(?:please\s+)?(?:stop avoiding|don'?t avoid|allow|clear avoid)\s+(?:the\s+)?(.+?)[.!?]?$"
)
_SET_SPEED_RE = re.compile(r"^(?:set speed to|walk at)\s+([0-9]+(?:\.[0-9]+)?)\s*(?:m/s)?[.!?]?$")

_PROCEED_WORDS = frozenset({"yes", "proceed", "go ahead", "continue", "yes proceed"})
_REROUTE_WORDS = frozenset({"no", "reroute", "alternative", "no reroute", "take the alternative", "go around"})
_STATUS_WORDS = frozenset({"status", "where am i", "where are we", "ask status"})


def _normalize_tag(text: str) -> str:
    return re.sub(r"\s+", "_", text.strip().lower())


def _word_contains(haystack: str, needle: str) -> bool:
    return re.search(rf"(?<![a-z0-9]){re.escape(needle)}(?![a-z0-9])", haystack) is not None


def resolve_place(place: str, topo: TopoMap) -> str | None:
    """Resolve free text to a node id against ids, labels, and tags.

    Case-insensitive after stripping a leading article.  Exact matches win;
    otherwise either string may contain the other at word boundaries (so
    "the elevator" finds the `elevator` tag, and "room" finds labelled
    rooms, but the letter "a" inside a word never picks node A).  Ties
    resolve to the lexicographically smallest node id.
    """
    needle = _ARTICLE_RE.sub("", place.strip().lower())
    if not needle:
        return None
    exact: list[str] = []
    loose: list[str] = []
    for node_id in sorted(topo.nodes):
        node = topo.nodes[node_id]
        candidates = [node_id.lower()]
        if node.label:
            candidates.append(node.label.lower())
        candidates.extend(node.tags)
        if any(needle == cand for cand in candidates):
            exact.append(node_id)
        elif any(_word_contains(needle, cand) or _word_contains(cand, needle) for cand in candidates):
            loose.append(node_id)
    if exact:
        return exact[0]
    return loose[0] if loose else None


class MockGateway:
    """Deterministic pattern-rule gateway; pure functions apart from the
    optional seeded confusion stream used by metrics tests."""

    is_remote = False

    def __init__(self, confusion: ConfusionConfig | None = None):
        self.confusion = confusion
        self._confusion_rng = (
            Xoshiro256pp(hash_text(f"confusion|{confusion.seed}")) if confusion else None
        )

    def interpret_query(self, utterance: str, topo: TopoMap) -> Intent:
        if not utterance or not utterance.strip():
            raise GatewayError("utterance must be non-empty")
        text = utterance.strip().lower()
        bare = text.rstrip(".!?").strip()

        if bare in _PROCEED_WORDS:
            return Intent(HAZARD_DECISION, decision="proceed")
        if bare in _REROUTE_WORDS or bare.startswith("no,"):
            return Intent(HAZARD_DECISION, decision="reroute")
        if bare in _STATUS_WORDS:
            return Intent(ASK_STATUS)

        m = _NAVIGATE_RE.match(text)
        if m:
            place = m.group(1).strip()
            resolved = resolve_place(place, topo)
            if resolved is not None:
                return Intent(NAVIGATE_TO, destination=resolved, destination_resolved=True)
            return Intent(NAVIGATE_TO, destination=place, destination_resolved=False)

        m = _CLEAR_AVOID_RE.match(text)
        if m:
            return Intent(CLEAR_AVOID_TAG, tag=_normalize_tag(m.group(1)))
        m = _AVOID_RE.match(text)
        if m:
            return Intent(SET_AVOID_TAG, tag=_normalize_tag(m.group(1)))

        if bare in ("slow down", "go slower", "slower"):
            return Intent(ADJUST_SPEED, delta="slower")
        if bare in ("speed up", "go faster", "faster"):
            return Intent(ADJUST_SPEED, delta="faster")
        m = _SET_SPEED_RE.match(bare)
        if m:
            return Intent(SET_SPEED, speed_mps=float(m.group(1)))

        if bare in ("be brief", "brief", "brief mode", "short answers"):
            return Intent(SET_VERBOSITY, verbosity="brief")
        if bare in ("be detailed", "detailed", "detailed mode", "verbose"):
            return Intent(SET_VERBOSITY, verbosity="detailed")

        return Intent(UNKNOWN)

    def classify_hazard(self, object_labels, context: str = "") -> HazardVerdict:
        labels = list(object_labels)
        if not labels:
            raise GatewayError("classify_hazard requires at least one object label")
        hazardous = [label for label in labels if label in HAZARD_REASONS]
        if hazardous:
            verdict = HazardVerdict(True, HAZARD_REASONS[hazardous[0]], 0.9)
        elif all(label in BENIGN_LABELS for label in labels):
            verdict = HazardVerdict(False, f"{labels[0]} does not impede travel", 0.9)
        else:
            verdict = HazardVerdict(False, "unrecognized objects; assuming harmless", 0.5)
        return self._maybe_flip(verdict, labels)

    def _maybe_flip(self, verdict: HazardVerdict, labels) -> HazardVerdict:
        if self._confusion_rng is None:
            return verdict
        draw = self._confusion_rng.uniform()
        if verdict.hazardous and draw < self.confusion.fn:
            return HazardVerdict(False, "no hazard detected", verdict.confidence)
        if not verdict.hazardous and draw < self.confusion.fp:
            return HazardVerdict(True, f"flagged {labels[0]} as a possible hazard", verdict.confidence)
        return verdict

    def infer_route_text(self, map_text: str, start: str, goal: str) -> str | None:
        """Route inference from raw map text; the mock has none by design.

        This is the seam the planner-off ablation exercises: without the
        planner the pipeline deterministically cannot navigate.
        """
        return None


# --- Message composition ----------------------------------------------------


@dataclass(frozen=True)
class RoutePlannedMsg:
    goal_label: str
    leg_count: int
    total_distance: float
    description: str


@dataclass(frozen=True)
class LegStartMsg:
    index: int
    count: int
    turn_phrase: str
    distance: float
    to_label: str


@dataclass(frozen=True)
class ArrivalMsg:
    label: str
    total_distance: float


@dataclass(frozen=True)
class HazardMsg:
    reason: str
    confidence: float
    alternative_description: str | None


@dataclass(frozen=True)
class MismatchMsg:
    expected_label: str
    similarity: float


@dataclass(frozen=True)
class RecoveryMsg:
    label: str
    similarity: float
    leg_count: int
    total_distance: float
    description: str


@dataclass(frozen=True)
class FailureMsg:
    reason: str


@dataclass(frozen=True)
class PrefAckMsg:
    change: str


@dataclass(frozen=True)
class StatusMsg:
    phase: str
    node_label: str
    heading: int
    goal_label: str | None
    legs_remaining: int


def compose_user_message(event, verbosity: str = "brief") -> str:
    """Deterministic user-facing text for an agent event.

    Brief mode summarizes; detailed mode appends the leg-by-leg route text
    where one exists.  Same event, same text, always.
    """
    detailed = verbosity == "detailed"
    if isinstance(event, RoutePlannedMsg):
        head = (
            f"Heading to {event.goal_label}: {event.leg_count} "
            f"{'leg' if event.leg_count == 1 else 'legs'}, {fmt_real(event.total_distance)} m."
        )
        return head + ("\n" + event.description if detailed else "")
    if isinstance(event, LegStartMsg):
        return (
            f"Leg {event.index}/{event.count}: turn {event.turn_phrase}, "
            f"walk {fmt_real(event.distance)} m to {event.to_label}."
        )
    if isinstance(event, ArrivalMsg):
        text = f"You have arrived at {event.label}."
        if detailed:
            text += f" Total distance {fmt_real(event.total_distance)} m."
        return text
    if isinstance(event, HazardMsg):
        tail = (
            "An alternative route is available. Say proceed or reroute."
            if event.alternative_description is not None
            else "No alternative route exists. Say proceed to continue."
        )
        text = f"Warning: {event.reason}. {tail}"
        if detailed and event.alternative_description:
            text += "\nAlternative:\n" + event.alternative_description
        return text
    if isinstance(event, MismatchMsg):
        return (
            f"This does not look like {event.expected_label} "
            f"(similarity {event.similarity:.3f}). Searching for our location."
        )
    if isinstance(event, RecoveryMsg):
        text = (
            f"Relocated to {event.label} (similarity {event.similarity:.3f}). "
            f"New route: {event.leg_count} {'leg' if event.leg_count == 1 else 'legs'}, "
            f"{fmt_real(event.total_distance)} m."
        )
        return text + ("\n" + event.description if detailed else "")
    if isinstance(event, FailureMsg):
        return f"Navigation failed: {event.reason}."
    if isinstance(event, PrefAckMsg):
        return f"Okay: {event.change}."
    if isinstance(event, StatusMsg):
        goal = event.goal_label if event.goal_label else "none"
        return (
            f"Phase {event.phase}; at {event.node_label} facing {event.heading} degrees; "
            f"destination {goal}; {event.legs_remaining} legs remaining."
        )
    raise GatewayError(f"unknown message event {type(event).__name__}")


# --- Remote path -------------------------------------------------------------


@dataclass(frozen=True)
class RemoteConfig:
    endpoint_url: str
    model: str
    api_key: str = ""
    timeout_s: float = 30.0
    max_attempts: int = 3
    backoff_base_s: float = 0.5

    @classmethod
    def from_env(cls) -> "RemoteConfig":
        url = os.environ.get("GUIDE_LLM_ENDPOINT", "")
        model = os.environ.get("GUIDE_LLM_MODEL", "")
        if not url or not model:
            raise GatewayError(
                "remote gateway requires GUIDE_LLM_ENDPOINT and GUIDE_LLM_MODEL "
                "(and usually GUIDE_LLM_API_KEY)"
            )
        return cls(endpoint_url=url, model=model, api_key=os.environ.get("GUIDE_LLM_API_KEY", ""))


def convert_tool_call(call: ToolCall, topo: TopoMap | None = None) -> Intent:
    """Validate a tool call against the declared schema and map it to an intent.

    Schema-invalid calls degrade to the unknown intent with a logged
    diagnostic; nothing unvalidated reaches the agent.
    """
    schema = _TOOL_PARAMETERS.get(call.name)
    if schema is None:
        logger.warning("tool call to undeclared tool %r", call.name)
        return Intent(UNKNOWN)
    try:
        jsonschema.validate(call.arguments, schema)
    except jsonschema.ValidationError as exc:
        logger.warning("schema-invalid %s tool call: %s", call.name, exc.message)
        return Intent(UNKNOWN)
    if call.name == "plan_route":
        destination = call.arguments["destination"]
        resolved = resolve_place(destination, topo) if topo is not None else None
        if resolved is not None:
            return Intent(NAVIGATE_TO, destination=resolved, destination_resolved=True)
        return Intent(NAVIGATE_TO, destination=destination, destination_resolved=False)
    # The remaining tools are agent directives rather than user intents; the
    # deterministic pipeline routes only navigation through this path.
    logger.info("tool call %s carries no user intent; ignoring", call.name)
    return Intent(UNKNOWN)


class RemoteGateway:
    """Chat-completion client with bounded retries and schema validation."""

    is_remote = True

    def __init__(self, config: RemoteConfig, transport: httpx.BaseTransport | None = None, sleep=time.sleep):
        self.config = config
        self._sleep = sleep
        headers = {"Content-Type": "application/json"}
        if config.api_key:
            headers["Authorization"] = f"Bearer {config.api_key}"
        self._client = httpx.Client(timeout=config.timeout_s, headers=headers, transport=transport)

    def close(self) -> None:
        self._client.close()

    def complete(self, bundle: PromptBundle) -> ChatMessage | ToolCall:
        """One chat-completion round trip; retries transient failures."""
        payload = {
            "model": self.config.model,
            "messages": bundle.messages(),
        }
        if bundle.tools:
            payload["tools"] = list(bundle.tools)
        last_error: Exception | None = None
        for attempt in range(self.config.max_attempts):
            try:
                response = self._client.post(self.config.endpoint_url, json=payload)
                if response.status_code >= 500:
                    raise GatewayError(f"server error {response.status_code}")
                response.raise_for_status()
                return self._parse_choice(response.json())
            except (httpx.TransportError, GatewayError) as exc:
                last_error = exc
                if attempt + 1 < self.config.max_attempts:
                    self._sleep(self.config.backoff_base_s * (2**attempt))
        raise GatewayError(f"remote completion failed after {self.config.max_attempts} attempts: {last_error}")

    @staticmethod
    def _parse_choice(body: dict) -> ChatMessage | ToolCall:
        try:
            message = body["choices"][0]["message"]
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"malformed completion response: {exc}") from None
        tool_calls = message.get("tool_calls") or []
        if tool_calls:
            fn = tool_calls[0].get("function", {})
            raw_args = fn.get("arguments", "{}")
            try:
                arguments = json.loads(raw_args) if isinstance(raw_args, str) else dict(raw_args)
            except (json.JSONDecodeError, TypeError):
                logger.warning("tool call arguments are not valid JSON: %r", raw_args)
                arguments = None
            if arguments is None:
                return ToolCall(name=fn.get("name", ""), arguments={"__invalid__": True})
            return ToolCall(name=fn.get("name", ""), arguments=arguments)
        return ChatMessage(role="assistant", content=message.get("content") or "")

    def interpret_query(self, utterance: str, topo: TopoMap) -> Intent:
        if not utterance or not utterance.strip():
            raise GatewayError("utterance must be non-empty")
        bundle = build_prompt_bundle(utterance, map_name=topo.name)
        result = self.complete(bundle)
        if isinstance(result, ToolCall):
            return convert_tool_call(result, topo)
        logger.info("remote reply carried no tool call; treating as unknown intent")
        return Intent(UNKNOWN)

    def classify_hazard(self, object_labels, context: str = "") -> HazardVerdict:
        labels = list(object_labels)
        if not labels:
            raise GatewayError("classify_hazard requires at least one object label")
        bundle = build_prompt_bundle(
            f"Objects visible ahead: {', '.join(labels)}. Context: {context}. "
            "Reply HAZARD or SAFE followed by a reason."
        )
        result = self.complete(bundle)
        if isinstance(result, ChatMessage):
            text = result.content.strip()
            hazardous = text.upper().startswith("HAZARD")
            reason = text.split(":", 1)[1].strip() if ":" in text else text
            return HazardVerdict(hazardous, reason or "remote verdict", 0.5)
        logger.warning("hazard classification returned a tool call; treating as non-hazardous")
        return HazardVerdict(False, "unintelligible remote verdict", 0.0)

    def infer_route_text(self, map_text: str, start: str, goal: str) -> str | None:
        bundle = build_prompt_bundle(
            f"Using only this map, give turn-by-turn directions from {start} to {goal}:\n{map_text}",
            include_system_prompt=True,
        )
        result = self.complete(bundle)
        if isinstance(result, ChatMessage) and result.content.strip():
            return result.content
        return None
