"""Session service: the HTTP/SSE boundary over the guidance engine.

Endpoints live under ``/api/v1``.  Each session owns one agent, one
simulated world, and one append-only event log; requests against a session
serialize through a per-session lock.  Clients follow a session over a
server-sent-event stream with sequence-numbered replay (``?after=<seq>``),
or over the plain ``/log`` long-poll fallback.  Errors use conventional
status codes with a ``{code, message}`` body.

No authentication and no persistence across restarts: this is a
single-user desk tool.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Union

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, ConfigDict, Field

from .engine import EngineError, GuidanceSession
from .gateway import GatewayError, MockGateway, RemoteConfig, RemoteGateway
from .scenario import KidnapSpec, NoiseSpec, ObjectSpec, PrefsSpec
from .simulator import Kidnap, Pose, SimWorld, WorldObject, build_environment_store
from .topomap import TopoMap
from .vector_store import VectorStore

# Stream event vocabulary exposed to clients; internal transcript entries of
# other types stay server-side.
SERVICE_EVENT_TYPES = frozenset(
    {
        "session_created",
        "chat_message",
        "route_planned",
        "pose_update",
        "hazard_prompt",
        "arrival",
        "recovery",
        "session_result",
    }
)

DEFAULT_IDLE_TIMEOUT_S = 30 * 60


class ApiError(HTTPException):
    def __init__(self, status_code: int, code: str, message: str):
        super().__init__(status_code=status_code, detail={"code": code, "message": message})


# --- Wire models -------------------------------------------------------------


class CreateSessionRequest(BaseModel):
    map_id: str
    start_node: Optional[str] = None
    start_heading: int = 0
    prefs: PrefsSpec = PrefsSpec()
    sigma: float = Field(default=0.0, ge=0.0)
    objects: list[ObjectSpec] = Field(default_factory=list)
    faults: list[Union[KidnapSpec, NoiseSpec]] = Field(default_factory=list)
    aliases: dict[str, str] = Field(default_factory=dict)


class CreateSessionResponse(BaseModel):
    session_id: str


class QueryRequest(BaseModel):
    utterance: str = Field(min_length=1)


class DecisionRequest(BaseModel):
    prompt_id: str
    choice: Literal["proceed", "reroute"]


class AckResponse(BaseModel):
    ok: bool
    seq: int


class SessionSummary(BaseModel):
    session_id: str
    map_id: str
    phase: str
    believed_node: str
    believed_heading: int
    goal: Optional[str]
    open_prompt_id: Optional[str]
    seq: int
    expired: bool


class MapNodeModel(BaseModel):
    id: str
    x: float
    y: float
    tags: list[str]
    label: Optional[str] = None


class MapEdgeModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    src: str = Field(alias="from")
    to: str
    distance: float
    direction: int
    tags: list[str]


class MapDocument(BaseModel):
    name: str
    nodes: list[MapNodeModel]
    edges: list[MapEdgeModel]


def map_document(topo: TopoMap) -> MapDocument:
    return MapDocument(
        name=topo.name,
        nodes=[
            MapNodeModel(
                id=node.id,
                x=node.position.x,
                y=node.position.y,
                tags=sorted(node.tags),
                label=node.label,
            )
            for node in (topo.nodes[nid] for nid in sorted(topo.nodes))
        ],
        edges=[
            MapEdgeModel(
                src=edge.src,
                to=edge.dst,
                distance=edge.distance,
                direction=edge.direction,
                tags=sorted(edge.tags),
            )
            for edge in (topo.edges[key] for key in sorted(topo.edges))
        ],
    )


def translate_entry(entry: dict) -> dict | None:
    """Map a transcript entry onto the public stream vocabulary."""
    etype = entry["type"]
    if etype == "user_utterance":
        return {
            "seq": entry["seq"],
            "type": "chat_message",
            "data": {"role": "user", "text": entry["data"]["text"]},
        }
    if etype == "user_decision":
        return {
            "seq": entry["seq"],
            "type": "chat_message",
            "data": {"role": "user", "text": f"[decision] {entry['data']['choice']}"},
        }
    if etype in SERVICE_EVENT_TYPES:
        return entry
    return None


# --- Hosting -----------------------------------------------------------------


@dataclass
class HostedSession:
    id: str
    map_id: str
    session: GuidanceSession
    lock: threading.Lock = field(default_factory=threading.Lock)
    last_active: float = field(default_factory=time.monotonic)


class ServiceState:
    def __init__(
        self,
        maps: dict[str, TopoMap],
        gateway_mode: str = "mock",
        idle_timeout_s: float = DEFAULT_IDLE_TIMEOUT_S,
        include_truth: bool = True,
        env_stores: dict[str, VectorStore] | None = None,
    ):
        self.maps = maps
        self.gateway_mode = gateway_mode
        self.idle_timeout_s = idle_timeout_s
        self.include_truth = include_truth
        self.sessions: dict[str, HostedSession] = {}
        self._env_stores: dict[str, VectorStore] = dict(env_stores or {})
        self._ids = itertools.count(1)

    def env_store(self, map_id: str) -> VectorStore:
        if map_id not in self._env_stores:
            self._env_stores[map_id] = build_environment_store(self.maps[map_id])
        return self._env_stores[map_id]

    def build_gateway(self):
        if self.gateway_mode == "remote":
            return RemoteGateway(RemoteConfig.from_env())
        return MockGateway()

    def next_session_id(self) -> str:
        return f"s{next(self._ids):04d}"

    def get(self, session_id: str) -> HostedSession:
        hosted = self.sessions.get(session_id)
        if hosted is None:
            raise ApiError(404, "unknown_session", f"no session {session_id!r}")
        self.check_expiry(hosted)
        return hosted

    def check_expiry(self, hosted: HostedSession) -> None:
        if hosted.session.closed:
            return
        if time.monotonic() - hosted.last_active > self.idle_timeout_s:
            with hosted.lock:
                hosted.session.expire()

    def touch(self, hosted: HostedSession) -> None:
        hosted.last_active = time.monotonic()


def create_app(
    maps: dict[str, TopoMap],
    gateway_mode: str = "mock",
    idle_timeout_s: float = DEFAULT_IDLE_TIMEOUT_S,
    include_truth: bool = True,
    static_dir: Path | None = None,
    env_stores: dict[str, VectorStore] | None = None,
) -> FastAPI:
    state = ServiceState(maps, gateway_mode, idle_timeout_s, include_truth, env_stores)
    app = FastAPI(title="guidenav session service", version="1.0")
    app.state.guidenav = state

    @app.exception_handler(HTTPException)
    async def http_error(_request: Request, exc: HTTPException):
        detail = exc.detail
        if not isinstance(detail, dict) or "code" not in detail:
            detail = {"code": "error", "message": str(detail)}
        return JSONResponse(status_code=exc.status_code, content=detail)

    @app.exception_handler(RequestValidationError)
    async def validation_error(_request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"code": "validation_error", "message": json.dumps(exc.errors(), default=str)},
        )

    @app.get("/api/v1/maps")
    def list_maps() -> list[str]:
        return sorted(state.maps)

    @app.get("/api/v1/maps/{map_id}", response_model=MapDocument, response_model_by_alias=True)
    def get_map(map_id: str):
        topo = state.maps.get(map_id)
        if topo is None:
            raise ApiError(404, "unknown_map", f"no map {map_id!r}")
        return map_document(topo)

    @app.post("/api/v1/sessions", response_model=CreateSessionResponse)
    def create_session(request: CreateSessionRequest):
        topo = state.maps.get(request.map_id)
        if topo is None:
            raise ApiError(404, "unknown_map", f"no map {request.map_id!r}")
        start_node = request.start_node or min(topo.nodes)
        if start_node not in topo.nodes:
            raise ApiError(422, "unknown_node", f"start node {start_node!r} is not on map {request.map_id!r}")
        if request.start_heading not in (0, 90, 180, 270):
            raise ApiError(422, "bad_heading", "start_heading must be one of 0/90/180/270")
        sigma = request.sigma
        kidnaps = []
        for fault in request.faults:
            if isinstance(fault, NoiseSpec):
                sigma = fault.sigma
            else:
                kidnaps.append(Kidnap(fault.trigger_leg, fault.teleport_to, fault.new_heading))
        try:
            gateway = state.build_gateway()
        except GatewayError as exc:
            raise ApiError(503, "gateway_unavailable", str(exc))
        try:
            world = SimWorld(
                topo=topo,
                pose=Pose(start_node, request.start_heading),
                objects=[WorldObject(o.label, o.edge, o.hazardous) for o in request.objects],
                kidnaps=kidnaps,
                sigma=sigma,
                seed=0,
                aliases=dict(request.aliases),
            )
        except ValueError as exc:
            raise ApiError(422, "bad_world", str(exc))
        env_store = (
            state.env_store(request.map_id)
            if not request.aliases
            else build_environment_store(topo, aliases=dict(request.aliases))
        )
        session = GuidanceSession(
            topo=topo,
            env_store=env_store,
            gateway=gateway,
            world=world,
            prefs=request.prefs.to_prefs(),
            include_truth=state.include_truth,
        )
        session_id = state.next_session_id()
        state.sessions[session_id] = HostedSession(id=session_id, map_id=request.map_id, session=session)
        return CreateSessionResponse(session_id=session_id)

    @app.get("/api/v1/sessions/{session_id}", response_model=SessionSummary)
    def session_summary(session_id: str):
        hosted = state.get(session_id)
        session = hosted.session
        return SessionSummary(
            session_id=session_id,
            map_id=hosted.map_id,
            phase=session.state.phase,
            believed_node=session.state.believed_node,
            believed_heading=session.state.believed_heading,
            goal=session.state.goal,
            open_prompt_id=session.open_prompt(),
            seq=session.seq,
            expired=session.closed,
        )

    @app.post("/api/v1/sessions/{session_id}/query", response_model=AckResponse)
    def post_query(session_id: str, request: QueryRequest):
        if not request.utterance.strip():
            raise ApiError(422, "validation_error", "utterance must not be blank")
        hosted = state.get(session_id)
        if hosted.session.closed:
            raise ApiError(410, "session_expired", "this session has expired")
        with hosted.lock:
            hosted.session.post_utterance(request.utterance)
            state.touch(hosted)
            return AckResponse(ok=True, seq=hosted.session.seq)

    @app.post("/api/v1/sessions/{session_id}/decision", response_model=AckResponse)
    def post_decision(session_id: str, request: DecisionRequest):
        hosted = state.get(session_id)
        if hosted.session.closed:
            raise ApiError(410, "session_expired", "this session has expired")
        with hosted.lock:
            try:
                hosted.session.post_decision(request.prompt_id, request.choice)
            except EngineError as exc:
                raise ApiError(409, "stale_prompt", str(exc))
            state.touch(hosted)
            return AckResponse(ok=True, seq=hosted.session.seq)

    def _public_entries(session: GuidanceSession, after: int) -> list[dict]:
        entries = []
        for entry in session.log:
            if entry["seq"] <= after:
                continue
            public = translate_entry(entry)
            if public is not None:
                entries.append(public)
        return entries

    @app.get("/api/v1/sessions/{session_id}/log")
    def get_log(session_id: str, after: int = 0):
        hosted = state.get(session_id)
        return {"events": _public_entries(hosted.session, after), "seq": hosted.session.seq}

    @app.get("/api/v1/sessions/{session_id}/events")
    async def stream_events(session_id: str, request: Request, after: int = 0, once: bool = False):
        """SSE stream with sequence-numbered replay.

        ``?after=<seq>`` resumes from the log without gaps or duplicates;
        ``?once=true`` closes after replaying the backlog (used by tests
        and one-shot clients instead of the endless stream).
        """
        hosted = state.get(session_id)

        async def generate():
            cursor = after
            idle_polls = 0
            while True:
                entries = _public_entries(hosted.session, cursor)
                for entry in entries:
                    cursor = max(cursor, entry["seq"])
                    payload = json.dumps(entry["data"], sort_keys=True)
                    yield f"id: {entry['seq']}\nevent: {entry['type']}\ndata: {payload}\n\n"
                if once:
                    return
                if entries:
                    idle_polls = 0
                else:
                    idle_polls += 1
                    if idle_polls % 100 == 0:
                        yield ": keep-alive\n\n"
                if await request.is_disconnected():
                    return
                state.check_expiry(hosted)
                await asyncio.sleep(0.05)

        return StreamingResponse(generate(), media_type="text/event-stream")

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="console")

    return app
