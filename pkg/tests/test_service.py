import json

import pytest
from fastapi.testclient import TestClient

from guidenav.scenario import resolve_map_path
from guidenav.service import create_app, map_document
from guidenav.topomap import Coordinate, Edge, Node, TopoMap


@pytest.fixture(scope="module")
def maps():
    return {"office": resolve_map_path("builtin:office"), "house": resolve_map_path("builtin:house")}


@pytest.fixture()
def client(maps):
    app = create_app(maps)
    with TestClient(app) as test_client:
        yield test_client


def create_session(client, **overrides):
    body = {"map_id": "office", "start_node": "sc0", "start_heading": 0}
    body.update(overrides)
    response = client.post("/api/v1/sessions", json=body)
    assert response.status_code == 200, response.text
    return response.json()["session_id"]


def events_of(client, sid, after=0):
    response = client.get(f"/api/v1/sessions/{sid}/log", params={"after": after})
    assert response.status_code == 200
    return response.json()["events"]


# --- sessions ---------------------------------------------------------------------


def test_create_session_and_distinct_ids(client):
    a = create_session(client)
    b = create_session(client)
    assert a != b


def test_unknown_map_404_with_error_body(client):
    response = client.post("/api/v1/sessions", json={"map_id": "mars"})
    assert response.status_code == 404
    body = response.json()
    assert body["code"] == "unknown_map" and "mars" in body["message"]


def test_query_flow_emits_route_and_pose_events(client):
    sid = create_session(client)
    response = client.post(f"/api/v1/sessions/{sid}/query", json={"utterance": "take me to the elevator"})
    assert response.status_code == 200
    events = events_of(client, sid)
    types = [e["type"] for e in events]
    assert types[0] == "session_created"
    assert "route_planned" in types
    assert "pose_update" in types
    assert "arrival" in types
    assert types.count("session_result") == 1
    assert events[-1]["type"] == "session_result"
    assert events[-1]["data"]["success"] is True
    # user text is echoed into the chat stream
    chats = [e["data"] for e in events if e["type"] == "chat_message"]
    assert {"role": "user", "text": "take me to the elevator"} in chats


def test_unknown_session_and_empty_utterance(client):
    assert client.post("/api/v1/sessions/nope/query", json={"utterance": "hi"}).status_code == 404
    sid = create_session(client)
    response = client.post(f"/api/v1/sessions/{sid}/query", json={"utterance": "   "})
    assert response.status_code == 422
    assert response.json()["code"] == "validation_error"


def test_decision_round_trip_changes_route(client):
    sid = create_session(
        client,
        objects=[{"label": "wet_floor_sign", "edge": ["sc1", "sc2"], "hazardous": True}],
    )
    client.post(f"/api/v1/sessions/{sid}/query", json={"utterance": "take me to the south corridor 3"})
    events = events_of(client, sid)
    prompts = [e for e in events if e["type"] == "hazard_prompt"]
    assert len(prompts) == 1
    prompt = prompts[0]["data"]
    assert prompt["alternative"] is not None

    response = client.post(
        f"/api/v1/sessions/{sid}/decision",
        json={"prompt_id": prompt["prompt_id"], "choice": "reroute"},
    )
    assert response.status_code == 200
    after = events_of(client, sid, after=prompts[0]["seq"])
    route_changes = [e for e in after if e["type"] == "route_planned"]
    assert route_changes
    assert route_changes[0]["data"]["route"]["node_sequence"] == prompt["alternative"]["node_sequence"]
    assert after[-1]["type"] == "session_result" and after[-1]["data"]["success"]


def test_stale_decision_conflict(client):
    sid = create_session(client)
    response = client.post(f"/api/v1/sessions/{sid}/decision", json={"prompt_id": "hz-1", "choice": "proceed"})
    assert response.status_code == 409
    assert response.json()["code"] == "stale_prompt"


def test_sessions_are_isolated(client):
    a = create_session(client)
    b = create_session(client)
    client.post(f"/api/v1/sessions/{a}/query", json={"utterance": "take me to the gym"})
    events_b = events_of(client, b)
    assert [e["type"] for e in events_b] == ["session_created"]


def test_log_replay_has_no_gaps_or_duplicates(client):
    sid = create_session(client)
    client.post(f"/api/v1/sessions/{sid}/query", json={"utterance": "take me to the library"})
    full = events_of(client, sid)
    seqs = [e["seq"] for e in full]
    assert seqs == sorted(seqs) and len(seqs) == len(set(seqs))
    # reconnect mid-stream: prefix + replay-after == full, exactly once each
    cut = seqs[len(seqs) // 2]
    prefix = [e for e in full if e["seq"] <= cut]
    resumed = events_of(client, sid, after=cut)
    assert [e["seq"] for e in prefix] + [e["seq"] for e in resumed] == seqs


def _read_sse(client, sid, after=0):
    events = []
    with client.stream(
        "GET", f"/api/v1/sessions/{sid}/events", params={"after": after, "once": True}
    ) as response:
        assert response.status_code == 200
        assert response.headers["content-type"].startswith("text/event-stream")
        seq = event_type = None
        for line in response.iter_lines():
            if line.startswith("id: "):
                seq = int(line.split(": ", 1)[1])
            elif line.startswith("event: "):
                event_type = line.split(": ", 1)[1]
            elif line.startswith("data: ") and event_type:
                events.append((seq, event_type, json.loads(line.split(": ", 1)[1])))
                seq = event_type = None
    return events


def test_sse_stream_replays_events(client):
    sid = create_session(client)
    client.post(f"/api/v1/sessions/{sid}/query", json={"utterance": "take me to the lobby"})
    seen = _read_sse(client, sid)
    types = [t for _, t, _ in seen]
    assert types[0] == "session_created"
    assert "route_planned" in types and "arrival" in types
    assert types[-1] == "session_result"


def test_sse_reconnect_after_seq_is_gap_free(client):
    sid = create_session(client)
    client.post(f"/api/v1/sessions/{sid}/query", json={"utterance": "take me to the food court"})
    full = _read_sse(client, sid)
    cut = full[len(full) // 2][0]
    prefix = [e for e in full if e[0] <= cut]
    resumed = _read_sse(client, sid, after=cut)
    assert prefix + resumed == full


def test_session_summary_reports_state(client):
    sid = create_session(client)
    client.post(f"/api/v1/sessions/{sid}/query", json={"utterance": "take me to the storage"})
    summary = client.get(f"/api/v1/sessions/{sid}").json()
    assert summary["phase"] == "completed"
    assert summary["believed_node"] == "r_store"
    assert summary["goal"] == "r_store"


def test_expiry_emits_failure_result(maps):
    app = create_app(maps, idle_timeout_s=0.0)
    with TestClient(app) as client:
        sid = create_session(client)
        response = client.post(f"/api/v1/sessions/{sid}/query", json={"utterance": "status"})
        assert response.status_code == 410
        events = events_of(client, sid)
        assert events[-1]["type"] == "session_result"
        assert events[-1]["data"] == {"success": False, "reason": "expired"}


def test_event_log_deterministic_for_fixed_script(maps):
    def run_once():
        app = create_app(maps)
        with TestClient(app) as client:
            sid = create_session(client, map_id="house", start_node="entry")
            client.post(f"/api/v1/sessions/{sid}/query", json={"utterance": "take me to the kitchen"})
            return json.dumps(events_of(client, sid), sort_keys=True)

    assert run_once() == run_once()


# --- map document --------------------------------------------------------------------


def test_map_document_round_trips(client, maps):
    response = client.get("/api/v1/maps/office")
    assert response.status_code == 200
    doc = response.json()
    office = maps["office"]
    assert doc["name"] == "office"
    assert len(doc["nodes"]) == len(office.nodes)
    assert len(doc["edges"]) == len(office.edges)

    nodes = {
        n["id"]: Node(n["id"], Coordinate(n["x"], n["y"]), frozenset(n["tags"]), n.get("label"))
        for n in doc["nodes"]
    }
    edges = {
        (e["from"], e["to"]): Edge(e["from"], e["to"], e["distance"], e["direction"], frozenset(e["tags"]))
        for e in doc["edges"]
    }
    rebuilt = TopoMap(nodes=nodes, edges=edges, name=doc["name"])
    assert rebuilt == office


def test_map_document_rectangle_shape():
    from helpers import rectangle_map

    doc = map_document(rectangle_map())
    assert len(doc.nodes) == 4
    assert len(doc.edges) == 8


def test_unknown_map_document(client):
    response = client.get("/api/v1/maps/venus")
    assert response.status_code == 404
