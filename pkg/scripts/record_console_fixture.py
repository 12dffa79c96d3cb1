"""Record the hazard-demo session through the real service wire shapes.

Produces frontend/test/fixtures/hazard_session.json: the map document plus
the public event stream split at the reroute decision, so the console tests
replay exactly what a live client would have received.
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from guidenav.scenario import resolve_map_path
from guidenav.service import create_app

OUT = Path(__file__).resolve().parents[1] / "frontend" / "test" / "fixtures" / "hazard_session.json"


def main() -> None:
    app = create_app({"office": resolve_map_path("builtin:office")})
    with TestClient(app) as client:
        map_doc = client.get("/api/v1/maps/office").json()
        sid = client.post(
            "/api/v1/sessions",
            json={
                "map_id": "office",
                "start_node": "sc0",
                "start_heading": 0,
                "objects": [{"label": "wet_floor_sign", "edge": ["sc1", "sc2"], "hazardous": True}],
            },
        ).json()["session_id"]
        client.post(f"/api/v1/sessions/{sid}/query", json={"utterance": "take me to the south corridor 3"})
        before = client.get(f"/api/v1/sessions/{sid}/log").json()["events"]
        prompt = next(e for e in before if e["type"] == "hazard_prompt")
        cut_seq = before[-1]["seq"]
        client.post(
            f"/api/v1/sessions/{sid}/decision",
            json={"prompt_id": prompt["data"]["prompt_id"], "choice": "reroute"},
        )
        after = client.get(f"/api/v1/sessions/{sid}/log", params={"after": cut_seq}).json()["events"]

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(
        json.dumps(
            {
                "map": map_doc,
                "prompt_id": prompt["data"]["prompt_id"],
                "events_before_decision": before,
                "events_after_decision": after,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    print(f"wrote {OUT} ({len(before)} + {len(after)} events)")


if __name__ == "__main__":
    main()
