"""Record real server responses as JSON fixtures for the UI contract tests.

Run from the repository root (the krag package must be installed):

    python3 frontend/scripts/record_fixtures.py
"""

from __future__ import annotations

import json
import pathlib

from starlette.testclient import TestClient

from krag.fixtures import demo_store
from krag.server import create_app

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def dump(name: str, payload) -> None:
    path = FIXTURES / f"{name}.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {path.relative_to(FIXTURES.parent.parent)}")


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    with TestClient(create_app(demo_store())) as client:
        created = client.post("/sessions", json={"pattern_id": "car_sale_ownership_defect"})
        session = created.json()
        dump("session_initial", session)
        sid = session["session_id"]

        allege = client.post(
            f"/sessions/{sid}/acts",
            json={"act": "allege", "party": "bob", "fact": "sale_concluded"},
        )
        dump("act_allege_response", allege.json())

        admission = client.post(
            f"/sessions/{sid}/acts",
            json={"act": "admission", "party": "alice", "fact": "sale_concluded"},
        )
        dump("act_admission_response", admission.json())

        dump("session_after_acts", client.get(f"/sessions/{sid}").json())

        fork = client.post(f"/sessions/{sid}/fork")
        fork_payload = fork.json()
        dump("fork_response", fork_payload)

        ghost = client.post(
            f"/sessions/{fork_payload['session_id']}/acts",
            json={"act": "allege", "party": "alice", "fact": "seller_ownership"},
        )
        dump("fork_act_response", ghost.json())
        client.delete(f"/sessions/{fork_payload['session_id']}")

        rejected = client.post(
            f"/sessions/{sid}/acts",
            json={"act": "plausible", "party": "bob", "fact": "sale_concluded"},
        )
        dump("act_plausible_rejected", {"status": rejected.status_code, "body": rejected.json()})

        dump(
            "query_response",
            client.post(
                "/query",
                json={
                    "query": (
                        "Alice sells her car to Bob for $10,000. Bob later discovers "
                        "that Alice was not the legal owner of the car. Can Bob "
                        "nullify the contract?"
                    ),
                    "format": "mermaid",
                },
            ).json(),
        )


if __name__ == "__main__":
    main()
