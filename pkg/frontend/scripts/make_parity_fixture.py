"""Regenerate tests/fixtures/parity.json from the live protocol.

The fixture freezes one scripted editing session: every user intent, the
exact messages the client must send, the server's replies, and the resulting
event log. The web editor's tests replay the same intents against the
recorded replies and must emit byte-equal outbound messages, which ties the
browser UI to the same server event log as the headless script.

Run from the repository root:  python3 frontend/scripts/make_parity_fixture.py
"""
import copy
import json
import sys
from pathlib import Path

from roomforge.config import AppConfig
from roomforge.service import SessionHost, panes_to_dict

FIXTURE_PATH = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "parity.json"

SESSION_ID = "parity"
SEED = 9


def build_transcript() -> dict:
    host = SessionHost(AppConfig(), session_dir="/tmp/parity-sessions")
    steps = []
    seq = 0

    def send(intent: dict, kind: str, payload: dict) -> list[dict]:
        nonlocal seq
        outbound = {"kind": kind, "seq": seq, "payload": payload}
        seq += 1
        replies = host.handle(copy.deepcopy(outbound))
        steps.append({"intent": intent, "outbound": [outbound], "replies": replies})
        return replies

    def background(generations: int) -> None:
        pushed = host.tick(SESSION_ID, generations)
        steps.append({"intent": {"name": "background", "generations": generations},
                      "outbound": [], "replies": pushed})

    send({"name": "start"}, "session/start", {"sessionId": SESSION_ID, "seed": SEED})
    for x, y, tile in ((4, 1, "W"), (4, 2, "W"), (2, 2, "T"), (3, 4, "E")):
        send({"name": "paint", "x": x, "y": y, "tile": tile},
             "room/edit", {"sessionId": SESSION_ID, "x": x, "y": y, "tile": tile})
    for x, y in ((2, 2), (3, 4)):
        send({"name": "lock", "x": x, "y": y},
             "room/lock", {"sessionId": SESSION_ID, "x": x, "y": y})
    send({"name": "dims", "dims": ["symmetry", "leniency"]},
         "dims/set", {"sessionId": SESSION_ID, "dims": ["symmetry", "leniency"]})
    # a rejected edit must surface as an error toast without breaking state
    send({"name": "paint", "x": 2, "y": 2, "tile": "W"},
         "room/edit", {"sessionId": SESSION_ID, "x": 2, "y": 2, "tile": "W"})
    background(50)

    session = host.sessions[SESSION_ID]
    grid_cell = list(session.panes.snapshot.non_empty()[0].cell)
    send({"name": "applyGrid", "cell": grid_cell},
         "suggestion/apply", {"sessionId": SESSION_ID, "cell": grid_cell})
    background(50)

    pane_cell = list(session.panes.top_preference[0].cell)
    send({"name": "applyPane", "cell": pane_cell},
         "suggestion/apply", {"sessionId": SESSION_ID, "cell": pane_cell})
    send({"name": "save", "id": "parity-check"},
         "session/save", {"sessionId": SESSION_ID, "name": "parity-check"})

    event_log = [{"seq": e.seq, "generation": e.generation, "kind": e.kind,
                  "payload": e.payload} for e in session.events]
    return {
        "sessionId": SESSION_ID,
        "seed": SEED,
        "steps": steps,
        "eventLog": event_log,
        "finalRoom": panes_to_dict(session.panes)["grid"]["cells"] and {
            "tiles": session.active_room.tiles_string(),
            "locks": session.active_room.locks_string(),
            "w": session.active_room.width,
            "h": session.active_room.height,
        },
    }


def main() -> int:
    transcript = build_transcript()
    FIXTURE_PATH.parent.mkdir(parents=True, exist_ok=True)
    FIXTURE_PATH.write_text(json.dumps(transcript, indent=1, sort_keys=True) + "\n",
                            encoding="utf-8")
    print(f"wrote {FIXTURE_PATH} ({len(transcript['steps'])} steps, "
          f"{len(transcript['eventLog'])} events)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
