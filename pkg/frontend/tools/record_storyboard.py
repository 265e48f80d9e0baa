"""Regenerate fixtures/storyboard_capture.json from a real gateway.

Drives the full walkthrough (ask for the cafe on the robot, transfer to
the watch, finish the route there) against an in-process gateway on a
virtual clock, recording every outbound envelope per connection in
emission order. The capture is what the replay test folds through the
panel layer, so the fixture must only ever be rebuilt with this script:

    python3 tools/record_storyboard.py
"""

from __future__ import annotations

import json
from pathlib import Path

from reembody.clock import VirtualClock
from reembody.gateway import Gateway
from reembody.routes import default_campus_graph

SESSION = "lab-story"
OUT = Path(__file__).resolve().parent.parent / "fixtures" / "storyboard_capture.json"


class Recorder:
    def __init__(self) -> None:
        self.clock = VirtualClock()
        self.gateway = Gateway(default_campus_graph(), clock=self.clock, seed=1)
        self.seqs: dict[str, int] = {}
        self.captured: list[dict] = []

    def attach(self, conn_id: str) -> None:
        self.gateway.attach(conn_id)
        self.seqs[conn_id] = 0

    def send(self, conn_id: str, mtype: str, payload: dict, session_id: str | None = None) -> None:
        self.seqs[conn_id] += 1
        self.gateway.receive(
            conn_id,
            {
                "type": mtype,
                "session_id": session_id,
                "device_id": conn_id,
                "seq": self.seqs[conn_id],
                "payload": payload,
            },
        )
        self.drain()

    def drain(self) -> None:
        while True:
            due = self.gateway.next_due()
            if due is None:
                return
            if due > self.clock.now_ms():
                self.clock.advance_to(due)
            for conn_id, message in self.gateway.pump():
                self.captured.append({"conn": conn_id, "message": message})


def main() -> None:
    r = Recorder()
    r.attach("robot1")
    r.attach("watch1")
    r.send("robot1", "hello", {"kind": "Stationary"})
    r.send("watch1", "hello", {"kind": "Wearable"})
    r.send("robot1", "start_session", {}, session_id=SESSION)

    r.send("robot1", "ptt_utterance", {"text": "hi where is the student cafe"}, session_id=SESSION)
    r.send("robot1", "ptt_utterance", {"text": "can we continue on my watch"}, session_id=SESSION)
    r.send("watch1", "ptt_utterance", {"text": "next"}, session_id=SESSION)
    r.send("watch1", "ptt_utterance", {"text": "next"}, session_id=SESSION)
    r.send("watch1", "ptt_utterance", {"text": "i have arrived"}, session_id=SESSION)

    capture = {"session_id": SESSION, "messages": r.captured}
    OUT.write_text(json.dumps(capture, indent=2) + "\n", encoding="utf-8")
    print(f"{len(r.captured)} messages -> {OUT}")


if __name__ == "__main__":
    main()
