"""Message protocol and multi-session host.

Every message on the wire is a JSON object `{"kind", "seq", "payload"}`.
Replies reference the inbound sequence number in `payload.re`. Errors never
tear the session down; they come back as `error` messages carrying a stable
code (the exception class name) and a human-readable message.
"""
from __future__ import annotations

import logging
from pathlib import Path

from .config import AppConfig
from .errors import ProtocolError, RoomforgeError
from .level import Door, TileKind, dungeon_to_dict, new_room, room_to_dict
from .patterns import DimensionKind
from .session import Session, SuggestionPanes, default_session
from .engine import snapshot_to_dict

logger = logging.getLogger(__name__)

INBOUND_KINDS = ("session/start", "room/edit", "room/lock", "dims/set",
                 "suggestion/apply", "session/save", "session/load")
OUTBOUND_KINDS = ("suggestions/published", "model/status", "error")


def panes_to_dict(panes: SuggestionPanes) -> dict:
    return {
        "grid": snapshot_to_dict(panes.snapshot),
        "top": [{
            "cell": list(entry.cell),
            "room": room_to_dict(entry.room),
            "predictedPref": entry.predicted_pref,
            "confidence": entry.confidence,
        } for entry in panes.top_preference],
    }


class SessionHost:
    """Routes protocol messages to sessions and drives their engines."""

    def __init__(self, config: AppConfig | None = None,
                 session_dir: str | Path | None = None):
        self.config = config or AppConfig()
        self.session_dir = Path(session_dir or self.config.service.session_dir)
        self.sessions: dict[str, Session] = {}
        self._out_seq = 0
        self._published_at: dict[str, int] = {}
        self._train_seen: dict[str, int] = {}

    # --- outbound helpers ------------------------------------------------------

    def _message(self, kind: str, payload: dict) -> dict:
        msg = {"kind": kind, "seq": self._out_seq, "payload": payload}
        self._out_seq += 1
        return msg

    def _error(self, exc: Exception, re_seq) -> dict:
        code = exc.code if isinstance(exc, ProtocolError) else type(exc).__name__
        return self._message("error", {"code": code, "message": str(exc),
                                       "re": re_seq})

    def _published(self, session: Session, panes: SuggestionPanes) -> dict:
        self._published_at[session.session_id] = session.generation
        return self._message("suggestions/published",
                             dict(panes_to_dict(panes),
                                  sessionId=session.session_id))

    def _model_status(self, session: Session) -> dict:
        return self._message("model/status",
                             dict(session.model_status(),
                                  sessionId=session.session_id))

    # --- inbound ------------------------------------------------------------------

    def handle(self, message: dict) -> list[dict]:
        """Process one inbound message; returns the replies, session intact."""
        re_seq = message.get("seq") if isinstance(message, dict) else None
        try:
            return self._dispatch(message)
        except RoomforgeError as exc:
            return [self._error(exc, re_seq)]

    def _dispatch(self, message: dict) -> list[dict]:
        if not isinstance(message, dict):
            raise ProtocolError("SchemaViolation", "message is not an object")
        kind = message.get("kind")
        seq = message.get("seq")
        payload = message.get("payload", {})
        if not isinstance(kind, str):
            raise ProtocolError("SchemaViolation", "missing message kind")
        if not isinstance(payload, dict):
            raise ProtocolError("SchemaViolation", "payload must be an object")
        if kind == "session/start":
            return self._start(payload, seq)
        if kind == "session/load":
            return self._load(payload, seq)
        if kind not in INBOUND_KINDS:
            raise ProtocolError("UnknownKind", f"unknown message kind {kind!r}")
        session = self._session_for(payload)
        handler = {
            "room/edit": self._edit,
            "room/lock": self._lock,
            "dims/set": self._set_dims,
            "suggestion/apply": self._apply,
            "session/save": self._save,
        }[kind]
        return handler(session, payload, seq)

    def _session_for(self, payload: dict) -> Session:
        session_id = payload.get("sessionId")
        if session_id is None and len(self.sessions) == 1:
            return next(iter(self.sessions.values()))
        if session_id not in self.sessions:
            raise ProtocolError("UnknownSession", f"no session {session_id!r}")
        return self.sessions[session_id]

    def _start(self, payload: dict, seq) -> list[dict]:
        session_id = str(payload.get("sessionId", f"s{len(self.sessions)}"))
        if session_id in self.sessions:
            raise ProtocolError("DuplicateSession", f"session {session_id!r} exists")
        seed = int(payload.get("seed", 0))
        room = None
        if "room" in payload:
            spec = payload["room"]
            doors = tuple(Door(d["side"], int(d["offset"]))
                          for d in spec.get("doors", [{"side": "W", "offset": 3}]))
            room = new_room(int(spec.get("w", 13)), int(spec.get("h", 7)), doors)
        session = default_session(session_id, seed=seed, config=self.config, room=room)
        self.sessions[session_id] = session
        panes = session.publish()
        ack = self._message("session/start", {
            "re": seq,
            "sessionId": session_id,
            "dungeon": dungeon_to_dict(session.dungeon),
            "activeRoomId": session.active_room_id,
            "dims": [d.value for d in session.engine.dims],
            "generation": session.generation,
        })
        return [ack, self._published(session, panes), self._model_status(session)]

    def _edit(self, session: Session, payload: dict, seq) -> list[dict]:
        try:
            x, y = int(payload["x"]), int(payload["y"])
            tile = TileKind.from_char(str(payload["tile"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError("SchemaViolation", f"bad edit payload: {exc!r}") from exc
        room = session.edit_room(x, y, tile)
        return [self._message("room/edit", {"re": seq, "ok": True,
                                            "roomId": session.active_room_id,
                                            "x": x, "y": y, "tile": tile.char})]

    def _lock(self, session: Session, payload: dict, seq) -> list[dict]:
        try:
            x, y = int(payload["x"]), int(payload["y"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError("SchemaViolation", f"bad lock payload: {exc!r}") from exc
        room = session.toggle_lock(x, y)
        return [self._message("room/lock", {"re": seq, "ok": True,
                                            "roomId": session.active_room_id,
                                            "x": x, "y": y,
                                            "locked": room.is_locked(x, y)})]

    def _set_dims(self, session: Session, payload: dict, seq) -> list[dict]:
        names = payload.get("dims")
        if not isinstance(names, list) or len(names) != 2:
            raise ProtocolError("SchemaViolation", "dims payload needs two names")
        try:
            dims = (DimensionKind(names[0]), DimensionKind(names[1]))
        except ValueError as exc:
            raise ProtocolError("SchemaViolation", f"unknown dimension: {exc}") from exc
        if dims[0] is dims[1]:
            raise ProtocolError("DuplicateDimension", "dimensions must differ")
        session.set_dims(dims)
        return [self._message("dims/set", {"re": seq, "ok": True,
                                           "dims": [d.value for d in dims]})]

    def _apply(self, session: Session, payload: dict, seq) -> list[dict]:
        cell = payload.get("cell")
        if (not isinstance(cell, (list, tuple)) or len(cell) != 2
                or not all(isinstance(c, int) for c in cell)):
            raise ProtocolError("SchemaViolation", "cell payload must be [i, j]")
        room = session.apply_suggestion((cell[0], cell[1]))
        return [self._message("suggestion/apply", {
            "re": seq, "ok": True, "roomId": session.active_room_id,
            "cell": list(cell), "room": room_to_dict(room)})]

    def _save(self, session: Session, payload: dict, seq) -> list[dict]:
        name = self._safe_name(payload)
        self.session_dir.mkdir(parents=True, exist_ok=True)
        path = self.session_dir / f"{name}.json"
        session.save(path)
        return [self._message("session/save", {"re": seq, "ok": True,
                                               "name": name, "path": str(path)})]

    def _load(self, payload: dict, seq) -> list[dict]:
        name = self._safe_name(payload)
        path = self.session_dir / f"{name}.json"
        session = Session.load(path)
        self.sessions[session.session_id] = session
        panes = session.panes or session.publish()
        ack = self._message("session/load", {
            "re": seq, "ok": True,
            "sessionId": session.session_id,
            "dungeon": dungeon_to_dict(session.dungeon),
            "activeRoomId": session.active_room_id,
            "generation": session.generation,
        })
        return [ack, self._published(session, panes), self._model_status(session)]

    @staticmethod
    def _safe_name(payload: dict) -> str:
        name = payload.get("name")
        if not isinstance(name, str) or not name:
            raise ProtocolError("SchemaViolation", "save/load payload needs a name")
        if set(name) & set("/\\") or name.startswith("."):
            raise ProtocolError("SchemaViolation", f"unsafe session name {name!r}")
        return name

    # --- background progress ---------------------------------------------------------

    def tick(self, session_id: str, generations: int = 1) -> list[dict]:
        """Advance a session and emit any cadence publishes / training updates."""
        session = self.sessions[session_id]
        out: list[dict] = []
        cadence = self.config.service.publish_every_generations
        for _ in range(generations):
            session.tick()
            # report the model once the engine has actually swapped to it
            episodes = session.engine.model.episodes_trained
            if episodes > self._train_seen.get(session_id, 0):
                self._train_seen[session_id] = episodes
                out.append(self._model_status(session))
            published_at = self._published_at.get(session_id, -1)
            if session.generation - published_at >= cadence:
                out.append(self._published(session, session.publish()))
        return out
