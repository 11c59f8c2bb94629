"""One design session: dungeon state, engine, trainer, and the event log.

The event log is the source of truth. Every state-changing action is recorded
with the engine generation it was applied at, so replaying the log against
the same seed reproduces every published snapshot and model state bit for
bit. Wall-clock timestamps ride along for humans and are ignored by replay.
"""
from __future__ import annotations

import base64
import hashlib
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import AppConfig
from .engine import (EliteGridEngine, EliteSnapshot, SetDimensions,
                     SetTargetRoom, SwapModel, snapshot_digest)
from .errors import (EmptyGrid, EmptySnapshot, ProtocolError, StorageError,
                     VersionMismatch)
from .level import (Door, Dungeon, Room, RoomEdit, TileKind, apply_edit,
                    deserialize_dungeon, dungeon_to_dict, new_room,
                    serialize_dungeon)
from .patterns import DimensionKind
from .preference import (CLASS_VALUES, EpisodeQueue, PreferenceNet,
                         build_adhoc_matrix, build_dataset)

logger = logging.getLogger(__name__)

SESSION_FORMAT_VERSION = 1

EVENT_EDIT = "EDIT"
EVENT_LOCK = "LOCK"
EVENT_SET_DIMS = "SET_DIMS"
EVENT_APPLY_SUGGESTION = "APPLY_SUGGESTION"
EVENT_PUBLISH = "PUBLISH"
EVENT_TRAIN_DONE = "TRAIN_DONE"
EVENT_SAVE = "SAVE"

_DRIVING_EVENTS = {EVENT_EDIT, EVENT_LOCK, EVENT_SET_DIMS,
                   EVENT_APPLY_SUGGESTION, EVENT_PUBLISH, EVENT_SAVE}


@dataclass(frozen=True)
class DesignerEvent:
    seq: int
    timestamp: float
    generation: int
    kind: str
    payload: dict

    def to_dict(self) -> dict:
        return {"seq": self.seq, "ts": self.timestamp, "generation": self.generation,
                "kind": self.kind, "payload": self.payload}

    @classmethod
    def from_dict(cls, data: dict) -> "DesignerEvent":
        return cls(seq=int(data["seq"]), timestamp=float(data["ts"]),
                   generation=int(data["generation"]), kind=str(data["kind"]),
                   payload=dict(data["payload"]))


@dataclass(frozen=True)
class PaneEntry:
    cell: tuple[int, int]
    room: Room
    predicted_pref: float
    confidence: float


@dataclass(frozen=True)
class SuggestionPanes:
    snapshot: EliteSnapshot
    top_preference: tuple[PaneEntry, ...]


def rank_top_preference(snapshot: EliteSnapshot, model: PreferenceNet,
                        k: int = 6) -> list[PaneEntry]:
    """Elites ranked by the model's expected preference, best first.

    Ties fall back to prediction confidence, then to row-major cell order.
    """
    views = snapshot.non_empty()
    if not views:
        return []
    encoded = np.stack([v.room.grid.ravel() for v in views]).astype(np.float64) / 3.0
    probs = model.predict_batch(encoded)
    prefs = probs @ CLASS_VALUES
    confs = probs.max(axis=1)
    rows, cols = snapshot.shape
    order = sorted(range(len(views)),
                   key=lambda n: (-prefs[n], -confs[n],
                                  views[n].cell[0] * cols + views[n].cell[1]))
    return [PaneEntry(cell=views[n].cell, room=views[n].room,
                      predicted_pref=float(prefs[n]), confidence=float(confs[n]))
            for n in order[:k]]


class Session:
    """Owns a dungeon, one engine targeting the active room, and the trainer."""

    def __init__(self, session_id: str, dungeon: Dungeon, active_room_id: str,
                 seed: int, config: AppConfig | None = None):
        if active_room_id not in dungeon.rooms:
            raise ProtocolError("UnknownRoom", f"no room {active_room_id!r} in dungeon")
        self.session_id = session_id
        self.seed = seed
        self.config = config or AppConfig()
        self.dungeon = dungeon
        self.active_room_id = active_room_id
        self.initial_dungeon_doc = dungeon_to_dict(dungeon)
        self.engine = EliteGridEngine(target=dungeon.rooms[active_room_id],
                                      config=self.config, seed=seed)
        self.trainer = EpisodeQueue(self.config.preference, base_seed=seed)
        self.events: list[DesignerEvent] = []
        self._seq = 0
        self.episodes_requested = 0
        self.panes: SuggestionPanes | None = None
        self._published_capture: list[tuple[int, int, object]] = []
        self.stream_digest = hashlib.sha256(b"roomforge-snapshot-stream").hexdigest()
        self.last_train_done: DesignerEvent | None = None

    # --- internals -------------------------------------------------------------

    @property
    def active_room(self) -> Room:
        return self.dungeon.rooms[self.active_room_id]

    @property
    def generation(self) -> int:
        return self.engine.generation

    def _record(self, kind: str, payload: dict) -> DesignerEvent:
        event = DesignerEvent(seq=self._seq, timestamp=time.time(),
                              generation=self.engine.generation, kind=kind,
                              payload=payload)
        self._seq += 1
        self.events.append(event)
        return event

    def _replace_active_room(self, room: Room) -> None:
        self.dungeon = self.dungeon.with_room(self.active_room_id, room)
        self.engine.submit(SetTargetRoom(room))

    # --- designer actions ---------------------------------------------------------

    def edit_room(self, x: int, y: int, tile: TileKind) -> Room:
        room = apply_edit(self.active_room, RoomEdit(x=x, y=y, new_kind=tile))
        self._replace_active_room(room)
        self._record(EVENT_EDIT, {"x": x, "y": y, "tile": tile.char})
        return room

    def toggle_lock(self, x: int, y: int) -> Room:
        room = apply_edit(self.active_room, RoomEdit(x=x, y=y, lock_toggle=True))
        self._replace_active_room(room)
        self._record(EVENT_LOCK, {"x": x, "y": y})
        return room

    def set_dims(self, dims: tuple[DimensionKind, DimensionKind]) -> None:
        self.engine.submit(SetDimensions(dims))
        self._record(EVENT_SET_DIMS, {"dims": [d.value for d in dims]})

    def apply_suggestion(self, cell: tuple[int, int]) -> Room:
        """Replace the active room with the elite the designer picked.

        Tiles come from the last published snapshot (what the designer saw);
        currently locked positions keep the designer's own tiles. The feasible
        population is captured right here and queued as one training episode.
        """
        if self.panes is None:
            raise ProtocolError("NothingPublished", "no suggestions published yet")
        view = self.panes.snapshot.elite_at(*cell)
        if view is None:
            raise EmptySnapshot(f"no elite in cell {cell}")
        current = self.active_room
        tiles = np.array(view.room.grid, dtype=np.int8)
        tiles[current.locks] = current.grid[current.locks]
        room = Room(current.width, current.height, tiles, current.doors,
                    current.locks)
        self._replace_active_room(room)
        self._record(EVENT_APPLY_SUGGESTION, {"cell": [cell[0], cell[1]]})
        self._request_training(cell)
        return room

    def _request_training(self, cell: tuple[int, int]) -> None:
        # the dataset reflects the populations behind the panes the designer
        # actually saw, not whatever evolved since
        capture = self._published_capture
        pref_cfg = self.config.preference
        matrix = build_adhoc_matrix(cell, self.engine.shape,
                                    step=pref_cfg.adhoc_step,
                                    metric=pref_cfg.adhoc_metric)
        rng = np.random.default_rng([self.seed, 4099, self.episodes_requested])
        self.episodes_requested += 1
        try:
            dataset = build_dataset(capture, matrix, rng, pref_cfg.test_fraction)
        except EmptyGrid:
            logger.warning("suggestion applied with no feasible individuals; "
                           "skipping training episode")
            return
        self.trainer.request(dataset)

    # --- time ----------------------------------------------------------------------

    def tick(self) -> None:
        """One generation plus a deterministic slice of any in-flight training."""
        stepped = self.engine.step()
        if not stepped:
            return
        result = self.trainer.pump(self.engine.model,
                                   self.config.preference.batches_per_generation)
        if result is not None:
            self.engine.submit(SwapModel(result.model))
            self.last_train_done = self._record(EVENT_TRAIN_DONE, {
                "episode": result.episode_index,
                "testAcc": result.test_acc,
                "batches": result.batches_run,
            })

    def advance(self, generations: int) -> None:
        for _ in range(generations):
            self.tick()

    def advance_to(self, generation: int) -> None:
        while self.engine.generation < generation:
            self.tick()

    # --- outputs ------------------------------------------------------------------

    def publish(self) -> SuggestionPanes:
        snapshot = self.engine.publish()
        top = tuple(rank_top_preference(snapshot, self.engine.model))
        self.panes = SuggestionPanes(snapshot=snapshot, top_preference=top)
        self._published_capture = self.engine.capture_feasible()
        digest = snapshot_digest(snapshot)
        self.stream_digest = hashlib.sha256(
            (self.stream_digest + digest).encode("ascii")).hexdigest()
        self._record(EVENT_PUBLISH, {"digest": digest, "stream": self.stream_digest})
        return self.panes

    def model_status(self) -> dict:
        mean_conf, mean_w1 = self.engine.model_stats()
        return {"testAcc": self.engine.model.last_test_acc,
                "episodes": self.engine.model.episodes_trained,
                "meanConfidence": mean_conf,
                "meanW1": mean_w1}

    def dungeon_digest(self) -> str:
        return hashlib.sha256(serialize_dungeon(self.dungeon)).hexdigest()

    # --- persistence -----------------------------------------------------------------

    def to_document(self) -> dict:
        return {
            "version": SESSION_FORMAT_VERSION,
            "sessionId": self.session_id,
            "seed": self.seed,
            "config": self.config.to_dict(),
            "initialDungeon": self.initial_dungeon_doc,
            "activeRoomId": self.active_room_id,
            "events": [e.to_dict() for e in self.events],
            "final": {
                "generation": self.engine.generation,
                "dungeonDigest": self.dungeon_digest(),
                "streamDigest": self.stream_digest,
                "modelCheckpoint": base64.b64encode(
                    self.engine.model.save_bytes()).decode("ascii"),
            },
        }

    def save(self, path: str | Path) -> None:
        document = self.to_document()
        self._record(EVENT_SAVE, {"path": str(path)})
        try:
            Path(path).write_text(json.dumps(document, sort_keys=True),
                                  encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"cannot write session to {path}: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path, verify: bool = True) -> "Session":
        try:
            raw = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"cannot read session from {path}: {exc}") from exc
        try:
            document = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise StorageError(f"bad session JSON: {exc}") from exc
        return replay_session(document, verify=verify)


def replay_session(document: dict, verify: bool = True) -> Session:
    """Rebuild a session by re-driving its event log at recorded generations."""
    version = document.get("version")
    if version != SESSION_FORMAT_VERSION:
        raise VersionMismatch(f"session version {version!r}, "
                              f"expected {SESSION_FORMAT_VERSION}")
    config = AppConfig.from_dict(document["config"])
    dungeon = deserialize_dungeon(json.dumps(document["initialDungeon"]))
    session = Session(document["sessionId"], dungeon, document["activeRoomId"],
                      seed=int(document["seed"]), config=config)
    events = [DesignerEvent.from_dict(e) for e in document["events"]]
    for event in events:
        if event.kind not in _DRIVING_EVENTS:
            continue
        session.advance_to(event.generation)
        payload = event.payload
        if event.kind == EVENT_EDIT:
            session.edit_room(payload["x"], payload["y"],
                              TileKind.from_char(payload["tile"]))
        elif event.kind == EVENT_LOCK:
            session.toggle_lock(payload["x"], payload["y"])
        elif event.kind == EVENT_SET_DIMS:
            session.set_dims(tuple(DimensionKind(d) for d in payload["dims"]))
        elif event.kind == EVENT_APPLY_SUGGESTION:
            session.apply_suggestion(tuple(payload["cell"]))
        elif event.kind == EVENT_PUBLISH:
            session.publish()
        elif event.kind == EVENT_SAVE:
            session._record(EVENT_SAVE, dict(payload))
    final = document.get("final", {})
    session.advance_to(int(final.get("generation", session.generation)))
    if verify:
        _verify_replay(session, events, final)
    return session


def _verify_replay(session: Session, events: list[DesignerEvent], final: dict) -> None:
    replayed = [(e.seq, e.generation, e.kind, json.dumps(e.payload, sort_keys=True))
                for e in session.events]
    recorded = [(e.seq, e.generation, e.kind, json.dumps(e.payload, sort_keys=True))
                for e in events]
    if replayed != recorded:
        for a, b in zip(recorded, replayed):
            if a != b:
                raise StorageError(f"replay diverged: recorded {a}, replayed {b}")
        raise StorageError(f"replay diverged: {len(recorded)} recorded events, "
                           f"{len(replayed)} replayed")
    if final.get("dungeonDigest") and final["dungeonDigest"] != session.dungeon_digest():
        raise StorageError("replay diverged: dungeon digest mismatch")
    if final.get("streamDigest") and final["streamDigest"] != session.stream_digest:
        raise StorageError("replay diverged: snapshot stream digest mismatch")


def default_session(session_id: str = "default", seed: int = 0,
                    config: AppConfig | None = None,
                    room: Room | None = None) -> Session:
    """Fresh session around a single all-FLOOR room."""
    room = room or new_room(doors=(Door("W", 3), Door("E", 3)))
    dungeon = Dungeon(rooms={"r0": room})
    return Session(session_id, dungeon, "r0", seed=seed, config=config)
