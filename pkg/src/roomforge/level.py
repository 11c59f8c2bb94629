"""Rooms, dungeons, tiles, doors, locks, edits, and their persistent JSON form.

Rooms and dungeons are immutable values: every mutating operation returns a
new value and the backing numpy arrays are frozen, so instances can be shared
across threads freely.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import (DoorTileNotFloor, InvalidDimensions, InvalidDoor,
                     LockedTile, MalformedInput, OutOfBounds)

DUNGEON_FORMAT_VERSION = 1

DEFAULT_WIDTH = 13
DEFAULT_HEIGHT = 7


class TileKind(IntEnum):
    FLOOR = 0
    WALL = 1
    TREASURE = 2
    ENEMY = 3

    @property
    def char(self) -> str:
        return "FWTE"[self.value]

    @classmethod
    def from_char(cls, ch: str) -> "TileKind":
        try:
            return cls("FWTE".index(ch))
        except ValueError:
            raise MalformedInput(f"unknown tile character {ch!r}") from None


SIDES = ("N", "S", "E", "W")


@dataclass(frozen=True, order=True)
class Door:
    side: str       # one of N, S, E, W
    offset: int     # index along that side

    def __post_init__(self):
        if self.side not in SIDES:
            raise InvalidDoor(f"door side must be one of {SIDES}, got {self.side!r}")

    def position(self, width: int, height: int) -> tuple[int, int]:
        """(x, y) of the border tile this door sits on."""
        limit = width if self.side in ("N", "S") else height
        if not 0 <= self.offset < limit:
            raise InvalidDoor(f"door {self.side}{self.offset} off a {width}x{height} border")
        if self.side == "N":
            return (self.offset, 0)
        if self.side == "S":
            return (self.offset, height - 1)
        if self.side == "W":
            return (0, self.offset)
        return (width - 1, self.offset)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Room:
    """A rectangular tile grid with doors and per-tile edit locks.

    ``grid`` and ``locks`` are (height, width) arrays indexed [y, x]; both are
    read-only. Door tiles are always FLOOR.
    """

    width: int
    height: int
    grid: np.ndarray                    # int8 TileKind values
    doors: tuple[Door, ...]
    locks: np.ndarray                   # bool mask, True = tile kind is pinned

    def __post_init__(self):
        if self.width < 3 or self.height < 3:
            raise InvalidDimensions(f"room must be at least 3x3, got {self.width}x{self.height}")
        if self.grid.shape != (self.height, self.width):
            raise InvalidDimensions("grid shape does not match width/height")
        if self.locks.shape != (self.height, self.width):
            raise InvalidDimensions("locks mask shape does not match grid")
        if not self.doors:
            raise InvalidDoor("a room needs at least one door")
        seen = set()
        for door in self.doors:
            pos = door.position(self.width, self.height)
            if pos in seen:
                raise InvalidDoor(f"two doors share border tile {pos}")
            seen.add(pos)
            x, y = pos
            if TileKind(self.grid[y, x]) is not TileKind.FLOOR:
                raise DoorTileNotFloor(f"tile under door at {pos} is not FLOOR")
        object.__setattr__(self, "grid", _frozen(self.grid.astype(np.int8)))
        object.__setattr__(self, "locks", _frozen(self.locks.astype(bool)))
        object.__setattr__(self, "doors", tuple(self.doors))

    # dataclass eq chokes on arrays, so compare structurally
    def __eq__(self, other) -> bool:
        if not isinstance(other, Room):
            return NotImplemented
        return (self.width == other.width and self.height == other.height
                and self.doors == other.doors
                and np.array_equal(self.grid, other.grid)
                and np.array_equal(self.locks, other.locks))

    __hash__ = None  # type: ignore[assignment]

    @property
    def door_positions(self) -> tuple[tuple[int, int], ...]:
        return tuple(d.position(self.width, self.height) for d in self.doors)

    def tile(self, x: int, y: int) -> TileKind:
        self._check_bounds(x, y)
        return TileKind(self.grid[y, x])

    def is_locked(self, x: int, y: int) -> bool:
        self._check_bounds(x, y)
        return bool(self.locks[y, x])

    def _check_bounds(self, x: int, y: int) -> None:
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise OutOfBounds(f"({x}, {y}) outside {self.width}x{self.height} room")

    def with_grid(self, grid: np.ndarray) -> "Room":
        """Same doors/locks with a replaced tile grid (shape must match)."""
        return Room(self.width, self.height, np.array(grid, dtype=np.int8),
                    self.doors, np.array(self.locks))

    def with_locks(self, locks: np.ndarray) -> "Room":
        return Room(self.width, self.height, np.array(self.grid), self.doors,
                    np.array(locks, dtype=bool))

    def tiles_string(self) -> str:
        return "".join("FWTE"[v] for v in self.grid.ravel())

    def locks_string(self) -> str:
        return "".join("1" if v else "0" for v in self.locks.ravel())


@dataclass(frozen=True)
class RoomEdit:
    """One designer action: change a tile's kind or flip its lock bit."""

    x: int
    y: int
    new_kind: TileKind | None = None
    lock_toggle: bool = False

    def __post_init__(self):
        if (self.new_kind is None) == (not self.lock_toggle):
            raise ValueError("edit must set exactly one of new_kind / lock_toggle")


def new_room(width: int = DEFAULT_WIDTH, height: int = DEFAULT_HEIGHT,
             doors: list[Door] | tuple[Door, ...] = (Door("W", 3),)) -> Room:
    """All-FLOOR unlocked room with the given doors attached."""
    if width < 3 or height < 3:
        raise InvalidDimensions(f"room must be at least 3x3, got {width}x{height}")
    grid = np.zeros((height, width), dtype=np.int8)
    locks = np.zeros((height, width), dtype=bool)
    return Room(width, height, grid, tuple(doors), locks)


def apply_edit(room: Room, edit: RoomEdit) -> Room:
    """Return ``room`` with exactly one cell of one layer changed."""
    room._check_bounds(edit.x, edit.y)
    if edit.lock_toggle:
        locks = np.array(room.locks)
        locks[edit.y, edit.x] = not locks[edit.y, edit.x]
        return room.with_locks(locks)
    if room.locks[edit.y, edit.x]:
        raise LockedTile(f"tile ({edit.x}, {edit.y}) is locked; unlock it first")
    if (edit.x, edit.y) in room.door_positions and edit.new_kind is not TileKind.FLOOR:
        raise DoorTileNotFloor(f"tile under the door at ({edit.x}, {edit.y}) must stay FLOOR")
    grid = np.array(room.grid)
    grid[edit.y, edit.x] = int(edit.new_kind)
    return room.with_grid(grid)


@dataclass(frozen=True)
class Connection:
    room_a: str
    door_a: Door
    room_b: str
    door_b: Door


@dataclass(frozen=True)
class Dungeon:
    rooms: dict[str, Room] = field(default_factory=dict)
    connections: tuple[Connection, ...] = ()

    def __post_init__(self):
        used: set[tuple[str, Door]] = set()
        for c in self.connections:
            for room_id, door in ((c.room_a, c.door_a), (c.room_b, c.door_b)):
                if room_id not in self.rooms:
                    raise MalformedInput(f"connection references unknown room {room_id!r}")
                if door not in self.rooms[room_id].doors:
                    raise MalformedInput(f"room {room_id!r} has no door {door.side}{door.offset}")
                if (room_id, door) in used:
                    raise MalformedInput(f"door {room_id}:{door.side}{door.offset} used twice")
                used.add((room_id, door))
            if (c.room_a, c.door_a) == (c.room_b, c.door_b):
                raise MalformedInput("connection joins a door to itself")
        object.__setattr__(self, "connections", tuple(self.connections))

    def with_room(self, room_id: str, room: Room) -> "Dungeon":
        rooms = dict(self.rooms)
        rooms[room_id] = room
        return Dungeon(rooms, self.connections)


# --- persistent form -------------------------------------------------------

def room_to_dict(room: Room) -> dict:
    return {
        "w": room.width,
        "h": room.height,
        "tiles": room.tiles_string(),
        "locks": room.locks_string(),
        "doors": [{"side": d.side, "offset": d.offset} for d in room.doors],
    }


def room_from_dict(data: dict, where: str = "room") -> Room:
    try:
        w, h = int(data["w"]), int(data["h"])
        tiles, locks = data["tiles"], data["locks"]
        doors = tuple(Door(d["side"], int(d["offset"])) for d in data["doors"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"{where}: {exc!r}") from exc
    if len(tiles) != w * h:
        raise MalformedInput(f"{where}.tiles: length {len(tiles)} != {w}*{h}")
    if len(locks) != w * h:
        raise MalformedInput(f"{where}.locks: length {len(locks)} != {w}*{h}")
    if set(locks) - {"0", "1"}:
        raise MalformedInput(f"{where}.locks: characters other than 0/1")
    grid = np.array([TileKind.from_char(ch) for ch in tiles], dtype=np.int8).reshape(h, w)
    lock_mask = np.array([ch == "1" for ch in locks], dtype=bool).reshape(h, w)
    try:
        return Room(w, h, grid, doors, lock_mask)
    except Exception as exc:
        raise MalformedInput(f"{where}: {exc}") from exc


def dungeon_to_dict(d: Dungeon) -> dict:
    return {
        "version": DUNGEON_FORMAT_VERSION,
        "rooms": {rid: room_to_dict(room) for rid, room in d.rooms.items()},
        "connections": [
            {"roomA": c.room_a, "doorA": {"side": c.door_a.side, "offset": c.door_a.offset},
             "roomB": c.room_b, "doorB": {"side": c.door_b.side, "offset": c.door_b.offset}}
            for c in d.connections
        ],
    }


def serialize_dungeon(d: Dungeon) -> bytes:
    """Canonical UTF-8 JSON; stable byte-for-byte for equal dungeons."""
    return json.dumps(dungeon_to_dict(d), sort_keys=True,
                      separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def deserialize_dungeon(data: bytes | str) -> Dungeon:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedInput(f"not UTF-8 at byte {exc.start}") from exc
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"bad JSON at line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise MalformedInput("top level is not an object")
    if doc.get("version") != DUNGEON_FORMAT_VERSION:
        raise MalformedInput(f"unsupported dungeon version {doc.get('version')!r}")
    rooms_doc = doc.get("rooms")
    if not isinstance(rooms_doc, dict):
        raise MalformedInput("rooms: expected an object")
    rooms = {rid: room_from_dict(r, where=f"rooms.{rid}") for rid, r in rooms_doc.items()}
    conns = []
    for i, c in enumerate(doc.get("connections", [])):
        try:
            conns.append(Connection(
                c["roomA"], Door(c["doorA"]["side"], int(c["doorA"]["offset"])),
                c["roomB"], Door(c["doorB"]["side"], int(c["doorB"]["offset"]))))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInput(f"connections[{i}]: {exc!r}") from exc
    try:
        return Dungeon(rooms, tuple(conns))
    except MalformedInput:
        raise
    except Exception as exc:
        raise MalformedInput(str(exc)) from exc
