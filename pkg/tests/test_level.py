import json

import numpy as np
import pytest

from roomforge.errors import (DoorTileNotFloor, InvalidDimensions, InvalidDoor,
                              LockedTile, MalformedInput, OutOfBounds)
from roomforge.level import (Connection, Door, Dungeon, Room, RoomEdit,
                             TileKind, apply_edit, deserialize_dungeon,
                             new_room, serialize_dungeon)


def random_room(rng: np.random.Generator) -> Room:
    w = int(rng.integers(3, 15))
    h = int(rng.integers(3, 10))
    doors = []
    positions = set()
    for _ in range(int(rng.integers(1, 4))):
        side = "NSEW"[rng.integers(4)]
        offset = int(rng.integers(w if side in "NS" else h))
        door = Door(side, offset)
        pos = door.position(w, h)
        if pos not in positions:
            positions.add(pos)
            doors.append(door)
    grid = rng.integers(0, 4, size=(h, w)).astype(np.int8)
    for x, y in positions:
        grid[y, x] = int(TileKind.FLOOR)
    locks = rng.random((h, w)) < 0.15
    return Room(w, h, grid, tuple(doors), locks)


def random_dungeon(rng: np.random.Generator) -> Dungeon:
    rooms = {f"r{k}": random_room(rng) for k in range(int(rng.integers(0, 5)))}
    free = [(rid, d) for rid, room in rooms.items() for d in room.doors]
    rng.shuffle(free)
    connections = []
    while len(free) >= 2 and rng.random() < 0.7:
        a = free.pop()
        b = free.pop()
        if a == b:
            continue
        connections.append(Connection(a[0], a[1], b[0], b[1]))
    return Dungeon(rooms, tuple(connections))


class TestRoomConstruction:
    def test_default_room(self):
        room = new_room(13, 7, [Door("W", 3)])
        assert room.width == 13 and room.height == 7
        assert np.all(room.grid == int(TileKind.FLOOR))
        assert room.grid.size == 91
        assert not room.locks.any()
        assert room.door_positions == ((0, 3),)

    def test_minimal_room(self):
        room = new_room(3, 3, [Door("N", 1)])
        assert room.grid.shape == (3, 3)

    def test_too_small(self):
        with pytest.raises(InvalidDimensions):
            new_room(2, 5, [Door("N", 0)])

    def test_door_off_border(self):
        with pytest.raises(InvalidDoor):
            new_room(5, 5, [Door("N", 5)])

    def test_duplicate_door_position(self):
        with pytest.raises(InvalidDoor):
            new_room(5, 5, [Door("N", 0), Door("W", 0)])

    def test_no_doors(self):
        with pytest.raises(InvalidDoor):
            new_room(5, 5, [])

    def test_rooms_are_immutable(self):
        room = new_room()
        with pytest.raises(ValueError):
            room.grid[0, 0] = 1
        with pytest.raises(ValueError):
            room.locks[0, 0] = True


class TestApplyEdit:
    def test_single_cell_change(self):
        room = new_room(13, 7, [Door("W", 3)])
        edited = apply_edit(room, RoomEdit(0, 0, new_kind=TileKind.WALL))
        assert edited.tile(0, 0) is TileKind.WALL
        diff = np.flatnonzero(edited.grid != room.grid)
        assert len(diff) == 1
        assert room.tile(0, 0) is TileKind.FLOOR  # original untouched

    def test_locked_tile_rejected(self):
        room = new_room()
        room = apply_edit(room, RoomEdit(2, 2, lock_toggle=True))
        with pytest.raises(LockedTile):
            apply_edit(room, RoomEdit(2, 2, new_kind=TileKind.WALL))
        # unlock first, then the edit goes through
        room = apply_edit(room, RoomEdit(2, 2, lock_toggle=True))
        room = apply_edit(room, RoomEdit(2, 2, new_kind=TileKind.WALL))
        assert room.tile(2, 2) is TileKind.WALL

    def test_wall_under_door_rejected(self):
        room = new_room(13, 7, [Door("W", 3)])
        with pytest.raises(DoorTileNotFloor):
            apply_edit(room, RoomEdit(0, 3, new_kind=TileKind.WALL))

    def test_out_of_bounds(self):
        room = new_room()
        with pytest.raises(OutOfBounds):
            apply_edit(room, RoomEdit(13, 0, new_kind=TileKind.WALL))

    def test_lock_toggle_flips_single_bit(self):
        room = new_room()
        locked = apply_edit(room, RoomEdit(4, 4, lock_toggle=True))
        assert locked.is_locked(4, 4)
        assert int(locked.locks.sum()) == 1
        assert np.array_equal(locked.grid, room.grid)

    def test_door_tiles_stay_floor_through_edits(self):
        rng = np.random.default_rng(5)
        room = new_room(9, 5, [Door("N", 4), Door("S", 4)])
        for _ in range(200):
            x = int(rng.integers(9))
            y = int(rng.integers(5))
            kind = TileKind(int(rng.integers(4)))
            try:
                room = apply_edit(room, RoomEdit(x, y, new_kind=kind))
            except (LockedTile, DoorTileNotFloor):
                pass
            for dx, dy in room.door_positions:
                assert room.tile(dx, dy) is TileKind.FLOOR


class TestSerialization:
    def test_empty_dungeon_round_trip(self):
        d = Dungeon()
        assert deserialize_dungeon(serialize_dungeon(d)) == Dungeon()

    def test_five_room_dungeon_round_trip_is_byte_stable(self):
        rng = np.random.default_rng(11)
        rooms = {f"r{k}": random_room(rng) for k in range(5)}
        d = Dungeon(rooms)
        blob = serialize_dungeon(d)
        again = serialize_dungeon(deserialize_dungeon(blob))
        assert blob == again

    def test_truncated_stream(self):
        blob = serialize_dungeon(Dungeon())
        with pytest.raises(MalformedInput):
            deserialize_dungeon(blob[:-4])

    def test_wrong_version(self):
        doc = json.loads(serialize_dungeon(Dungeon()))
        doc["version"] = 99
        with pytest.raises(MalformedInput):
            deserialize_dungeon(json.dumps(doc))

    def test_tile_length_mismatch_diagnosed(self):
        doc = {"version": 1, "rooms": {"a": {"w": 4, "h": 4, "tiles": "F" * 15,
                                             "locks": "0" * 16,
                                             "doors": [{"side": "N", "offset": 1}]}},
               "connections": []}
        with pytest.raises(MalformedInput, match="rooms.a.tiles"):
            deserialize_dungeon(json.dumps(doc))

    def test_bad_connection_reference(self):
        doc = {"version": 1, "rooms": {}, "connections": [
            {"roomA": "x", "doorA": {"side": "N", "offset": 0},
             "roomB": "y", "doorB": {"side": "N", "offset": 0}}]}
        with pytest.raises(MalformedInput):
            deserialize_dungeon(json.dumps(doc))

    def test_round_trip_identity_property(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            d = random_dungeon(rng)
            blob = serialize_dungeon(d)
            back = deserialize_dungeon(blob)
            assert back == d
            assert serialize_dungeon(back) == blob


class TestDungeonInvariants:
    def test_door_used_twice_rejected(self):
        room_a = new_room(5, 5, [Door("N", 2)])
        room_b = new_room(5, 5, [Door("S", 2), Door("N", 2)])
        conn = Connection("a", Door("N", 2), "b", Door("S", 2))
        dup = Connection("a", Door("N", 2), "b", Door("N", 2))
        with pytest.raises(MalformedInput):
            Dungeon({"a": room_a, "b": room_b}, (conn, dup))

    def test_connection_to_missing_door(self):
        room_a = new_room(5, 5, [Door("N", 2)])
        with pytest.raises(MalformedInput):
            Dungeon({"a": room_a}, (Connection("a", Door("S", 1), "a", Door("N", 2)),))
