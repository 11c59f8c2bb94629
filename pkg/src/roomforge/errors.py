"""Exception hierarchy shared by all roomforge modules."""


class RoomforgeError(Exception):
    """Base class for every error raised by this package."""


# --- level model ---

class InvalidDimensions(RoomforgeError):
    pass


class InvalidDoor(RoomforgeError):
    pass


class OutOfBounds(RoomforgeError):
    pass


class LockedTile(RoomforgeError):
    pass


class DoorTileNotFloor(RoomforgeError):
    pass


class MalformedInput(RoomforgeError):
    """Bad persistent data; message carries position/path diagnostics."""


# --- pattern analysis ---

class InfeasibleInput(RoomforgeError):
    pass


class MissingTarget(RoomforgeError):
    pass


# --- engine ---

class ShapeMismatch(RoomforgeError):
    pass


class DuplicateDimension(RoomforgeError):
    pass


class NoPopulation(RoomforgeError):
    pass


# --- preference model ---

class OutOfRange(RoomforgeError):
    pass


class EmptyGrid(RoomforgeError):
    pass


class EmptyDataset(RoomforgeError):
    pass


class DomainError(RoomforgeError):
    pass


# --- service / harness ---

class ProtocolError(RoomforgeError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class StorageError(RoomforgeError):
    pass


class VersionMismatch(RoomforgeError):
    pass


class ConfigError(RoomforgeError):
    pass


class EmptySnapshot(RoomforgeError):
    pass
