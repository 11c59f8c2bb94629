/** Wire protocol mirrored from the session service. */

export interface Message {
  kind: string;
  seq: number;
  payload: Record<string, unknown>;
}

export interface DoorDoc {
  side: "N" | "S" | "E" | "W";
  offset: number;
}

export interface RoomDoc {
  w: number;
  h: number;
  tiles: string; // row-major, one char per tile: F/W/T/E
  locks: string; // row-major 0/1
  doors: DoorDoc[];
}

export interface EliteCellDoc {
  room: RoomDoc;
  combined: number;
  objective: number;
  predictedPref: number;
  confidence: number;
  descriptor: number[];
  feasibleCount: number;
  infeasibleCount: number;
}

export interface GridDoc {
  generation: number;
  dims: string[];
  shape: number[];
  cells: (EliteCellDoc | null)[][];
}

export interface TopEntryDoc {
  cell: number[];
  room: RoomDoc;
  predictedPref: number;
  confidence: number;
}

export interface PanesDoc {
  grid: GridDoc;
  top: TopEntryDoc[];
}

export interface ModelStatusDoc {
  testAcc: number;
  episodes: number;
  meanConfidence?: number;
  meanW1: number;
}

export const DIMENSIONS = [
  "symmetry",
  "similarity",
  "patterns",
  "linearity",
  "leniency",
] as const;

export type DimensionName = (typeof DIMENSIONS)[number];

export type TileChar = "F" | "W" | "T" | "E";

export const TILE_CHARS: TileChar[] = ["F", "W", "T", "E"];

export function isMessage(value: unknown): value is Message {
  if (typeof value !== "object" || value === null) return false;
  const message = value as Partial<Message>;
  return typeof message.kind === "string"
    && typeof message.seq === "number"
    && typeof message.payload === "object" && message.payload !== null;
}

export function roomTile(room: RoomDoc, x: number, y: number): TileChar {
  return room.tiles[y * room.w + x] as TileChar;
}

export function roomLocked(room: RoomDoc, x: number, y: number): boolean {
  return room.locks[y * room.w + x] === "1";
}

export function doorPositions(room: RoomDoc): [number, number][] {
  return room.doors.map((door) => {
    switch (door.side) {
      case "N": return [door.offset, 0];
      case "S": return [door.offset, room.h - 1];
      case "W": return [0, door.offset];
      default: return [room.w - 1, door.offset];
    }
  });
}
