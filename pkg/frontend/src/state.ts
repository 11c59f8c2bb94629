/** Editor view-model: a pure state machine over protocol messages.
 *
 * Everything rendered comes from server-acknowledged state. Edits are applied
 * optimistically but tracked per sequence number; a server error rolls the
 * optimistic change back, so after any reply sequence the view equals the
 * fold of acknowledged events alone (reconnect-safe by construction).
 */
import {
  DimensionName,
  Message,
  ModelStatusDoc,
  PanesDoc,
  RoomDoc,
  TileChar,
  isMessage,
  roomLocked,
  roomTile,
} from "./protocol.js";

export type Tool = { type: "tile"; tile: TileChar } | { type: "lock" };

export interface Toast {
  code: string;
  message: string;
}

export interface ViewState {
  connection: "disconnected" | "connecting" | "connected";
  sessionId: string | null;
  activeRoomId: string | null;
  room: RoomDoc | null;
  panes: PanesDoc | null;
  dims: DimensionName[];
  tool: Tool;
  modelStatus: ModelStatusDoc;
  toasts: Toast[];
  generation: number;
}

interface PendingEdit {
  kind: "edit" | "lock";
  x: number;
  y: number;
  before: string; // tiles or locks string prior to the optimistic change
}

function freshState(): ViewState {
  return {
    connection: "disconnected",
    sessionId: null,
    activeRoomId: null,
    room: null,
    panes: null,
    dims: ["symmetry", "similarity"],
    tool: { type: "tile", tile: "W" },
    modelStatus: { testAcc: 0, episodes: 0, meanW1: 0 },
    toasts: [],
    generation: 0,
  };
}

function replaceAt(text: string, index: number, ch: string): string {
  return text.slice(0, index) + ch + text.slice(index + 1);
}

export class EditorStore {
  state: ViewState = freshState();
  private outSeq = 0;
  private pending = new Map<number, PendingEdit>();
  private outbox: Message[] = [];
  private listeners: (() => void)[] = [];

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  /** Messages produced since the last drain, in send order. */
  drainOutbox(): Message[] {
    const batch = this.outbox;
    this.outbox = [];
    return batch;
  }

  private send(kind: string, payload: Record<string, unknown>): Message {
    const message: Message = { kind, seq: this.outSeq++, payload };
    this.outbox.push(message);
    this.notify();
    return message;
  }

  private sessionPayload(extra: Record<string, unknown>): Record<string, unknown> {
    return this.state.sessionId
      ? { sessionId: this.state.sessionId, ...extra }
      : { ...extra };
  }

  // --- user intents ---------------------------------------------------------

  connectionChanged(connection: ViewState["connection"]): void {
    this.state.connection = connection;
    if (connection !== "connected") {
      // optimistic edits cannot be reconciled across a connection gap
      this.pending.clear();
    }
    this.notify();
  }

  startSession(sessionId: string, seed: number): void {
    this.send("session/start", { sessionId, seed });
  }

  selectTool(tool: Tool): void {
    this.state.tool = tool;
    this.notify();
  }

  setDims(first: DimensionName, second: DimensionName): void {
    this.send("dims/set", this.sessionPayload({ dims: [first, second] }));
  }

  /** Paint with the current tool; returns false when the stroke is a no-op. */
  paint(x: number, y: number): boolean {
    const room = this.state.room;
    if (!room || this.state.connection !== "connected") return false;
    if (x < 0 || y < 0 || x >= room.w || y >= room.h) return false;
    const index = y * room.w + x;
    if (this.state.tool.type === "tile") {
      const tile = this.state.tool.tile;
      if (roomTile(room, x, y) === tile) return false;
      const message = this.send("room/edit", this.sessionPayload({ x, y, tile }));
      this.pending.set(message.seq, { kind: "edit", x, y, before: room.tiles });
      this.state.room = { ...room, tiles: replaceAt(room.tiles, index, tile) };
      this.notify();
      return true;
    }
    const message = this.send("room/lock", this.sessionPayload({ x, y }));
    this.pending.set(message.seq, { kind: "lock", x, y, before: room.locks });
    const flipped = roomLocked(room, x, y) ? "0" : "1";
    this.state.room = { ...room, locks: replaceAt(room.locks, index, flipped) };
    this.notify();
    return true;
  }

  applySuggestion(cell: [number, number]): void {
    this.send("suggestion/apply", this.sessionPayload({ cell: [cell[0], cell[1]] }));
  }

  saveSession(name: string): void {
    this.send("session/save", this.sessionPayload({ name }));
  }

  loadSession(name: string): void {
    this.send("session/load", { name });
  }

  // --- server messages --------------------------------------------------------

  handleServer(raw: unknown): void {
    if (!isMessage(raw)) {
      this.state.toasts.push({ code: "MalformedInput", message: "bad message" });
      this.notify();
      return;
    }
    const message = raw;
    const payload = message.payload as Record<string, any>;
    switch (message.kind) {
      case "session/start":
      case "session/load": {
        this.state.sessionId = payload.sessionId;
        this.state.activeRoomId = payload.activeRoomId;
        const rooms = payload.dungeon?.rooms ?? {};
        this.state.room = rooms[payload.activeRoomId] ?? null;
        if (payload.dims) this.state.dims = payload.dims;
        this.state.generation = payload.generation ?? 0;
        break;
      }
      case "room/edit":
      case "room/lock": {
        this.pending.delete(payload.re);
        if (message.kind === "room/lock" && this.state.room) {
          const index = payload.y * this.state.room.w + payload.x;
          const ch = payload.locked ? "1" : "0";
          this.state.room = {
            ...this.state.room,
            locks: replaceAt(this.state.room.locks, index, ch),
          };
        }
        break;
      }
      case "dims/set": {
        this.state.dims = payload.dims;
        break;
      }
      case "suggestion/apply": {
        if (payload.room) this.state.room = payload.room;
        break;
      }
      case "suggestions/published": {
        this.state.panes = { grid: payload.grid, top: payload.top };
        this.state.generation = payload.grid?.generation ?? this.state.generation;
        break;
      }
      case "model/status": {
        this.state.modelStatus = {
          testAcc: payload.testAcc,
          episodes: payload.episodes,
          meanW1: payload.meanW1,
          meanConfidence: payload.meanConfidence,
        };
        break;
      }
      case "error": {
        const pending = this.pending.get(payload.re);
        if (pending && this.state.room) {
          this.state.room = pending.kind === "edit"
            ? { ...this.state.room, tiles: pending.before }
            : { ...this.state.room, locks: pending.before };
          this.pending.delete(payload.re);
        }
        this.state.toasts.push({ code: payload.code, message: payload.message });
        break;
      }
      default: {
        this.state.toasts.push({
          code: "UnknownKind",
          message: `unhandled ${message.kind}`,
        });
      }
    }
    this.notify();
  }
}
