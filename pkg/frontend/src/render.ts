/** Room-to-pixels rendering, shared by the editor canvas and thumbnails.
 *
 * Thumbnails render purely from the tile/lock strings into an RGBA buffer so
 * they can be golden-tested without a browser; the DOM layer just blits the
 * buffer through ImageData.
 */
import { RoomDoc, TileChar, doorPositions, roomLocked, roomTile } from "./protocol.js";

export const TILE_COLORS: Record<TileChar, [number, number, number]> = {
  F: [222, 214, 190], // floor: parchment
  W: [72, 62, 56],    // wall: dark umber
  T: [212, 166, 48],  // treasure: gold
  E: [164, 54, 44],   // enemy: rust red
};

const DOOR_COLOR: [number, number, number] = [96, 128, 168];
const LOCK_TINT: [number, number, number] = [120, 84, 160];

export interface PixelBuffer {
  width: number;
  height: number;
  data: Uint8ClampedArray<ArrayBuffer>; // RGBA, row-major
}

export function renderRoomPixels(room: RoomDoc, scale = 4): PixelBuffer {
  const width = room.w * scale;
  const height = room.h * scale;
  const data = new Uint8ClampedArray(width * height * 4);
  const doors = new Set(doorPositions(room).map(([x, y]) => `${x},${y}`));
  for (let y = 0; y < room.h; y++) {
    for (let x = 0; x < room.w; x++) {
      const base = TILE_COLORS[roomTile(room, x, y)];
      const isDoor = doors.has(`${x},${y}`);
      const locked = roomLocked(room, x, y);
      for (let py = 0; py < scale; py++) {
        for (let px = 0; px < scale; px++) {
          let [r, g, b] = base;
          if (isDoor && (px === 0 || py === 0 || px === scale - 1 || py === scale - 1)) {
            [r, g, b] = DOOR_COLOR;
          }
          // lock overlay: diagonal hatching
          if (locked && (px + py) % 4 === 0) {
            r = (r + LOCK_TINT[0]) >> 1;
            g = (g + LOCK_TINT[1]) >> 1;
            b = (b + LOCK_TINT[2]) >> 1;
          }
          const offset = ((y * scale + py) * width + (x * scale + px)) * 4;
          data[offset] = r;
          data[offset + 1] = g;
          data[offset + 2] = b;
          data[offset + 3] = 255;
        }
      }
    }
  }
  return { width, height, data };
}

/** Stable text form of a pixel buffer: one hex string per pixel row. */
export function pixelsToHexRows(pixels: PixelBuffer): string[] {
  const rows: string[] = [];
  for (let y = 0; y < pixels.height; y++) {
    let row = "";
    for (let x = 0; x < pixels.width; x++) {
      const offset = (y * pixels.width + x) * 4;
      for (let channel = 0; channel < 3; channel++) {
        row += pixels.data[offset + channel].toString(16).padStart(2, "0");
      }
    }
    rows.push(row);
  }
  return rows;
}

export function thumbnailTitle(predictedPref?: number, confidence?: number): string {
  if (predictedPref === undefined) return "";
  const pref = predictedPref.toFixed(2);
  return confidence === undefined
    ? `pref ${pref}`
    : `pref ${pref} / conf ${confidence.toFixed(2)}`;
}
