/** DOM wiring for the room editor: palette, canvas painting, suggestion
 * panes, and the live session socket. */
import { DIMENSIONS, DimensionName, RoomDoc, TILE_CHARS, TileChar } from "./protocol.js";
import { PixelBuffer, TILE_COLORS, renderRoomPixels, thumbnailTitle } from "./render.js";
import { EditorStore } from "./state.js";
import { connect } from "./transport.js";

const EDIT_SCALE = 32;
const THUMB_SCALE = 4;

const store = new EditorStore();
const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
const transport = connect(wsUrl, {
  onMessage: (raw) => store.handleServer(raw),
  onStatus: (status) => {
    store.connectionChanged(status);
    if (status === "connected" && !store.state.sessionId) {
      store.startSession(`web-${Math.floor(Math.random() * 1e6)}`, Date.now() % 100000);
    }
  },
});
store.subscribe(() => {
  for (const message of store.drainOutbox()) transport.send(message);
  render();
});

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, cls?: string, text?: string): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text) node.textContent = text;
  return node;
}

function blit(canvas: HTMLCanvasElement, pixels: PixelBuffer): void {
  canvas.width = pixels.width;
  canvas.height = pixels.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.putImageData(new ImageData(pixels.data, pixels.width, pixels.height), 0, 0);
}

// --- static layout ------------------------------------------------------------

const app = document.getElementById("app")!;
const header = el("div", "header");
const statusBadge = el("span", "status", "disconnected");
const modelBadge = el("span", "model", "model: cold");
const saveButton = el("button", "", "save");
const loadButton = el("button", "", "load");
header.append(el("span", "title", "roomforge"), statusBadge, modelBadge,
              saveButton, loadButton);

const body = el("div", "body");
const toolPane = el("div", "tools");
const editorPane = el("div", "editor");
const suggestPane = el("div", "suggestions");
body.append(toolPane, editorPane, suggestPane);
app.append(header, body);

const toastBox = el("div", "toasts");
app.append(toastBox);

// palette
const toolButtons = new Map<string, HTMLButtonElement>();
const tileNames: Record<TileChar, string> = {
  F: "floor", W: "wall", T: "treasure", E: "enemy",
};
for (const tile of TILE_CHARS) {
  const button = el("button", "tool", tileNames[tile]);
  const [r, g, b] = TILE_COLORS[tile];
  button.style.borderLeft = `12px solid rgb(${r},${g},${b})`;
  button.onclick = () => store.selectTool({ type: "tile", tile });
  toolButtons.set(tile, button);
  toolPane.append(button);
}
const lockButton = el("button", "tool", "lock brush");
lockButton.onclick = () => store.selectTool({ type: "lock" });
toolButtons.set("lock", lockButton);
toolPane.append(lockButton);

// dimension selectors
const dimSelects: HTMLSelectElement[] = [];
for (const slot of [0, 1]) {
  const select = el("select");
  for (const name of DIMENSIONS) {
    const option = el("option", "", name);
    option.value = name;
    select.append(option);
  }
  select.onchange = () => {
    const [a, b] = dimSelects.map((s) => s.value as DimensionName);
    if (a !== b) store.setDims(a, b);
  };
  dimSelects.push(select);
  toolPane.append(el("div", "dimlabel", slot === 0 ? "rows" : "columns"), select);
}

// editor canvas
const editorCanvas = el("canvas", "room");
editorPane.append(editorCanvas);
let painting = false;
function paintFromEvent(event: MouseEvent): void {
  const room = store.state.room;
  if (!room) return;
  const rect = editorCanvas.getBoundingClientRect();
  const x = Math.floor((event.clientX - rect.left) / (rect.width / room.w));
  const y = Math.floor((event.clientY - rect.top) / (rect.height / room.h));
  store.paint(x, y);
}
editorCanvas.onmousedown = (event) => { painting = true; paintFromEvent(event); };
editorCanvas.onmousemove = (event) => { if (painting) paintFromEvent(event); };
window.addEventListener("mouseup", () => { painting = false; });

saveButton.onclick = () => store.saveSession("web-session");
loadButton.onclick = () => store.loadSession("web-session");

// --- dynamic rendering -----------------------------------------------------------

function renderEliteGrid(): HTMLElement {
  const panes = store.state.panes;
  const container = el("div", "elite-grid");
  if (!panes) return container;
  const [rows, cols] = panes.grid.shape;
  const [dimRows, dimCols] = panes.grid.dims;
  container.append(el("div", "axis", `rows: ${dimRows}, columns: ${dimCols}`));
  const table = el("div", "grid-table");
  table.style.gridTemplateColumns = `auto repeat(${cols}, 1fr)`;
  table.append(el("span"));
  for (let j = 0; j < cols; j++) {
    table.append(el("span", "bin", `${(j / cols).toFixed(1)}..${((j + 1) / cols).toFixed(1)}`));
  }
  for (let i = 0; i < rows; i++) {
    table.append(el("span", "bin", `${(i / rows).toFixed(1)}..${((i + 1) / rows).toFixed(1)}`));
    for (let j = 0; j < cols; j++) {
      const cell = panes.grid.cells[i][j];
      if (cell === null) {
        table.append(el("div", "cell empty", "·"));
        continue;
      }
      const holder = el("div", "cell");
      const canvas = el("canvas", "thumb");
      blit(canvas, renderRoomPixels(cell.room, THUMB_SCALE));
      holder.title = thumbnailTitle(cell.predictedPref, cell.confidence);
      holder.onclick = () => store.applySuggestion([i, j]);
      holder.append(canvas);
      table.append(holder);
    }
  }
  container.append(table);
  return container;
}

function renderTopPane(): HTMLElement {
  const panes = store.state.panes;
  const strip = el("div", "top-strip");
  strip.append(el("div", "axis", "model favorites"));
  if (!panes) return strip;
  for (const entry of panes.top) {
    const holder = el("div", "cell");
    const canvas = el("canvas", "thumb");
    blit(canvas, renderRoomPixels(entry.room, THUMB_SCALE));
    holder.append(canvas, el("span", "badge", entry.predictedPref.toFixed(2)));
    holder.onclick = () => store.applySuggestion([entry.cell[0], entry.cell[1]]);
    strip.append(holder);
  }
  return strip;
}

function render(): void {
  const state = store.state;
  statusBadge.textContent = state.connection;
  statusBadge.className = `status ${state.connection}`;
  const ms = state.modelStatus;
  modelBadge.textContent =
    `model: acc ${ms.testAcc.toFixed(2)} · episodes ${ms.episodes} · w1 ${ms.meanW1.toFixed(2)}`;

  for (const [key, button] of toolButtons) {
    const active = state.tool.type === "lock" ? key === "lock"
      : state.tool.type === "tile" && key === state.tool.tile;
    button.classList.toggle("active", active);
  }
  dimSelects[0].value = state.dims[0];
  dimSelects[1].value = state.dims[1];

  editorCanvas.style.pointerEvents = state.connection === "connected" ? "auto" : "none";
  if (state.room) {
    blit(editorCanvas, renderRoomPixels(state.room as RoomDoc, EDIT_SCALE));
  }

  suggestPane.replaceChildren(renderEliteGrid(), renderTopPane());

  toastBox.replaceChildren(...state.toasts.slice(-3).map(
    (toast) => el("div", "toast", `${toast.code}: ${toast.message}`)));
}

render();
export { store, transport };
