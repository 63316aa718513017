/** Browser entry point: DOM wiring for the steering panel and canvas. */

import { EditOverlay, SteerClient, ValidationError, WsSocket } from "./client.js";
import { COLORMAPS } from "./colormap.js";
import { StrokeBatcher } from "./paint.js";
import { FLAG, FieldName, cellIndex } from "./protocol.js";
import {
  arrowGlyphs, cellToPixel, frameRange, pixelToCell, splitMeshFrame,
  splitScalarFrame, splitStreamlineFrame, splitVectorFrame,
} from "./render.js";
import { axisLock, clampOffset, dragToMove, normalizeRect } from "./regions.js";
import { Ema, defaultViewState } from "./state.js";

const $ = <T extends HTMLElement>(id: string): T =>
  document.getElementById(id) as T;

const view = defaultViewState();
const canvas = $<HTMLCanvasElement>("view");
const legend = $<HTMLCanvasElement>("legend");
const ctx = canvas.getContext("2d")!;
const statusEl = $("status");
const logEl = $("log");

let dims: [number, number, number] = [0, 0, 1];
let mainSubId = 0;
let velocitySubId = 0;
let streamSubId = 0;
let contourSubId = 0;
let needsRedraw = false;
let imageData: ImageData | null = null;
const overlay = new EditOverlay();
const batcher = new StrokeBatcher();
const fpsEma = new Ema(0.15);
let lastFrameTime = 0;

function log(text: string): void {
  logEl.textContent = `${new Date().toLocaleTimeString()} ${text}\n` +
    (logEl.textContent ?? "").slice(0, 4000);
}

const client = new SteerClient(
  () => new WsSocket($<HTMLInputElement>("url").value),
  {
    onStateChange(state) {
      statusEl.textContent = state;
      statusEl.className = state;
      if (state === "ready") {
        resubscribeAll();
      }
    },
    onFrame(subId) {
      if (subId === mainSubId) needsRedraw = true;
    },
    onStats(iteration, itPerSec, mass) {
      view.iteration = iteration;
      view.itPerSec = itPerSec;
      view.mass = mass;
      $("readout").textContent =
        `it ${iteration}  |  ${itPerSec.toFixed(1)} it/s  |  mass ${mass.toFixed(1)}` +
        `  |  ${view.fps.toFixed(0)} fps`;
    },
    onAck(seq, kind) {
      overlay.resolve(seq);
      if (!kind.startsWith("set_cells")) log(`ack #${seq} ${kind}`);
    },
    onCommandError(seq, code, text) {
      overlay.resolve(seq);
      needsRedraw = true;
      log(`rejected #${seq} (code ${code}): ${text}`);
    },
    onServerError(code, text) {
      log(`server error (code ${code}): ${text}`);
    },
    onEditsDiscarded(count) {
      log(`${count} queued edit(s) timed out while disconnected`);
    },
  });

// ------------------------------------------------------------- subscriptions

function subscribeMain(): void {
  if (client.state !== "ready") return;
  if (mainSubId) client.unsubscribe(mainSubId);
  const [, subId] = client.subscribe(view.field, view.everyN);
  mainSubId = subId;
}

function ensureOverlaySubs(): void {
  if (client.state !== "ready") return;
  if (view.arrows && !velocitySubId) {
    [, velocitySubId] = client.subscribe("velocity_xy", view.everyN);
  }
  if (view.streamlines && !streamSubId) {
    [, streamSubId] = client.subscribe("streamlines", Math.max(view.everyN, 10));
  }
  if (view.contour && !contourSubId) {
    [, contourSubId] = client.subscribe("interface", view.everyN);
  }
}

function resubscribeAll(): void {
  mainSubId = velocitySubId = streamSubId = contourSubId = 0;
  client.latest.clear();
  subscribeMain();
  ensureOverlaySubs();
}

// ----------------------------------------------------------------- rendering

function cellPx(): number {
  if (!dims[0]) return 8;
  return Math.max(2, Math.floor(Math.min(860 / dims[0], 620 / dims[1])));
}

function drawLegend(min: number, max: number): void {
  const lctx = legend.getContext("2d")!;
  const lut = COLORMAPS[view.colormap];
  const w = legend.width;
  for (let i = 0; i < w; i++) {
    const k = Math.floor((i / (w - 1)) * 255) * 3;
    lctx.fillStyle = `rgb(${lut[k]},${lut[k + 1]},${lut[k + 2]})`;
    lctx.fillRect(i, 0, 1, 14);
  }
  lctx.fillStyle = "#ddd";
  lctx.font = "11px monospace";
  lctx.clearRect(0, 14, w, 14);
  lctx.fillText(min.toPrecision(3), 2, 26);
  const maxText = max.toPrecision(3);
  lctx.fillText(maxText, w - lctx.measureText(maxText).width - 2, 26);
}

function redraw(): void {
  const frame = client.latest.get(mainSubId);
  if (!frame) return;
  const [n1, n2] = frame.dims;
  dims = [n1, n2, 1];
  const px = cellPx();
  if (canvas.width !== n1 * px || canvas.height !== n2 * px) {
    canvas.width = n1 * px;
    canvas.height = n2 * px;
    imageData = null;
  }
  const scalar = splitScalarFrame(frame.dims, frame.payload);
  const range = view.field === "fill" ? { min: 0, max: 1 } : frameRange(scalar);
  const rgba = scalarToImage(scalar, range);
  if (!imageData) imageData = new ImageData(n1, n2);
  imageData.data.set(rgba);
  // draw at cell resolution, then scale up without smoothing
  const off = getOffscreen(n1, n2);
  off.ctx.putImageData(imageData, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off.canvas, 0, 0, canvas.width, canvas.height);
  drawPendingOverlay(px, n2);
  if (view.arrows) drawArrows(px, n2);
  if (view.streamlines) drawStreamlines(px, n2);
  if (view.contour) drawContour(px, n2);
  drawSelection(px, n2);
  drawLegend(range.min, range.max);
}

import { scalarToRgba } from "./render.js";

function scalarToImage(scalar: ReturnType<typeof splitScalarFrame>,
                       range: { min: number; max: number }): Uint8ClampedArray {
  return scalarToRgba(scalar, COLORMAPS[view.colormap], range);
}

let offscreen: { canvas: HTMLCanvasElement; ctx: CanvasRenderingContext2D;
                 w: number; h: number } | null = null;

function getOffscreen(w: number, h: number) {
  if (!offscreen || offscreen.w !== w || offscreen.h !== h) {
    const c = document.createElement("canvas");
    c.width = w;
    c.height = h;
    offscreen = { canvas: c, ctx: c.getContext("2d")!, w, h };
  }
  return offscreen;
}

function drawPendingOverlay(px: number, n2: number): void {
  if (overlay.size === 0) return;
  ctx.fillStyle = "rgba(255, 160, 40, 0.55)";
  for (const cell of overlay.cells()) {
    const x = Math.floor(cell / n2);
    const y = cell % n2;
    ctx.fillRect(x * px, (n2 - 1 - y) * px, px, px);
  }
}

function drawArrows(px: number, n2: number): void {
  const frame = client.latest.get(velocitySubId);
  if (!frame) return;
  const vec = splitVectorFrame(frame.dims, frame.payload);
  const t = { cellPx: px, n2 };
  ctx.strokeStyle = "rgba(255,255,255,0.8)";
  ctx.lineWidth = 1;
  ctx.beginPath();
  for (const a of arrowGlyphs(vec)) {
    const [x1, y1] = cellToPixel(a.x1, a.y1, t);
    const [x2, y2] = cellToPixel(a.x2, a.y2, t);
    ctx.moveTo(x1, y1);
    ctx.lineTo(x2, y2);
    const angle = Math.atan2(y2 - y1, x2 - x1);
    ctx.lineTo(x2 - 4 * Math.cos(angle - 0.4), y2 - 4 * Math.sin(angle - 0.4));
  }
  ctx.stroke();
}

function drawStreamlines(px: number, n2: number): void {
  const frame = client.latest.get(streamSubId);
  if (!frame) return;
  const t = { cellPx: px, n2 };
  ctx.strokeStyle = "rgba(120, 200, 255, 0.8)";
  ctx.lineWidth = 1;
  ctx.beginPath();
  for (const line of splitStreamlineFrame(frame.dims, frame.payload)) {
    for (let k = 0; k < line.length / 2; k++) {
      const [x, y] = cellToPixel(line[2 * k], line[2 * k + 1], t);
      if (k === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    }
  }
  ctx.stroke();
}

function drawContour(px: number, n2: number): void {
  const frame = client.latest.get(contourSubId);
  if (!frame) return;
  const mesh = splitMeshFrame(frame.dims, frame.payload);
  const t = { cellPx: px, n2 };
  ctx.strokeStyle = "#ffffff";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  for (let s = 0; s < mesh.segments.length / 2; s++) {
    const a = mesh.segments[2 * s];
    const b = mesh.segments[2 * s + 1];
    const [x1, y1] = cellToPixel(mesh.vertices[2 * a], mesh.vertices[2 * a + 1], t);
    const [x2, y2] = cellToPixel(mesh.vertices[2 * b], mesh.vertices[2 * b + 1], t);
    ctx.moveTo(x1, y1);
    ctx.lineTo(x2, y2);
  }
  ctx.stroke();
}

function drawSelection(px: number, n2: number): void {
  if (!view.selection) return;
  const { lo, hi } = view.selection;
  ctx.strokeStyle = "#ffd24a";
  ctx.lineWidth = 2;
  ctx.strokeRect(lo[0] * px, (n2 - hi[1]) * px,
                 (hi[0] - lo[0]) * px, (hi[1] - lo[1]) * px);
  if (view.dragOffset) {
    const [dx, dy] = view.dragOffset;
    ctx.strokeStyle = "rgba(255, 210, 74, 0.5)";
    ctx.setLineDash([4, 3]);
    ctx.strokeRect((lo[0] + dx) * px, (n2 - hi[1] - dy) * px,
                   (hi[0] - lo[0]) * px, (hi[1] - lo[1]) * px);
    ctx.setLineDash([]);
  }
}

function renderLoop(timestamp: number): void {
  if (needsRedraw) {
    needsRedraw = false;
    redraw();
    if (lastFrameTime > 0) {
      view.fps = fpsEma.update(1000 / Math.max(1, timestamp - lastFrameTime));
    }
    lastFrameTime = timestamp;
  }
  flushPaintBatch();
  requestAnimationFrame(renderLoop);
}

// -------------------------------------------------------------------- editing

type Tool = "paint" | "select";
let tool: Tool = "paint";
let pointerDown = false;
let selectAnchor: [number, number] | null = null;
let dragAnchor: [number, number] | null = null;

function eventCell(ev: PointerEvent): [number, number] | null {
  const rect = canvas.getBoundingClientRect();
  const t = { cellPx: cellPx(), n2: dims[1] };
  return pixelToCell(ev.clientX - rect.left, ev.clientY - rect.top, t, dims[0]);
}

canvas.addEventListener("pointerdown", (ev) => {
  const cell = eventCell(ev);
  if (!cell) return;
  pointerDown = true;
  canvas.setPointerCapture(ev.pointerId);
  if (tool === "paint") {
    batcher.add(cell[0], cell[1]);
  } else if (view.selection && inRegion(cell, view.selection)) {
    dragAnchor = cell;
    view.dragOffset = [0, 0];
  } else {
    selectAnchor = cell;
    view.selection = null;
  }
});

canvas.addEventListener("pointermove", (ev) => {
  if (!pointerDown) return;
  const cell = eventCell(ev);
  if (!cell) return;
  if (tool === "paint") {
    batcher.add(cell[0], cell[1]);
  } else if (dragAnchor && view.selection) {
    let offset: [number, number] = [cell[0] - dragAnchor[0], cell[1] - dragAnchor[1]];
    if (view.axisLockOn) offset = axisLock(offset);
    const { offset: clamped, clamped: wasClamped } =
      clampOffset(view.selection, offset, dims[0], dims[1]);
    view.dragOffset = clamped;
    if (wasClamped) statusEl.textContent = "drag clamped to grid";
    needsRedraw = true;
  } else if (selectAnchor) {
    view.selection = normalizeRect(selectAnchor[0], selectAnchor[1],
                                   cell[0], cell[1], dims[0], dims[1]);
    needsRedraw = true;
  }
});

canvas.addEventListener("pointerup", () => {
  pointerDown = false;
  if (tool === "paint") {
    flushPaintBatch();
    batcher.endStroke();
  } else if (dragAnchor && view.selection && view.dragOffset) {
    const move = dragToMove(view.selection, view.dragOffset);
    if (move) {
      try {
        client.moveRegion(move.lo, move.hi, move.offset);
        view.selection = {
          lo: [move.lo[0] + move.offset[0], move.lo[1] + move.offset[1]],
          hi: [move.hi[0] + move.offset[0], move.hi[1] + move.offset[1]],
        };
      } catch (err) {
        log(String(err));
      }
    }
    dragAnchor = null;
    view.dragOffset = null;
    needsRedraw = true;
  }
  selectAnchor = null;
});

function inRegion(cell: [number, number],
                  region: { lo: [number, number]; hi: [number, number] }): boolean {
  return cell[0] >= region.lo[0] && cell[0] < region.hi[0]
    && cell[1] >= region.lo[1] && cell[1] < region.hi[1];
}

function flushPaintBatch(): void {
  if (!dims[0]) return;
  const cells = batcher.takeBatch(view.brushSize, dims[0], dims[1]);
  if (cells.length === 0) return;
  const fill = view.paintFlag === FLAG.interface ? view.paintFill : NaN;
  const seq = client.setCells(cells, view.paintFlag, fill);
  if (seq !== null) {
    overlay.addPending(seq, cells);
    needsRedraw = true;
  } else {
    log(`queued ${cells.length} cells (disconnected)`);
  }
}

// ------------------------------------------------------------------ controls

$("connect").addEventListener("click", () => {
  if (client.state === "disconnected") client.connect();
  else client.bye();
});
$("start").addEventListener("click", () => guard(() => client.start()));
$("pause").addEventListener("click", () => guard(() => client.pause()));
$("resume").addEventListener("click", () => guard(() => client.resume()));
$("send-dam").addEventListener("click", () => guard(sendDemoDam));

$<HTMLSelectElement>("field").addEventListener("change", (ev) => {
  view.field = (ev.target as HTMLSelectElement).value as FieldName;
  subscribeMain();
});
$<HTMLInputElement>("cadence").addEventListener("change", (ev) => {
  view.everyN = Math.max(1, Number((ev.target as HTMLInputElement).value));
  subscribeMain();
});
$<HTMLSelectElement>("colormap").addEventListener("change", (ev) => {
  view.colormap = (ev.target as HTMLSelectElement).value;
  needsRedraw = true;
});
for (const overlayName of ["arrows", "streamlines", "contour"] as const) {
  $<HTMLInputElement>(overlayName).addEventListener("change", (ev) => {
    view[overlayName] = (ev.target as HTMLInputElement).checked;
    ensureOverlaySubs();
    needsRedraw = true;
  });
}
$<HTMLSelectElement>("tool").addEventListener("change", (ev) => {
  tool = (ev.target as HTMLSelectElement).value as Tool;
});
$<HTMLSelectElement>("paint-flag").addEventListener("change", (ev) => {
  view.paintFlag = Number((ev.target as HTMLSelectElement).value);
});
$<HTMLInputElement>("brush").addEventListener("change", (ev) => {
  view.brushSize = Math.max(1, Number((ev.target as HTMLInputElement).value));
});
$<HTMLInputElement>("paint-fill").addEventListener("change", (ev) => {
  view.paintFill = Number((ev.target as HTMLInputElement).value);
});
$<HTMLInputElement>("axis-lock").addEventListener("change", (ev) => {
  view.axisLockOn = (ev.target as HTMLInputElement).checked;
});
$("apply-params").addEventListener("click", () => guard(() => {
  const tau = Number($<HTMLInputElement>("tau").value);
  const gx = Number($<HTMLInputElement>("gx").value);
  const gy = Number($<HTMLInputElement>("gy").value);
  client.setParam("tau", [tau]);
  client.setParam("gravity", [gx, gy]);
}));

function guard(fn: () => unknown): void {
  try {
    fn();
  } catch (err) {
    if (err instanceof ValidationError) log(`invalid: ${err.message}`);
    else throw err;
  }
}

/** Built-in 2D dam so the UI works against a server started without a scenario. */
function sendDemoDam(): void {
  const nx = 60;
  const ny = 40;
  const d: [number, number, number] = [nx, ny, 1];
  const flags = new Uint8Array(nx * ny).fill(FLAG.gas);
  const fill = new Float32Array(nx * ny);
  for (let x = 0; x < nx; x++) {
    for (let y = 0; y < ny; y++) {
      const border = x === 0 || x === nx - 1 || y === 0 || y === ny - 1;
      const water = !border && x < 25 && y < 31;
      const idx = cellIndex(x, y, 0, d);
      if (border) flags[idx] = FLAG.wall;
      else if (water) {
        flags[idx] = FLAG.fluid;
        fill[idx] = 1;
      }
    }
  }
  client.sendGeometry(d, flags, fill);
  client.setParam("tau", [0.7]);
  client.setParam("gravity", [0, -1e-4]);
}

requestAnimationFrame(renderLoop);
