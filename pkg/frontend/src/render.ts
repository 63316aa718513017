/**
 * Frame rendering: scalar heatmaps into RGBA pixel buffers plus vector and
 * geometry overlays. The pixel-buffer path is pure (testable off-DOM); canvas
 * work is limited to putImageData and stroked paths.
 *
 * Frame payload axes are (x, y) with x slowest (see PROTOCOL.md); the canvas
 * shows x to the right and y upward, so pixel row 0 is the top of the domain.
 */

import { Lut, WALL_RGB } from "./colormap.js";

export interface ScalarFrame {
  n1: number;
  n2: number;
  values: Float32Array;
  validity: Float32Array;
}

/** Split a scalar-field frame payload into its planar channels. */
export function splitScalarFrame(dims: [number, number, number],
                                 payload: Float32Array): ScalarFrame {
  const [n1, n2, channels] = dims;
  if (channels !== 2 || payload.length !== n1 * n2 * 2) {
    throw new Error(`not a scalar frame: dims ${dims}, ${payload.length} floats`);
  }
  return {
    n1, n2,
    values: payload.subarray(0, n1 * n2),
    validity: payload.subarray(n1 * n2, 2 * n1 * n2),
  };
}

export interface VectorFrame {
  n1: number;
  n2: number;
  u1: Float32Array;
  u2: Float32Array;
  validity: Float32Array;
}

export function splitVectorFrame(dims: [number, number, number],
                                 payload: Float32Array): VectorFrame {
  const [n1, n2, channels] = dims;
  if (channels !== 3 || payload.length !== n1 * n2 * 3) {
    throw new Error(`not a velocity frame: dims ${dims}`);
  }
  const plane = n1 * n2;
  return {
    n1, n2,
    u1: payload.subarray(0, plane),
    u2: payload.subarray(plane, 2 * plane),
    validity: payload.subarray(2 * plane, 3 * plane),
  };
}

export interface ValueRange { min: number; max: number }

export function frameRange(frame: ScalarFrame): ValueRange {
  let min = Infinity;
  let max = -Infinity;
  for (let i = 0; i < frame.values.length; i++) {
    if (frame.validity[i] === 0) continue;
    const v = frame.values[i];
    if (Number.isNaN(v)) continue;
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (min > max) { min = 0; max = 1; }
  if (min === max) max = min + 1e-12;
  return { min, max };
}

/**
 * Map a scalar frame through a color LUT into an RGBA buffer of
 * (n1 x n2) pixels; wall cells get a distinct flat color. `out` is reused
 * when it has the right size.
 */
export function scalarToRgba(frame: ScalarFrame, lut: Lut, range: ValueRange,
                             out?: Uint8ClampedArray): Uint8ClampedArray {
  const { n1, n2, values, validity } = frame;
  const pixels = n1 * n2 * 4;
  const rgba = out && out.length === pixels ? out : new Uint8ClampedArray(pixels);
  const scale = 255 / (range.max - range.min);
  for (let py = 0; py < n2; py++) {
    const y = n2 - 1 - py; // y axis points up
    for (let px = 0; px < n1; px++) {
      const cell = px * n2 + y;
      const o = (py * n1 + px) * 4;
      if (validity[cell] === 0) {
        rgba[o] = WALL_RGB[0];
        rgba[o + 1] = WALL_RGB[1];
        rgba[o + 2] = WALL_RGB[2];
      } else {
        let t = (values[cell] - range.min) * scale;
        if (Number.isNaN(t)) t = 0;
        const k = (t < 0 ? 0 : t > 255 ? 255 : t | 0) * 3;
        rgba[o] = lut[k];
        rgba[o + 1] = lut[k + 1];
        rgba[o + 2] = lut[k + 2];
      }
      rgba[o + 3] = 255;
    }
  }
  return rgba;
}

export interface Arrow { x1: number; y1: number; x2: number; y2: number }

/** Decimated arrow glyphs (at most one per `step`-square of cells, step >= 4). */
export function arrowGlyphs(frame: VectorFrame, step = 4, gain = 40): Arrow[] {
  const s = Math.max(4, step | 0);
  const arrows: Arrow[] = [];
  const half = Math.floor(s / 2);
  for (let x = half; x < frame.n1; x += s) {
    for (let y = half; y < frame.n2; y += s) {
      const cell = x * frame.n2 + y;
      if (frame.validity[cell] === 0) continue;
      const u = frame.u1[cell];
      const v = frame.u2[cell];
      if (!Number.isFinite(u) || !Number.isFinite(v)) continue;
      arrows.push({ x1: x, y1: y, x2: x + u * gain, y2: y + v * gain });
    }
  }
  return arrows;
}

export interface MeshFrame { vertices: Float32Array; normals: Float32Array; segments: Uint32Array }

export function splitMeshFrame(dims: [number, number, number],
                               payload: Float32Array): MeshFrame {
  const [nv, ns] = dims;
  const vertices = new Float32Array(nv * 2);
  const normals = new Float32Array(nv * 2);
  for (let i = 0; i < nv; i++) {
    vertices[2 * i] = payload[4 * i];
    vertices[2 * i + 1] = payload[4 * i + 1];
    normals[2 * i] = payload[4 * i + 2];
    normals[2 * i + 1] = payload[4 * i + 3];
  }
  const segments = new Uint32Array(ns * 2);
  for (let i = 0; i < ns * 2; i++) segments[i] = payload[4 * nv + i];
  return { vertices, normals, segments };
}

export function splitStreamlineFrame(dims: [number, number, number],
                                     payload: Float32Array): Float32Array[] {
  const lines: Float32Array[] = [];
  let k = 0;
  for (let line = 0; line < dims[0]; line++) {
    const count = payload[k++];
    lines.push(payload.slice(k, k + 2 * count));
    k += 2 * count;
  }
  return lines;
}

export interface CanvasTransform {
  cellPx: number; // square pixels per cell
  n2: number;
}

/** Continuous cell coordinates -> canvas pixels (y flipped). */
export function cellToPixel(x: number, y: number, t: CanvasTransform): [number, number] {
  return [(x + 0.5) * t.cellPx, (t.n2 - 1 - y + 0.5) * t.cellPx];
}

/** Canvas pixel -> integer cell coordinates, or null outside the grid. */
export function pixelToCell(px: number, py: number, t: CanvasTransform,
                            n1: number): [number, number] | null {
  const x = Math.floor(px / t.cellPx);
  const y = t.n2 - 1 - Math.floor(py / t.cellPx);
  if (x < 0 || x >= n1 || y < 0 || y >= t.n2) return null;
  return [x, y];
}
