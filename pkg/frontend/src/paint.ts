/**
 * Brush strokes over the cell grid. Pointer samples are interpolated so fast
 * strokes leave no gaps, stamped with a round brush, then deduplicated; the
 * main loop drains one batch per pointer frame into a single SET_CELLS.
 */

import { cellIndex } from "./protocol.js";

export interface Brush {
  flag: number;
  size: number; // brush diameter in cells, >= 1
  fill: number; // fill fraction for interface paint; NaN = flag default
}

/** Cells covered by a round stamp of `size` centred on (cx, cy). */
export function stampCells(cx: number, cy: number, size: number,
                           n1: number, n2: number): [number, number][] {
  const r = Math.max(size, 1) / 2;
  const out: [number, number][] = [];
  const lo = Math.floor(-r + 0.5);
  const hi = Math.ceil(r - 0.5);
  for (let dx = lo; dx <= hi; dx++) {
    for (let dy = lo; dy <= hi; dy++) {
      if (dx * dx + dy * dy > r * r + 1e-9) continue;
      const x = cx + dx;
      const y = cy + dy;
      if (x >= 0 && x < n1 && y >= 0 && y < n2) out.push([x, y]);
    }
  }
  return out;
}

/** Unique wire indices covered by a stroke path of cell coordinates. */
export function strokeCells(path: [number, number][], size: number,
                            n1: number, n2: number): number[] {
  const seen = new Set<number>();
  const out: number[] = [];
  const dims: [number, number, number] = [n1, n2, 1];
  const stamp = (x: number, y: number) => {
    for (const [cx, cy] of stampCells(x, y, size, n1, n2)) {
      const idx = cellIndex(cx, cy, 0, dims);
      if (!seen.has(idx)) {
        seen.add(idx);
        out.push(idx);
      }
    }
  };
  for (let i = 0; i < path.length; i++) {
    if (i === 0) {
      stamp(Math.round(path[0][0]), Math.round(path[0][1]));
      continue;
    }
    // walk from the previous sample so fast pointer moves stay contiguous
    const [ax, ay] = path[i - 1];
    const [bx, by] = path[i];
    const steps = Math.max(1, Math.ceil(Math.max(Math.abs(bx - ax), Math.abs(by - ay))));
    for (let s = 1; s <= steps; s++) {
      const t = s / steps;
      stamp(Math.round(ax + (bx - ax) * t), Math.round(ay + (by - ay) * t));
    }
  }
  return out;
}

/** Accumulates pointer samples between sends (one SET_CELLS per pointer frame).
 * Across the batches of one stroke, the union of returned cells is exactly the
 * cells under the stroke, with no duplicates. */
export class StrokeBatcher {
  private path: [number, number][] = [];
  private carry: [number, number] | null = null;
  private sent = new Set<number>();

  add(x: number, y: number): void {
    this.path.push([x, y]);
  }

  takeBatch(size: number, n1: number, n2: number): number[] {
    if (this.path.length === 0) return [];
    const path = this.carry ? [this.carry, ...this.path] : this.path;
    this.carry = this.path[this.path.length - 1];
    this.path = [];
    const out: number[] = [];
    for (const cell of strokeCells(path, size, n1, n2)) {
      if (!this.sent.has(cell)) {
        this.sent.add(cell);
        out.push(cell);
      }
    }
    return out;
  }

  endStroke(): void {
    this.path = [];
    this.carry = null;
    this.sent.clear();
  }
}
