/** Rectangle selection and axis-constrained region dragging. */

export interface Region {
  lo: [number, number]; // inclusive
  hi: [number, number]; // exclusive
}

export function normalizeRect(ax: number, ay: number, bx: number, by: number,
                              n1: number, n2: number): Region | null {
  const lo: [number, number] = [
    Math.max(0, Math.min(ax, bx)),
    Math.max(0, Math.min(ay, by)),
  ];
  const hi: [number, number] = [
    Math.min(n1, Math.max(ax, bx) + 1),
    Math.min(n2, Math.max(ay, by) + 1),
  ];
  if (lo[0] >= hi[0] || lo[1] >= hi[1]) return null;
  return { lo, hi };
}

/** Keep only the dominant component of a drag (axis-lock mode). */
export function axisLock(offset: [number, number]): [number, number] {
  return Math.abs(offset[0]) >= Math.abs(offset[1])
    ? [offset[0], 0]
    : [0, offset[1]];
}

export interface ClampResult {
  offset: [number, number];
  clamped: boolean;
}

/** Clamp a drag offset so region+offset stays inside the grid. */
export function clampOffset(region: Region, offset: [number, number],
                            n1: number, n2: number): ClampResult {
  const bounds: [number, number] = [n1, n2];
  const out: [number, number] = [...offset];
  let clamped = false;
  for (const axis of [0, 1] as const) {
    const min = -region.lo[axis];
    const max = bounds[axis] - region.hi[axis];
    if (out[axis] < min) { out[axis] = min; clamped = true; }
    if (out[axis] > max) { out[axis] = max; clamped = true; }
  }
  return { offset: out, clamped };
}

/** Committed drag -> wire region triple, or null for a no-op drag. */
export function dragToMove(region: Region, offset: [number, number]):
    { lo: [number, number, number]; hi: [number, number, number];
      offset: [number, number, number] } | null {
  if (offset[0] === 0 && offset[1] === 0) return null;
  return {
    lo: [region.lo[0], region.lo[1], 0],
    hi: [region.hi[0], region.hi[1], 1],
    offset: [offset[0], offset[1], 0],
  };
}
