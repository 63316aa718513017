/** Rendering math: correctness of the pixel mapping and the 30 fps budget. */

import { describe, expect, it } from "vitest";

import { COLORMAPS } from "../src/colormap.js";
import {
  arrowGlyphs, frameRange, scalarToRgba, splitScalarFrame, splitVectorFrame,
} from "../src/render.js";

function syntheticScalar(n1: number, n2: number) {
  const payload = new Float32Array(n1 * n2 * 2);
  for (let x = 0; x < n1; x++) {
    for (let y = 0; y < n2; y++) {
      const cell = x * n2 + y;
      const wall = x === 0 || y === 0 || x === n1 - 1 || y === n2 - 1;
      payload[cell] = wall ? NaN : Math.sin(x / 7) * Math.cos(y / 5);
      payload[n1 * n2 + cell] = wall ? 0 : 1;
    }
  }
  return payload;
}

describe("scalar rendering", () => {
  it("constant frames map to one color with a correct range", () => {
    const payload = new Float32Array(8 * 6 * 2);
    payload.fill(0.75, 0, 48);
    payload.fill(1, 48);
    const frame = splitScalarFrame([8, 6, 2], payload);
    const range = frameRange(frame);
    expect(range.min).toBe(0.75);
    const rgba = scalarToRgba(frame, COLORMAPS.viridis, { min: 0, max: 1 });
    // every pixel identical
    for (let p = 4; p < rgba.length; p += 4) {
      expect(rgba[p]).toBe(rgba[0]);
      expect(rgba[p + 3]).toBe(255);
    }
  });

  it("wall cells render the sentinel color and honor the y flip", () => {
    const n1 = 4;
    const n2 = 3;
    const payload = new Float32Array(n1 * n2 * 2);
    payload.fill(1, n1 * n2); // all valid...
    payload[n1 * n2 + 1 * n2 + 0] = 0; // ...except cell (1, 0)
    payload[1 * n2 + 0] = NaN;
    const frame = splitScalarFrame([n1, n2, 2], payload);
    const rgba = scalarToRgba(frame, COLORMAPS.viridis, { min: 0, max: 1 });
    // cell (1, 0) appears in the BOTTOM pixel row (y flipped): py = n2-1
    const o = ((n2 - 1) * n1 + 1) * 4;
    expect([rgba[o], rgba[o + 1], rgba[o + 2]]).toEqual([90, 90, 96]);
  });

  it("renders 128x128 frames well inside the 30 fps budget", () => {
    const payload = syntheticScalar(128, 128);
    const frame = splitScalarFrame([128, 128, 2], payload);
    const lut = COLORMAPS.viridis;
    let out: Uint8ClampedArray | undefined;
    const t0 = performance.now();
    const runs = 100;
    for (let k = 0; k < runs; k++) {
      out = scalarToRgba(frame, lut, { min: -1, max: 1 }, out);
    }
    const perFrame = (performance.now() - t0) / runs;
    // eslint-disable-next-line no-console
    console.log(`scalarToRgba 128x128: ${perFrame.toFixed(3)} ms/frame`);
    expect(perFrame).toBeLessThan(33);
  });
});

describe("arrow glyphs", () => {
  it("decimates to at most one glyph per 4x4 block and skips walls", () => {
    const n1 = 32;
    const n2 = 32;
    const payload = new Float32Array(n1 * n2 * 3);
    payload.fill(0.05, 0, n1 * n2); // u1
    payload.fill(1, 2 * n1 * n2); // validity
    payload[2 * n1 * n2 + 6 * n2 + 6] = 0; // one wall at a glyph site
    const vec = splitVectorFrame([n1, n2, 3], payload);
    const arrows = arrowGlyphs(vec, 4);
    expect(arrows.length).toBeLessThanOrEqual((n1 / 4) * (n2 / 4));
    expect(arrows.length).toBe((n1 / 4) * (n2 / 4) - 1);
    for (const a of arrows) {
      expect(a.x2).toBeGreaterThan(a.x1); // pointing along +u1
    }
  });
});
