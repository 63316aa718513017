/** Color lookup tables for scalar rendering. */

export type Lut = Uint8Array; // 256 * 3 rgb bytes

// viridis anchor points (r, g, b in 0..255), linearly interpolated
const VIRIDIS_ANCHORS: [number, number, number][] = [
  [68, 1, 84], [72, 40, 120], [62, 74, 137], [49, 104, 142], [38, 130, 142],
  [31, 158, 137], [53, 183, 121], [109, 205, 89], [180, 222, 44], [253, 231, 37],
];

// blue-white-red diverging map (vorticity and friends)
const DIVERGING_ANCHORS: [number, number, number][] = [
  [33, 102, 172], [103, 169, 207], [209, 229, 240], [247, 247, 247],
  [253, 219, 199], [239, 138, 98], [178, 24, 43],
];

function buildLut(anchors: [number, number, number][]): Lut {
  const lut = new Uint8Array(256 * 3);
  const segments = anchors.length - 1;
  for (let i = 0; i < 256; i++) {
    const t = (i / 255) * segments;
    const k = Math.min(Math.floor(t), segments - 1);
    const frac = t - k;
    for (let c = 0; c < 3; c++) {
      lut[i * 3 + c] = Math.round(anchors[k][c] * (1 - frac) + anchors[k + 1][c] * frac);
    }
  }
  return lut;
}

export const COLORMAPS: Record<string, Lut> = {
  viridis: buildLut(VIRIDIS_ANCHORS),
  diverging: buildLut(DIVERGING_ANCHORS),
};

export const WALL_RGB: [number, number, number] = [90, 90, 96];
