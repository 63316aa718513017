/** UI view state shared between the panels and the canvas. */

import { FieldName } from "./protocol.js";
import { Region } from "./regions.js";

export type RenderMode = "scalar" | "arrows";

export interface ViewState {
  field: FieldName;
  everyN: number;
  colormap: string;
  arrows: boolean;
  streamlines: boolean;
  contour: boolean;
  paintFlag: number;
  brushSize: number;
  paintFill: number;
  selection: Region | null;
  dragOffset: [number, number] | null;
  axisLockOn: boolean;
  fps: number;
  itPerSec: number;
  iteration: number;
  mass: number;
}

export function defaultViewState(): ViewState {
  return {
    field: "fill",
    everyN: 5,
    colormap: "viridis",
    arrows: false,
    streamlines: false,
    contour: true,
    paintFlag: 2, // wall
    brushSize: 1,
    paintFill: 0.5,
    selection: null,
    dragOffset: null,
    axisLockOn: false,
    fps: 0,
    itPerSec: 0,
    iteration: 0,
    mass: 0,
  };
}

/** Exponential moving average used by the fps/it-s readouts. */
export class Ema {
  private value: number | null = null;

  constructor(private alpha = 0.1) {}

  update(sample: number): number {
    this.value = this.value === null
      ? sample
      : this.value + this.alpha * (sample - this.value);
    return this.value;
  }

  get current(): number {
    return this.value ?? 0;
  }
}
