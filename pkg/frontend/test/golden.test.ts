/**
 * Cross-codec golden test: decode the primary-generated vector file and
 * compare every message against the expected JSON values.
 */

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";
import { describe, expect, it } from "vitest";

import { Msg, StreamDecoder } from "../src/protocol.js";

const root = join(dirname(fileURLToPath(import.meta.url)), "..", "..");
const vectorsBin = readFileSync(join(root, "test-vectors", "vectors.bin"));
const vectorsJson = JSON.parse(
  readFileSync(join(root, "test-vectors", "vectors.json"), "utf-8"));

type JsonValue = number | string | boolean | JsonValue[] | { [k: string]: JsonValue };

function toJsonValue(msg: Msg): JsonValue {
  const num = (v: number): number | string => (Number.isNaN(v) ? "NaN" : v);
  const nums = (a: ArrayLike<number>): (number | string)[] => Array.from(a, num);
  switch (msg.type) {
    case "hello":
      return { type: "hello", version: msg.version };
    case "geometry":
    case "reset":
      return {
        type: msg.type,
        dims: [...msg.dims],
        flags: Array.from(msg.flags),
        fill: nums(msg.fill),
      };
    case "start":
    case "pause":
    case "resume":
    case "bye":
      return { type: msg.type };
    case "set_cells":
      return {
        type: "set_cells",
        indices: Array.from(msg.indices),
        flags: Array.from(msg.flags),
        fills: nums(msg.fills),
      };
    case "move_region":
      return { type: "move_region", lo: [...msg.lo], hi: [...msg.hi],
               offset: [...msg.offset] };
    case "set_param":
      return { type: "set_param", param: msg.param, values: Array.from(msg.values) };
    case "subscribe":
      return { type: "subscribe", field: msg.field, axis: msg.axis,
               index: msg.index, everyN: msg.everyN };
    case "unsubscribe":
      return { type: "unsubscribe", subId: msg.subId };
    case "frame":
      return { type: "frame", subId: msg.subId, iteration: msg.iteration,
               dims: [...msg.dims], payload: nums(msg.payload) };
    case "stats":
      return { type: "stats", iteration: msg.iteration, itPerSec: msg.itPerSec,
               mass: msg.mass };
    case "ack":
      return { type: "ack", seq: msg.seq };
    case "error":
      return { type: "error", code: msg.code, text: msg.text };
    case "unknown":
      return { type: "unknown", msgType: msg.msgType };
  }
}

describe("golden vectors", () => {
  it("decodes the shared binary to exactly the expected values", () => {
    const decoder = new StreamDecoder();
    const msgs = decoder.feed(new Uint8Array(vectorsBin));
    decoder.finish();
    expect(msgs.length).toBe(vectorsJson.length);
    msgs.forEach((msg, k) => {
      expect(toJsonValue(msg)).toEqual(vectorsJson[k]);
    });
  });

  it("decodes identically under byte-at-a-time chunking", () => {
    const whole = new StreamDecoder().feed(new Uint8Array(vectorsBin));
    const decoder = new StreamDecoder();
    const trickled: Msg[] = [];
    for (let k = 0; k < vectorsBin.length; k++) {
      trickled.push(...decoder.feed(new Uint8Array(vectorsBin.subarray(k, k + 1))));
    }
    decoder.finish();
    expect(trickled.map(toJsonValue)).toEqual(whole.map(toJsonValue));
  });
});
