/**
 * Binary wire codec, byte-compatible with the server (see ../PROTOCOL.md).
 * Everything is little-endian and packed; the envelope is
 * u32 length (= 2 + payload), u16 type, payload.
 */

export const PROTOCOL_VERSION = 1;
export const MAX_LENGTH = 64 * 1024 * 1024;

export const enum MsgType {
  Hello = 1,
  Geometry = 2,
  Start = 3,
  Pause = 4,
  Resume = 5,
  Reset = 6,
  SetCells = 7,
  MoveRegion = 8,
  SetParam = 9,
  Subscribe = 10,
  Unsubscribe = 11,
  Frame = 12,
  Stats = 13,
  Ack = 14,
  Error = 15,
  Bye = 16,
}

export const PARAM_IDS = {
  tau: 1,
  gravity: 2,
  inlet_velocity: 3,
  wall_velocity: 4,
} as const;

export const FIELD_IDS = {
  density: 1,
  pressure: 2,
  speed: 3,
  velocity_xy: 4,
  fill: 5,
  vorticity: 6,
  interface: 7,
  streamlines: 8,
} as const;

export type FieldName = keyof typeof FIELD_IDS;

export const FLAG = {
  fluid: 0,
  interface: 1,
  wall: 2,
  gas: 3,
  inlet: 4,
  outlet: 5,
} as const;

export interface HelloMsg { type: "hello"; version: number }
export interface GeometryMsg {
  type: "geometry";
  dims: [number, number, number];
  flags: Uint8Array;
  fill: Float32Array;
}
export interface StartMsg { type: "start" }
export interface PauseMsg { type: "pause" }
export interface ResumeMsg { type: "resume" }
export interface ResetMsg {
  type: "reset";
  dims: [number, number, number];
  flags: Uint8Array;
  fill: Float32Array;
}
export interface SetCellsMsg {
  type: "set_cells";
  indices: Float64Array; // exact for indices < 2^53
  flags: Uint8Array;
  fills: Float32Array;
}
export interface MoveRegionMsg {
  type: "move_region";
  lo: [number, number, number];
  hi: [number, number, number];
  offset: [number, number, number];
}
export interface SetParamMsg { type: "set_param"; param: number; values: Float64Array }
export interface SubscribeMsg {
  type: "subscribe";
  field: number;
  axis: number;
  index: number;
  everyN: number;
}
export interface UnsubscribeMsg { type: "unsubscribe"; subId: number }
export interface FrameMsg {
  type: "frame";
  subId: number;
  iteration: number;
  dims: [number, number, number];
  payload: Float32Array;
}
export interface StatsMsg { type: "stats"; iteration: number; itPerSec: number; mass: number }
export interface AckMsg { type: "ack"; seq: number }
export interface ErrorMsg { type: "error"; code: number; text: string }
export interface ByeMsg { type: "bye" }
export interface UnknownMsg { type: "unknown"; msgType: number; payload: Uint8Array }

export type Msg =
  | HelloMsg | GeometryMsg | StartMsg | PauseMsg | ResumeMsg | ResetMsg
  | SetCellsMsg | MoveRegionMsg | SetParamMsg | SubscribeMsg | UnsubscribeMsg
  | FrameMsg | StatsMsg | AckMsg | ErrorMsg | ByeMsg | UnknownMsg;

export class ProtocolError extends Error {
  constructor(message: string, readonly offset = 0) {
    super(`${message} (at byte ${offset})`);
  }
}

const textEncoder = new TextEncoder();
const textDecoder = new TextDecoder("utf-8", { fatal: true });

class Writer {
  private buf: Uint8Array;
  private view: DataView;
  private pos = 0;

  constructor(capacity = 64) {
    this.buf = new Uint8Array(capacity);
    this.view = new DataView(this.buf.buffer);
  }

  private ensure(extra: number): void {
    if (this.pos + extra <= this.buf.length) return;
    const grown = new Uint8Array(Math.max(this.buf.length * 2, this.pos + extra));
    grown.set(this.buf);
    this.buf = grown;
    this.view = new DataView(grown.buffer);
  }

  u8(v: number) { this.ensure(1); this.view.setUint8(this.pos, v); this.pos += 1; }
  u16(v: number) { this.ensure(2); this.view.setUint16(this.pos, v, true); this.pos += 2; }
  u32(v: number) { this.ensure(4); this.view.setUint32(this.pos, v >>> 0, true); this.pos += 4; }
  i32(v: number) { this.ensure(4); this.view.setInt32(this.pos, v, true); this.pos += 4; }
  u64(v: number) {
    this.ensure(8);
    this.view.setBigUint64(this.pos, BigInt(Math.round(v)), true);
    this.pos += 8;
  }
  f32(v: number) { this.ensure(4); this.view.setFloat32(this.pos, v, true); this.pos += 4; }
  f64(v: number) { this.ensure(8); this.view.setFloat64(this.pos, v, true); this.pos += 8; }
  bytes(v: Uint8Array) { this.ensure(v.length); this.buf.set(v, this.pos); this.pos += v.length; }
  f32array(v: Float32Array) {
    this.ensure(v.length * 4);
    for (let i = 0; i < v.length; i++) this.view.setFloat32(this.pos + 4 * i, v[i], true);
    this.pos += v.length * 4;
  }
  take(): Uint8Array { return this.buf.subarray(0, this.pos); }
}

function writeGeometryPayload(w: Writer, msg: GeometryMsg | ResetMsg): void {
  const n = msg.dims[0] * msg.dims[1] * msg.dims[2];
  if (msg.flags.length !== n || msg.fill.length !== n) {
    throw new ProtocolError(`geometry arrays must carry ${n} cells`);
  }
  w.u32(msg.dims[0]);
  w.u32(msg.dims[1]);
  w.u32(msg.dims[2]);
  w.bytes(msg.flags);
  w.f32array(msg.fill);
}

export function encode(msg: Msg): Uint8Array {
  const w = new Writer();
  w.u32(0); // length, patched below
  let type: number;
  switch (msg.type) {
    case "hello":
      type = MsgType.Hello;
      w.u16(type);
      w.u16(msg.version);
      break;
    case "geometry":
      type = MsgType.Geometry;
      w.u16(type);
      writeGeometryPayload(w, msg);
      break;
    case "start": w.u16(type = MsgType.Start); break;
    case "pause": w.u16(type = MsgType.Pause); break;
    case "resume": w.u16(type = MsgType.Resume); break;
    case "reset":
      type = MsgType.Reset;
      w.u16(type);
      writeGeometryPayload(w, msg);
      break;
    case "set_cells": {
      type = MsgType.SetCells;
      w.u16(type);
      const n = msg.indices.length;
      if (msg.flags.length !== n || msg.fills.length !== n) {
        throw new ProtocolError("set_cells arrays must have equal length");
      }
      w.u32(n);
      for (let i = 0; i < n; i++) {
        w.u64(msg.indices[i]);
        w.u8(msg.flags[i]);
        w.f32(msg.fills[i]);
      }
      break;
    }
    case "move_region":
      type = MsgType.MoveRegion;
      w.u16(type);
      for (const v of msg.lo) w.u32(v);
      for (const v of msg.hi) w.u32(v);
      for (const v of msg.offset) w.i32(v);
      break;
    case "set_param":
      type = MsgType.SetParam;
      w.u16(type);
      w.u16(msg.param);
      for (const v of msg.values) w.f64(v);
      break;
    case "subscribe":
      type = MsgType.Subscribe;
      w.u16(type);
      w.u16(msg.field);
      w.u8(msg.axis);
      w.u32(msg.index);
      w.u32(msg.everyN);
      break;
    case "unsubscribe":
      type = MsgType.Unsubscribe;
      w.u16(type);
      w.u32(msg.subId);
      break;
    case "frame":
      type = MsgType.Frame;
      w.u16(type);
      w.u32(msg.subId);
      w.u64(msg.iteration);
      for (const v of msg.dims) w.u32(v);
      w.f32array(msg.payload);
      break;
    case "stats":
      type = MsgType.Stats;
      w.u16(type);
      w.u64(msg.iteration);
      w.f64(msg.itPerSec);
      w.f64(msg.mass);
      break;
    case "ack":
      type = MsgType.Ack;
      w.u16(type);
      w.u64(msg.seq);
      break;
    case "error":
      type = MsgType.Error;
      w.u16(type);
      w.u16(msg.code);
      w.bytes(textEncoder.encode(msg.text));
      break;
    case "bye": w.u16(type = MsgType.Bye); break;
    case "unknown":
      type = msg.msgType;
      w.u16(type);
      w.bytes(msg.payload);
      break;
  }
  const out = w.take();
  const length = out.length - 4;
  if (length > MAX_LENGTH) {
    throw new ProtocolError(`message length ${length} exceeds the ${MAX_LENGTH} byte cap`);
  }
  new DataView(out.buffer, out.byteOffset).setUint32(0, length, true);
  return out.slice(); // detach from the growable buffer
}

class Reader {
  readonly view: DataView;
  pos = 0;

  constructor(readonly bytes: Uint8Array, readonly base: number) {
    this.view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  }

  private need(n: number): void {
    if (this.pos + n > this.bytes.length) {
      throw new ProtocolError("payload truncated", this.base + this.pos);
    }
  }

  u8(): number { this.need(1); return this.view.getUint8(this.pos++); }
  u16(): number { this.need(2); const v = this.view.getUint16(this.pos, true); this.pos += 2; return v; }
  u32(): number { this.need(4); const v = this.view.getUint32(this.pos, true); this.pos += 4; return v; }
  i32(): number { this.need(4); const v = this.view.getInt32(this.pos, true); this.pos += 4; return v; }
  u64(): number {
    this.need(8);
    const v = this.view.getBigUint64(this.pos, true);
    this.pos += 8;
    if (v > BigInt(Number.MAX_SAFE_INTEGER)) {
      throw new ProtocolError("u64 value exceeds 2^53", this.base + this.pos - 8);
    }
    return Number(v);
  }
  f32(): number { this.need(4); const v = this.view.getFloat32(this.pos, true); this.pos += 4; return v; }
  f64(): number { this.need(8); const v = this.view.getFloat64(this.pos, true); this.pos += 8; return v; }
  raw(n: number): Uint8Array { this.need(n); const v = this.bytes.slice(this.pos, this.pos + n); this.pos += n; return v; }
  f32array(count: number): Float32Array {
    this.need(count * 4);
    const out = new Float32Array(count);
    for (let i = 0; i < count; i++) out[i] = this.view.getFloat32(this.pos + 4 * i, true);
    this.pos += count * 4;
    return out;
  }
  remaining(): number { return this.bytes.length - this.pos; }
}

function readGeometry(r: Reader): { dims: [number, number, number]; flags: Uint8Array; fill: Float32Array } {
  const dims: [number, number, number] = [r.u32(), r.u32(), r.u32()];
  const n = dims[0] * dims[1] * dims[2];
  if (r.remaining() !== n + 4 * n) {
    throw new ProtocolError(
      `geometry payload carries ${r.remaining()} bytes, dims need ${5 * n}`, r.base + r.pos);
  }
  const flags = r.raw(n);
  const fill = r.f32array(n);
  return { dims, flags, fill };
}

export function decodePayload(msgType: number, payload: Uint8Array, base = 0): Msg {
  const r = new Reader(payload, base);
  switch (msgType) {
    case MsgType.Hello: {
      const version = r.u16();
      expectEnd(r);
      return { type: "hello", version };
    }
    case MsgType.Geometry: return { type: "geometry", ...readGeometry(r) };
    case MsgType.Start: return { type: "start" };
    case MsgType.Pause: return { type: "pause" };
    case MsgType.Resume: return { type: "resume" };
    case MsgType.Reset: return { type: "reset", ...readGeometry(r) };
    case MsgType.SetCells: {
      const count = r.u32();
      if (r.remaining() !== count * 13) {
        throw new ProtocolError(`set_cells count ${count} needs ${count * 13} payload bytes`,
          base + r.pos);
      }
      const indices = new Float64Array(count);
      const flags = new Uint8Array(count);
      const fills = new Float32Array(count);
      for (let i = 0; i < count; i++) {
        indices[i] = r.u64();
        flags[i] = r.u8();
        fills[i] = r.f32();
      }
      return { type: "set_cells", indices, flags, fills };
    }
    case MsgType.MoveRegion: {
      const lo: [number, number, number] = [r.u32(), r.u32(), r.u32()];
      const hi: [number, number, number] = [r.u32(), r.u32(), r.u32()];
      const offset: [number, number, number] = [r.i32(), r.i32(), r.i32()];
      expectEnd(r);
      return { type: "move_region", lo, hi, offset };
    }
    case MsgType.SetParam: {
      const param = r.u16();
      const k = r.remaining() / 8;
      if (!Number.isInteger(k) || k < 1) {
        throw new ProtocolError("set_param payload must be 2 + 8k bytes (k >= 1)", base);
      }
      const values = new Float64Array(k);
      for (let i = 0; i < k; i++) values[i] = r.f64();
      return { type: "set_param", param, values };
    }
    case MsgType.Subscribe: {
      const msg: SubscribeMsg = {
        type: "subscribe", field: r.u16(), axis: r.u8(), index: r.u32(), everyN: r.u32(),
      };
      expectEnd(r);
      return msg;
    }
    case MsgType.Unsubscribe: {
      const subId = r.u32();
      expectEnd(r);
      return { type: "unsubscribe", subId };
    }
    case MsgType.Frame: {
      const subId = r.u32();
      const iteration = r.u64();
      const dims: [number, number, number] = [r.u32(), r.u32(), r.u32()];
      const rest = r.remaining();
      if (rest % 4 !== 0) throw new ProtocolError("frame payload not f32-aligned", base + r.pos);
      const payload = r.f32array(rest / 4);
      return { type: "frame", subId, iteration, dims, payload };
    }
    case MsgType.Stats: {
      const msg: StatsMsg = { type: "stats", iteration: r.u64(), itPerSec: r.f64(), mass: r.f64() };
      expectEnd(r);
      return msg;
    }
    case MsgType.Ack: {
      const seq = r.u64();
      expectEnd(r);
      return { type: "ack", seq };
    }
    case MsgType.Error: {
      const code = r.u16();
      let text: string;
      try {
        text = textDecoder.decode(r.raw(r.remaining()));
      } catch {
        throw new ProtocolError("error text is not valid utf-8", base + 2);
      }
      return { type: "error", code, text };
    }
    case MsgType.Bye: return { type: "bye" };
    default:
      return { type: "unknown", msgType, payload: payload.slice() };
  }
}

function expectEnd(r: Reader): void {
  if (r.remaining() !== 0) {
    throw new ProtocolError(`${r.remaining()} trailing payload bytes`, r.base + r.pos);
  }
}

/** Incremental framing decoder; output is independent of chunk boundaries. */
export class StreamDecoder {
  private buf = new Uint8Array(0);
  private offset = 0;

  feed(data: Uint8Array): Msg[] {
    if (this.buf.length === 0) {
      this.buf = data.slice();
    } else {
      const grown = new Uint8Array(this.buf.length + data.length);
      grown.set(this.buf);
      grown.set(data, this.buf.length);
      this.buf = grown;
    }
    const out: Msg[] = [];
    for (;;) {
      if (this.buf.length < 4) break;
      const view = new DataView(this.buf.buffer, this.buf.byteOffset);
      const length = view.getUint32(0, true);
      if (length > MAX_LENGTH) {
        throw new ProtocolError(`declared length ${length} exceeds the ${MAX_LENGTH} byte cap`,
          this.offset);
      }
      if (length < 2) {
        throw new ProtocolError(`declared length ${length} below the 2 byte minimum`, this.offset);
      }
      if (this.buf.length < 4 + length) break;
      const msgType = view.getUint16(4, true);
      const payload = this.buf.subarray(6, 4 + length);
      out.push(decodePayload(msgType, payload, this.offset + 6));
      this.buf = this.buf.slice(4 + length);
      this.offset += 4 + length;
    }
    return out;
  }

  finish(): void {
    if (this.buf.length > 0) {
      throw new ProtocolError(`stream truncated with ${this.buf.length} buffered bytes`,
        this.offset);
    }
  }

  get pendingBytes(): number {
    return this.buf.length;
  }
}

/** Flat wire index of cell (x, y[, z]) for grid dims (nx, ny[, nz]). */
export function cellIndex(x: number, y: number, z: number, dims: [number, number, number]): number {
  return (x * dims[1] + y) * dims[2] + z;
}
