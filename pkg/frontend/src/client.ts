/**
 * Steering client over any byte transport. In the browser the transport is a
 * binary WebSocket (one wire message per frame); tests feed fake sockets or a
 * raw TCP stream. Decoding happens in the receive handler and only the newest
 * frame per subscription is kept, so rendering never blocks the socket.
 *
 * Client-side validation mirrors the server's preconditions (tau > 0.5,
 * speeds < 0.3, cadence >= 1) so the UI cannot emit a message the server
 * would reject on principle.
 */

import {
  FIELD_IDS, FieldName, Msg, PARAM_IDS, PROTOCOL_VERSION, StreamDecoder,
  encode,
} from "./protocol.js";

export const MAX_SPEED = 0.3;

export interface SocketLike {
  send(data: Uint8Array): void;
  close(): void;
  onmessage: ((data: Uint8Array) => void) | null;
  onclose: (() => void) | null;
  onopen: (() => void) | null;
}

/** Browser WebSocket adapter. */
export class WsSocket implements SocketLike {
  onmessage: ((data: Uint8Array) => void) | null = null;
  onclose: (() => void) | null = null;
  onopen: (() => void) | null = null;
  private ws: WebSocket;

  constructor(url: string) {
    this.ws = new WebSocket(url);
    this.ws.binaryType = "arraybuffer";
    this.ws.onopen = () => this.onopen?.();
    this.ws.onclose = () => this.onclose?.();
    this.ws.onmessage = (ev) => this.onmessage?.(new Uint8Array(ev.data as ArrayBuffer));
  }

  send(data: Uint8Array): void {
    this.ws.send(data);
  }

  close(): void {
    this.ws.close();
  }
}

export class ValidationError extends Error {}

export interface PendingCommand {
  seq: number;
  kind: string;
  rollback?: () => void;
}

export interface LatestFrame {
  iteration: number;
  dims: [number, number, number];
  payload: Float32Array;
}

interface QueuedEdit {
  message: Msg;
  kind: string;
  queuedAt: number;
}

export interface ClientEvents {
  onFrame?: (subId: number, frame: LatestFrame) => void;
  onStats?: (iteration: number, itPerSec: number, mass: number) => void;
  onAck?: (seq: number, kind: string) => void;
  onCommandError?: (seq: number, code: number, text: string) => void;
  onServerError?: (code: number, text: string) => void;
  onStateChange?: (state: ConnectionState) => void;
  onEditsDiscarded?: (count: number) => void;
  now?: () => number; // injectable clock for tests
}

export type ConnectionState = "disconnected" | "connecting" | "ready";

const ERR_SEQ = /^seq=(\d+): (.*)$/s;

export class SteerClient {
  state: ConnectionState = "disconnected";
  seq = 0;
  nextSubId = 1;
  pending = new Map<number, PendingCommand>();
  latest = new Map<number, LatestFrame>();
  queuedEdits: QueuedEdit[] = [];
  queueTimeoutMs = 10_000;

  private socket: SocketLike | null = null;
  private decoder = new StreamDecoder();
  private readonly now: () => number;

  constructor(private makeSocket: () => SocketLike,
              private events: ClientEvents = {}) {
    this.now = events.now ?? (() => Date.now());
  }

  connect(): void {
    if (this.state !== "disconnected") return;
    this.setState("connecting");
    this.decoder = new StreamDecoder();
    const socket = this.makeSocket();
    this.socket = socket;
    socket.onopen = () => {
      socket.send(encode({ type: "hello", version: PROTOCOL_VERSION }));
    };
    socket.onmessage = (data) => this.handleBytes(data);
    socket.onclose = () => {
      this.socket = null;
      this.pending.clear();
      this.setState("disconnected");
    };
  }

  disconnect(): void {
    this.socket?.close();
  }

  private setState(state: ConnectionState): void {
    this.state = state;
    this.events.onStateChange?.(state);
  }

  private handleBytes(data: Uint8Array): void {
    for (const msg of this.decoder.feed(data)) {
      this.handle(msg);
    }
  }

  private handle(msg: Msg): void {
    switch (msg.type) {
      case "hello":
        this.setState("ready");
        this.flushQueuedEdits();
        break;
      case "frame": {
        const frame: LatestFrame = {
          iteration: msg.iteration, dims: msg.dims, payload: msg.payload,
        };
        this.latest.set(msg.subId, frame); // newest frame wins
        this.events.onFrame?.(msg.subId, frame);
        break;
      }
      case "stats":
        this.events.onStats?.(msg.iteration, msg.itPerSec, msg.mass);
        break;
      case "ack": {
        const cmd = this.pending.get(msg.seq);
        this.pending.delete(msg.seq);
        this.events.onAck?.(msg.seq, cmd?.kind ?? "");
        break;
      }
      case "error": {
        const match = ERR_SEQ.exec(msg.text);
        if (match) {
          const seq = Number(match[1]);
          const cmd = this.pending.get(seq);
          this.pending.delete(seq);
          cmd?.rollback?.();
          this.events.onCommandError?.(seq, msg.code, match[2]);
        } else {
          this.events.onServerError?.(msg.code, msg.text);
        }
        break;
      }
      default:
        break; // geometry echoes etc. are not expected client-side
    }
  }

  // ------------------------------------------------------------------ sending

  private sendCommand(msg: Msg, kind: string, rollback?: () => void): number {
    if (this.state !== "ready" || !this.socket) {
      throw new ValidationError("not connected");
    }
    this.seq += 1;
    this.pending.set(this.seq, { seq: this.seq, kind, rollback });
    this.socket.send(encode(msg));
    return this.seq;
  }

  /** Edits made while disconnected are queued and flushed on reconnect, or
   * discarded (with an event) once they outlive queueTimeoutMs. */
  private sendOrQueueEdit(msg: Msg, kind: string, rollback?: () => void): number | null {
    this.expireQueuedEdits();
    if (this.state === "ready") {
      return this.sendCommand(msg, kind, rollback);
    }
    rollback?.(); // no optimistic overlay without a live session
    this.queuedEdits.push({ message: msg, kind, queuedAt: this.now() });
    return null;
  }

  private expireQueuedEdits(): void {
    const cutoff = this.now() - this.queueTimeoutMs;
    const expired = this.queuedEdits.filter((e) => e.queuedAt < cutoff).length;
    if (expired > 0) {
      this.queuedEdits = this.queuedEdits.filter((e) => e.queuedAt >= cutoff);
      this.events.onEditsDiscarded?.(expired);
    }
  }

  private flushQueuedEdits(): void {
    this.expireQueuedEdits();
    const edits = this.queuedEdits;
    this.queuedEdits = [];
    for (const edit of edits) {
      this.sendCommand(edit.message, edit.kind);
    }
  }

  start(): number { return this.sendCommand({ type: "start" }, "start"); }
  pause(): number { return this.sendCommand({ type: "pause" }, "pause"); }
  resume(): number { return this.sendCommand({ type: "resume" }, "resume"); }

  sendGeometry(dims: [number, number, number], flags: Uint8Array,
               fill: Float32Array): number {
    return this.sendCommand({ type: "geometry", dims, flags, fill }, "geometry");
  }

  setCells(indices: number[], flag: number, fill: number,
           rollback?: () => void): number | null {
    if (indices.length === 0) return null;
    if (flag < 0 || flag > 5) throw new ValidationError(`unknown flag ${flag}`);
    const msg: Msg = {
      type: "set_cells",
      indices: Float64Array.from(indices),
      flags: new Uint8Array(indices.length).fill(flag),
      fills: new Float32Array(indices.length).fill(fill),
    };
    return this.sendOrQueueEdit(msg, "set_cells", rollback);
  }

  moveRegion(lo: [number, number, number], hi: [number, number, number],
             offset: [number, number, number]): number | null {
    for (let a = 0; a < 3; a++) {
      if (lo[a] >= hi[a]) throw new ValidationError("empty region");
    }
    return this.sendOrQueueEdit({ type: "move_region", lo, hi, offset }, "move_region");
  }

  setParam(name: keyof typeof PARAM_IDS, values: number[]): number {
    if (name === "tau") {
      if (values.length !== 1 || !(values[0] > 0.5)) {
        throw new ValidationError("tau must be a single value > 0.5");
      }
    } else if (name === "inlet_velocity" || name === "wall_velocity") {
      const speed = Math.hypot(...values);
      if (!(speed < MAX_SPEED)) {
        throw new ValidationError(`|${name}| must be < ${MAX_SPEED}`);
      }
    } else if (!values.every(Number.isFinite)) {
      throw new ValidationError(`${name} must be finite`);
    }
    return this.sendCommand(
      { type: "set_param", param: PARAM_IDS[name], values: Float64Array.from(values) },
      `set_param:${name}`);
  }

  /** Returns [seq, predicted subscription id] (server assigns ids 1, 2, ...). */
  subscribe(field: FieldName, everyN: number, axis = 2, index = 0): [number, number] {
    if (!(everyN >= 1)) throw new ValidationError("cadence must be >= 1");
    const seq = this.sendCommand(
      { type: "subscribe", field: FIELD_IDS[field], axis, index, everyN },
      `subscribe:${field}`);
    return [seq, this.nextSubId++];
  }

  unsubscribe(subId: number): number {
    return this.sendCommand({ type: "unsubscribe", subId }, "unsubscribe");
  }

  bye(): void {
    if (this.socket && this.state === "ready") {
      this.socket.send(encode({ type: "bye" }));
    }
    this.disconnect();
  }
}

/** Optimistic paint overlay: cells tinted locally until the server confirms. */
export class EditOverlay {
  private bySeq = new Map<number, number[]>();
  private counts = new Map<number, number>();

  addPending(seq: number, cells: number[]): void {
    this.bySeq.set(seq, cells);
    for (const c of cells) this.counts.set(c, (this.counts.get(c) ?? 0) + 1);
  }

  /** Confirmed or rolled back: either way the overlay stops tinting. */
  resolve(seq: number): number[] {
    const cells = this.bySeq.get(seq) ?? [];
    this.bySeq.delete(seq);
    for (const c of cells) {
      const n = (this.counts.get(c) ?? 1) - 1;
      if (n <= 0) this.counts.delete(c);
      else this.counts.set(c, n);
    }
    return cells;
  }

  has(cell: number): boolean {
    return this.counts.has(cell);
  }

  get size(): number {
    return this.counts.size;
  }

  cells(): number[] {
    return [...this.counts.keys()];
  }
}
