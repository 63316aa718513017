"""Synchronous scripted client speaking the wire protocol over TCP or WebSocket.

Useful for driving a server from scripts and tests without any UI: connect,
handshake, send commands (the sequence number of each is returned), and poll
received messages. Subscription ids are predictable: the server assigns them
per session, sequentially from 1, in the order SUBSCRIBE commands are accepted.
"""

from __future__ import annotations

import socket
import time

import numpy as np

from . import protocol as proto
from . import ws
from .errors import LbsteerError, ProtocolError


class SteerClient:
    def __init__(self, host: str, port: int, transport: str = "tcp",
                 timeout: float = 10.0):
        self.transport = transport
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        if transport == "ws":
            ws.client_handshake(self.sock, host, port)
        elif transport != "tcp":
            raise ValueError(f"unknown transport {transport!r}")
        self._decoder = proto.StreamDecoder()
        self._inbox: list = []
        self.seq = 0
        self._next_sub = 1

    # ----------------------------------------------------------------- sending

    def send(self, msg) -> None:
        data = proto.encode(msg)
        if self.transport == "ws":
            ws.send_frame(self.sock, data, mask=True)
        else:
            self.sock.sendall(data)

    def _command(self, msg) -> int:
        self.seq += 1
        self.send(msg)
        return self.seq

    def hello(self) -> None:
        self.send(proto.Hello(proto.PROTOCOL_VERSION))
        reply = self.recv()
        if isinstance(reply, proto.ErrorMsg):
            raise LbsteerError(f"server refused handshake: {reply.text}")
        if not isinstance(reply, proto.Hello):
            raise ProtocolError(f"expected HELLO reply, got {type(reply).__name__}")

    def send_geometry(self, dims, flags, fill) -> int:
        dims3 = tuple(dims) + (1,) * (3 - len(dims))
        g = proto.Geometry(dims3, bytes(np.asarray(flags, dtype=np.uint8).ravel()),
                           np.asarray(fill, dtype=np.float32).ravel())
        return self._command(g)

    def reset(self, dims, flags, fill) -> int:
        dims3 = tuple(dims) + (1,) * (3 - len(dims))
        g = proto.Geometry(dims3, bytes(np.asarray(flags, dtype=np.uint8).ravel()),
                           np.asarray(fill, dtype=np.float32).ravel())
        return self._command(proto.Reset(g))

    def start(self) -> int:
        return self._command(proto.Start())

    def pause(self) -> int:
        return self._command(proto.Pause())

    def resume(self) -> int:
        return self._command(proto.Resume())

    def set_cells(self, indices, flags, fills=None) -> int:
        indices = np.asarray(indices, dtype=np.uint64).ravel()
        flags = np.broadcast_to(np.asarray(flags, dtype=np.uint8), indices.shape)
        if fills is None:
            fills = np.full(indices.shape, np.nan, dtype=np.float32)
        else:
            fills = np.broadcast_to(np.asarray(fills, dtype=np.float32), indices.shape)
        return self._command(proto.SetCells(indices, flags, fills))

    def move_region(self, lo, hi, offset) -> int:
        lo3 = tuple(lo) + (0,) * (3 - len(lo))
        hi3 = tuple(hi) + (1,) * (3 - len(hi))
        off3 = tuple(offset) + (0,) * (3 - len(offset))
        return self._command(proto.MoveRegion(lo3, hi3, off3))

    def set_param(self, name: str, values) -> int:
        pid = proto.PARAM_IDS[name]
        return self._command(proto.SetParam(pid, np.atleast_1d(np.asarray(values, dtype=np.float64))))

    def subscribe(self, field: str, axis: int = 2, index: int = 0, every_n: int = 1) -> tuple[int, int]:
        """Returns (seq, predicted subscription id)."""
        fid = proto.FIELD_IDS[field]
        seq = self._command(proto.Subscribe(fid, axis, index, every_n))
        sub_id = self._next_sub
        self._next_sub += 1
        return seq, sub_id

    def unsubscribe(self, sub_id: int) -> int:
        return self._command(proto.Unsubscribe(sub_id))

    def bye(self) -> None:
        try:
            self.send(proto.Bye())
        except OSError:
            pass

    # --------------------------------------------------------------- receiving

    def recv(self, timeout: float = 10.0):
        """Next message, or None on timeout."""
        if self._inbox:
            return self._inbox.pop(0)
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            self.sock.settimeout(max(0.05, deadline - time.monotonic()))
            try:
                if self.transport == "ws":
                    data = ws.recv_message(self.sock, server_side=False)
                    if data is None:
                        return None
                else:
                    data = self.sock.recv(262144)
                    if not data:
                        return None
            except socket.timeout:
                break
            msgs, unknowns = self._decoder.feed(data)
            self._inbox.extend(msgs)
            self._inbox.extend(unknowns)
            if self._inbox:
                return self._inbox.pop(0)
        return None

    def wait_for(self, predicate, timeout: float = 10.0):
        """Next message satisfying `predicate`; earlier unmatched messages stay
        queued in arrival order for later calls."""
        skipped: list = []
        found = None
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            msg = self.recv(timeout=deadline - time.monotonic())
            if msg is None:
                break
            if predicate(msg):
                found = msg
                break
            skipped.append(msg)
        self._inbox[:0] = skipped
        return found

    def wait_ack(self, seq: int, timeout: float = 10.0):
        """Waits for the ACK of `seq`; raises on a correlated ERROR."""
        def match(msg):
            if isinstance(msg, proto.Ack) and msg.seq == seq:
                return True
            if isinstance(msg, proto.ErrorMsg) and msg.text.startswith(f"seq={seq}:"):
                raise LbsteerError(f"command {seq} rejected: {msg.text}")
            return False
        got = self.wait_for(match, timeout)
        if got is None:
            raise LbsteerError(f"timed out waiting for ack of command {seq}")
        return got

    def next_frame(self, sub_id: int | None = None, timeout: float = 10.0):
        return self.wait_for(
            lambda m: isinstance(m, proto.Frame) and (sub_id is None or m.sub_id == sub_id),
            timeout)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass
