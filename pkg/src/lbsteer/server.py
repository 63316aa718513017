"""Network front door: TCP and WebSocket sessions feeding the steering engine.

Each connection gets a reader thread (decode, translate, enqueue) and a writer
thread draining a bounded outbox. Frames are supersedable: when a session's
queue holds `frame_depth` frames for a subscription, the oldest one is dropped.
ACK/ERROR/STATS are never dropped. A stalled or crashing client affects only
its own session; the engine thread never blocks on a socket.
"""

from __future__ import annotations

import logging
import socket
import struct
import threading
from collections import deque

import numpy as np

from . import protocol as proto
from . import ws
from .engine import (CmdConfigure, CmdControl, CmdMoveRegion, CmdReset,
                     CmdSessionClosed, CmdSetCells, CmdSetParam, CmdSubscribe,
                     CmdUnsubscribe, SteeringEngine)
from .errors import ProtocolError

log = logging.getLogger("lbsteer.server")

_COMMAND_TYPES = (proto.Geometry, proto.Start, proto.Pause, proto.Resume, proto.Reset,
                  proto.SetCells, proto.MoveRegion, proto.SetParam, proto.Subscribe,
                  proto.Unsubscribe)

_session_counter = [0]
_session_lock = threading.Lock()


def _next_session_id() -> int:
    with _session_lock:
        _session_counter[0] += 1
        return _session_counter[0]


class _Outbox:
    """Bounded per-session send queue with supersedable frames."""

    def __init__(self, frame_depth: int = 32):
        self.frame_depth = frame_depth
        self._items: deque = deque()  # (sub_id | None, bytes)
        self._frame_counts: dict[int, int] = {}
        self._cv = threading.Condition()
        self._closed = False

    def push_control(self, data: bytes) -> None:
        with self._cv:
            if self._closed:
                return
            self._items.append((None, data))
            self._cv.notify()

    def push_frame(self, sub_id: int, data: bytes) -> None:
        with self._cv:
            if self._closed:
                return
            if self._frame_counts.get(sub_id, 0) >= self.frame_depth:
                for k, (sid, _) in enumerate(self._items):
                    if sid == sub_id:  # drop the oldest unsent frame of this sub
                        del self._items[k]
                        self._frame_counts[sub_id] -= 1
                        break
            self._items.append((sub_id, data))
            self._frame_counts[sub_id] = self._frame_counts.get(sub_id, 0) + 1
            self._cv.notify()

    def pop(self, timeout: float = 0.2) -> bytes | None:
        with self._cv:
            if not self._items:
                self._cv.wait(timeout)
            if not self._items:
                return None
            sub_id, data = self._items.popleft()
            if sub_id is not None:
                self._frame_counts[sub_id] -= 1
            return data

    def close(self) -> None:
        with self._cv:
            self._closed = True
            self._items.clear()
            self._cv.notify_all()

    @property
    def closed(self) -> bool:
        return self._closed


class Session:
    """One client connection; implements the engine's session callbacks."""

    def __init__(self, server: "SteeringServer", sock: socket.socket, transport: str):
        self.server = server
        self.engine = server.engine
        self.sock = sock
        self.transport = transport  # "tcp" | "ws"
        self.session_id = _next_session_id()
        self.next_sub_id = 1  # assigned sequentially per accepted SUBSCRIBE
        self.seq = 0
        self.hello_done = False
        self.outbox = _Outbox(frame_depth=server.frame_depth)
        self._closed = threading.Event()
        self._reader = threading.Thread(target=self._reader_loop, daemon=True,
                                        name=f"lbsteer-read-{self.session_id}")
        self._writer = threading.Thread(target=self._writer_loop, daemon=True,
                                        name=f"lbsteer-write-{self.session_id}")

    def start(self) -> None:
        self.engine.register_session(self)
        self._reader.start()
        self._writer.start()

    # ------------------------------------------------------ engine callbacks

    def on_ack(self, seq: int) -> None:
        self.outbox.push_control(proto.encode(proto.Ack(seq)))

    def on_command_error(self, seq: int, code: int, message: str) -> None:
        self.outbox.push_control(proto.encode(proto.ErrorMsg(code, f"seq={seq}: {message}")))

    def on_frame(self, sub_id: int, iteration: int, dims: tuple, payload: bytes) -> None:
        data = np.frombuffer(payload, dtype="<f4")
        self.outbox.push_frame(sub_id, proto.encode(proto.Frame(sub_id, iteration, dims, data)))

    def on_stats(self, iteration: int, it_per_sec: float, mass: float) -> None:
        if not self.hello_done:  # nothing precedes the HELLO reply
            return
        self.outbox.push_control(proto.encode(proto.Stats(iteration, it_per_sec, mass)))

    def on_engine_error(self, code: int, message: str) -> None:
        if not self.hello_done:
            return
        self.outbox.push_control(proto.encode(proto.ErrorMsg(code, message)))

    # --------------------------------------------------------------- threads

    def _writer_loop(self) -> None:
        try:
            while not self.outbox.closed:
                data = self.outbox.pop()
                if data is None:
                    continue
                if self.transport == "ws":
                    ws.send_frame(self.sock, data)
                else:
                    self.sock.sendall(data)
        except OSError:
            pass
        finally:
            self.close()

    def _reader_loop(self) -> None:
        try:
            if self.transport == "ws":
                ws.server_handshake(self.sock)
                while True:
                    message = ws.recv_message(self.sock, server_side=True)
                    if message is None:
                        break
                    decoder = proto.StreamDecoder()
                    msgs, unknowns = decoder.feed(message)
                    if decoder.pending_bytes or len(msgs) + len(unknowns) != 1:
                        raise ProtocolError("websocket frames must carry exactly one message")
                    if msgs and not self._handle(msgs[0]):
                        break
                    for u in unknowns:
                        log.warning("session %d: skipping unknown message type %d",
                                    self.session_id, u.msg_type)
            else:
                decoder = proto.StreamDecoder()
                while True:
                    chunk = self.sock.recv(262144)
                    if not chunk:
                        break
                    msgs, unknowns = decoder.feed(chunk)
                    for u in unknowns:
                        log.warning("session %d: skipping unknown message type %d",
                                    self.session_id, u.msg_type)
                    stop = False
                    for msg in msgs:
                        if not self._handle(msg):
                            stop = True
                            break
                    if stop:
                        break
        except ProtocolError as err:
            log.info("session %d protocol error: %s", self.session_id, err)
            self._try_send_now(proto.ErrorMsg(proto.ERR_PROTOCOL, str(err)))
        except (ConnectionError, OSError):
            pass
        finally:
            self.close()

    def _try_send_now(self, msg) -> None:
        try:
            data = proto.encode(msg)
            if self.transport == "ws":
                ws.send_frame(self.sock, data)
            else:
                self.sock.sendall(data)
        except OSError:
            pass

    # -------------------------------------------------------------- dispatch

    def _handle(self, msg) -> bool:
        """Dispatch one decoded message; False ends the session."""
        if isinstance(msg, proto.Hello):
            if msg.version != proto.PROTOCOL_VERSION:
                self._try_send_now(proto.ErrorMsg(
                    proto.ERR_VERSION,
                    f"protocol version {msg.version} unsupported (server speaks "
                    f"{proto.PROTOCOL_VERSION})"))
                return False
            self.hello_done = True
            self.outbox.push_control(proto.encode(proto.Hello(proto.PROTOCOL_VERSION)))
            return True
        if isinstance(msg, proto.Bye):
            return False
        if not self.hello_done:
            self._try_send_now(proto.ErrorMsg(proto.ERR_PROTOCOL,
                                              "first message must be HELLO"))
            return False
        if isinstance(msg, _COMMAND_TYPES):
            self.seq += 1
            seq = self.seq
            try:
                cmd = self._translate(msg)
            except ProtocolError as err:
                self.on_command_error(seq, proto.ERR_COMMAND, str(err))
                return True
            self.engine.submit(cmd, session=self, seq=seq)
            return True
        # FRAME/STATS/ACK/ERROR are server-to-client only
        self._try_send_now(proto.ErrorMsg(proto.ERR_PROTOCOL,
                                          f"client may not send {type(msg).__name__}"))
        return False

    def _translate(self, msg):
        if isinstance(msg, proto.Reset):
            g = msg.geometry
            return CmdReset(g.dims, np.frombuffer(g.flags, dtype=np.uint8).copy(), g.fill)
        if isinstance(msg, proto.Geometry):
            return CmdConfigure(msg.dims, np.frombuffer(msg.flags, dtype=np.uint8).copy(),
                                msg.fill)
        if isinstance(msg, proto.Start):
            return CmdControl("start")
        if isinstance(msg, proto.Pause):
            return CmdControl("pause")
        if isinstance(msg, proto.Resume):
            return CmdControl("resume")
        if isinstance(msg, proto.SetCells):
            return CmdSetCells(msg.indices.astype(np.int64), msg.flags.copy(),
                               msg.fills.astype(np.float64))
        if isinstance(msg, proto.MoveRegion):
            return CmdMoveRegion(msg.lo, msg.hi, msg.offset)
        if isinstance(msg, proto.SetParam):
            name = proto.PARAM_NAMES.get(msg.param)
            if name is None:
                raise ProtocolError(f"unknown parameter id {msg.param}")
            return CmdSetParam(name, msg.values)
        if isinstance(msg, proto.Subscribe):
            field = proto.FIELD_NAMES.get(msg.field)
            if field is None:
                raise ProtocolError(f"unknown field id {msg.field}")
            return CmdSubscribe(field=field, axis=msg.axis, index=msg.index,
                                every_n=msg.every_n)
        if isinstance(msg, proto.Unsubscribe):
            return CmdUnsubscribe(msg.sub_id)
        raise ProtocolError(f"untranslatable message {type(msg).__name__}")

    def close(self) -> None:
        if self._closed.is_set():
            return
        self._closed.set()
        self.outbox.close()
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass
        self.engine.submit(CmdSessionClosed(self.session_id))
        self.server.forget_session(self)


class SteeringServer:
    """Accepts TCP and WebSocket clients and runs the engine loop thread."""

    def __init__(self, engine: SteeringEngine, bind_tcp=("127.0.0.1", 7070),
                 bind_ws=("127.0.0.1", 7071), frame_depth: int = 32,
                 run_engine: bool = True):
        self.engine = engine
        self.bind_tcp = bind_tcp
        self.bind_ws = bind_ws
        self.frame_depth = frame_depth
        self.run_engine = run_engine
        self.tcp_port = None
        self.ws_port = None
        self._listeners: list[socket.socket] = []
        self._threads: list[threading.Thread] = []
        self._sessions: set[Session] = set()
        self._sessions_lock = threading.Lock()
        self._stop = threading.Event()
        self._engine_thread: threading.Thread | None = None

    def start(self) -> None:
        if self.bind_tcp is not None:
            self.tcp_port = self._listen(self.bind_tcp, "tcp")
        if self.bind_ws is not None:
            self.ws_port = self._listen(self.bind_ws, "ws")
        if self.run_engine:
            self._engine_thread = threading.Thread(
                target=self.engine.run_loop, args=(self._stop,),
                daemon=True, name="lbsteer-engine")
            self._engine_thread.start()

    def _listen(self, bind, transport: str) -> int:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind(bind)
        listener.listen(16)
        self._listeners.append(listener)
        thread = threading.Thread(target=self._accept_loop, args=(listener, transport),
                                  daemon=True, name=f"lbsteer-accept-{transport}")
        thread.start()
        self._threads.append(thread)
        return listener.getsockname()[1]

    def _accept_loop(self, listener: socket.socket, transport: str) -> None:
        while not self._stop.is_set():
            try:
                sock, addr = listener.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            session = Session(self, sock, transport)
            with self._sessions_lock:
                self._sessions.add(session)
            log.info("session %d connected from %s over %s",
                     session.session_id, addr, transport)
            session.start()

    def forget_session(self, session: Session) -> None:
        with self._sessions_lock:
            self._sessions.discard(session)

    def stop(self) -> None:
        self._stop.set()
        self.engine._wakeup.set()
        for listener in self._listeners:
            try:
                listener.close()
            except OSError:
                pass
        with self._sessions_lock:
            sessions = list(self._sessions)
        for session in sessions:
            session.close()
        if self._engine_thread is not None:
            self._engine_thread.join(timeout=5)
