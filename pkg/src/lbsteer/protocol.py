"""Binary wire codec: length-prefixed, type-tagged little-endian messages.

Envelope: u32 length (= 2 + payload bytes), u16 message type, payload.
Every layout is packed little-endian with no padding; see PROTOCOL.md for the
byte-by-byte reference. The incremental decoder tolerates arbitrary TCP
chunking and skips unknown message types by length (forward compatibility).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ProtocolError

PROTOCOL_VERSION = 1

#: hard cap on the declared frame length (type + payload)
MAX_LENGTH = 64 * 1024 * 1024

MSG_HELLO = 1
MSG_GEOMETRY = 2
MSG_START = 3
MSG_PAUSE = 4
MSG_RESUME = 5
MSG_RESET = 6
MSG_SET_CELLS = 7
MSG_MOVE_REGION = 8
MSG_SET_PARAM = 9
MSG_SUBSCRIBE = 10
MSG_UNSUBSCRIBE = 11
MSG_FRAME = 12
MSG_STATS = 13
MSG_ACK = 14
MSG_ERROR = 15
MSG_BYE = 16

PARAM_TAU = 1
PARAM_GRAVITY = 2
PARAM_INLET_VELOCITY = 3
PARAM_WALL_VELOCITY = 4
PARAM_NAMES = {
    PARAM_TAU: "tau",
    PARAM_GRAVITY: "gravity",
    PARAM_INLET_VELOCITY: "inlet_velocity",
    PARAM_WALL_VELOCITY: "wall_velocity",
}
PARAM_IDS = {v: k for k, v in PARAM_NAMES.items()}

FIELD_IDS = {
    "density": 1,
    "pressure": 2,
    "speed": 3,
    "velocity_xy": 4,
    "fill": 5,
    "vorticity": 6,
    "interface": 7,
    "streamlines": 8,
}
FIELD_NAMES = {v: k for k, v in FIELD_IDS.items()}

ERR_VERSION = 1
ERR_PROTOCOL = 2
ERR_COMMAND = 3
ERR_STATE = 4
ERR_SUBSCRIPTION = 5
ERR_INTERNAL = 6


def _eq_array(a, b) -> bool:
    return np.array_equal(np.asarray(a), np.asarray(b), equal_nan=True)


@dataclass(frozen=True)
class Hello:
    version: int = PROTOCOL_VERSION


@dataclass(eq=False)
class Geometry:
    dims: tuple  # (nx, ny, nz); nz == 1 selects the 2D model
    flags: bytes
    fill: np.ndarray  # float32, len = nx*ny*nz

    def __eq__(self, other):
        return (isinstance(other, Geometry) and self.dims == other.dims
                and self.flags == other.flags and _eq_array(self.fill, other.fill))


@dataclass(frozen=True)
class Start:
    pass


@dataclass(frozen=True)
class Pause:
    pass


@dataclass(frozen=True)
class Resume:
    pass


@dataclass(eq=False)
class Reset:
    geometry: Geometry

    def __eq__(self, other):
        return isinstance(other, Reset) and self.geometry == other.geometry


@dataclass(eq=False)
class SetCells:
    indices: np.ndarray  # u64 flat cell indices
    flags: np.ndarray  # u8 per cell
    fills: np.ndarray  # f32 per cell (NaN = use the flag's default fill)

    def __eq__(self, other):
        return (isinstance(other, SetCells) and _eq_array(self.indices, other.indices)
                and _eq_array(self.flags, other.flags) and _eq_array(self.fills, other.fills))


@dataclass(frozen=True)
class MoveRegion:
    lo: tuple  # (x0, y0, z0) inclusive
    hi: tuple  # (x1, y1, z1) exclusive
    offset: tuple  # (dx, dy, dz) signed


@dataclass(eq=False)
class SetParam:
    param: int
    values: np.ndarray  # f64

    def __eq__(self, other):
        return (isinstance(other, SetParam) and self.param == other.param
                and _eq_array(self.values, other.values))


@dataclass(frozen=True)
class Subscribe:
    field: int
    axis: int
    index: int
    every_n: int


@dataclass(frozen=True)
class Unsubscribe:
    sub_id: int


@dataclass(eq=False)
class Frame:
    sub_id: int
    iteration: int
    dims: tuple  # meaning depends on the subscribed field; see PROTOCOL.md
    payload: np.ndarray  # float32

    def __eq__(self, other):
        return (isinstance(other, Frame) and self.sub_id == other.sub_id
                and self.iteration == other.iteration and self.dims == other.dims
                and _eq_array(self.payload, other.payload))


@dataclass(frozen=True)
class Stats:
    iteration: int
    it_per_sec: float
    mass: float


@dataclass(frozen=True)
class Ack:
    seq: int


@dataclass(frozen=True)
class ErrorMsg:
    code: int
    text: str


@dataclass(frozen=True)
class Bye:
    pass


@dataclass(frozen=True)
class Unknown:
    """Envelope of an unrecognized message type, skipped by length."""

    msg_type: int
    payload: bytes


_GEOM_HDR = struct.Struct("<III")
_CELL_REC = struct.Struct("<QBf")
_SUB = struct.Struct("<HBII")
_FRAME_HDR = struct.Struct("<IQIII")
_STATS = struct.Struct("<Qdd")


def _encode_geometry_payload(g: Geometry) -> bytes:
    nx, ny, nz = g.dims
    n = nx * ny * nz
    if len(g.flags) != n:
        raise ProtocolError(f"geometry flags carry {len(g.flags)} cells, dims need {n}")
    fill = np.asarray(g.fill, dtype="<f4")
    if fill.size != n:
        raise ProtocolError(f"geometry fill carries {fill.size} cells, dims need {n}")
    return _GEOM_HDR.pack(nx, ny, nz) + bytes(g.flags) + fill.tobytes()


def _decode_geometry_payload(payload: bytes, base: int) -> Geometry:
    if len(payload) < _GEOM_HDR.size:
        raise ProtocolError("geometry payload truncated", base)
    nx, ny, nz = _GEOM_HDR.unpack_from(payload, 0)
    n = nx * ny * nz
    expected = _GEOM_HDR.size + n + 4 * n
    if len(payload) != expected:
        raise ProtocolError(
            f"geometry payload is {len(payload)} bytes, dims {nx}x{ny}x{nz} need {expected}",
            base + _GEOM_HDR.size)
    flags = payload[_GEOM_HDR.size:_GEOM_HDR.size + n]
    fill = np.frombuffer(payload, dtype="<f4", count=n, offset=_GEOM_HDR.size + n).copy()
    return Geometry((nx, ny, nz), flags, fill)


def encode(msg) -> bytes:
    """Serialize one message to its framed bytes."""
    if isinstance(msg, Hello):
        t, p = MSG_HELLO, struct.pack("<H", msg.version)
    elif isinstance(msg, Geometry):
        t, p = MSG_GEOMETRY, _encode_geometry_payload(msg)
    elif isinstance(msg, Start):
        t, p = MSG_START, b""
    elif isinstance(msg, Pause):
        t, p = MSG_PAUSE, b""
    elif isinstance(msg, Resume):
        t, p = MSG_RESUME, b""
    elif isinstance(msg, Reset):
        t, p = MSG_RESET, _encode_geometry_payload(msg.geometry)
    elif isinstance(msg, SetCells):
        idx = np.asarray(msg.indices, dtype=np.uint64)
        flg = np.asarray(msg.flags, dtype=np.uint8)
        fil = np.asarray(msg.fills, dtype=np.float32)
        if not (idx.size == flg.size == fil.size):
            raise ProtocolError("set_cells arrays must have equal length")
        parts = [struct.pack("<I", idx.size)]
        parts.extend(_CELL_REC.pack(int(i), int(g), float(f))
                     for i, g, f in zip(idx, flg, fil))
        t, p = MSG_SET_CELLS, b"".join(parts)
    elif isinstance(msg, MoveRegion):
        t = MSG_MOVE_REGION
        p = struct.pack("<6I3i", *msg.lo, *msg.hi, *msg.offset)
    elif isinstance(msg, SetParam):
        vals = np.asarray(msg.values, dtype="<f8")
        t, p = MSG_SET_PARAM, struct.pack("<H", msg.param) + vals.tobytes()
    elif isinstance(msg, Subscribe):
        t, p = MSG_SUBSCRIBE, _SUB.pack(msg.field, msg.axis, msg.index, msg.every_n)
    elif isinstance(msg, Unsubscribe):
        t, p = MSG_UNSUBSCRIBE, struct.pack("<I", msg.sub_id)
    elif isinstance(msg, Frame):
        payload = np.asarray(msg.payload, dtype="<f4")
        t = MSG_FRAME
        p = _FRAME_HDR.pack(msg.sub_id, msg.iteration, *msg.dims) + payload.tobytes()
    elif isinstance(msg, Stats):
        t, p = MSG_STATS, _STATS.pack(msg.iteration, msg.it_per_sec, msg.mass)
    elif isinstance(msg, Ack):
        t, p = MSG_ACK, struct.pack("<Q", msg.seq)
    elif isinstance(msg, ErrorMsg):
        t, p = MSG_ERROR, struct.pack("<H", msg.code) + msg.text.encode("utf-8")
    elif isinstance(msg, Bye):
        t, p = MSG_BYE, b""
    elif isinstance(msg, Unknown):
        t, p = msg.msg_type, msg.payload
    else:
        raise ProtocolError(f"cannot encode {type(msg).__name__}")
    length = 2 + len(p)
    if length > MAX_LENGTH:
        raise ProtocolError(f"message length {length} exceeds the {MAX_LENGTH} byte cap")
    return struct.pack("<IH", length, t) + p


def decode_payload(msg_type: int, payload: bytes, base: int = 0):
    """Decode one framed payload; `base` is the stream offset for errors."""
    try:
        if msg_type == MSG_HELLO:
            if len(payload) != 2:
                raise ProtocolError("hello payload must be 2 bytes", base)
            return Hello(struct.unpack("<H", payload)[0])
        if msg_type == MSG_GEOMETRY:
            return _decode_geometry_payload(payload, base)
        if msg_type == MSG_START:
            return Start()
        if msg_type == MSG_PAUSE:
            return Pause()
        if msg_type == MSG_RESUME:
            return Resume()
        if msg_type == MSG_RESET:
            return Reset(_decode_geometry_payload(payload, base))
        if msg_type == MSG_SET_CELLS:
            if len(payload) < 4:
                raise ProtocolError("set_cells payload truncated", base)
            count = struct.unpack_from("<I", payload, 0)[0]
            expected = 4 + count * _CELL_REC.size
            if len(payload) != expected:
                raise ProtocolError(
                    f"set_cells payload is {len(payload)} bytes, count {count} needs {expected}",
                    base + 4)
            idx = np.empty(count, dtype=np.uint64)
            flg = np.empty(count, dtype=np.uint8)
            fil = np.empty(count, dtype=np.float32)
            off = 4
            for k in range(count):
                idx[k], flg[k], fil[k] = _CELL_REC.unpack_from(payload, off)
                off += _CELL_REC.size
            return SetCells(idx, flg, fil)
        if msg_type == MSG_MOVE_REGION:
            if len(payload) != 36:
                raise ProtocolError("move_region payload must be 36 bytes", base)
            v = struct.unpack("<6I3i", payload)
            return MoveRegion(v[0:3], v[3:6], v[6:9])
        if msg_type == MSG_SET_PARAM:
            if len(payload) < 2 or (len(payload) - 2) % 8 != 0 or len(payload) == 2:
                raise ProtocolError("set_param payload must be 2 + 8k bytes (k >= 1)", base)
            param = struct.unpack_from("<H", payload, 0)[0]
            values = np.frombuffer(payload, dtype="<f8", offset=2).copy()
            return SetParam(param, values)
        if msg_type == MSG_SUBSCRIBE:
            if len(payload) != _SUB.size:
                raise ProtocolError(f"subscribe payload must be {_SUB.size} bytes", base)
            return Subscribe(*_SUB.unpack(payload))
        if msg_type == MSG_UNSUBSCRIBE:
            if len(payload) != 4:
                raise ProtocolError("unsubscribe payload must be 4 bytes", base)
            return Unsubscribe(struct.unpack("<I", payload)[0])
        if msg_type == MSG_FRAME:
            if len(payload) < _FRAME_HDR.size or (len(payload) - _FRAME_HDR.size) % 4 != 0:
                raise ProtocolError("frame payload truncated", base)
            sub_id, iteration, d0, d1, d2 = _FRAME_HDR.unpack_from(payload, 0)
            data = np.frombuffer(payload, dtype="<f4", offset=_FRAME_HDR.size).copy()
            return Frame(sub_id, iteration, (d0, d1, d2), data)
        if msg_type == MSG_STATS:
            if len(payload) != _STATS.size:
                raise ProtocolError(f"stats payload must be {_STATS.size} bytes", base)
            return Stats(*_STATS.unpack(payload))
        if msg_type == MSG_ACK:
            if len(payload) != 8:
                raise ProtocolError("ack payload must be 8 bytes", base)
            return Ack(struct.unpack("<Q", payload)[0])
        if msg_type == MSG_ERROR:
            if len(payload) < 2:
                raise ProtocolError("error payload truncated", base)
            code = struct.unpack_from("<H", payload, 0)[0]
            return ErrorMsg(code, payload[2:].decode("utf-8"))
        if msg_type == MSG_BYE:
            return Bye()
    except struct.error as exc:
        raise ProtocolError(f"malformed payload for type {msg_type}: {exc}", base) from exc
    return Unknown(msg_type, payload)


def decode_one(data: bytes):
    """Decode a buffer holding exactly one framed message."""
    msgs, warnings = StreamDecoder().feed(data)
    if len(msgs) + len(warnings) != 1:
        raise ProtocolError(f"expected exactly one message, found {len(msgs)}")
    return msgs[0] if msgs else warnings[0]


class StreamDecoder:
    """Incremental framing decoder for a byte stream without boundaries.

    feed() returns (messages, unknowns); output is independent of how the
    stream is chunked. The length header is validated against the cap before
    any payload is buffered past it.
    """

    def __init__(self):
        self._buf = bytearray()
        self._offset = 0  # absolute stream offset of _buf[0]

    def feed(self, data: bytes) -> tuple[list, list]:
        self._buf.extend(data)
        if len(self._buf) >= 4:
            # reject oversized declarations before accumulating the body
            length = struct.unpack_from("<I", self._buf, 0)[0]
            if length > MAX_LENGTH:
                raise ProtocolError(f"declared length {length} exceeds the "
                                    f"{MAX_LENGTH} byte cap", self._offset)
        messages: list = []
        unknowns: list = []
        while True:
            if len(self._buf) < 4:
                break
            length = struct.unpack_from("<I", self._buf, 0)[0]
            if length > MAX_LENGTH:
                raise ProtocolError(f"declared length {length} exceeds the "
                                    f"{MAX_LENGTH} byte cap", self._offset)
            if length < 2:
                raise ProtocolError(f"declared length {length} below the 2 byte minimum", self._offset)
            if len(self._buf) < 4 + length:
                break
            msg_type = struct.unpack_from("<H", self._buf, 4)[0]
            payload = bytes(self._buf[6:4 + length])
            msg = decode_payload(msg_type, payload, self._offset + 6)
            if isinstance(msg, Unknown):
                unknowns.append(msg)
            else:
                messages.append(msg)
            del self._buf[:4 + length]
            self._offset += 4 + length
        return messages, unknowns

    def finish(self) -> None:
        """Signal end-of-stream; leftover bytes mean a truncated message."""
        if self._buf:
            raise ProtocolError(f"stream truncated with {len(self._buf)} buffered bytes",
                                self._offset)

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)
