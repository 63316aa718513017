"""Minimal RFC 6455 WebSocket transport: handshake plus binary framing.

Covers what the steering server needs: binary messages (one wire message per
WebSocket frame), fragmentation reassembly, ping/pong, close. No extensions,
no compression. Client-side helpers exist for tests and the scripted client.
"""

from __future__ import annotations

import base64
import hashlib
import os
import socket
import struct

from .errors import ProtocolError

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
_MAX_HEADER = 16 * 1024
_MAX_PAYLOAD = 80 * 1024 * 1024  # above the wire cap; protocol layer re-checks

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("socket closed mid-frame")
        buf.extend(chunk)
    return bytes(buf)


def accept_key(key: str) -> str:
    return base64.b64encode(hashlib.sha1((key + _GUID).encode()).digest()).decode()


def server_handshake(sock: socket.socket) -> dict:
    """Read the HTTP upgrade request and reply 101. Returns request headers."""
    data = bytearray()
    while b"\r\n\r\n" not in data:
        if len(data) > _MAX_HEADER:
            raise ProtocolError("oversized websocket handshake")
        chunk = sock.recv(4096)
        if not chunk:
            raise ConnectionError("socket closed during handshake")
        data.extend(chunk)
    head, _, _ = bytes(data).partition(b"\r\n\r\n")
    lines = head.decode("latin-1").split("\r\n")
    headers = {}
    for line in lines[1:]:
        name, _, value = line.partition(":")
        headers[name.strip().lower()] = value.strip()
    key = headers.get("sec-websocket-key")
    if not key or "websocket" not in headers.get("upgrade", "").lower():
        sock.sendall(b"HTTP/1.1 400 Bad Request\r\n\r\n")
        raise ProtocolError("not a websocket upgrade request")
    response = (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {accept_key(key)}\r\n\r\n"
    )
    sock.sendall(response.encode("latin-1"))
    return headers


def client_handshake(sock: socket.socket, host: str, port: int, path: str = "/") -> None:
    key = base64.b64encode(os.urandom(16)).decode()
    request = (
        f"GET {path} HTTP/1.1\r\n"
        f"Host: {host}:{port}\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\n"
        "Sec-WebSocket-Version: 13\r\n\r\n"
    )
    sock.sendall(request.encode("latin-1"))
    data = bytearray()
    while b"\r\n\r\n" not in data:
        chunk = sock.recv(4096)
        if not chunk:
            raise ConnectionError("socket closed during handshake")
        data.extend(chunk)
    head = bytes(data).split(b"\r\n\r\n", 1)[0].decode("latin-1")
    if "101" not in head.split("\r\n")[0]:
        raise ProtocolError(f"websocket handshake refused: {head.splitlines()[0]}")
    for line in head.split("\r\n")[1:]:
        name, _, value = line.partition(":")
        if name.strip().lower() == "sec-websocket-accept":
            if value.strip() != accept_key(key):
                raise ProtocolError("websocket accept key mismatch")
            return
    raise ProtocolError("websocket handshake missing accept key")


def _apply_mask(payload: bytes, mask: bytes) -> bytes:
    data = bytearray(payload)
    for i in range(len(data)):
        data[i] ^= mask[i % 4]
    return bytes(data)


def send_frame(sock: socket.socket, payload: bytes, opcode: int = OP_BINARY,
               mask: bool = False) -> None:
    header = bytearray([0x80 | opcode])
    n = len(payload)
    mask_bit = 0x80 if mask else 0
    if n < 126:
        header.append(mask_bit | n)
    elif n < 1 << 16:
        header.append(mask_bit | 126)
        header.extend(struct.pack(">H", n))
    else:
        header.append(mask_bit | 127)
        header.extend(struct.pack(">Q", n))
    if mask:
        key = os.urandom(4)
        header.extend(key)
        payload = _apply_mask(payload, key)
    sock.sendall(bytes(header) + payload)


def _read_frame(sock: socket.socket, require_mask: bool):
    b0, b1 = _recv_exact(sock, 2)
    fin = bool(b0 & 0x80)
    opcode = b0 & 0x0F
    masked = bool(b1 & 0x80)
    n = b1 & 0x7F
    if n == 126:
        n = struct.unpack(">H", _recv_exact(sock, 2))[0]
    elif n == 127:
        n = struct.unpack(">Q", _recv_exact(sock, 8))[0]
    if n > _MAX_PAYLOAD:
        raise ProtocolError(f"websocket frame of {n} bytes exceeds the cap")
    if require_mask and not masked and opcode in (OP_BINARY, OP_TEXT, OP_CONT):
        raise ProtocolError("client-to-server websocket frames must be masked")
    mask = _recv_exact(sock, 4) if masked else b""
    payload = _recv_exact(sock, n) if n else b""
    if masked:
        payload = _apply_mask(payload, mask)
    return fin, opcode, payload


def recv_message(sock: socket.socket, server_side: bool = True) -> bytes | None:
    """Next complete binary message, transparently answering ping and close.

    Returns None when the peer closed the connection.
    """
    fragments: list[bytes] = []
    total = 0
    while True:
        fin, opcode, payload = _read_frame(sock, require_mask=server_side)
        if opcode == OP_PING:
            send_frame(sock, payload, opcode=OP_PONG, mask=not server_side)
            continue
        if opcode == OP_PONG:
            continue
        if opcode == OP_CLOSE:
            try:
                send_frame(sock, payload[:2], opcode=OP_CLOSE, mask=not server_side)
            except OSError:
                pass
            return None
        if opcode in (OP_BINARY, OP_TEXT):
            if fragments:
                raise ProtocolError("interleaved websocket message start")
            fragments = [payload]
        elif opcode == OP_CONT:
            if not fragments:
                raise ProtocolError("websocket continuation without a start frame")
            fragments.append(payload)
        else:
            raise ProtocolError(f"unsupported websocket opcode {opcode}")
        total += len(payload)
        if total > _MAX_PAYLOAD:
            raise ProtocolError("websocket message exceeds the cap")
        if fin:
            return b"".join(fragments)
