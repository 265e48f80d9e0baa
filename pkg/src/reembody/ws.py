"""Minimal WebSocket framing and handshake, server side.

Sans-IO: the codec turns bytes into frames and frames into bytes; the
server module owns the sockets.  Covers what browser clients speak: the
HTTP upgrade handshake, masked client frames, text fragmentation, and the
close/ping/pong control frames.
"""

from __future__ import annotations

import base64
import hashlib
import struct
from dataclasses import dataclass
from enum import IntEnum

ACCEPT_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
MAX_MESSAGE_BYTES = 4 * 1024 * 1024

CLOSE_NORMAL = 1000
CLOSE_PROTOCOL_ERROR = 1002
CLOSE_BAD_DATA = 1007
CLOSE_TOO_BIG = 1009


class WsError(Exception):
    """Protocol violation; carries the close code to answer with."""

    def __init__(self, detail: str, code: int = CLOSE_PROTOCOL_ERROR) -> None:
        super().__init__(detail)
        self.code = code


class Opcode(IntEnum):
    CONTINUATION = 0x0
    TEXT = 0x1
    BINARY = 0x2
    CLOSE = 0x8
    PING = 0x9
    PONG = 0xA


CONTROL_OPCODES = {Opcode.CLOSE, Opcode.PING, Opcode.PONG}


@dataclass(frozen=True)
class Frame:
    fin: bool
    opcode: Opcode
    payload: bytes


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + ACCEPT_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def parse_http_request(raw: bytes) -> tuple[str, str, dict[str, str]]:
    """Split a request head into (method, target, lowercase-keyed headers)."""
    try:
        text = raw.decode("latin-1")
    except UnicodeDecodeError as exc:
        raise WsError(f"undecodable request head: {exc}") from None
    lines = text.split("\r\n")
    parts = lines[0].split(" ")
    if len(parts) != 3 or not parts[2].startswith("HTTP/"):
        raise WsError(f"malformed request line: {lines[0]!r}")
    headers: dict[str, str] = {}
    for line in lines[1:]:
        if not line:
            continue
        name, sep, value = line.partition(":")
        if not sep:
            raise WsError(f"malformed header line: {line!r}")
        headers[name.strip().lower()] = value.strip()
    return parts[0], parts[1], headers


def is_upgrade_request(headers: dict[str, str]) -> bool:
    connection = headers.get("connection", "").lower()
    upgrade = headers.get("upgrade", "").lower()
    return "upgrade" in connection and upgrade == "websocket"


def handshake_response(headers: dict[str, str]) -> bytes:
    key = headers.get("sec-websocket-key")
    if not key:
        raise WsError("upgrade request lacks Sec-WebSocket-Key")
    version = headers.get("sec-websocket-version")
    if version != "13":
        raise WsError(f"unsupported websocket version {version!r}")
    return (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {accept_key(key)}\r\n"
        "\r\n"
    ).encode("ascii")


def encode_frame(
    opcode: Opcode,
    payload: bytes = b"",
    fin: bool = True,
    mask: bytes | None = None,
) -> bytes:
    if opcode in CONTROL_OPCODES and (len(payload) > 125 or not fin):
        raise WsError("control frames must be final and carry at most 125 bytes")
    head = bytearray()
    head.append((0x80 if fin else 0x00) | int(opcode))
    mask_bit = 0x80 if mask is not None else 0x00
    length = len(payload)
    if length < 126:
        head.append(mask_bit | length)
    elif length < 1 << 16:
        head.append(mask_bit | 126)
        head += struct.pack(">H", length)
    else:
        head.append(mask_bit | 127)
        head += struct.pack(">Q", length)
    if mask is None:
        return bytes(head) + payload
    if len(mask) != 4:
        raise WsError("masking key must be 4 bytes")
    head += mask
    return bytes(head) + apply_mask(payload, mask)


def apply_mask(payload: bytes, mask: bytes) -> bytes:
    repeated = (mask * (len(payload) // 4 + 1))[: len(payload)]
    return bytes(a ^ b for a, b in zip(payload, repeated))


def encode_text(text: str, mask: bytes | None = None) -> bytes:
    return encode_frame(Opcode.TEXT, text.encode("utf-8"), mask=mask)


def encode_close(code: int = CLOSE_NORMAL, reason: str = "") -> bytes:
    return encode_frame(Opcode.CLOSE, struct.pack(">H", code) + reason.encode("utf-8"))


def encode_pong(payload: bytes = b"") -> bytes:
    return encode_frame(Opcode.PONG, payload)


class FrameDecoder:
    """Incremental byte stream to frame stream."""

    def __init__(self, require_mask: bool = True) -> None:
        self.require_mask = require_mask
        self._buffer = bytearray()

    def feed(self, data: bytes) -> list[Frame]:
        self._buffer += data
        frames = []
        while True:
            frame = self._next_frame()
            if frame is None:
                return frames
            frames.append(frame)

    def _next_frame(self) -> Frame | None:
        buf = self._buffer
        if len(buf) < 2:
            return None
        first, second = buf[0], buf[1]
        if first & 0x70:
            raise WsError("reserved frame bits set without an extension")
        fin = bool(first & 0x80)
        try:
            opcode = Opcode(first & 0x0F)
        except ValueError:
            raise WsError(f"unknown opcode {first & 0x0F:#x}") from None
        masked = bool(second & 0x80)
        length = second & 0x7F
        offset = 2
        if length == 126:
            if len(buf) < offset + 2:
                return None
            (length,) = struct.unpack_from(">H", buf, offset)
            offset += 2
        elif length == 127:
            if len(buf) < offset + 8:
                return None
            (length,) = struct.unpack_from(">Q", buf, offset)
            offset += 8
        if length > MAX_MESSAGE_BYTES:
            raise WsError("frame too large", CLOSE_TOO_BIG)
        if masked:
            if len(buf) < offset + 4:
                return None
            mask = bytes(buf[offset : offset + 4])
            offset += 4
        elif self.require_mask:
            raise WsError("client frames must be masked")
        else:
            mask = None
        if len(buf) < offset + length:
            return None
        payload = bytes(buf[offset : offset + length])
        del buf[: offset + length]
        if mask is not None:
            payload = apply_mask(payload, mask)
        return Frame(fin=fin, opcode=opcode, payload=payload)


@dataclass(frozen=True)
class TextMessage:
    text: str


@dataclass(frozen=True)
class Ping:
    payload: bytes


@dataclass(frozen=True)
class Close:
    code: int
    reason: str


class MessageAssembler:
    """Frames to messages: reassembles fragments, surfaces control frames."""

    def __init__(self) -> None:
        self._parts: list[bytes] = []
        self._kind: Opcode | None = None

    def feed(self, frame: Frame) -> list[object]:
        if frame.opcode in CONTROL_OPCODES:
            return [self._control(frame)]
        if frame.opcode is Opcode.CONTINUATION:
            if self._kind is None:
                raise WsError("continuation frame without a message in progress")
        else:
            if self._kind is not None:
                raise WsError("new data frame while a fragmented message is open")
            self._kind = frame.opcode
        self._parts.append(frame.payload)
        if sum(len(p) for p in self._parts) > MAX_MESSAGE_BYTES:
            raise WsError("fragmented message too large", CLOSE_TOO_BIG)
        if not frame.fin:
            return []
        payload = b"".join(self._parts)
        kind = self._kind
        self._parts = []
        self._kind = None
        if kind is Opcode.BINARY:
            raise WsError("binary messages are not part of this protocol", CLOSE_BAD_DATA)
        try:
            return [TextMessage(payload.decode("utf-8"))]
        except UnicodeDecodeError as exc:
            raise WsError(f"invalid UTF-8 in text message: {exc}", CLOSE_BAD_DATA) from None

    @staticmethod
    def _control(frame: Frame) -> object:
        if frame.opcode is Opcode.PING:
            return Ping(frame.payload)
        if frame.opcode is Opcode.PONG:
            return Frame(fin=True, opcode=Opcode.PONG, payload=frame.payload)
        code = CLOSE_NORMAL
        reason = ""
        if len(frame.payload) >= 2:
            (code,) = struct.unpack_from(">H", frame.payload, 0)
            reason = frame.payload[2:].decode("utf-8", errors="replace")
        elif len(frame.payload) == 1:
            raise WsError("close payload of one byte")
        return Close(code=code, reason=reason)
