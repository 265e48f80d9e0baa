"""Network front end: one listening port, three client dialects.

A connection's first byte picks its path: JSON-object bytes mean a
newline-delimited JSON client, anything else is read as HTTP, which either
upgrades to a WebSocket speaking the same envelopes or fetches a static
file from the configured UI directory.

All inbound envelopes land on the gateway's timeline; a single pump task
sleeps until the next due emission and writes it to whichever transport
the connection uses.  One event loop owns everything, so ordering follows
the gateway's emission order per connection.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import logging
from pathlib import Path

from .clock import MonotonicClock
from .gateway import Gateway
from .telemetry import write_csv
from .ws import (
    CLOSE_NORMAL,
    Close,
    FrameDecoder,
    MessageAssembler,
    Ping,
    TextMessage,
    WsError,
    encode_close,
    encode_pong,
    encode_text,
    handshake_response,
    is_upgrade_request,
    parse_http_request,
)

log = logging.getLogger(__name__)

MAX_HTTP_HEAD = 32 * 1024
MAX_LINE_BYTES = 1 * 1024 * 1024

CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "application/javascript; charset=utf-8",
    ".mjs": "application/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json; charset=utf-8",
    ".map": "application/json; charset=utf-8",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
    ".txt": "text/plain; charset=utf-8",
}


class GatewayServer:
    def __init__(
        self,
        gateway: Gateway,
        host: str = "127.0.0.1",
        port: int = 8787,
        ui_dir: str | Path | None = None,
        telemetry_path: str | Path | None = None,
    ) -> None:
        if not isinstance(gateway.clock, MonotonicClock):
            log.warning("serving with a non-monotonic clock; timers will not fire on their own")
        self.gateway = gateway
        self.host = host
        self.port = port
        self.ui_dir = Path(ui_dir).resolve() if ui_dir else None
        self.telemetry_path = Path(telemetry_path) if telemetry_path else None
        self._server: asyncio.AbstractServer | None = None
        self._pump_task: asyncio.Task | None = None
        self._wake = asyncio.Event()
        self._counter = itertools.count(1)
        self._writers: dict[str, tuple[asyncio.StreamWriter, str]] = {}

    # -- lifecycle -----------------------------------------------------------

    async def start(self) -> None:
        self._server = await asyncio.start_server(self._handle, self.host, self.port)
        self._pump_task = asyncio.create_task(self._pump_loop())
        log.info("listening on %s:%d", self.host, self.bound_port)

    @property
    def bound_port(self) -> int:
        assert self._server is not None and self._server.sockets
        return self._server.sockets[0].getsockname()[1]

    async def stop(self) -> None:
        if self._pump_task is not None:
            self._pump_task.cancel()
            try:
                await self._pump_task
            except asyncio.CancelledError:
                pass
            self._pump_task = None
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None
        for conn_id, (writer, _) in list(self._writers.items()):
            writer.close()
            self.gateway.connection_lost(conn_id)
        self._writers.clear()
        self.flush_telemetry()

    def flush_telemetry(self) -> None:
        records = self.gateway.telemetry.records()
        if self.telemetry_path is not None:
            write_csv(records, self.telemetry_path)
            log.info("wrote %d telemetry rows to %s", len(records), self.telemetry_path)
        else:
            log.info("collected %d telemetry rows (no output path configured)", len(records))

    async def serve_until(self, stop: asyncio.Event) -> None:
        await self.start()
        try:
            await stop.wait()
        finally:
            await self.stop()

    async def __aenter__(self) -> "GatewayServer":
        await self.start()
        return self

    async def __aexit__(self, *exc) -> None:
        await self.stop()

    # -- pump ----------------------------------------------------------------

    async def _pump_loop(self) -> None:
        while True:
            due = self.gateway.next_due()
            if due is None:
                await self._wake.wait()
                self._wake.clear()
                continue
            now = self.gateway.clock.now_ms()
            if due > now:
                try:
                    await asyncio.wait_for(self._wake.wait(), timeout=(due - now) / 1000.0)
                except asyncio.TimeoutError:
                    pass
                self._wake.clear()
                continue
            for conn_id, message in self.gateway.pump():
                await self._send(conn_id, message)

    async def _send(self, conn_id: str, message: dict) -> None:
        entry = self._writers.get(conn_id)
        if entry is None:
            return
        writer, dialect = entry
        data = json.dumps(message, separators=(",", ":"), allow_nan=False)
        try:
            if dialect == "ws":
                writer.write(encode_text(data))
            else:
                writer.write(data.encode("utf-8") + b"\n")
            await writer.drain()
        except (ConnectionError, OSError):
            self._drop(conn_id, writer)

    def _drop(self, conn_id: str, writer: asyncio.StreamWriter) -> None:
        if conn_id in self._writers:
            del self._writers[conn_id]
            self.gateway.connection_lost(conn_id)
        try:
            writer.close()
        except (ConnectionError, OSError):
            pass

    # -- connection intake ---------------------------------------------------

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            first = await reader.read(1)
        except (ConnectionError, OSError):
            writer.close()
            return
        if not first:
            writer.close()
            return
        if first in (b"{", b"["):
            await self._tcp_session(reader, writer, first)
        else:
            await self._http_session(reader, writer, first)

    async def _tcp_session(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter, initial: bytes
    ) -> None:
        conn_id = f"tcp{next(self._counter)}"
        self.gateway.attach(conn_id)
        self._writers[conn_id] = (writer, "tcp")
        buffer = bytearray(initial)
        try:
            while True:
                chunk = await reader.read(65536)
                if not chunk:
                    break
                buffer += chunk
                while b"\n" in buffer:
                    line, _, rest = bytes(buffer).partition(b"\n")
                    buffer = bytearray(rest)
                    if line.strip():
                        self._ingest(conn_id, line)
                if len(buffer) > MAX_LINE_BYTES:
                    log.warning("%s: line overflow, closing", conn_id)
                    break
        except (ConnectionError, OSError):
            pass
        finally:
            self._drop(conn_id, writer)

    def _ingest(self, conn_id: str, raw: bytes) -> None:
        try:
            message = json.loads(raw)
        except json.JSONDecodeError as exc:
            message = {"malformed": f"invalid JSON: {exc}"}
        self.gateway.receive(conn_id, message)
        self._wake.set()

    async def _http_session(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter, initial: bytes
    ) -> None:
        head = bytearray(initial)
        try:
            while b"\r\n\r\n" not in head:
                if len(head) > MAX_HTTP_HEAD:
                    writer.close()
                    return
                chunk = await reader.read(4096)
                if not chunk:
                    writer.close()
                    return
                head += chunk
        except (ConnectionError, OSError):
            writer.close()
            return
        raw_head, _, leftover = bytes(head).partition(b"\r\n\r\n")
        try:
            method, target, headers = parse_http_request(raw_head)
        except WsError as exc:
            await self._plain_response(writer, 400, f"bad request: {exc}\n")
            return
        if is_upgrade_request(headers):
            await self._ws_session(reader, writer, headers, leftover)
            return
        if method != "GET":
            await self._plain_response(writer, 405, "only GET is served here\n")
            return
        await self._static_response(writer, target)

    async def _ws_session(
        self,
        reader: asyncio.StreamReader,
        writer: asyncio.StreamWriter,
        headers: dict[str, str],
        leftover: bytes,
    ) -> None:
        try:
            response = handshake_response(headers)
        except WsError as exc:
            await self._plain_response(writer, 400, f"bad websocket request: {exc}\n")
            return
        writer.write(response)
        try:
            await writer.drain()
        except (ConnectionError, OSError):
            writer.close()
            return
        conn_id = f"ws{next(self._counter)}"
        self.gateway.attach(conn_id)
        self._writers[conn_id] = (writer, "ws")
        decoder = FrameDecoder(require_mask=True)
        assembler = MessageAssembler()
        data = leftover
        try:
            while True:
                if data:
                    for frame in decoder.feed(data):
                        for event in assembler.feed(frame):
                            if isinstance(event, TextMessage):
                                self._ingest(conn_id, event.text.encode("utf-8"))
                            elif isinstance(event, Ping):
                                writer.write(encode_pong(event.payload))
                                await writer.drain()
                            elif isinstance(event, Close):
                                writer.write(encode_close(event.code))
                                await writer.drain()
                                return
                data = await reader.read(65536)
                if not data:
                    return
        except WsError as exc:
            log.debug("%s: websocket violation: %s", conn_id, exc)
            try:
                writer.write(encode_close(exc.code, str(exc)[:60]))
                await writer.drain()
            except (ConnectionError, OSError):
                pass
        except (ConnectionError, OSError):
            pass
        finally:
            self._drop(conn_id, writer)

    # -- static files ----------------------------------------------------------

    async def _static_response(self, writer: asyncio.StreamWriter, target: str) -> None:
        if self.ui_dir is None:
            await self._plain_response(writer, 404, "no UI directory configured\n")
            return
        path = target.split("?", 1)[0]
        if path.endswith("/"):
            path += "index.html"
        candidate = (self.ui_dir / path.lstrip("/")).resolve()
        if not candidate.is_relative_to(self.ui_dir) or not candidate.is_file():
            await self._plain_response(writer, 404, f"not found: {path}\n")
            return
        body = candidate.read_bytes()
        content_type = CONTENT_TYPES.get(candidate.suffix.lower(), "application/octet-stream")
        header = (
            "HTTP/1.1 200 OK\r\n"
            f"Content-Type: {content_type}\r\n"
            f"Content-Length: {len(body)}\r\n"
            "Cache-Control: no-cache\r\n"
            "Connection: close\r\n"
            "\r\n"
        ).encode("ascii")
        try:
            writer.write(header + body)
            await writer.drain()
        except (ConnectionError, OSError):
            pass
        writer.close()

    async def _plain_response(self, writer: asyncio.StreamWriter, status: int, body: str) -> None:
        reasons = {200: "OK", 400: "Bad Request", 404: "Not Found", 405: "Method Not Allowed"}
        payload = body.encode("utf-8")
        header = (
            f"HTTP/1.1 {status} {reasons.get(status, 'Error')}\r\n"
            "Content-Type: text/plain; charset=utf-8\r\n"
            f"Content-Length: {len(payload)}\r\n"
            "Connection: close\r\n"
            "\r\n"
        ).encode("ascii")
        try:
            writer.write(header + payload)
            await writer.drain()
        except (ConnectionError, OSError):
            pass
        writer.close()
