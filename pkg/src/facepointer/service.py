"""Live session service over WebSocket.

One session at a time: the client streams binary frame messages and gets
a JSON state message back per processed frame; text commands reset the
session or adjust configuration. Frames are decoupled from processing by
a two-slot drop-oldest queue so a fast client cannot stall the socket.
Plain HTTP GETs serve the front-end assets when a static directory is
configured.

Wire format (little-endian): b"FRM1" + u16 width + u16 height +
u8 format (0 = gray8) + row-major payload.
"""

from __future__ import annotations

import asyncio
import json
import logging
import mimetypes
import struct
from collections import deque
from http import HTTPStatus
from pathlib import Path

import numpy as np
from websockets.asyncio.server import serve as ws_serve
from websockets.exceptions import ConnectionClosed
from websockets.http11 import Response

from .config import PipelineConfig, config_from_dict, config_to_dict
from .errors import InvalidInput
from .images import GrayImage
from .pipeline import PipelineSession

log = logging.getLogger(__name__)

FRAME_MAGIC = b"FRM1"
FRAME_HEADER = struct.Struct("<4sHHB")
FORMAT_GRAY8 = 0
MAX_PIXELS = 1_500_000
QUEUE_SLOTS = 2


class ProtocolError(Exception):
    def __init__(self, code: str, detail: str):
        super().__init__(detail)
        self.code = code
        self.detail = detail


def encode_frame_message(frame: GrayImage) -> bytes:
    header = FRAME_HEADER.pack(FRAME_MAGIC, frame.width, frame.height, FORMAT_GRAY8)
    return header + frame.pixels.tobytes()


def decode_frame_message(data: bytes) -> GrayImage:
    if len(data) < FRAME_HEADER.size:
        raise ProtocolError("bad-frame", "message shorter than the frame header")
    magic, width, height, fmt = FRAME_HEADER.unpack_from(data)
    if magic != FRAME_MAGIC:
        raise ProtocolError("bad-frame", "bad magic")
    if fmt != FORMAT_GRAY8:
        raise ProtocolError("bad-frame", f"unsupported pixel format {fmt}")
    if width < 1 or height < 1:
        raise ProtocolError("bad-frame", "empty frame")
    if width * height > MAX_PIXELS:
        raise ProtocolError("bad-frame", "frame too large")
    payload = data[FRAME_HEADER.size:]
    if len(payload) != width * height:
        raise ProtocolError("bad-frame", f"payload is {len(payload)} bytes, expected {width * height}")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()
    return GrayImage(pixels)


class _DropOldest:
    """Bounded frame queue: newest frames win under backpressure."""

    def __init__(self, slots: int):
        self._items: deque = deque(maxlen=slots)
        self._ready = asyncio.Event()
        self.closed = False

    def put(self, item) -> None:
        self._items.append(item)
        self._ready.set()

    def close(self) -> None:
        self.closed = True
        self._ready.set()

    def clear(self) -> None:
        self._items.clear()

    async def get(self):
        while True:
            if self._items:
                return self._items.popleft()
            if self.closed:
                return None
            self._ready.clear()
            await self._ready.wait()


class SessionService:
    def __init__(self, cfg: PipelineConfig, static_dir: str | Path | None = None):
        self.cfg = cfg
        self.static_dir = Path(static_dir) if static_dir else None
        self._busy = False
        if not cfg.ssr.template_path:
            # warm the shared reference template before the first frame
            from .fixtures import default_bte_template

            default_bte_template()

    async def handle(self, connection) -> None:
        if self._busy:
            await connection.send(json.dumps({"error": "busy", "detail": "another session is active"}))
            await connection.close()
            return
        self._busy = True
        try:
            await self._run_session(connection)
        finally:
            self._busy = False

    async def _run_session(self, connection) -> None:
        import time

        # live sessions report real throughput; equivalence checks ignore
        # the wall-clock metrics records
        session = PipelineSession(self.cfg, clock=time.perf_counter)
        queue = _DropOldest(QUEUE_SLOTS)
        loop = asyncio.get_running_loop()

        async def receiver():
            try:
                async for message in connection:
                    if isinstance(message, bytes):
                        try:
                            queue.put(decode_frame_message(message))
                        except ProtocolError as exc:
                            await connection.send(json.dumps({"error": exc.code, "detail": exc.detail}))
                    else:
                        await self._handle_command(connection, session, queue, message)
            except ConnectionClosed:
                pass
            finally:
                queue.close()

        async def processor():
            while True:
                frame = await queue.get()
                if frame is None:
                    return
                await loop.run_in_executor(None, session.process, frame)
                try:
                    await connection.send(json.dumps(session.snapshot(), sort_keys=True))
                except ConnectionClosed:
                    return

        recv_task = asyncio.ensure_future(receiver())
        proc_task = asyncio.ensure_future(processor())
        try:
            await asyncio.gather(recv_task, proc_task)
        finally:
            recv_task.cancel()
            proc_task.cancel()

    async def _handle_command(self, connection, session: PipelineSession, queue: _DropOldest, message: str) -> None:
        try:
            cmd = json.loads(message)
        except json.JSONDecodeError:
            await connection.send(json.dumps({"error": "bad-cmd", "detail": "not valid JSON"}))
            return
        name = cmd.get("cmd")
        if name == "reset":
            queue.clear()
            session.reset()
            await connection.send(json.dumps({"ok": "reset", "calibrated": False}))
        elif name == "config":
            merged = config_to_dict(session.cfg)
            for section, values in cmd.get("set", {}).items():
                if section == "frame_rate":
                    merged["frame_rate"] = values
                elif isinstance(merged.get(section), dict) and isinstance(values, dict):
                    merged[section].update(values)
                else:
                    await connection.send(json.dumps({"error": "bad-cmd", "detail": f"unknown section {section!r}"}))
                    return
            try:
                session.update_config(config_from_dict(merged))
            except (InvalidInput, TypeError) as exc:
                await connection.send(json.dumps({"error": "bad-cmd", "detail": str(exc)}))
                return
            await connection.send(json.dumps({"ok": "config"}))
        else:
            await connection.send(json.dumps({"error": "bad-cmd", "detail": f"unknown command {name!r}"}))

    def process_request(self, connection, request):
        """Serve static front-end files for plain HTTP requests."""
        if "Upgrade" in request.headers:
            return None
        if self.static_dir is None:
            return connection.respond(HTTPStatus.NOT_FOUND, "WebSocket endpoint only\n")
        name = request.path.lstrip("/") or "index.html"
        target = (self.static_dir / name).resolve()
        if not str(target).startswith(str(self.static_dir.resolve())) or not target.is_file():
            return connection.respond(HTTPStatus.NOT_FOUND, "not found\n")
        body = target.read_bytes()
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        return Response(
            HTTPStatus.OK, "OK",
            websockets_headers([("Content-Type", ctype), ("Content-Length", str(len(body)))]),
            body,
        )


def websockets_headers(pairs):
    from websockets.datastructures import Headers

    headers = Headers()
    for key, value in pairs:
        headers[key] = value
    return headers


async def serve_async(host: str, port: int, cfg: PipelineConfig,
                      static_dir: str | Path | None = None,
                      ready: asyncio.Event | None = None,
                      stop: asyncio.Future | None = None):
    service = SessionService(cfg, static_dir)
    async with ws_serve(service.handle, host, port, process_request=service.process_request,
                        max_size=MAX_PIXELS + 64) as server:
        actual = server.sockets[0].getsockname()[1] if server.sockets else port
        log.info("listening on ws://%s:%s", host, actual)
        if ready is not None:
            ready.port = actual  # type: ignore[attr-defined]
            ready.set()
        await (stop if stop is not None else asyncio.get_running_loop().create_future())


def serve(bind: str, cfg: PipelineConfig, static_dir: str | Path | None = None) -> None:
    host, _, port = bind.rpartition(":")
    asyncio.run(serve_async(host or "127.0.0.1", int(port), cfg, static_dir))
