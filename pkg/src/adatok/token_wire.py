"""TOK frame serialization and the framed TCP transport.

Frame layout (integers little-endian):

    offset 0   magic    4 bytes, ASCII "ATOK"
    offset 4   version  u8, currently 1
    offset 5   dtype    u8: 0 = f16, 1 = f32
    offset 6   dim      u32
    offset 10  count    u32
    offset 14  payload  count * dim values
    then       meta_len u32
    then       meta     UTF-8 text (canonical JSON: sources, areas, origin, residual)

Total size = 18 + payload + meta_len. On the wire, one message is a u32
length prefix followed by one frame; the server answers a single byte:
0x06 accepted, 0x15 rejected.
"""

from __future__ import annotations

import hashlib
import json
import os
import socket
import socketserver
import struct
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AckTimeout, EncodingError, FrameError, StartupError, TransportError
from .object_merge import CompressedTokenSet, Origin, TokenMeta

MAGIC = b"ATOK"
VERSION = 1
ACK = b"\x06"
NAK = b"\x15"
MAX_FRAME_BYTES = 64 * 1024 * 1024

_WIRE_DTYPES = {"f16": (0, np.dtype("<f2")), "f32": (1, np.dtype("<f4"))}
_TAG_DTYPES = {0: np.dtype("<f2"), 1: np.dtype("<f4")}


def pack(cts: CompressedTokenSet, dtype: str = "f16") -> bytes:
    """Serialize a token set into deterministic TOK frame bytes."""
    if dtype not in _WIRE_DTYPES:
        raise EncodingError(f"wire dtype must be one of {sorted(_WIRE_DTYPES)}, got {dtype!r}")
    tag, np_dtype = _WIRE_DTYPES[dtype]
    tokens = np.asarray(cts.tokens, dtype=np.float64)
    if tokens.size and not np.isfinite(tokens).all():
        raise EncodingError("token values must be finite")
    payload = np.ascontiguousarray(tokens.astype(np_dtype)).tobytes()
    meta = {
        "areas": [m.mask_area_pixels for m in cts.meta],
        "origin": {
            "grid_height": cts.origin.grid_height,
            "grid_width": cts.origin.grid_width,
            "image_height": cts.origin.image_height,
            "image_width": cts.origin.image_width,
        },
        "residual": bool(cts.residual_included),
        "sources": [m.mask_source_index for m in cts.meta],
    }
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    head = MAGIC + struct.pack("<BBII", VERSION, tag, cts.dim, cts.count)
    return head + payload + struct.pack("<I", len(meta_bytes)) + meta_bytes


def unpack(blob: bytes) -> CompressedTokenSet:
    """Parse TOK frame bytes; FrameError messages carry the failing byte offset."""
    if len(blob) < 14:
        raise FrameError(f"frame is {len(blob)} bytes, fixed header needs 14 (offset {len(blob)})")
    if blob[:4] != MAGIC:
        raise FrameError(f"bad magic {blob[:4]!r} (offset 0)")
    version, tag = struct.unpack_from("<BB", blob, 4)
    if version != VERSION:
        raise FrameError(f"unsupported version {version} (offset 4)")
    if tag not in _TAG_DTYPES:
        raise FrameError(f"unknown dtype tag {tag} (offset 5)")
    dim, count = struct.unpack_from("<II", blob, 6)
    np_dtype = _TAG_DTYPES[tag]
    payload_len = count * dim * np_dtype.itemsize
    if len(blob) < 14 + payload_len + 4:
        raise FrameError(
            f"frame truncated: payload needs {payload_len} bytes plus meta_len "
            f"(offset {len(blob)})"
        )
    payload = blob[14 : 14 + payload_len]
    (meta_len,) = struct.unpack_from("<I", blob, 14 + payload_len)
    meta_start = 14 + payload_len + 4
    if len(blob) != meta_start + meta_len:
        raise FrameError(
            f"frame size {len(blob)} != declared {meta_start + meta_len} (offset {meta_start})"
        )
    try:
        meta = json.loads(blob[meta_start:].decode("utf-8"))
        sources = [int(s) for s in meta["sources"]]
        areas = [int(a) for a in meta["areas"]]
        origin = Origin(
            image_height=int(meta["origin"]["image_height"]),
            image_width=int(meta["origin"]["image_width"]),
            grid_height=int(meta["origin"]["grid_height"]),
            grid_width=int(meta["origin"]["grid_width"]),
        )
        residual = bool(meta["residual"])
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise FrameError(f"bad meta document (offset {meta_start}): {exc}") from exc
    if len(sources) != count or len(areas) != count:
        raise FrameError(
            f"meta lists have {len(sources)}/{len(areas)} entries for {count} tokens "
            f"(offset {meta_start})"
        )
    if residual and (count == 0 or sources[-1] != -1):
        raise FrameError(f"residual flag set but last source is not -1 (offset {meta_start})")
    values = np.frombuffer(payload, dtype=np_dtype).reshape(count, dim)
    tokens = values.astype(np.float32)  # f16 widens losslessly
    token_meta = tuple(TokenMeta(s, a) for s, a in zip(sources, areas))
    return CompressedTokenSet(tokens, token_meta, origin, residual)


@dataclass(frozen=True)
class SendReport:
    bytes_sent: int
    elapsed_s: float

    @property
    def throughput_bps(self) -> float:
        return self.bytes_sent / self.elapsed_s if self.elapsed_s > 0 else float("inf")


def _throttled_sendall(sock: socket.socket, data: bytes, kbps: float | None) -> None:
    if not kbps:
        sock.sendall(data)
        return
    rate = kbps * 1024.0  # bytes per second
    chunk = 4096
    start = time.monotonic()
    sent = 0
    while sent < len(data):
        sock.sendall(data[sent : sent + chunk])
        sent += chunk
        target = sent / rate
        delay = target - (time.monotonic() - start)
        if delay > 0:
            time.sleep(delay)


def _send_one(sock: socket.socket, frame: bytes, throttle_kbps, ack_timeout) -> SendReport:
    message = struct.pack("<I", len(frame)) + frame
    start = time.monotonic()
    _throttled_sendall(sock, message, throttle_kbps)
    elapsed = time.monotonic() - start
    sock.settimeout(ack_timeout)
    try:
        reply = sock.recv(1)
    except socket.timeout as exc:
        raise AckTimeout(f"no acknowledgment within {ack_timeout}s") from exc
    if reply == ACK:
        return SendReport(bytes_sent=len(message), elapsed_s=elapsed)
    if reply == NAK:
        raise TransportError("server rejected the frame (0x15)")
    raise TransportError(f"unexpected reply {reply!r}")


def send(
    host: str,
    port: int,
    frame: bytes,
    throttle_kbps: float | None = None,
    ack_timeout: float = 10.0,
) -> SendReport:
    """Transmit one length-prefixed frame and wait for the 1-byte acknowledgment."""
    if len(frame) > MAX_FRAME_BYTES:
        raise FrameError(f"frame is {len(frame)} bytes, limit is {MAX_FRAME_BYTES}")
    try:
        with socket.create_connection((host, port), timeout=ack_timeout) as sock:
            return _send_one(sock, frame, throttle_kbps, ack_timeout)
    except AckTimeout:
        raise
    except OSError as exc:
        raise TransportError(f"cannot send to {host}:{port}: {exc}") from exc


def send_many(
    host: str,
    port: int,
    frames: list[bytes],
    throttle_kbps: float | None = None,
    ack_timeout: float = 10.0,
) -> list[SendReport]:
    """Stream several frames over one connection (needs a persistent-mode server)."""
    for frame in frames:
        if len(frame) > MAX_FRAME_BYTES:
            raise FrameError(f"frame is {len(frame)} bytes, limit is {MAX_FRAME_BYTES}")
    try:
        with socket.create_connection((host, port), timeout=ack_timeout) as sock:
            return [_send_one(sock, f, throttle_kbps, ack_timeout) for f in frames]
    except AckTimeout:
        raise
    except OSError as exc:
        raise TransportError(f"cannot send to {host}:{port}: {exc}") from exc


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(min(65536, n - len(buf)))
        if not chunk:
            return None
        buf += chunk
    return buf


class _FrameHandler(socketserver.BaseRequestHandler):
    def handle(self):
        server: TokenServer = self.server  # type: ignore[assignment]
        try:
            self.request.settimeout(server.io_timeout)
            while True:
                prefix = _recv_exact(self.request, 4)
                if prefix is None:
                    return
                (length,) = struct.unpack("<I", prefix)
                if length > server.max_frame:
                    self.request.sendall(NAK)
                    return
                frame = _recv_exact(self.request, length)
                if frame is None:
                    return
                try:
                    unpack(frame)
                except FrameError:
                    self.request.sendall(NAK)
                    return
                server.store(frame)
                self.request.sendall(ACK)
                if not server.persistent:
                    return
        except OSError:
            pass  # peer vanished mid-handshake; the server must stay alive


class TokenServer(socketserver.ThreadingTCPServer):
    """Accepts framed token uploads and stores them content-addressed in a sink dir."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(
        self,
        host: str,
        port: int,
        sink: Path | str,
        max_frame: int = MAX_FRAME_BYTES,
        io_timeout: float = 10.0,
        persistent: bool = False,
    ):
        self.sink = Path(sink)
        self.max_frame = max_frame
        self.io_timeout = io_timeout
        self.persistent = persistent
        try:
            self.sink.mkdir(parents=True, exist_ok=True)
            super().__init__((host, port), _FrameHandler)
        except OSError as exc:
            raise StartupError(f"cannot start server on {host}:{port}: {exc}") from exc

    @property
    def port(self) -> int:
        return self.server_address[1]

    def store(self, frame: bytes) -> Path:
        """Write the frame atomically as <sha256>.tok; re-sends are idempotent."""
        digest = hashlib.sha256(frame).hexdigest()
        target = self.sink / f"{digest}.tok"
        if target.exists():
            return target
        fd, tmp_name = tempfile.mkstemp(dir=self.sink, suffix=".part")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(frame)
            os.replace(tmp_name, target)
        except OSError:
            try:
                os.unlink(tmp_name)
            except OSError:
                pass
            raise
        return target

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread
