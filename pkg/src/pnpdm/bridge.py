"""Framed stdio protocol for serving the denoiser interface out-of-process.

An external program (e.g. a trained diffusion-network runner) reads request
frames on stdin and writes response frames on stdout, so learned priors plug
in without binding this package to a deep-learning stack.

Wire format, little-endian throughout:

* request:  magic ``PNPD``, u32 frame-type=1, f64 sigma, u32 height,
  u32 width, then height*width f32 pixels row-major
* response: magic ``PNPD``, u32 frame-type=2, u32 height, u32 width, pixels
* error:    magic ``PNPD``, u32 frame-type=3, u32 byte-length, UTF-8 message

Pixels cross the wire at 32-bit precision (quantization <= 1e-6 on [-2, 2]).
A bridge instance is exclusive: strictly one request in flight.
"""

from __future__ import annotations

import os
import select
import struct
import subprocess
import time
from dataclasses import dataclass
from typing import BinaryIO, Sequence

import numpy as np

from pnpdm.images import as_image

MAGIC = b"PNPD"
FRAME_REQUEST = 1
FRAME_RESPONSE = 2
FRAME_ERROR = 3

_PREFIX = struct.Struct("<4sI")
_DIMS = struct.Struct("<II")


class BridgeError(RuntimeError):
    """Base class for bridge failures."""


class BridgeTimeoutError(BridgeError):
    """No complete response within the configured timeout."""


class BridgeProcessError(BridgeError):
    """External process exited or its pipes closed."""


class BridgeFrameError(BridgeError):
    """Malformed frame on the wire."""


class BridgeShapeError(BridgeError):
    """Response image dimensions differ from the request."""


class BridgeRemoteError(BridgeError):
    """Server answered with an error frame; carries its message."""


def encode_request(x: np.ndarray, sigma: float) -> bytes:
    x = as_image(x)
    h, w = x.shape
    return (_PREFIX.pack(MAGIC, FRAME_REQUEST) + struct.pack("<d", float(sigma))
            + _DIMS.pack(h, w) + x.astype("<f4").tobytes())


def encode_response(img: np.ndarray) -> bytes:
    img = as_image(img)
    h, w = img.shape
    return _PREFIX.pack(MAGIC, FRAME_RESPONSE) + _DIMS.pack(h, w) \
        + img.astype("<f4").tobytes()


def encode_error(message: str) -> bytes:
    payload = message.encode("utf-8")
    return _PREFIX.pack(MAGIC, FRAME_ERROR) + struct.pack("<I", len(payload)) + payload


def read_frame(stream: BinaryIO):
    """Read one frame from a blocking stream; None on clean EOF at a boundary.

    Returns (FRAME_REQUEST, image, sigma), (FRAME_RESPONSE, image) or
    (FRAME_ERROR, message).
    """
    prefix = stream.read(_PREFIX.size)
    if not prefix:
        return None
    if len(prefix) < _PREFIX.size:
        raise BridgeFrameError("truncated frame prefix")
    magic, frame_type = _PREFIX.unpack(prefix)
    if magic != MAGIC:
        raise BridgeFrameError(f"bad magic {magic!r}")
    if frame_type == FRAME_REQUEST:
        head = _read_exact(stream, 8 + _DIMS.size)
        (sigma,) = struct.unpack_from("<d", head)
        h, w = _DIMS.unpack_from(head, 8)
        return FRAME_REQUEST, _read_pixels(stream, h, w), sigma
    if frame_type == FRAME_RESPONSE:
        h, w = _DIMS.unpack(_read_exact(stream, _DIMS.size))
        return FRAME_RESPONSE, _read_pixels(stream, h, w)
    if frame_type == FRAME_ERROR:
        (length,) = struct.unpack("<I", _read_exact(stream, 4))
        if length > 1 << 20:
            raise BridgeFrameError(f"unreasonable error-message length {length}")
        return FRAME_ERROR, _read_exact(stream, length).decode("utf-8", "replace")
    raise BridgeFrameError(f"unknown frame type {frame_type}")


def _read_exact(stream: BinaryIO, count: int) -> bytes:
    data = stream.read(count)
    if data is None or len(data) < count:
        raise BridgeFrameError("truncated frame body")
    return data


def _read_pixels(stream: BinaryIO, h: int, w: int) -> np.ndarray:
    if h < 1 or w < 1 or h > 1 << 16 or w > 1 << 16:
        raise BridgeFrameError(f"frame dimensions {h}x{w} out of range")
    raw = _read_exact(stream, 4 * h * w)
    return np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(h, w)


@dataclass(frozen=True)
class BridgeConfig:
    command: Sequence[str]
    timeout: float = 30.0
    restart_on_crash: bool = False

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError(f"timeout must be > 0, got {self.timeout}")
        if not self.command:
            raise ValueError("command must be non-empty")


class BridgeDenoiser:
    """Client side of the protocol; spawns and talks to the external process."""

    def __init__(self, config: BridgeConfig):
        self.config = config
        self._proc: subprocess.Popen | None = None
        self._buffer = b""
        self._start()

    def _start(self):
        self._buffer = b""
        self._proc = subprocess.Popen(
            list(self.config.command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )

    def denoise(self, x: np.ndarray, sigma: float) -> np.ndarray:
        x = as_image(x)
        self._ensure_alive()
        try:
            self._proc.stdin.write(encode_request(x, sigma))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BridgeProcessError(f"external process closed stdin: {exc}") from exc
        frame = self._read_response()
        if frame[0] == FRAME_ERROR:
            raise BridgeRemoteError(frame[1])
        response = frame[1]
        if response.shape != x.shape:
            raise BridgeShapeError(
                f"response shape {response.shape} != request shape {x.shape}"
            )
        return response

    def _ensure_alive(self):
        if self._proc is not None and self._proc.poll() is None:
            return
        if self._proc is not None and self.config.restart_on_crash:
            self._start()
            return
        code = None if self._proc is None else self._proc.returncode
        raise BridgeProcessError(f"external process not running (exit code {code})")

    def _read_response(self):
        deadline = time.monotonic() + self.config.timeout
        fd = self._proc.stdout.fileno()
        while True:
            frame = self._try_parse()
            if frame is not None:
                return frame
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise BridgeTimeoutError(
                    f"no response within {self.config.timeout} s"
                )
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                raise BridgeTimeoutError(
                    f"no response within {self.config.timeout} s"
                )
            chunk = os.read(fd, 1 << 20)
            if not chunk:
                code = self._proc.poll()
                raise BridgeProcessError(
                    f"external process closed stdout (exit code {code})"
                )
            self._buffer += chunk

    def _try_parse(self):
        """Parse one complete response frame out of the buffer, if present.

        Returns None while the buffer holds only a partial frame; raises
        BridgeFrameError as soon as the received bytes are provably invalid.
        """
        buf = self._buffer
        if len(buf) < _PREFIX.size:
            return None
        magic, frame_type = _PREFIX.unpack_from(buf)
        if magic != MAGIC:
            raise BridgeFrameError(f"bad magic {magic!r}")
        if frame_type == FRAME_RESPONSE:
            if len(buf) < _PREFIX.size + _DIMS.size:
                return None
            h, w = _DIMS.unpack_from(buf, _PREFIX.size)
            if h < 1 or w < 1 or h > 1 << 16 or w > 1 << 16:
                raise BridgeFrameError(f"frame dimensions {h}x{w} out of range")
            total = _PREFIX.size + _DIMS.size + 4 * h * w
            if len(buf) < total:
                return None
            pixels = np.frombuffer(
                buf, dtype="<f4", count=h * w, offset=_PREFIX.size + _DIMS.size
            ).astype(np.float64).reshape(h, w)
            self._buffer = buf[total:]
            return FRAME_RESPONSE, pixels
        if frame_type == FRAME_ERROR:
            if len(buf) < _PREFIX.size + 4:
                return None
            (length,) = struct.unpack_from("<I", buf, _PREFIX.size)
            if length > 1 << 20:
                raise BridgeFrameError(f"unreasonable error-message length {length}")
            total = _PREFIX.size + 4 + length
            if len(buf) < total:
                return None
            message = buf[_PREFIX.size + 4 : total].decode("utf-8", "replace")
            self._buffer = buf[total:]
            return FRAME_ERROR, message
        raise BridgeFrameError(f"unexpected frame type {frame_type} from server")

    def close(self):
        if self._proc is None:
            return
        try:
            if self._proc.stdin:
                self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()
        self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
