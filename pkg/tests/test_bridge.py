"""Framed stdio denoiser protocol: codec, loopback, fault injection."""

import io
import subprocess
import sys

import numpy as np
import pytest

from pnpdm.analytic import GaussianPrior
from pnpdm.bridge import (
    FRAME_ERROR,
    FRAME_REQUEST,
    FRAME_RESPONSE,
    MAGIC,
    BridgeConfig,
    BridgeDenoiser,
    BridgeFrameError,
    BridgeProcessError,
    BridgeRemoteError,
    BridgeShapeError,
    BridgeTimeoutError,
    encode_error,
    encode_request,
    encode_response,
    read_frame,
)

HELPER = [sys.executable, "-m", "pnpdm.bridge_helper"]


def _server(script: str) -> list[str]:
    return [sys.executable, "-c", script]


def test_request_frame_round_trip():
    img = np.random.default_rng(0).standard_normal((3, 5))
    frame = read_frame(io.BytesIO(encode_request(img, 0.25)))
    assert frame[0] == FRAME_REQUEST
    assert np.allclose(frame[1], img, atol=1e-6)
    assert frame[2] == 0.25


def test_response_and_error_frame_round_trip():
    img = np.random.default_rng(1).random((4, 2))
    kind, back = read_frame(io.BytesIO(encode_response(img)))
    assert kind == FRAME_RESPONSE
    assert np.allclose(back, img, atol=1e-6)
    kind, message = read_frame(io.BytesIO(encode_error("denoiser busted")))
    assert kind == FRAME_ERROR
    assert message == "denoiser busted"


def test_read_frame_eof_and_truncation():
    assert read_frame(io.BytesIO(b"")) is None
    with pytest.raises(BridgeFrameError):
        read_frame(io.BytesIO(MAGIC))  # partial prefix
    with pytest.raises(BridgeFrameError):
        read_frame(io.BytesIO(b"XXXX" + b"\x01\x00\x00\x00"))
    with pytest.raises(BridgeFrameError):
        read_frame(io.BytesIO(MAGIC + (99).to_bytes(4, "little")))
    truncated = encode_response(np.zeros((4, 4)))[:-6]
    with pytest.raises(BridgeFrameError):
        read_frame(io.BytesIO(truncated))


def test_config_validation():
    with pytest.raises(ValueError):
        BridgeConfig(command=["x"], timeout=0.0)
    with pytest.raises(ValueError):
        BridgeConfig(command=[])


def test_echo_loopback():
    img = np.random.default_rng(2).random((6, 7))
    with BridgeDenoiser(BridgeConfig(command=HELPER + ["--prior", "echo"],
                                     timeout=20.0)) as bridge:
        out = bridge.denoise(img, 0.5)
        assert np.max(np.abs(out - img)) < 1e-6
        # repeated round trips over the same process
        out2 = bridge.denoise(img * 2.0 - 0.5, 0.1)
        assert np.max(np.abs(out2 - (img * 2.0 - 0.5))) < 1e-6


def test_gaussian_helper_matches_in_process_prior():
    prior = GaussianPrior(mean=0.3, variance=0.02)
    img = np.random.default_rng(3).random((8, 8))
    command = HELPER + ["--prior", "gaussian", "--mean", "0.3", "--variance", "0.02"]
    with BridgeDenoiser(BridgeConfig(command=command, timeout=20.0)) as bridge:
        for sigma in (0.05, 0.3, 1.0):
            out = bridge.denoise(img, sigma)
            assert np.max(np.abs(out - prior.denoise(img, sigma))) < 1e-6


def test_dead_process_raises_process_error():
    with BridgeDenoiser(BridgeConfig(command=HELPER, timeout=20.0)) as bridge:
        bridge.denoise(np.zeros((2, 2)), 0.1)
        bridge._proc.kill()
        bridge._proc.wait()
        with pytest.raises(BridgeProcessError):
            bridge.denoise(np.zeros((2, 2)), 0.1)


def test_restart_on_crash_recovers():
    cfg = BridgeConfig(command=HELPER, timeout=20.0, restart_on_crash=True)
    with BridgeDenoiser(cfg) as bridge:
        bridge.denoise(np.zeros((2, 2)), 0.1)
        bridge._proc.kill()
        bridge._proc.wait()
        out = bridge.denoise(np.full((2, 2), 0.25), 0.1)
        assert np.max(np.abs(out - 0.25)) < 1e-6


def test_garbage_output_raises_frame_error():
    script = (
        "import os, sys\n"
        "os.write(1, b'not a frame at all' * 4)\n"
        "sys.stdin.buffer.read()\n"
    )
    with BridgeDenoiser(BridgeConfig(command=_server(script), timeout=20.0)) as bridge:
        with pytest.raises(BridgeFrameError):
            bridge.denoise(np.zeros((2, 2)), 0.1)


def test_slow_server_raises_timeout_error():
    command = HELPER + ["--delay", "5"]
    with BridgeDenoiser(BridgeConfig(command=command, timeout=0.4)) as bridge:
        with pytest.raises(BridgeTimeoutError):
            bridge.denoise(np.zeros((2, 2)), 0.1)


def test_error_frame_raises_remote_error():
    script = (
        "import sys, time\n"
        "from pnpdm.bridge import read_frame, encode_error\n"
        "read_frame(sys.stdin.buffer)\n"
        "sys.stdout.buffer.write(encode_error('no model loaded'))\n"
        "sys.stdout.buffer.flush()\n"
        "time.sleep(5)\n"
    )
    with BridgeDenoiser(BridgeConfig(command=_server(script), timeout=20.0)) as bridge:
        with pytest.raises(BridgeRemoteError, match="no model loaded"):
            bridge.denoise(np.zeros((2, 2)), 0.1)


def test_shape_mismatch_raises_shape_error():
    script = (
        "import sys, time\n"
        "from pnpdm.bridge import read_frame, encode_response\n"
        "_, img, sigma = read_frame(sys.stdin.buffer)\n"
        "sys.stdout.buffer.write(encode_response(img[:1]))\n"
        "sys.stdout.buffer.flush()\n"
        "time.sleep(5)\n"
    )
    with BridgeDenoiser(BridgeConfig(command=_server(script), timeout=20.0)) as bridge:
        with pytest.raises(BridgeShapeError):
            bridge.denoise(np.zeros((3, 3)), 0.1)


def test_helper_rejects_non_request_frame():
    proc = subprocess.run(
        HELPER,
        input=encode_response(np.zeros((2, 2))),
        stdout=subprocess.PIPE,
        timeout=30,
    )
    assert proc.returncode == 1
    kind, message = read_frame(io.BytesIO(proc.stdout))
    assert kind == FRAME_ERROR
    assert "request" in message
