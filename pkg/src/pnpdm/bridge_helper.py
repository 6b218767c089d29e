"""Reference denoiser server for the framed stdio protocol.

Used by CI to exercise the bridge without external dependencies::

    python -m pnpdm.bridge_helper --prior gaussian --mean 0.5 --variance 0.04
    python -m pnpdm.bridge_helper --prior echo

``--delay`` sleeps before each response (timeout testing).
"""

from __future__ import annotations

import argparse
import sys
import time

from pnpdm.analytic import GaussianPrior
from pnpdm.bridge import FRAME_REQUEST, BridgeFrameError, encode_error, encode_response, read_frame


def serve(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pnpdm-bridge-helper")
    parser.add_argument("--prior", choices=("echo", "gaussian"), default="echo")
    parser.add_argument("--mean", type=float, default=0.5)
    parser.add_argument("--variance", type=float, default=0.04)
    parser.add_argument("--delay", type=float, default=0.0)
    args = parser.parse_args(argv)

    prior = GaussianPrior(mean=args.mean, variance=args.variance)
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    while True:
        try:
            frame = read_frame(stdin)
        except BridgeFrameError as exc:
            stdout.write(encode_error(str(exc)))
            stdout.flush()
            return 1
        if frame is None:
            return 0
        if frame[0] != FRAME_REQUEST:
            stdout.write(encode_error(f"expected a request frame, got type {frame[0]}"))
            stdout.flush()
            return 1
        _, image, sigma = frame
        if args.delay > 0:
            time.sleep(args.delay)
        if args.prior == "echo":
            result = image
        else:
            result = prior.denoise(image, sigma)
        stdout.write(encode_response(result))
        stdout.flush()


if __name__ == "__main__":
    sys.exit(serve())
