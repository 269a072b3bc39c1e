"""Serve a GuidanceSession over the GuidanceFrame protocol."""

from __future__ import annotations

import logging
import socket

import numpy as np

from .guidance import GuidanceSession
from .protocol import ProtocolError, encode_frame, read_frame

log = logging.getLogger(__name__)


def _parse_endpoint(endpoint: str):
    host, _, port = endpoint.rpartition(":")
    return host or "127.0.0.1", int(port)


def serve_guidance(endpoint: str, session: GuidanceSession,
                   max_requests: int | None = None):
    """Listen on endpoint and answer guidance requests, one connection at a
    time, one request in flight. Returns after max_requests (tests) or runs
    until interrupted."""
    host, port = _parse_endpoint(endpoint)
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((host, port))
    srv.listen(1)
    log.info("sidecar serving %s guidance on %s:%d", session.mode, host,
             srv.getsockname()[1])
    served = 0
    try:
        while max_requests is None or served < max_requests:
            conn, _ = srv.accept()
            served += handle_connection(conn, session, max_requests)
    finally:
        srv.close()


def handle_connection(conn: socket.socket, session: GuidanceSession,
                      max_requests: int | None = None) -> int:
    served = 0
    with conn:
        while max_requests is None or served < max_requests:
            try:
                header, payload = read_frame(conn)
            except ProtocolError:
                return served
            kind = header.get("type")
            if kind == "handshake":
                conn.sendall(encode_frame({
                    "type": "handshake",
                    "capabilities": {
                        "max_resolution": session.model.max_resolution,
                        "supports_converged_flag": False}}))
                continue
            if kind != "request":
                conn.sendall(encode_frame(
                    {"type": "error", "message": f"unexpected frame {kind!r}"}))
                return served
            images = payload.astype(np.float64)
            grads, loss = session(images)
            grads32 = grads.astype(np.float32)
            conn.sendall(encode_frame(
                {"type": "response", "iteration": header.get("iteration"),
                 "n_images": grads32.shape[0], "width": grads32.shape[2],
                 "height": grads32.shape[1], "loss": loss,
                 "converged": False}, grads32))
            served += 1
    return served
