"""GuidanceFrame wire protocol, version 1 — sidecar-side implementation.

Frame layout: u32 little-endian header length, JSON header, then a raw
little-endian float32 payload of exactly n_images*width*height*3 values
(image-major, row-major, channel-last).

This is a deliberately independent implementation of the same wire format the
optimizer speaks, so protocol drift shows up as an interop failure rather than
being masked by shared code.
"""

from __future__ import annotations

import json
import socket
import struct

import numpy as np

PROTOCOL_VERSION = 1


class ProtocolError(RuntimeError):
    def __init__(self, message: str, byte_offset: int | None = None):
        if byte_offset is not None:
            message = f"{message} (at byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


def payload_nbytes(header: dict) -> int:
    return (header.get("n_images", 0) * header.get("width", 0)
            * header.get("height", 0) * 3 * 4)


def encode_frame(header: dict, payload: np.ndarray | None = None) -> bytes:
    head = dict(header)
    head.setdefault("protocol_version", PROTOCOL_VERSION)
    body = b"" if payload is None else np.ascontiguousarray(
        payload, dtype="<f4").tobytes()
    expected = payload_nbytes(head)
    if len(body) != expected:
        raise ProtocolError(
            f"payload is {len(body)} bytes, header implies {expected}")
    hjson = json.dumps(head).encode()
    return struct.pack("<I", len(hjson)) + hjson + body


def decode_frame(buf: bytes):
    """Decode one frame; returns (header, payload, bytes_consumed)."""
    if len(buf) < 4:
        raise ProtocolError("truncated frame: missing header length",
                            byte_offset=len(buf))
    (hlen,) = struct.unpack_from("<I", buf, 0)
    if len(buf) < 4 + hlen:
        raise ProtocolError("truncated frame: incomplete header",
                            byte_offset=len(buf))
    try:
        header = json.loads(buf[4:4 + hlen])
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed header JSON: {exc}", byte_offset=4) from exc
    plen = payload_nbytes(header)
    end = 4 + hlen + plen
    if len(buf) < end:
        raise ProtocolError("truncated frame: incomplete payload",
                            byte_offset=len(buf))
    payload = None
    if plen:
        payload = np.frombuffer(buf[4 + hlen:end], dtype="<f4").reshape(
            header["n_images"], header["height"], header["width"], 3)
    return header, payload, end


def _recv_exact(sock: socket.socket, n: int, offset: int) -> bytes:
    chunks = b""
    while len(chunks) < n:
        part = sock.recv(n - len(chunks))
        if not part:
            raise ProtocolError("connection closed mid-frame",
                                byte_offset=offset + len(chunks))
        chunks += part
    return chunks


def read_frame(sock: socket.socket):
    raw = _recv_exact(sock, 4, 0)
    (hlen,) = struct.unpack("<I", raw)
    try:
        header = json.loads(_recv_exact(sock, hlen, 4))
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed header JSON: {exc}", byte_offset=4) from exc
    plen = payload_nbytes(header)
    payload = None
    if plen:
        payload = np.frombuffer(_recv_exact(sock, plen, 4 + hlen),
                                dtype="<f4").reshape(
            header["n_images"], header["height"], header["width"], 3)
    return header, payload
