"""Guidance providers behind the deformation loss: an analytic target-shape
oracle for verification, and a length-prefixed binary frame protocol for
external (diffusion) guidance.

Frame layout: u32 little-endian header length, JSON header, then a raw
little-endian float32 payload of exactly n_images*width*height*3 values
(image-major, row-major, channel-last).
"""

from __future__ import annotations

import json
import socket
import struct
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from .mesh import GridMesh
from .render import Camera, rasterize_normals

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 120.0


class GuidanceError(RuntimeError):
    pass


class RetryableGuidanceError(GuidanceError):
    pass


class ProtocolError(GuidanceError):
    def __init__(self, message, byte_offset=None):
        if byte_offset is not None:
            message = f"{message} (at byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


@dataclass
class GuidanceResponse:
    grads: np.ndarray          # (N, H, W, 3) float, d loss / d rgb per view
    loss: float
    converged: bool = False


# --- frame codec ------------------------------------------------------------

def payload_nbytes(header: dict) -> int:
    return header.get("n_images", 0) * header.get("width", 0) * header.get("height", 0) * 3 * 4


def encode_frame(header: dict, payload: np.ndarray | None = None) -> bytes:
    head = dict(header)
    head.setdefault("protocol_version", PROTOCOL_VERSION)
    if payload is None:
        payload_bytes = b""
    else:
        payload_bytes = np.ascontiguousarray(payload, dtype="<f4").tobytes()
    expected = payload_nbytes(head)
    if len(payload_bytes) != expected:
        raise ProtocolError(
            f"payload is {len(payload_bytes)} bytes, header implies {expected}")
    hjson = json.dumps(head).encode()
    return struct.pack("<I", len(hjson)) + hjson + payload_bytes


def decode_frame(buf: bytes):
    """Decode one frame from bytes; returns (header, payload, bytes_consumed)."""
    if len(buf) < 4:
        raise ProtocolError("truncated frame: missing header length", byte_offset=len(buf))
    (hlen,) = struct.unpack_from("<I", buf, 0)
    if len(buf) < 4 + hlen:
        raise ProtocolError("truncated frame: incomplete header", byte_offset=len(buf))
    try:
        header = json.loads(buf[4:4 + hlen])
    except json.JSONDecodeError as e:
        raise ProtocolError(f"malformed header JSON: {e}", byte_offset=4) from e
    plen = payload_nbytes(header)
    end = 4 + hlen + plen
    if len(buf) < end:
        raise ProtocolError("truncated frame: incomplete payload", byte_offset=len(buf))
    payload = None
    if plen:
        flat = np.frombuffer(buf[4 + hlen:end], dtype="<f4")
        payload = flat.reshape(header["n_images"], header["height"], header["width"], 3)
    return header, payload, end


def _recv_exact(sock, n, offset):
    chunks = b""
    while len(chunks) < n:
        part = sock.recv(n - len(chunks))
        if not part:
            raise ProtocolError("connection closed mid-frame",
                                byte_offset=offset + len(chunks))
        chunks += part
    return chunks


def read_frame(sock):
    """Read one frame from a socket; blocks until complete."""
    raw = _recv_exact(sock, 4, 0)
    (hlen,) = struct.unpack("<I", raw)
    hraw = _recv_exact(sock, hlen, 4)
    try:
        header = json.loads(hraw)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"malformed header JSON: {e}", byte_offset=4) from e
    plen = payload_nbytes(header)
    payload = None
    if plen:
        praw = _recv_exact(sock, plen, 4 + hlen)
        flat = np.frombuffer(praw, dtype="<f4")
        payload = flat.reshape(header["n_images"], header["height"], header["width"], 3)
    return header, payload


# --- analytic oracle --------------------------------------------------------

def camera_to_dict(c: Camera) -> dict:
    return {"elevation": c.elevation, "azimuth": c.azimuth, "radius": c.radius,
            "fov": c.fov, "look_at": list(c.look_at), "resolution": c.resolution}


def camera_from_dict(d: dict) -> Camera:
    return Camera(d["elevation"], d["azimuth"], d["radius"], d["fov"],
                  tuple(d["look_at"]), d["resolution"])


class TargetShapeGuidance:
    """Pixel gradients of 0.5*||render(current) - render(target)||^2.

    The reported loss is the summed squared residual over all views.
    """

    def __init__(self, target_mesh: GridMesh, loss_tolerance: float = 0.0):
        self.target_mesh = target_mesh
        self.loss_tolerance = loss_tolerance

    def check_topology(self, mesh: GridMesh):
        if (mesh.grid_w, mesh.grid_h) != (self.target_mesh.grid_w, self.target_mesh.grid_h):
            raise GuidanceError(
                f"target mesh grid {self.target_mesh.grid_w}x{self.target_mesh.grid_h} "
                f"does not match optimized mesh {mesh.grid_w}x{mesh.grid_h}")

    def __call__(self, iteration, renders, cameras) -> GuidanceResponse:
        grads = []
        loss = 0.0
        for render, cam in zip(renders, cameras):
            target = rasterize_normals(self.target_mesh, cam)
            residual = render.image.astype(np.float64) - target.image.astype(np.float64)
            grads.append(residual)
            loss += float((residual ** 2).sum())
        converged = self.loss_tolerance > 0 and loss <= self.loss_tolerance
        return GuidanceResponse(np.stack(grads), loss, converged)


# --- wire transport ---------------------------------------------------------

def _parse_endpoint(endpoint: str):
    host, _, port = endpoint.rpartition(":")
    return host or "127.0.0.1", int(port)


class WireGuidanceClient:
    """GuidanceProvider speaking the frame protocol over a local socket."""

    def __init__(self, endpoint, timeout: float = DEFAULT_TIMEOUT):
        if isinstance(endpoint, socket.socket):
            self.sock = endpoint
        else:
            host, port = _parse_endpoint(endpoint)
            self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.settimeout(timeout)
        self._handshake()

    def _handshake(self):
        hello = {"type": "handshake",
                 "capabilities": {"max_resolution": 4096,
                                 "supports_converged_flag": True}}
        try:
            self.sock.sendall(encode_frame(hello))
            header, _ = read_frame(self.sock)
        except socket.timeout as e:
            raise RetryableGuidanceError(f"handshake timed out: {e}") from e
        if header.get("type") != "handshake":
            raise ProtocolError(f"expected handshake, got {header.get('type')!r}")
        if header.get("protocol_version") != PROTOCOL_VERSION:
            raise ProtocolError(
                f"protocol version mismatch: {header.get('protocol_version')}")
        self.capabilities = header.get("capabilities", {})

    def __call__(self, iteration, renders, cameras) -> GuidanceResponse:
        images = np.stack([r.image for r in renders]).astype(np.float32)
        n, h, w, _ = images.shape
        header = {"type": "request", "iteration": iteration,
                  "n_images": n, "width": w, "height": h,
                  "cameras": [camera_to_dict(c) for c in cameras]}
        try:
            self.sock.sendall(encode_frame(header, images))
            rhead, payload = read_frame(self.sock)
        except socket.timeout as e:
            raise RetryableGuidanceError(f"guidance request timed out: {e}") from e
        if rhead.get("type") != "response":
            raise ProtocolError(f"expected response, got {rhead.get('type')!r}")
        if payload is None or payload.shape != images.shape:
            raise ProtocolError(
                f"gradient shape {None if payload is None else payload.shape} "
                f"does not match request {images.shape}")
        if not np.isfinite(payload).all():
            raise ProtocolError("response payload contains non-finite values")
        return GuidanceResponse(payload.astype(np.float64),
                                float(rhead.get("loss", 0.0)),
                                bool(rhead.get("converged", False)))

    def close(self):
        self.sock.close()


def external_guidance(endpoint, timeout: float = DEFAULT_TIMEOUT) -> WireGuidanceClient:
    return WireGuidanceClient(endpoint, timeout)


def serve_provider(provider, host: str = "127.0.0.1", port: int = 0):
    """Serve a provider over the frame protocol; returns (server_socket, port).

    Call handle_connections(server_socket, provider) on a thread to run it.
    """
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((host, port))
    srv.listen(1)
    return srv, srv.getsockname()[1]


def handle_connection(conn, provider, max_resolution: int = 4096):
    """Answer handshake + request frames on one connection until EOF."""
    with conn:
        while True:
            try:
                header, payload = read_frame(conn)
            except ProtocolError:
                return
            if header.get("type") == "handshake":
                reply = {"type": "handshake",
                         "capabilities": {"max_resolution": max_resolution,
                                          "supports_converged_flag": True}}
                conn.sendall(encode_frame(reply))
                continue
            if header.get("type") != "request":
                raise ProtocolError(f"unexpected frame type {header.get('type')!r}")
            cameras = [camera_from_dict(d) for d in header["cameras"]]
            renders = [SimpleNamespace(image=img, face_index=None) for img in payload]
            resp = provider(header["iteration"], renders, cameras)
            grads = np.asarray(resp.grads, dtype=np.float32)
            rhead = {"type": "response", "iteration": header["iteration"],
                     "n_images": grads.shape[0], "width": grads.shape[2],
                     "height": grads.shape[1], "loss": resp.loss,
                     "converged": resp.converged}
            conn.sendall(encode_frame(rhead, grads))
