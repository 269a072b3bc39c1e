"""Minimal OpenEXR scanline codec for 32-bit float RGB images.

Writes single-part scanline files with ZIP (16-line) compression and reads
back NONE / ZIP / ZIPS compressed files with float channels. This is the
subset every sculpting-package VDM importer consumes.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

MAGIC = 20000630
PIXEL_FLOAT = 2

COMPRESSION_NONE = 0
COMPRESSION_ZIPS = 2
COMPRESSION_ZIP = 3

_LINES_PER_BLOCK = {COMPRESSION_NONE: 1, COMPRESSION_ZIPS: 1, COMPRESSION_ZIP: 16}


class ExrError(IOError):
    pass


def _zip_reorder_predict(raw: bytes) -> bytes:
    # OpenEXR ZIP pre-pass: split bytes into two interleaved halves, then
    # delta-encode; the result compresses far better under deflate.
    src = np.frombuffer(raw, dtype=np.uint8)
    n = src.size
    half = (n + 1) // 2
    buf = np.empty(n, dtype=np.uint8)
    buf[:half] = src[0::2]
    buf[half:] = src[1::2]
    d = buf.astype(np.int16)
    d[1:] = d[1:] - d[:-1] + (128 + 256)
    return d.astype(np.uint8).tobytes()


def _zip_unpredict_interleave(data: bytes) -> bytes:
    arr = np.frombuffer(data, dtype=np.uint8).astype(np.int64)
    arr[1:] -= 128 + 256
    arr = np.cumsum(arr) & 0xFF
    arr = arr.astype(np.uint8)
    n = arr.size
    half = (n + 1) // 2
    out = np.empty(n, dtype=np.uint8)
    out[0::2] = arr[:half]
    out[1::2] = arr[half:]
    return out.tobytes()


def _attr(name: str, typ: str, payload: bytes) -> bytes:
    return name.encode() + b"\0" + typ.encode() + b"\0" + struct.pack("<i", len(payload)) + payload


def _chlist(names) -> bytes:
    out = b""
    for n in sorted(names):
        out += n.encode() + b"\0"
        out += struct.pack("<i", PIXEL_FLOAT)
        out += struct.pack("<BBBB", 0, 0, 0, 0)  # pLinear + reserved
        out += struct.pack("<ii", 1, 1)  # x/y sampling
    return out + b"\0"


def write_exr(path, image: np.ndarray, channel_names=("R", "G", "B"),
              compression: int = COMPRESSION_ZIP) -> None:
    """Write an (H, W, C) float32 array as a scanline EXR file."""
    img = np.ascontiguousarray(image, dtype=np.float32)
    if img.ndim != 3 or img.shape[2] != len(channel_names):
        raise ExrError(f"image shape {img.shape} does not match channels {channel_names}")
    h, w, _ = img.shape
    lines_per_block = _LINES_PER_BLOCK[compression]
    n_blocks = (h + lines_per_block - 1) // lines_per_block

    header = b""
    header += _attr("channels", "chlist", _chlist(channel_names))
    header += _attr("compression", "compression", struct.pack("<B", compression))
    box = struct.pack("<iiii", 0, 0, w - 1, h - 1)
    header += _attr("dataWindow", "box2i", box)
    header += _attr("displayWindow", "box2i", box)
    header += _attr("lineOrder", "lineOrder", struct.pack("<B", 0))
    header += _attr("pixelAspectRatio", "float", struct.pack("<f", 1.0))
    header += _attr("screenWindowCenter", "v2f", struct.pack("<ff", 0.0, 0.0))
    header += _attr("screenWindowWidth", "float", struct.pack("<f", 1.0))
    header += b"\0"

    # channel order within a scanline is alphabetical by name
    order = np.argsort(list(channel_names), kind="stable")
    chunks = []
    for b in range(n_blocks):
        y0 = b * lines_per_block
        y1 = min(y0 + lines_per_block, h)
        rows = []
        for y in range(y0, y1):
            for c in order:
                rows.append(img[y, :, c].tobytes())
        raw = b"".join(rows)
        if compression == COMPRESSION_NONE:
            data = raw
        else:
            packed = zlib.compress(_zip_reorder_predict(raw))
            data = packed if len(packed) < len(raw) else raw
        chunks.append(struct.pack("<ii", y0, len(data)) + data)

    with open(path, "wb") as f:
        f.write(struct.pack("<ii", MAGIC, 2))
        f.write(header)
        offset = 8 + len(header) + 8 * n_blocks
        for c in chunks:
            f.write(struct.pack("<Q", offset))
            offset += len(c)
        for c in chunks:
            f.write(c)


def _read_attrs(f):
    attrs = {}
    while True:
        name = b""
        while True:
            ch = f.read(1)
            if not ch:
                raise ExrError("truncated header")
            if ch == b"\0":
                break
            name += ch
        if not name:
            return attrs
        typ = b""
        while True:
            ch = f.read(1)
            if ch == b"\0":
                break
            typ += ch
        (size,) = struct.unpack("<i", f.read(4))
        attrs[name.decode()] = (typ.decode(), f.read(size))


def _parse_chlist(payload: bytes):
    channels = []
    pos = 0
    while payload[pos] != 0:
        end = payload.index(b"\0", pos)
        name = payload[pos:end].decode()
        pos = end + 1
        (ptype,) = struct.unpack_from("<i", payload, pos)
        channels.append((name, ptype))
        pos += 16
    return channels


def read_exr(path):
    """Read a scanline EXR file; returns ((H, W, C) float32 array, channel names)."""
    with open(path, "rb") as f:
        magic, version = struct.unpack("<ii", f.read(8))
        if magic != MAGIC:
            raise ExrError(f"{path}: not an EXR file")
        if version & 0x200:
            raise ExrError(f"{path}: deep/multipart EXR not supported")
        attrs = _read_attrs(f)
        for req in ("channels", "dataWindow", "compression"):
            if req not in attrs:
                raise ExrError(f"{path}: missing {req} attribute")
        channels = _parse_chlist(attrs["channels"][1])
        for name, ptype in channels:
            if ptype != PIXEL_FLOAT:
                raise ExrError(f"{path}: channel {name} is not 32-bit float")
        x0, y0, x1, y1 = struct.unpack("<iiii", attrs["dataWindow"][1])
        w, h = x1 - x0 + 1, y1 - y0 + 1
        (compression,) = struct.unpack("<B", attrs["compression"][1])
        if compression not in _LINES_PER_BLOCK:
            raise ExrError(f"{path}: unsupported compression {compression}")
        lines_per_block = _LINES_PER_BLOCK[compression]
        n_blocks = (h + lines_per_block - 1) // lines_per_block
        f.read(8 * n_blocks)  # offset table; chunks follow contiguously

        n_ch = len(channels)
        names_sorted = [name for name, _ in channels]
        img = np.empty((h, w, n_ch), dtype=np.float32)
        for _ in range(n_blocks):
            yb, size = struct.unpack("<ii", f.read(8))
            data = f.read(size)
            if len(data) != size:
                raise ExrError(f"{path}: truncated chunk at scanline {yb}")
            rows = min(lines_per_block, h - (yb - y0))
            raw_size = rows * w * 4 * n_ch
            if compression != COMPRESSION_NONE and size != raw_size:
                data = _zip_unpredict_interleave(zlib.decompress(data))
            if len(data) != raw_size:
                raise ExrError(f"{path}: bad chunk size at scanline {yb}")
            block = np.frombuffer(data, dtype=np.float32).reshape(rows, n_ch, w)
            img[yb - y0:yb - y0 + rows] = block.transpose(0, 2, 1)
        return img, names_sorted
