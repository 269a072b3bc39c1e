"""VDM raster representation: initialization patterns, EXR/PNG I/O, world scaling.

A VDM stores one 3D displacement vector per pixel (channels X, Y, Z in
dimensionless VDM units). Value 1.0 corresponds to half the side length of
the square base mesh.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from . import exr


class VdmError(ValueError):
    pass


@dataclass(frozen=True)
class VdmImage:
    """W×H×3 float raster of displacement vectors; stored as (H, W, 3)."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float32)
        if d.ndim != 3 or d.shape[2] != 3:
            raise VdmError(f"VDM data must be (H, W, 3), got {d.shape}")
        if d.shape[0] < 2 or d.shape[1] < 2:
            raise VdmError(f"VDM must be at least 2x2, got {d.shape[1]}x{d.shape[0]}")
        if not np.isfinite(d).all():
            raise VdmError("VDM contains non-finite samples")
        d.flags.writeable = False
        object.__setattr__(self, "data", d)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class VdmScale:
    """Maps VDM units to world lengths: value 1.0 = half the plane side."""

    plane_side: float = 1.0

    def __post_init__(self):
        if self.plane_side <= 0:
            raise VdmError(f"plane_side must be positive, got {self.plane_side}")

    @property
    def unit_displacement(self) -> float:
        return 0.5 * self.plane_side


@dataclass(frozen=True)
class SpikeParams:
    center_uv: tuple = (0.5, 0.5)
    radius_uv: float = 0.25
    height: float = 1.0
    profile: str = "cone"


def pixel_uv(width: int, height: int):
    """uv coordinates of pixel centers; pixel (i, j) sits at (i/(W-1), j/(H-1))."""
    u = np.arange(width, dtype=np.float64) / (width - 1)
    v = np.arange(height, dtype=np.float64) / (height - 1)
    return np.meshgrid(u, v)


def make_zero_vdm(resolution: int) -> VdmImage:
    if resolution < 2:
        raise VdmError(f"resolution must be >= 2, got {resolution}")
    return VdmImage(np.zeros((resolution, resolution, 3), dtype=np.float32))


def make_spike_vdm(resolution: int, spike: SpikeParams = SpikeParams()) -> VdmImage:
    """Single radial spike in the Z channel, cone or gaussian profile.

    The center is snapped to the nearest pixel so the peak sample equals
    `height` exactly.
    """
    if resolution < 2:
        raise VdmError(f"resolution must be >= 2, got {resolution}")
    if not (0.0 <= spike.height <= 1.0):
        raise VdmError(f"spike height must be in [0, 1], got {spike.height}")
    if not (0.0 < spike.radius_uv <= 0.5):
        raise VdmError(f"spike radius must be in (0, 0.5], got {spike.radius_uv}")
    if not all(0.0 <= c <= 1.0 for c in spike.center_uv):
        raise VdmError(f"spike center must be in [0,1]^2, got {spike.center_uv}")
    if spike.profile not in ("cone", "gaussian"):
        raise VdmError(f"unknown spike profile {spike.profile!r}")

    cu = np.round(spike.center_uv[0] * (resolution - 1)) / (resolution - 1)
    cv = np.round(spike.center_uv[1] * (resolution - 1)) / (resolution - 1)
    uu, vv = pixel_uv(resolution, resolution)
    d = np.hypot(uu - cu, vv - cv) / spike.radius_uv
    if spike.profile == "cone":
        z = np.maximum(0.0, 1.0 - d)
    else:
        z = np.where(d <= 1.0, np.exp(-4.5 * d * d), 0.0)
    out = np.zeros((resolution, resolution, 3), dtype=np.float32)
    out[:, :, 2] = spike.height * z
    return VdmImage(out)


def vdm_to_world(vdm: VdmImage, scale: VdmScale) -> np.ndarray:
    """Per-pixel world displacement field, (H, W, 3) float64."""
    return vdm.data.astype(np.float64) * scale.unit_displacement


def save_exr(vdm: VdmImage, path) -> None:
    exr.write_exr(path, vdm.data, channel_names=("R", "G", "B"))


def load_exr(path) -> VdmImage:
    img, names = exr.read_exr(path)
    if sorted(names) != ["B", "G", "R"]:
        raise exr.ExrError(
            f"{path}: expected 3 channels R,G,B, found {len(names)}: {names}")
    # map R,G,B -> X,Y,Z regardless of file storage order
    idx = [names.index(c) for c in ("R", "G", "B")]
    return VdmImage(img[:, :, idx])


def load_png(path) -> VdmImage:
    """User-drawn initialization VDM from PNG.

    Grayscale maps to the Z channel (heightfield); RGB maps to X,Y,Z.
    8-bit values divide by 255, 16-bit by 65535.
    """
    raster = _png_array(path)
    if raster.ndim == 2:
        out = np.zeros(raster.shape + (3,), dtype=np.float32)
        out[:, :, 2] = raster
    else:
        out = raster[:, :, :3]
    return VdmImage(out)


def load_mask_png(path) -> np.ndarray:
    """Region mask raster in [0, 1], shape (H, W); RGB input uses the first channel."""
    raster = _png_array(path)
    if raster.ndim == 3:
        raster = raster[:, :, 0]
    return raster


def _png_array(path) -> np.ndarray:
    img = Image.open(path)
    arr = np.asarray(img)
    if arr.dtype == np.uint8:
        return arr.astype(np.float32) / 255.0
    if arr.dtype in (np.uint16, np.int32):
        return arr.astype(np.float32) / 65535.0
    raise VdmError(f"{path}: unsupported PNG bit depth {arr.dtype}")
