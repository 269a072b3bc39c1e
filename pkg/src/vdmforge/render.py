"""Software normal-map renderer with a vertex-gradient backpropagation path.

Forward pass: numba rasterizer producing per-pixel face index, screen-space
barycentrics and depth, plus the encoded world-space normal image.
Backward pass: the attribute pipeline (vertex normals, projection,
barycentrics, encoding) is replayed in torch and differentiated; visibility
is held fixed (no silhouette gradients).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import torch
from numba import njit

from .mesh import GridMesh, vertex_normals

BACKGROUND = np.array([0.5, 0.5, 1.0], dtype=np.float64)
NEAR_CLIP = 1e-3


@dataclass(frozen=True)
class Camera:
    elevation: float
    azimuth: float
    radius: float
    fov: float = np.deg2rad(45.0)
    look_at: tuple = (0.0, 0.0, 0.0)
    resolution: int = 128

    def position(self) -> np.ndarray:
        ce = np.cos(self.elevation)
        return np.asarray(self.look_at) + self.radius * np.array([
            ce * np.cos(self.azimuth), ce * np.sin(self.azimuth), np.sin(self.elevation)])

    def basis(self):
        """Right/up/forward axes of the view frame."""
        pos = self.position()
        fwd = np.asarray(self.look_at, dtype=np.float64) - pos
        fwd /= np.linalg.norm(fwd)
        up = np.array([0.0, 0.0, 1.0])
        if np.linalg.norm(np.cross(fwd, up)) < 1e-8:
            up = np.array([0.0, 1.0, 0.0])
        right = np.cross(fwd, up)
        right /= np.linalg.norm(right)
        true_up = np.cross(right, fwd)
        return pos, right, true_up, fwd


@dataclass(frozen=True)
class CameraConfig:
    radius: float = 2.0
    fov: float = np.deg2rad(45.0)
    look_at: tuple = (0.0, 0.0, 0.0)
    resolution: int = 128
    max_elevation: float = np.pi / 3


def sample_cameras(rng: np.random.Generator, n: int,
                   config: CameraConfig = CameraConfig()) -> list:
    """n random orbit cameras: elevation ~ U(0, pi/3), azimuth ~ U(0, 2*pi)."""
    if n < 1:
        raise ValueError("need at least one camera")
    cams = []
    for _ in range(n):
        elev = rng.uniform(0.0, config.max_elevation)
        azim = rng.uniform(0.0, 2 * np.pi)
        cams.append(Camera(elev, azim, config.radius, config.fov,
                           config.look_at, config.resolution))
    return cams


@dataclass
class NormalRender:
    image: np.ndarray       # (H, W, 3) float64 in [0, 1]
    face_index: np.ndarray  # (H, W) int32, -1 for background
    bary: np.ndarray        # (H, W, 3) float64 screen-space barycentrics
    depth: np.ndarray       # (H, W) float64, +inf for background
    camera: Camera = None

    @property
    def resolution(self) -> int:
        return self.image.shape[0]


def project_vertices(vertices: np.ndarray, camera: Camera):
    """Screen coordinates (V, 2) in pixels and view depth (V,)."""
    pos, right, up, fwd = camera.basis()
    rel = vertices - pos
    xc = rel @ right
    yc = rel @ up
    zc = rel @ fwd
    t = np.tan(camera.fov / 2)
    res = camera.resolution
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = (xc / (zc * t) + 1.0) * 0.5 * res
        sy = (1.0 - yc / (zc * t)) * 0.5 * res
    return np.stack([sx, sy], axis=1), zc


@njit(cache=True)
def _rasterize(screen, zc, faces, res):
    face_index = np.full((res, res), -1, dtype=np.int32)
    bary = np.zeros((res, res, 3))
    depth = np.full((res, res), np.inf)
    for fi in range(faces.shape[0]):
        ia, ib, ic = faces[fi, 0], faces[fi, 1], faces[fi, 2]
        if zc[ia] < NEAR_CLIP or zc[ib] < NEAR_CLIP or zc[ic] < NEAR_CLIP:
            continue
        ax, ay = screen[ia, 0], screen[ia, 1]
        bx, by = screen[ib, 0], screen[ib, 1]
        cx, cy = screen[ic, 0], screen[ic, 1]
        area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if abs(area) < 1e-14:
            continue
        x0 = max(0, int(np.floor(min(ax, bx, cx) - 0.5)))
        x1 = min(res - 1, int(np.ceil(max(ax, bx, cx) + 0.5)))
        y0 = max(0, int(np.floor(min(ay, by, cy) - 0.5)))
        y1 = min(res - 1, int(np.ceil(max(ay, by, cy) + 0.5)))
        for py in range(y0, y1 + 1):
            for px in range(x0, x1 + 1):
                qx = px + 0.5
                qy = py + 0.5
                w0 = (bx - qx) * (cy - qy) - (by - qy) * (cx - qx)
                w1 = (cx - qx) * (ay - qy) - (cy - qy) * (ax - qx)
                w2 = (ax - qx) * (by - qy) - (ay - qy) * (bx - qx)
                if area > 0:
                    inside = w0 >= 0 and w1 >= 0 and w2 >= 0
                else:
                    inside = w0 <= 0 and w1 <= 0 and w2 <= 0
                if not inside:
                    continue
                b0 = w0 / area
                b1 = w1 / area
                b2 = w2 / area
                # 1/z interpolates linearly in screen space
                inv_z = b0 / zc[ia] + b1 / zc[ib] + b2 / zc[ic]
                z = 1.0 / inv_z
                if z < depth[py, px]:
                    depth[py, px] = z
                    face_index[py, px] = fi
                    bary[py, px, 0] = b0
                    bary[py, px, 1] = b1
                    bary[py, px, 2] = b2
    return face_index, bary, depth


def encode_normals(n: np.ndarray) -> np.ndarray:
    return (n + 1.0) * 0.5


def decode_normals(rgb: np.ndarray) -> np.ndarray:
    return rgb * 2.0 - 1.0


def rasterize_normals(mesh: GridMesh, camera: Camera) -> NormalRender:
    """Depth-buffered hard rasterization of the world-space normal map."""
    pos = camera.position()
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    if np.all(pos >= lo) and np.all(pos <= hi):
        warnings.warn("camera is inside the mesh bounding box", stacklevel=2)

    screen, zc = project_vertices(mesh.vertices, camera)
    faces = np.ascontiguousarray(mesh.faces, dtype=np.int32)
    face_index, bary, depth = _rasterize(screen, zc, faces, camera.resolution)

    vn = vertex_normals(mesh)
    res = camera.resolution
    image = np.empty((res, res, 3), dtype=np.float64)
    image[:] = BACKGROUND
    cov = face_index >= 0
    if cov.any():
        f = faces[face_index[cov]]          # (P, 3)
        b = bary[cov]                       # (P, 3)
        n = np.einsum("pk,pkc->pc", b, vn[f])
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        image[cov] = encode_normals(n)
    return NormalRender(image, face_index, bary, depth, camera)


def _torch_pixel_normals(verts: torch.Tensor, faces_t: torch.Tensor,
                         camera: Camera, face_index: np.ndarray):
    """Differentiable replay of the covered-pixel normal encoding."""
    fn = torch.cross(verts[faces_t[:, 1]] - verts[faces_t[:, 0]],
                     verts[faces_t[:, 2]] - verts[faces_t[:, 0]], dim=1)
    vn = torch.zeros_like(verts)
    for k in range(3):
        vn = vn.index_add(0, faces_t[:, k], fn)
    vn = vn / vn.norm(dim=1, keepdim=True)

    pos, right, up, fwd = camera.basis()
    frame = torch.tensor(np.stack([right, up, fwd]), dtype=verts.dtype)
    rel = (verts - torch.tensor(pos, dtype=verts.dtype)) @ frame.T
    t = np.tan(camera.fov / 2)
    res = camera.resolution
    sx = (rel[:, 0] / (rel[:, 2] * t) + 1.0) * 0.5 * res
    sy = (1.0 - rel[:, 1] / (rel[:, 2] * t)) * 0.5 * res

    py, px = np.nonzero(face_index >= 0)
    fidx = face_index[py, px]
    fv = faces_t[torch.from_numpy(fidx.astype(np.int64))]  # (P, 3)
    qx = torch.tensor(px + 0.5, dtype=verts.dtype)
    qy = torch.tensor(py + 0.5, dtype=verts.dtype)
    ax, ay = sx[fv[:, 0]], sy[fv[:, 0]]
    bx, by = sx[fv[:, 1]], sy[fv[:, 1]]
    cx, cy = sx[fv[:, 2]], sy[fv[:, 2]]
    area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    w0 = (bx - qx) * (cy - qy) - (by - qy) * (cx - qx)
    w1 = (cx - qx) * (ay - qy) - (cy - qy) * (ax - qx)
    w2 = (ax - qx) * (by - qy) - (ay - qy) * (bx - qx)
    b = torch.stack([w0, w1, w2], dim=1) / area.unsqueeze(1)

    n = (b.unsqueeze(2) * vn[fv]).sum(dim=1)
    n = n / n.norm(dim=1, keepdim=True)
    rgb = (n + 1.0) * 0.5
    return rgb, py, px


def backprop_to_vertices(render: NormalRender, pixel_grads: np.ndarray,
                         mesh: GridMesh) -> np.ndarray:
    """Pull pixel gradients (d loss / d rgb) back to per-vertex gradients."""
    if pixel_grads.shape != render.image.shape:
        raise ValueError(
            f"pixel gradient shape {pixel_grads.shape} != image {render.image.shape}")
    if not np.isfinite(pixel_grads).all():
        raise ValueError("pixel gradients contain non-finite values")
    if not (render.face_index >= 0).any():
        return np.zeros_like(mesh.vertices)

    verts = torch.tensor(mesh.vertices, dtype=torch.float64, requires_grad=True)
    faces_t = torch.from_numpy(mesh.faces.astype(np.int64))
    rgb, py, px = _torch_pixel_normals(verts, faces_t, render.camera, render.face_index)
    g = torch.tensor(pixel_grads[py, px], dtype=torch.float64)
    (rgb * g).sum().backward()
    return verts.grad.numpy()


def render_to_png(render: NormalRender, path) -> None:
    from PIL import Image
    arr = np.clip(render.image * 255.0 + 0.5, 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path, format="PNG")
