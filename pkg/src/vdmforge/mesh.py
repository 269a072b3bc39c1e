"""Dense planar grid mesh: construction from a VDM, Laplacian, normals, OBJ I/O.

Topology is fixed for the lifetime of a mesh; only vertex positions change.
Vertex (i, j) has index j * grid_w + i. Quads split along the lower-left to
upper-right diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .vdm import VdmImage, VdmScale, vdm_to_world


class MeshError(ValueError):
    pass


@dataclass
class GridMesh:
    grid_w: int
    grid_h: int
    vertices: np.ndarray       # (V, 3) float64, the optimization variable
    faces: np.ndarray          # (F, 3) int32
    rest_positions: np.ndarray  # (V, 3) float64 planar rest state
    plane_side: float = 1.0

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    def copy(self) -> "GridMesh":
        return GridMesh(self.grid_w, self.grid_h, self.vertices.copy(),
                        self.faces, self.rest_positions, self.plane_side)


def grid_faces(grid_w: int, grid_h: int) -> np.ndarray:
    i, j = np.meshgrid(np.arange(grid_w - 1), np.arange(grid_h - 1))
    a = (j * grid_w + i).ravel()          # lower-left
    b = a + 1                             # lower-right
    c = a + grid_w                        # upper-left
    d = c + 1                             # upper-right
    tris = np.concatenate([np.stack([a, b, d], 1), np.stack([a, d, c], 1)])
    return np.ascontiguousarray(tris, dtype=np.int32)


def build_grid_mesh(vdm: VdmImage, scale: VdmScale = VdmScale()) -> GridMesh:
    """Planar grid spanning [-side/2, side/2]^2 displaced by the VDM."""
    w, h = vdm.width, vdm.height
    side = scale.plane_side
    x = np.linspace(-side / 2, side / 2, w)
    y = np.linspace(-side / 2, side / 2, h)
    xx, yy = np.meshgrid(x, y)
    rest = np.stack([xx, yy, np.zeros_like(xx)], axis=-1).reshape(-1, 3)
    disp = vdm_to_world(vdm, scale).reshape(-1, 3)
    return GridMesh(w, h, rest + disp, grid_faces(w, h), rest, side)


def mesh_edges(faces: np.ndarray) -> np.ndarray:
    """Unique undirected edges (E, 2), lower index first."""
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0)


def uniform_laplacian(mesh: GridMesh) -> sp.csc_matrix:
    """Combinatorial Laplacian: degree on the diagonal, -1 per edge."""
    v = mesh.n_vertices
    e = mesh_edges(mesh.faces)
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    adj = sp.coo_matrix((np.ones(2 * len(e)), (rows, cols)), shape=(v, v))
    deg = sp.diags(np.asarray(adj.sum(axis=1)).ravel())
    return (deg - adj).tocsc()


def face_normals(mesh: GridMesh, normalized: bool = True) -> np.ndarray:
    v = mesh.vertices
    f = mesh.faces
    n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    if not normalized:
        return n
    lens = np.linalg.norm(n, axis=1)
    bad = np.nonzero(lens < 1e-15)[0]
    if bad.size:
        raise MeshError(f"degenerate zero-area face {bad[0]}")
    return n / lens[:, None]


def vertex_normals(mesh: GridMesh) -> np.ndarray:
    """Area-weighted average of incident face normals, normalized."""
    fn = face_normals(mesh, normalized=False)  # magnitude = 2 * area
    vn = np.zeros_like(mesh.vertices)
    for k in range(3):
        np.add.at(vn, mesh.faces[:, k], fn)
    lens = np.linalg.norm(vn, axis=1)
    bad = np.nonzero(lens < 1e-15)[0]
    if bad.size:
        raise MeshError(f"vertex {bad[0]} has zero accumulated normal")
    return vn / lens[:, None]


def save_obj(mesh: GridMesh, path) -> None:
    with open(path, "w") as f:
        f.write("# vdmforge grid mesh %dx%d\n" % (mesh.grid_w, mesh.grid_h))
        for p in mesh.vertices:
            f.write("v %.9g %.9g %.9g\n" % (p[0], p[1], p[2]))
        for a, b, c in mesh.faces + 1:
            f.write("f %d %d %d\n" % (a, b, c))


def load_obj_grid(path, plane_side: float = 1.0) -> GridMesh:
    """Load an OBJ written by save_obj back into grid-mesh form.

    The vertex count must be a perfect square; rest positions are
    regenerated as the uniform planar grid of the given side length.
    """
    verts = []
    with open(path) as f:
        for line in f:
            if line.startswith("v "):
                verts.append([float(t) for t in line.split()[1:4]])
    v = np.asarray(verts, dtype=np.float64)
    n = int(round(np.sqrt(len(v))))
    if n * n != len(v) or n < 2:
        raise MeshError(f"{path}: vertex count {len(v)} is not a square grid")
    x = np.linspace(-plane_side / 2, plane_side / 2, n)
    xx, yy = np.meshgrid(x, x)
    rest = np.stack([xx, yy, np.zeros_like(xx)], axis=-1).reshape(-1, 3)
    return GridMesh(n, n, v, grid_faces(n, n), rest, plane_side)
