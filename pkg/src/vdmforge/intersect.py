"""Mesh self-intersection metric: fraction of faces in a non-adjacent
triangle-triangle interpenetration.

The BVH-accelerated path and the brute-force all-pairs oracle share one
Moller-style intersection predicate, so they agree exactly. Faces sharing a
vertex are never counted as intersecting.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .mesh import GridMesh


@njit(cache=True)
def _cross(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


@njit(cache=True)
def _edge_edge_2d(a0, a1, b0, b1, eps):
    # segment-segment test in 2D
    d1 = a1 - a0
    d2 = b1 - b0
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(denom) < eps:
        return False
    r = b0 - a0
    t = (r[0] * d2[1] - r[1] * d2[0]) / denom
    s = (r[0] * d1[1] - r[1] * d1[0]) / denom
    return eps < t < 1.0 - eps and eps < s < 1.0 - eps


@njit(cache=True)
def _point_in_tri_2d(p, a, b, c, eps):
    s0 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    s1 = (c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0])
    s2 = (a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0])
    return (s0 > eps and s1 > eps and s2 > eps) or (s0 < -eps and s1 < -eps and s2 < -eps)


@njit(cache=True)
def _coplanar_tri_tri(n, p0, p1, p2, q0, q1, q2, eps):
    # project onto the dominant axis plane
    ax = np.abs(n)
    if ax[0] >= ax[1] and ax[0] >= ax[2]:
        i0, i1 = 1, 2
    elif ax[1] >= ax[2]:
        i0, i1 = 0, 2
    else:
        i0, i1 = 0, 1
    P = np.empty((3, 2))
    Q = np.empty((3, 2))
    for k, v in enumerate((p0, p1, p2)):
        P[k, 0] = v[i0]
        P[k, 1] = v[i1]
    for k, v in enumerate((q0, q1, q2)):
        Q[k, 0] = v[i0]
        Q[k, 1] = v[i1]
    for i in range(3):
        for j in range(3):
            if _edge_edge_2d(P[i], P[(i + 1) % 3], Q[j], Q[(j + 1) % 3], eps):
                return True
    if _point_in_tri_2d(P[0], Q[0], Q[1], Q[2], eps):
        return True
    if _point_in_tri_2d(Q[0], P[0], P[1], P[2], eps):
        return True
    return False


@njit(cache=True)
def _interval(proj, d0, d1, d2):
    """Parametric interval where a triangle meets the other triangle's plane.

    proj: projections of the three vertices onto the intersection line,
    d: signed distances to the plane (zero-snapped). Returns (ok, t0, t1).
    """
    dist = np.array([d0, d1, d2])
    lo = np.inf
    hi = -np.inf
    count = 0
    for k in range(3):
        if dist[k] == 0.0:
            lo = min(lo, proj[k])
            hi = max(hi, proj[k])
            count += 1
    for a in range(3):
        b = (a + 1) % 3
        if dist[a] * dist[b] < 0.0:
            t = proj[a] + (proj[b] - proj[a]) * dist[a] / (dist[a] - dist[b])
            lo = min(lo, t)
            hi = max(hi, t)
            count += 1
    return count > 0, lo, hi


@njit(cache=True)
def tri_tri_intersect(p0, p1, p2, q0, q1, q2, eps):
    """True interpenetration test; touching within eps does not count."""
    n2 = _cross(q1 - q0, q2 - q0)
    dp0 = np.dot(n2, p0 - q0)
    dp1 = np.dot(n2, p1 - q0)
    dp2 = np.dot(n2, p2 - q0)
    if abs(dp0) < eps:
        dp0 = 0.0
    if abs(dp1) < eps:
        dp1 = 0.0
    if abs(dp2) < eps:
        dp2 = 0.0
    if (dp0 > 0 and dp1 > 0 and dp2 > 0) or (dp0 < 0 and dp1 < 0 and dp2 < 0):
        return False

    n1 = _cross(p1 - p0, p2 - p0)
    dq0 = np.dot(n1, q0 - p0)
    dq1 = np.dot(n1, q1 - p0)
    dq2 = np.dot(n1, q2 - p0)
    if abs(dq0) < eps:
        dq0 = 0.0
    if abs(dq1) < eps:
        dq1 = 0.0
    if abs(dq2) < eps:
        dq2 = 0.0
    if (dq0 > 0 and dq1 > 0 and dq2 > 0) or (dq0 < 0 and dq1 < 0 and dq2 < 0):
        return False

    if dp0 == 0.0 and dp1 == 0.0 and dp2 == 0.0:
        return _coplanar_tri_tri(n1, p0, p1, p2, q0, q1, q2, eps)

    d = _cross(n1, n2)
    ax = np.abs(d)
    if ax[0] >= ax[1] and ax[0] >= ax[2]:
        k = 0
    elif ax[1] >= ax[2]:
        k = 1
    else:
        k = 2
    pp = np.array([p0[k], p1[k], p2[k]])
    qq = np.array([q0[k], q1[k], q2[k]])
    ok1, s0, s1 = _interval(pp, dp0, dp1, dp2)
    ok2, t0, t1 = _interval(qq, dq0, dq1, dq2)
    if not (ok1 and ok2):
        return False
    return min(s1, t1) - max(s0, t0) > eps


@njit(cache=True)
def _share_vertex(f, g):
    for a in range(3):
        for b in range(3):
            if f[a] == g[b]:
                return True
    return False


@njit(cache=True)
def _brute_force_flags(verts, faces, boxes, eps):
    nf = faces.shape[0]
    flags = np.zeros(nf, dtype=np.bool_)
    for i in range(nf):
        for j in range(i + 1, nf):
            if (boxes[i, 3] < boxes[j, 0] or boxes[j, 3] < boxes[i, 0] or
                    boxes[i, 4] < boxes[j, 1] or boxes[j, 4] < boxes[i, 1] or
                    boxes[i, 5] < boxes[j, 2] or boxes[j, 5] < boxes[i, 2]):
                continue
            if _share_vertex(faces[i], faces[j]):
                continue
            if tri_tri_intersect(verts[faces[i, 0]], verts[faces[i, 1]], verts[faces[i, 2]],
                                 verts[faces[j, 0]], verts[faces[j, 1]], verts[faces[j, 2]], eps):
                flags[i] = True
                flags[j] = True
    return flags


def _face_boxes(verts, faces, pad):
    tri = verts[faces]  # (F, 3, 3)
    lo = tri.min(axis=1) - pad
    hi = tri.max(axis=1) + pad
    return np.concatenate([lo, hi], axis=1)  # (F, 6)


class _Bvh:
    """Flat median-split BVH over face bounding boxes."""

    def __init__(self, boxes, leaf_size=8):
        nf = boxes.shape[0]
        centers = (boxes[:, :3] + boxes[:, 3:]) / 2
        self.order = np.arange(nf)
        # nodes: bbox (6), left, right, start, count
        self.node_box = []
        self.node_child = []
        self.node_leaf = []
        self._build(boxes, centers, 0, nf, leaf_size)
        self.node_box = np.asarray(self.node_box)
        self.node_child = np.asarray(self.node_child, dtype=np.int64)
        self.node_leaf = np.asarray(self.node_leaf, dtype=np.int64)

    def _build(self, boxes, centers, start, end, leaf_size):
        idx = len(self.node_box)
        sub = self.order[start:end]
        lo = boxes[sub, :3].min(axis=0)
        hi = boxes[sub, 3:].max(axis=0)
        self.node_box.append(np.concatenate([lo, hi]))
        self.node_child.append([-1, -1])
        self.node_leaf.append([start, end])
        if end - start > leaf_size:
            axis = int(np.argmax(hi - lo))
            mid = (start + end) // 2
            part = np.argsort(centers[sub, axis], kind="stable")
            self.order[start:end] = sub[part]
            left = self._build(boxes, centers, start, mid, leaf_size)
            right = self._build(boxes, centers, mid, end, leaf_size)
            self.node_child[idx] = [left, right]
            self.node_leaf[idx] = [-1, -1]
        return idx


@njit(cache=True)
def _bvh_flags(verts, faces, boxes, node_box, node_child, node_leaf, order, eps):
    nf = faces.shape[0]
    flags = np.zeros(nf, dtype=np.bool_)
    stack = np.empty(1024, dtype=np.int64)
    for i in range(nf):
        b = boxes[i]
        top = 0
        stack[top] = 0
        top += 1
        while top > 0:
            top -= 1
            n = stack[top]
            nb = node_box[n]
            if (b[3] < nb[0] or nb[3] < b[0] or b[4] < nb[1] or
                    nb[4] < b[1] or b[5] < nb[2] or nb[5] < b[2]):
                continue
            if node_child[n, 0] < 0:
                for k in range(node_leaf[n, 0], node_leaf[n, 1]):
                    j = order[k]
                    if j <= i:
                        continue
                    if (b[3] < boxes[j, 0] or boxes[j, 3] < b[0] or
                            b[4] < boxes[j, 1] or boxes[j, 4] < b[1] or
                            b[5] < boxes[j, 2] or boxes[j, 5] < b[2]):
                        continue
                    if _share_vertex(faces[i], faces[j]):
                        continue
                    if tri_tri_intersect(
                            verts[faces[i, 0]], verts[faces[i, 1]], verts[faces[i, 2]],
                            verts[faces[j, 0]], verts[faces[j, 1]], verts[faces[j, 2]], eps):
                        flags[i] = True
                        flags[j] = True
            else:
                stack[top] = node_child[n, 0]
                top += 1
                stack[top] = node_child[n, 1]
                top += 1
    return flags


def intersecting_face_flags(mesh: GridMesh, method: str = "bvh") -> np.ndarray:
    """Boolean mask of faces participating in a non-adjacent intersection."""
    eps = 1e-9 * mesh.plane_side
    verts = np.ascontiguousarray(mesh.vertices, dtype=np.float64)
    faces = np.ascontiguousarray(mesh.faces, dtype=np.int64)
    boxes = _face_boxes(verts, faces, eps)
    if method == "brute":
        return _brute_force_flags(verts, faces, boxes, eps)
    if method != "bvh":
        raise ValueError(f"unknown method {method!r}")
    bvh = _Bvh(boxes)
    return _bvh_flags(verts, faces, boxes, bvh.node_box, bvh.node_child,
                      bvh.node_leaf, bvh.order, eps)


def self_intersection_ratio(mesh: GridMesh, method: str = "bvh") -> float:
    flags = intersecting_face_flags(mesh, method)
    return float(np.count_nonzero(flags)) / mesh.n_faces
