"""Bake a deformed grid mesh back into a VDM raster plus output stats."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .intersect import self_intersection_ratio
from .mesh import GridMesh
from .vdm import VdmImage, VdmScale


@dataclass(frozen=True)
class BakeResult:
    vdm: VdmImage
    stats: dict


def bake(mesh: GridMesh, scale: VdmScale | None = None,
         absolute_coordinates: bool = False, with_stats: bool = True) -> BakeResult:
    """Write per-vertex displacements into the corresponding pixels.

    Default semantics store (position - rest) / unit_displacement, which is
    what sculpting-software VDM brushes consume. absolute_coordinates stores
    raw vertex positions instead.
    """
    if scale is None:
        scale = VdmScale(mesh.plane_side)
    if absolute_coordinates:
        samples = mesh.vertices
    else:
        samples = (mesh.vertices - mesh.rest_positions) / scale.unit_displacement
    data = samples.reshape(mesh.grid_h, mesh.grid_w, 3).astype(np.float32)
    vdm = VdmImage(data)
    stats = {}
    if with_stats:
        disp = vdm.data if not absolute_coordinates else \
            (mesh.vertices - mesh.rest_positions).reshape(mesh.grid_h, mesh.grid_w, 3)
        stats = {
            "max_abs_displacement": float(np.abs(disp).max()),
            "fraction_negative_samples": float(np.mean(vdm.data < 0)),
            "self_intersection_ratio": self_intersection_ratio(mesh),
        }
    return BakeResult(vdm, stats)
