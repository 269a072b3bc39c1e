#!/usr/bin/env python3
"""Render normal-map views of a VDM (EXR) or OBJ mesh to PNGs."""

import argparse
import pathlib

import numpy as np

from vdmforge.mesh import build_grid_mesh, load_obj_grid
from vdmforge.render import CameraConfig, rasterize_normals, render_to_png, \
    sample_cameras
from vdmforge.vdm import load_exr


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("input", type=pathlib.Path, help=".exr VDM or .obj grid mesh")
    ap.add_argument("--views", type=int, default=4)
    ap.add_argument("--resolution", type=int, default=256)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--plane-side", type=float, default=1.0)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("out/views"))
    args = ap.parse_args()

    if args.input.suffix.lower() == ".exr":
        mesh = build_grid_mesh(load_exr(args.input))
    else:
        mesh = load_obj_grid(args.input, plane_side=args.plane_side)

    args.out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    cams = sample_cameras(rng, args.views,
                          CameraConfig(resolution=args.resolution))
    for i, cam in enumerate(cams):
        render = rasterize_normals(mesh, cam)
        path = args.out / f"view_{i:02d}.png"
        render_to_png(render, path)
        covered = int((render.face_index >= 0).sum())
        print(f"{path}  elev={cam.elevation:.2f} azim={cam.azimuth:.2f} "
              f"covered_px={covered}")


if __name__ == "__main__":
    main()
