#!/usr/bin/env python3
"""Sweep step sizes on the bump-recovery benchmark and tabulate outcomes.

Useful for re-validating the default eta after optimizer changes: prints
final/initial loss ratio, Z RMSE, and self-intersection ratio per eta.
"""

import argparse
import time

import numpy as np

from vdmforge.guidance import TargetShapeGuidance
from vdmforge.intersect import self_intersection_ratio
from vdmforge.mesh import build_grid_mesh
from vdmforge.optimizer import OptimConfig, optimize
from vdmforge.vdm import VdmImage, make_zero_vdm


def gaussian_bump(res, amplitude=0.3, sigma=0.15):
    x = np.linspace(-0.5, 0.5, res)
    xx, yy = np.meshgrid(x, x)
    data = np.zeros((res, res, 3), dtype=np.float32)
    data[:, :, 2] = amplitude * np.exp(-(xx ** 2 + yy ** 2) / (2 * sigma ** 2)) / 0.5
    return VdmImage(data)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--etas", type=float, nargs="+",
                    default=[5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3])
    ap.add_argument("--res", type=int, default=32)
    ap.add_argument("--iterations", type=int, default=150)
    ap.add_argument("--render-res", type=int, default=64)
    ap.add_argument("--step-rule", choices=["adam", "plain"], default="adam")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    target = build_grid_mesh(gaussian_bump(args.res))
    init = build_grid_mesh(make_zero_vdm(args.res))

    print(f"{'eta':>8}  {'loss ratio':>10}  {'z rmse':>8}  {'self-x':>6}  {'sec':>5}")
    for eta in args.etas:
        cfg = OptimConfig(eta=eta, max_iterations=args.iterations,
                          render_resolution=args.render_res,
                          step_rule=args.step_rule, seed=args.seed)
        t0 = time.time()
        r = optimize(init, TargetShapeGuidance(target), cfg)
        dz = r.mesh.vertices[:, 2] - target.vertices[:, 2]
        print(f"{eta:>8.0e}  "
              f"{r.history[-1]['loss'] / r.history[0]['loss']:>10.4f}  "
              f"{np.sqrt((dz ** 2).mean()):>8.4f}  "
              f"{self_intersection_ratio(r.mesh):>6.3f}  "
              f"{time.time() - t0:>5.1f}")


if __name__ == "__main__":
    main()
