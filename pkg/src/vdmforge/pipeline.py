"""Run configuration and the init -> optimize -> bake -> write pipeline."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import vdm as vdm_mod
from .baking import bake
from .guidance import TargetShapeGuidance, external_guidance
from .mesh import build_grid_mesh, save_obj
from .optimizer import OptimConfig, RegionMask, optimize
from .render import CameraConfig
from .vdm import SpikeParams, VdmScale, make_spike_vdm, make_zero_vdm

GUIDANCE_ENDPOINT_ENV = "VDMFORGE_GUIDANCE_ENDPOINT"


class ConfigError(ValueError):
    def __init__(self, problems):
        super().__init__("invalid run config:\n" + "\n".join(f"- {p}" for p in problems))
        self.problems = list(problems)


@dataclass
class RunConfig:
    init_mode: str = "zero"                   # zero | spike | file
    init_path: str | None = None
    spike: SpikeParams = field(default_factory=SpikeParams)
    resolution: int = 64
    plane_side: float = 1.0
    mask_path: str | None = None
    mask_mode: str = "surface"
    mask_active_fraction: float | None = None
    guidance_mode: str = "oracle"             # oracle | external
    guidance_target: str | None = None        # EXR VDM defining the oracle target
    guidance_endpoint: str | None = None
    optimizer: OptimConfig = field(default_factory=OptimConfig)
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        problems = []
        init = d.get("init", {"mode": "zero"})
        mode = init.get("mode", "zero")
        if mode not in ("zero", "spike", "file"):
            problems.append(f"init.mode must be zero|spike|file, got {mode!r}")
        spike = SpikeParams(**init.get("spike", {})) if "spike" in init else SpikeParams()
        init_path = init.get("path")
        if mode == "file":
            if not init_path:
                problems.append("init.mode=file requires init.path")
            elif not os.path.exists(init_path):
                problems.append(f"init file not found: {init_path}")

        mask = d.get("mask")
        mask_path = mask_mode = None
        mask_frac = None
        if mask:
            mask_path = mask.get("path")
            mask_mode = mask.get("mode", "surface")
            mask_frac = mask.get("active_fraction")
            if not mask_path:
                problems.append("mask requires a path")
            elif not os.path.exists(mask_path):
                problems.append(f"mask file not found: {mask_path}")
            if mask_mode not in ("surface", "structure"):
                problems.append(f"mask.mode must be surface|structure, got {mask_mode!r}")

        guid = d.get("guidance", {})
        gmode = guid.get("mode", "oracle")
        target = guid.get("target")
        endpoint = os.environ.get(GUIDANCE_ENDPOINT_ENV) or guid.get("endpoint")
        if gmode == "oracle":
            if not target:
                problems.append("oracle guidance requires guidance.target (EXR VDM path)")
            elif not os.path.exists(target):
                problems.append(f"guidance target not found: {target}")
        elif gmode == "external":
            if not endpoint:
                problems.append("external guidance requires guidance.endpoint "
                                f"or ${GUIDANCE_ENDPOINT_ENV}")
        else:
            problems.append(f"guidance.mode must be oracle|external, got {gmode!r}")

        resolution = int(d.get("resolution", 64))
        if resolution < 2:
            problems.append(f"resolution must be >= 2, got {resolution}")
        plane_side = float(d.get("plane_side", 1.0))
        if plane_side <= 0:
            problems.append(f"plane_side must be positive, got {plane_side}")

        try:
            opt = OptimConfig(**d.get("optimizer", {}))
        except (TypeError, ValueError) as e:
            problems.append(f"optimizer config: {e}")
            opt = OptimConfig()

        if problems:
            raise ConfigError(problems)
        return cls(mode, init_path, spike, resolution, plane_side,
                   mask_path, mask_mode or "surface", mask_frac,
                   gmode, target, endpoint, opt, d.get("output_dir", "out"))

    def to_dict(self) -> dict:
        out = {"init": {"mode": self.init_mode},
               "resolution": self.resolution, "plane_side": self.plane_side,
               "guidance": {"mode": self.guidance_mode},
               "optimizer": dataclasses.asdict(self.optimizer),
               "output_dir": self.output_dir}
        if self.init_mode == "spike":
            out["init"]["spike"] = dataclasses.asdict(self.spike)
        if self.init_path:
            out["init"]["path"] = self.init_path
        if self.mask_path:
            out["mask"] = {"path": self.mask_path, "mode": self.mask_mode,
                           "active_fraction": self.mask_active_fraction}
        if self.guidance_target:
            out["guidance"]["target"] = self.guidance_target
        if self.guidance_endpoint:
            out["guidance"]["endpoint"] = self.guidance_endpoint
        return out


def apply_paper_scale(config: RunConfig) -> RunConfig:
    """Paper-scale settings: 512 grid, 512 renders, 10,000 iterations."""
    config = dataclasses.replace(config, resolution=512)
    config.optimizer = dataclasses.replace(
        config.optimizer, max_iterations=10_000, render_resolution=512)
    return config


def build_init_vdm(config: RunConfig):
    if config.init_mode == "zero":
        return make_zero_vdm(config.resolution)
    if config.init_mode == "spike":
        return make_spike_vdm(config.resolution, config.spike)
    path = config.init_path
    if path.lower().endswith(".png"):
        return vdm_mod.load_png(path)
    return vdm_mod.load_exr(path)


def build_guidance(config: RunConfig, scale: VdmScale):
    if config.guidance_mode == "oracle":
        target_vdm = vdm_mod.load_exr(config.guidance_target)
        return TargetShapeGuidance(build_grid_mesh(target_vdm, scale))
    return external_guidance(config.guidance_endpoint)


def run_generate(config: RunConfig, callback=None) -> dict:
    """Execute the full pipeline; returns artifact paths and summary stats."""
    scale = VdmScale(config.plane_side)
    init_vdm = build_init_vdm(config)
    mesh = build_grid_mesh(init_vdm, scale)

    mask = None
    if config.mask_path:
        raster = vdm_mod.load_mask_png(config.mask_path)
        mask = RegionMask.from_raster(raster, mesh.grid_w, mesh.grid_h,
                                      config.mask_mode, config.mask_active_fraction)

    guidance = build_guidance(config, scale)
    result = optimize(mesh, guidance, config.optimizer, mask=mask, callback=callback)

    os.makedirs(config.output_dir, exist_ok=True)
    baked = bake(result.mesh, scale)
    paths = {name: os.path.join(config.output_dir, name)
             for name in ("brush.exr", "mesh.obj", "metrics.json", "history.jsonl")}
    vdm_mod.save_exr(baked.vdm, paths["brush.exr"])
    save_obj(result.mesh, paths["mesh.obj"])
    with open(paths["history.jsonl"], "w") as f:
        for rec in result.history:
            f.write(json.dumps(rec) + "\n")
    losses = [h["loss"] for h in result.history]
    metrics = {
        "stats": baked.stats,
        "iterations": len(result.history),
        "initial_loss": losses[0] if losses else None,
        "final_loss": losses[-1] if losses else None,
        "cancelled": result.cancelled,
        "stopped_early": result.stopped_early,
        "config": config.to_dict(),
    }
    with open(paths["metrics.json"], "w") as f:
        json.dump(metrics, f, indent=2)
    return {"paths": paths, "metrics": metrics, "result": result}
