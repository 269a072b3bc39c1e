"""Preconditioned deformation loop: smooth gradients through (I + lam*L)^-1,
apply masked updates, iterate with sampled cameras and pluggable guidance."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .mesh import GridMesh, uniform_laplacian
from .precond import PrecondSolver, build_preconditioner, precondition_gradient
from .render import CameraConfig, backprop_to_vertices, rasterize_normals, sample_cameras
from .guidance import GuidanceError, RetryableGuidanceError


class OptimizationAborted(RuntimeError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class OptimConfig:
    lam: float = 15.0
    eta: float = 5e-3
    max_iterations: int = 300
    views_per_iteration: int = 4
    render_resolution: int = 128
    seed: int = 0
    step_rule: str = "adam"      # "adam" | "plain"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    plateau_window: int = 0      # 0 disables the relative-loss early stop
    plateau_threshold: float = 1e-4
    guidance_retries: int = 3

    def __post_init__(self):
        if self.lam < 0 or self.eta <= 0 or self.max_iterations < 0 \
                or self.views_per_iteration < 1:
            raise ValueError(f"invalid optimizer config: {self}")


@dataclass
class RegionMask:
    weights: np.ndarray          # (V,) in [0, 1]
    mode: str = "surface"        # "surface" | "structure"
    active_fraction: float | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.min() < 0 or w.max() > 1:
            raise ValueError("mask weights must lie in [0, 1]")
        self.weights = w
        if self.mode not in ("surface", "structure"):
            raise ValueError(f"unknown mask mode {self.mode!r}")
        if self.active_fraction is None:
            # surface masks act as a warm-up over the first half of the run;
            # structure masks stay on throughout
            self.active_fraction = 0.5 if self.mode == "surface" else 1.0

    @classmethod
    def from_raster(cls, raster: np.ndarray, grid_w: int, grid_h: int,
                    mode: str = "surface", active_fraction=None) -> "RegionMask":
        """Bilinearly resample a (Hm, Wm) mask raster at the vertex uv grid."""
        raster = np.asarray(raster, dtype=np.float64)
        hm, wm = raster.shape
        u = np.linspace(0, wm - 1, grid_w)
        v = np.linspace(0, hm - 1, grid_h)
        uu, vv = np.meshgrid(u, v)
        i0 = np.clip(np.floor(uu).astype(int), 0, wm - 2)
        j0 = np.clip(np.floor(vv).astype(int), 0, hm - 2)
        fu = uu - i0
        fv = vv - j0
        vals = (raster[j0, i0] * (1 - fu) * (1 - fv)
                + raster[j0, i0 + 1] * fu * (1 - fv)
                + raster[j0 + 1, i0] * (1 - fu) * fv
                + raster[j0 + 1, i0 + 1] * fu * fv)
        return cls(vals.reshape(-1), mode, active_fraction)

    def is_active(self, iteration: int, max_iterations: int) -> bool:
        return iteration < self.active_fraction * max_iterations


class StepState:
    """Adaptive-moment accumulators; unused for the plain step rule."""

    def __init__(self, n_vertices: int):
        self.m = np.zeros((n_vertices, 3))
        self.v = np.zeros((n_vertices, 3))
        self.t = 0


def step(mesh: GridMesh, raw_grad: np.ndarray, solver: PrecondSolver,
         mask: RegionMask | None, iteration: int, config: OptimConfig,
         state: StepState | None = None) -> np.ndarray:
    """One preconditioned masked update; returns the new vertex positions."""
    raw_grad = np.asarray(raw_grad, dtype=np.float64)
    if not np.isfinite(raw_grad).all():
        bad = np.argwhere(~np.isfinite(raw_grad))[0]
        raise OptimizationAborted(
            f"non-finite gradient at iteration {iteration}, vertex {bad[0]} axis {bad[1]}")
    u = precondition_gradient(solver, raw_grad)
    if mask is not None and mask.is_active(iteration, config.max_iterations):
        u = u * mask.weights[:, None]
    if config.step_rule == "plain":
        return mesh.vertices - config.eta * u
    if config.step_rule != "adam":
        raise ValueError(f"unknown step rule {config.step_rule!r}")
    if state is None:
        raise ValueError("adam step rule requires a StepState")
    state.t += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    state.m = b1 * state.m + (1 - b1) * u
    state.v = b2 * state.v + (1 - b2) * u * u
    mhat = state.m / (1 - b1 ** state.t)
    vhat = state.v / (1 - b2 ** state.t)
    # shared second-moment scale: per-coordinate normalization would undo
    # the Laplacian smoothing and refold the mesh
    denom = np.sqrt(vhat.max()) + config.adam_eps
    return mesh.vertices - config.eta * mhat / denom


@dataclass
class OptimResult:
    mesh: GridMesh
    history: list
    stopped_early: bool = False
    cancelled: bool = False


def optimize(init_mesh: GridMesh, guidance, config: OptimConfig,
             mask: RegionMask | None = None, callback=None,
             camera_config: CameraConfig | None = None) -> OptimResult:
    """Run the full deformation loop.

    callback(iteration, loss, mesh) may return False to cancel; the partial
    result is returned with cancelled=True. History records one dict per
    iteration: {iteration, loss, grad_norm, wall_ms}.
    """
    mesh = init_mesh.copy()
    if hasattr(guidance, "check_topology"):
        guidance.check_topology(mesh)
    if camera_config is None:
        camera_config = CameraConfig(radius=2.0 * mesh.plane_side,
                                     resolution=config.render_resolution)
    solver = build_preconditioner(uniform_laplacian(mesh), config.lam)
    state = StepState(mesh.n_vertices) if config.step_rule == "adam" else None
    rng = np.random.default_rng(config.seed)
    history = []

    for it in range(config.max_iterations):
        t0 = time.perf_counter()
        cams = sample_cameras(rng, config.views_per_iteration, camera_config)
        renders = [rasterize_normals(mesh, c) for c in cams]
        resp = _call_with_retries(guidance, it, renders, cams,
                                  config.guidance_retries, mesh, history)
        grad = np.zeros_like(mesh.vertices)
        for render, g in zip(renders, resp.grads):
            grad += backprop_to_vertices(render, np.asarray(g, dtype=np.float64), mesh)
        try:
            mesh.vertices = step(mesh, grad, solver, mask, it, config, state)
        except OptimizationAborted as e:
            e.partial = OptimResult(mesh, history)
            raise
        history.append({"iteration": it, "loss": resp.loss,
                        "grad_norm": float(np.linalg.norm(grad)),
                        "wall_ms": (time.perf_counter() - t0) * 1e3})
        if callback is not None and callback(it, resp.loss, mesh) is False:
            return OptimResult(mesh, history, cancelled=True)
        if resp.converged:
            return OptimResult(mesh, history, stopped_early=True)
        if _plateaued(history, config):
            return OptimResult(mesh, history, stopped_early=True)
    return OptimResult(mesh, history)


def _call_with_retries(guidance, iteration, renders, cams, retries, mesh, history):
    last = None
    for _ in range(max(1, retries)):
        try:
            return guidance(iteration, renders, cams)
        except RetryableGuidanceError as e:
            last = e
    raise OptimizationAborted(
        f"guidance failed after {retries} attempts at iteration {iteration}: {last}",
        partial=OptimResult(mesh, history))


def _plateaued(history, config: OptimConfig) -> bool:
    w = config.plateau_window
    if w <= 0 or len(history) < 2 * w:
        return False
    recent = np.mean([h["loss"] for h in history[-w:]])
    prev = np.mean([h["loss"] for h in history[-2 * w:-w]])
    if prev <= 0:
        return False
    return (prev - recent) / prev < config.plateau_threshold
