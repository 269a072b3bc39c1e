"""Local job service: REST endpoints plus a streaming progress channel, driving
optimizations for the authoring UI."""

from __future__ import annotations

import base64
import io
import json
import os
import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import FileResponse, JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from .mesh import build_grid_mesh, vertex_normals
from .pipeline import ConfigError, RunConfig, run_generate
from .render import Camera, rasterize_normals, render_to_png
from .vdm import VdmImage, VdmScale

STREAM_MIN_PERIOD = 0.5  # seconds; ≤ 2 Hz


@dataclass
class JobRecord:
    id: str
    state: str = "queued"   # queued -> running -> done | failed | cancelled
    config: dict = field(default_factory=dict)
    progress: dict = field(default_factory=lambda: {"iteration": 0, "loss": None})
    artifacts: dict = field(default_factory=dict)
    error: str | None = None

    def to_dict(self):
        return {"id": self.id, "state": self.state, "config": self.config,
                "progress": self.progress, "artifacts": sorted(self.artifacts),
                "error": self.error}


class JobManager:
    def __init__(self, base_dir: str, max_concurrent: int = 1):
        self.base_dir = base_dir
        self.max_concurrent = max_concurrent
        self.jobs: "OrderedDict[str, JobRecord]" = OrderedDict()
        self.queue: list[str] = []
        self.running: set[str] = set()
        self.cancel_flags: dict[str, threading.Event] = {}
        self.frames: dict[str, dict] = {}
        self.lock = threading.Condition()

    def submit(self, config_dict: dict) -> JobRecord:
        job_id = uuid.uuid4().hex[:12]
        job_dir = os.path.join(self.base_dir, "jobs", job_id)
        os.makedirs(job_dir, exist_ok=True)
        config_dict = dict(config_dict)
        config_dict["output_dir"] = job_dir
        config = RunConfig.from_dict(config_dict)  # raises ConfigError
        record = JobRecord(job_id, config=config.to_dict())
        with self.lock:
            self.jobs[job_id] = record
            self.queue.append(job_id)
            self.cancel_flags[job_id] = threading.Event()
            self.lock.notify_all()
            self._maybe_start_locked()
        return record

    def _maybe_start_locked(self):
        while self.queue and len(self.running) < self.max_concurrent:
            job_id = self.queue.pop(0)
            record = self.jobs[job_id]
            if record.state != "queued":
                continue
            record.state = "running"
            self.running.add(job_id)
            threading.Thread(target=self._run, args=(job_id,), daemon=True).start()

    def _run(self, job_id: str):
        record = self.jobs[job_id]
        cancel = self.cancel_flags[job_id]
        last_frame = [0.0]

        def callback(iteration, loss, mesh):
            with self.lock:
                record.progress = {"iteration": iteration, "loss": loss}
            now = time.monotonic()
            if now - last_frame[0] >= STREAM_MIN_PERIOD:
                last_frame[0] = now
                self._push_frame(job_id, iteration, loss, mesh)
            return not cancel.is_set()

        try:
            config = RunConfig.from_dict(record.config)
            out = run_generate(config, callback=callback)
            with self.lock:
                record.artifacts = {os.path.basename(p): p
                                    for p in out["paths"].values()}
                record.state = "cancelled" if out["result"].cancelled else "done"
        except Exception as e:  # job isolation: any failure marks the job failed
            with self.lock:
                record.state = "failed"
                record.error = str(e)
        finally:
            with self.lock:
                self.running.discard(job_id)
                self._maybe_start_locked()
                self.lock.notify_all()

    def _push_frame(self, job_id, iteration, loss, mesh):
        cam = Camera(elevation=np.pi / 3, azimuth=np.pi / 4,
                     radius=2.0 * mesh.plane_side, resolution=64)
        render = rasterize_normals(mesh, cam)
        buf = io.BytesIO()
        render_to_png(render, buf)
        frame = {"iteration": iteration, "loss": loss,
                 "render_png_b64": base64.b64encode(buf.getvalue()).decode()}
        with self.lock:
            self.frames[job_id] = frame  # lossy-latest broadcast
            self.lock.notify_all()

    def cancel(self, job_id: str) -> JobRecord:
        with self.lock:
            record = self.jobs[job_id]
            if record.state == "queued":
                record.state = "cancelled"
            elif record.state == "running":
                self.cancel_flags[job_id].set()
            self.lock.notify_all()
        return record

    def stream(self, job_id: str):
        """Yield progress frames until the job leaves the running states."""
        last = None
        while True:
            with self.lock:
                record = self.jobs[job_id]
                frame = self.frames.get(job_id)
                state = record.state
                if frame is not last and frame is not None:
                    last = frame
                    yield {"state": state, **frame}
                if state in ("done", "failed", "cancelled"):
                    yield {"state": state, **(record.progress or {})}
                    return
                self.lock.wait(timeout=STREAM_MIN_PERIOD)


def _b64_floats(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f4").tobytes()).decode()


def _floats_b64(s: str, shape) -> np.ndarray:
    return np.frombuffer(base64.b64decode(s), dtype="<f4").reshape(shape).astype(np.float64)


def create_app(base_dir: str = "vdmforge_runs", static_dir: str | None = None,
               max_concurrent: int = 1) -> FastAPI:
    app = FastAPI(title="vdmforge")
    manager = JobManager(base_dir, max_concurrent)
    app.state.manager = manager

    @app.post("/jobs", status_code=202)
    async def create_job(request: Request):
        body = await request.json()
        try:
            record = manager.submit(body)
        except ConfigError as e:
            return JSONResponse(status_code=422, content={"errors": e.problems})
        return record.to_dict()

    def _get(job_id: str) -> JobRecord:
        record = manager.jobs.get(job_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
        return record

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        return _get(job_id).to_dict()

    @app.delete("/jobs/{job_id}")
    def cancel_job(job_id: str):
        _get(job_id)
        return manager.cancel(job_id).to_dict()

    @app.get("/jobs/{job_id}/artifacts/{name}")
    def get_artifact(job_id: str, name: str):
        record = _get(job_id)
        path = record.artifacts.get(name)
        if path is None or not os.path.exists(path):
            raise HTTPException(status_code=404, detail=f"no artifact {name}")
        return FileResponse(path)

    @app.get("/jobs/{job_id}/stream")
    def stream_job(job_id: str):
        _get(job_id)

        def gen():
            for frame in manager.stream(job_id):
                yield f"data: {json.dumps(frame)}\n\n"
        return StreamingResponse(gen(), media_type="text/event-stream")

    @app.post("/preview")
    async def preview(request: Request):
        body = await request.json()
        w = int(body.get("width", 0))
        h = int(body.get("height", 0))
        if w < 2 or h < 2:
            raise HTTPException(status_code=422, detail="width/height must be >= 2")
        plane_side = float(body.get("plane_side", 1.0))
        try:
            if "data_b64" in body:
                data = _floats_b64(body["data_b64"], (h, w, 3))
            elif "z_b64" in body:
                z = _floats_b64(body["z_b64"], (h, w))
                data = np.zeros((h, w, 3))
                data[:, :, 2] = z
            else:
                raise HTTPException(status_code=422,
                                    detail="need data_b64 or z_b64")
            mesh = build_grid_mesh(VdmImage(data.astype(np.float32)),
                                   VdmScale(plane_side))
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e))
        return {"grid_w": mesh.grid_w, "grid_h": mesh.grid_h,
                "positions_b64": _b64_floats(mesh.vertices),
                "normals_b64": _b64_floats(vertex_normals(mesh))}

    @app.post("/uploads", status_code=201)
    async def upload_layer(request: Request):
        body = await request.body()
        if not body.startswith(b"\x89PNG\r\n\x1a\n"):
            raise HTTPException(status_code=422, detail="expected a PNG body")
        upload_dir = os.path.join(base_dir, "uploads")
        os.makedirs(upload_dir, exist_ok=True)
        path = os.path.join(upload_dir, f"{uuid.uuid4().hex}.png")
        with open(path, "wb") as fh:
            fh.write(body)
        return {"path": path}

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app


def serve(addr: str = "127.0.0.1:8787", base_dir: str = "vdmforge_runs",
          static_dir: str | None = None):
    import uvicorn
    host, _, port = addr.rpartition(":")
    app = create_app(base_dir, static_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
