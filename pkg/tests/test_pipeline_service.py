import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from conftest import gaussian_bump_vdm
from vdmforge.pipeline import ConfigError, RunConfig, apply_paper_scale, run_generate
from vdmforge.service import create_app
from vdmforge.vdm import load_exr, make_zero_vdm, save_exr


def oracle_config(tmp_path, target_vdm, **opt):
    target_path = tmp_path / "target.exr"
    save_exr(target_vdm, target_path)
    optimizer = {"max_iterations": 5, "render_resolution": 32,
                 "views_per_iteration": 2, "seed": 0}
    optimizer.update(opt)
    return {
        "init": {"mode": "zero"},
        "resolution": 8,
        "guidance": {"mode": "oracle", "target": str(target_path)},
        "optimizer": optimizer,
        "output_dir": str(tmp_path / "out"),
    }


class TestRunConfig:
    def test_validation_collects_all_problems(self, tmp_path):
        bad = {"init": {"mode": "file"},
               "guidance": {"mode": "oracle"},
               "mask": {"path": str(tmp_path / "missing.png")},
               "resolution": 1}
        with pytest.raises(ConfigError) as exc:
            RunConfig.from_dict(bad)
        text = str(exc.value)
        assert "init.path" in text
        assert "guidance.target" in text
        assert "mask file not found" in text
        assert "resolution" in text

    def test_round_trips_through_dict(self, tmp_path):
        cfg = RunConfig.from_dict(oracle_config(tmp_path, make_zero_vdm(8)))
        again = RunConfig.from_dict(cfg.to_dict())
        assert again.guidance_target == cfg.guidance_target
        assert again.optimizer == cfg.optimizer

    def test_full_scale_preset(self, tmp_path):
        cfg = RunConfig.from_dict(oracle_config(tmp_path, make_zero_vdm(8)))
        cfg = apply_paper_scale(cfg)
        assert cfg.resolution == 512
        assert cfg.optimizer.max_iterations == 10_000
        assert cfg.optimizer.render_resolution == 512

    def test_endpoint_env_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("VDMFORGE_GUIDANCE_ENDPOINT", "127.0.0.1:9999")
        cfg = RunConfig.from_dict({"init": {"mode": "zero"},
                                   "guidance": {"mode": "external"}})
        assert cfg.guidance_endpoint == "127.0.0.1:9999"


class TestRunGenerate:
    def test_fixed_point_zero_target(self, tmp_path):
        cfg = RunConfig.from_dict(oracle_config(tmp_path, make_zero_vdm(8),
                                                max_iterations=10))
        out = run_generate(cfg)
        baked = load_exr(out["paths"]["brush.exr"])
        assert (baked.data == 0.0).all()

    def test_bundle_contents(self, tmp_path):
        cfg = RunConfig.from_dict(oracle_config(tmp_path, gaussian_bump_vdm(8)))
        out = run_generate(cfg)
        import os
        for name in ("brush.exr", "mesh.obj", "metrics.json", "history.jsonl"):
            assert os.path.exists(out["paths"][name])
        metrics = json.load(open(out["paths"]["metrics.json"]))
        assert metrics["iterations"] == 5
        assert "self_intersection_ratio" in metrics["stats"]
        lines = open(out["paths"]["history.jsonl"]).read().splitlines()
        assert len(lines) == 5
        assert set(json.loads(lines[0])) == {"iteration", "loss", "grad_norm", "wall_ms"}

    def test_deterministic_given_seed(self, tmp_path):
        cfg1 = RunConfig.from_dict(oracle_config(tmp_path, gaussian_bump_vdm(8)))
        out1 = run_generate(cfg1)
        a = load_exr(out1["paths"]["brush.exr"])
        cfg2 = RunConfig.from_dict(oracle_config(tmp_path, gaussian_bump_vdm(8)))
        out2 = run_generate(cfg2)
        b = load_exr(out2["paths"]["brush.exr"])
        assert np.array_equal(a.data, b.data)


@pytest.fixture
def client(tmp_path):
    app = create_app(base_dir=str(tmp_path / "runs"))
    with TestClient(app) as c:
        c.tmp_path = tmp_path
        yield c


def wait_for_state(client, job_id, states, timeout=60.0):
    t0 = time.time()
    while time.time() - t0 < timeout:
        rec = client.get(f"/jobs/{job_id}").json()
        if rec["state"] in states:
            return rec
        time.sleep(0.05)
    raise TimeoutError(f"job {job_id} stuck in {rec['state']}")


class TestService:
    def test_job_lifecycle(self, client):
        cfg = oracle_config(client.tmp_path, gaussian_bump_vdm(8))
        r = client.post("/jobs", json=cfg)
        assert r.status_code == 202
        job_id = r.json()["id"]
        assert r.json()["state"] in ("queued", "running")
        rec = wait_for_state(client, job_id, {"done"})
        assert set(rec["artifacts"]) >= {"brush.exr", "mesh.obj", "metrics.json"}
        art = client.get(f"/jobs/{job_id}/artifacts/metrics.json")
        assert art.status_code == 200
        assert json.loads(art.content)["iterations"] == 5

    def test_malformed_config_rejected(self, client):
        r = client.post("/jobs", json={"init": {"mode": "nope"}})
        assert r.status_code == 422
        assert any("init.mode" in e for e in r.json()["errors"])

    def test_unknown_job_404(self, client):
        assert client.get("/jobs/doesnotexist").status_code == 404
        assert client.delete("/jobs/doesnotexist").status_code == 404

    def test_cancel_running_job(self, client):
        cfg = oracle_config(client.tmp_path, gaussian_bump_vdm(16),
                            max_iterations=2000, render_resolution=64)
        cfg["resolution"] = 16
        job_id = client.post("/jobs", json=cfg).json()["id"]
        wait_for_state(client, job_id, {"running"})
        time.sleep(0.3)
        client.delete(f"/jobs/{job_id}")
        rec = wait_for_state(client, job_id, {"cancelled"})
        assert rec["state"] == "cancelled"
        # partial metrics written
        art = client.get(f"/jobs/{job_id}/artifacts/metrics.json")
        assert art.status_code == 200
        assert json.loads(art.content)["cancelled"] is True

    def test_preview_flat_grid(self, client):
        import base64
        res = 64
        z = np.zeros((res, res), dtype="<f4")
        t0 = time.time()
        r = client.post("/preview", json={
            "width": res, "height": res,
            "z_b64": base64.b64encode(z.tobytes()).decode()})
        elapsed = time.time() - t0
        assert r.status_code == 200
        body = r.json()
        pos = np.frombuffer(base64.b64decode(body["positions_b64"]),
                            dtype="<f4").reshape(-1, 3)
        nrm = np.frombuffer(base64.b64decode(body["normals_b64"]),
                            dtype="<f4").reshape(-1, 3)
        assert body["grid_w"] == res
        assert (pos[:, 2] == 0.0).all()
        np.testing.assert_allclose(nrm, np.tile([0, 0, 1.0], (res * res, 1)),
                                   atol=1e-6)
        assert elapsed < 2.0  # generous CI bound; interactive budget is 150 ms

    def test_preview_bad_payload(self, client):
        assert client.post("/preview", json={"width": 1, "height": 4}).status_code == 422
        assert client.post("/preview", json={"width": 4, "height": 4}).status_code == 422

    def test_stream_frames(self, client):
        cfg = oracle_config(client.tmp_path, gaussian_bump_vdm(8),
                            max_iterations=30, render_resolution=32)
        job_id = client.post("/jobs", json=cfg).json()["id"]
        events = []
        with client.stream("GET", f"/jobs/{job_id}/stream") as r:
            for line in r.iter_lines():
                if line.startswith("data: "):
                    events.append(json.loads(line[6:]))
                if len(events) > 100:
                    break
        assert events
        assert events[-1]["state"] in ("done", "failed")
        iters = [e["iteration"] for e in events if "iteration" in e]
        assert iters == sorted(iters)

    def test_upload_round_trips_through_init_file(self, client, tmp_path):
        import io
        from PIL import Image
        from vdmforge.vdm import load_png

        arr = (np.random.default_rng(0).random((8, 8)) * 65535).astype(np.uint16)
        buf = io.BytesIO()
        Image.fromarray(arr, mode="I;16").save(buf, format="PNG")
        r = client.post("/uploads", content=buf.getvalue())
        assert r.status_code == 201
        path = r.json()["path"]
        loaded = load_png(path)
        np.testing.assert_allclose(loaded.data[:, :, 2], arr / 65535, atol=1e-7)

    def test_upload_rejects_non_png(self, client):
        assert client.post("/uploads", content=b"not a png").status_code == 422

    def test_fifo_queue_single_runner(self, client):
        cfgs = [oracle_config(client.tmp_path, gaussian_bump_vdm(8))
                for _ in range(3)]
        ids = [client.post("/jobs", json=c).json()["id"] for c in cfgs]
        states = [client.get(f"/jobs/{i}").json()["state"] for i in ids]
        assert sum(s == "running" for s in states) <= 1
        for i in ids:
            wait_for_state(client, i, {"done"})
