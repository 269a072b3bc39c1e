/**
 * Scripted authoring session against a live pipeline service:
 * paint -> preview -> submit -> cancel, plus the 16-bit PNG upload
 * round-trip and the preview debounce bound.
 */

import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { PipelineClient } from "../src/api.js";
import { RateLimitedDebouncer } from "../src/debounce.js";
import { CanvasDocument } from "../src/document.js";
import { encodePng16 } from "../src/png16.js";

const RES = 32;
const PORT = 8791;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;
let workDir: string;
let client: PipelineClient;

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "vdmforge-ui-"));
  server = spawn(
    "python3",
    ["-m", "vdmforge.cli", "serve", "--addr", `127.0.0.1:${PORT}`, "--base-dir", join(workDir, "runs")],
    { stdio: "ignore" },
  );
  client = new PipelineClient(BASE);
  const deadline = Date.now() + 30000;
  for (;;) {
    try {
      const res = await fetch(`${BASE}/jobs/none`);
      if (res.status === 404) break;
    } catch {
      /* not up yet */
    }
    if (Date.now() > deadline) throw new Error("service did not come up");
    await sleep(200);
  }
}, 40000);

afterAll(() => {
  server?.kill();
  rmSync(workDir, { recursive: true, force: true });
});

function paintBumpDocument(): CanvasDocument {
  const doc = new CanvasDocument(RES, RES);
  doc.paintStroke("init", [{ x: RES / 2, y: RES / 2 }], {
    radius: RES / 4,
    hardness: 0.3,
    value: 0.6,
  });
  return doc;
}

async function uploadLayer(layer: Float32Array): Promise<string> {
  const png = encodePng16(layer, RES, RES);
  const res = await fetch(`${BASE}/uploads`, {
    method: "POST",
    body: new Blob([png.buffer as ArrayBuffer]),
  });
  expect(res.status).toBe(201);
  return (await res.json()).path;
}

describe("UI contract against a live service", () => {
  it("blank canvas previews as a flat plane", async () => {
    const doc = new CanvasDocument(RES, RES);
    const p = await client.preview(doc.layer("init"), RES, RES);
    expect(p.grid_w).toBe(RES);
    for (let i = 0; i < p.positions.length / 3; i++) {
      expect(p.positions[3 * i + 2]).toBe(0);
      expect(p.normals[3 * i + 2]).toBeCloseTo(1, 5);
    }
  }, 20000);

  it("painted center bump displaces the center vertex by the painted height", async () => {
    const doc = paintBumpDocument();
    const p = await client.preview(doc.layer("init"), RES, RES);
    const center = (RES / 2) * RES + RES / 2;
    // Z channel value v maps to world displacement v * 0.5 * plane_side
    const painted = doc.layer("init")[center];
    expect(painted).toBeGreaterThan(0);
    expect(p.positions[3 * center + 2]).toBeCloseTo(painted * 0.5, 5);
  }, 20000);

  it("a rapid 20-stroke burst issues at most 5 preview requests", async () => {
    const doc = new CanvasDocument(RES, RES);
    let requests = 0;
    const previewer = new RateLimitedDebouncer<Float32Array>(async (z) => {
      requests++;
      await client.preview(z, RES, RES);
    }, 250);
    for (let i = 0; i < 20; i++) {
      doc.paintStroke("init", [{ x: 2 + i, y: 16 }], { radius: 2, hardness: 1, value: 1 });
      previewer.request(doc.layer("init").slice());
      await sleep(50);
    }
    await sleep(400); // trailing flush
    expect(requests).toBeLessThanOrEqual(5);
    expect(requests).toBeGreaterThan(0);
  }, 20000);

  it("exported 16-bit PNG re-imports through the pipeline within 1/65535", async () => {
    const doc = paintBumpDocument();
    const path = await uploadLayer(doc.layer("init"));
    const maxErr = Number(
      execFileSync("python3", [
        "-c",
        [
          "import sys, numpy as np",
          "from vdmforge.vdm import load_png",
          "painted = np.frombuffer(sys.stdin.buffer.read(), dtype='<f4')",
          "z = load_png(sys.argv[1]).data[:, :, 2]",
          "print(np.abs(z.reshape(-1) - painted).max())",
        ].join("\n"),
        path,
      ], { input: Buffer.from(doc.layer("init").buffer) }).toString(),
    );
    expect(maxErr).toBeLessThanOrEqual(1 / 65535);
  }, 20000);

  it("completes a scripted paint -> preview -> submit -> cancel session", async () => {
    const doc = paintBumpDocument();
    await client.preview(doc.layer("init"), RES, RES);

    // oracle target: the painted layer itself, saved as EXR server-side
    const initPath = await uploadLayer(doc.layer("init"));
    const targetPath = join(workDir, "target.exr");
    execFileSync("python3", [
      "-c",
      [
        "import sys",
        "from vdmforge.vdm import load_png, save_exr",
        "save_exr(load_png(sys.argv[1]), sys.argv[2])",
      ].join("\n"),
      initPath,
      targetPath,
    ]);

    const job = await client.submitJob({
      init: { mode: "file", path: initPath },
      resolution: RES,
      guidance: { mode: "oracle", target: targetPath },
      optimizer: { max_iterations: 2000, render_resolution: 64, views_per_iteration: 2 },
    });
    expect(["queued", "running"]).toContain(job.state);

    // collect a few stream events, then cancel mid-run
    const iterations: number[] = [];
    const streaming = client.streamJob(job.id, (e) => {
      if (typeof e.iteration === "number") iterations.push(e.iteration);
      return iterations.length < 2;
    });
    await streaming;
    const cancelled = await client.cancelJob(job.id);
    expect(["cancelling", "cancelled", "running"]).toContain(cancelled.state);
    const deadline = Date.now() + 20000;
    let rec = cancelled;
    while (rec.state !== "cancelled" && Date.now() < deadline) {
      await sleep(200);
      rec = await client.getJob(job.id);
    }
    expect(rec.state).toBe("cancelled");
    expect(iterations).toEqual([...iterations].sort((a, b) => a - b));

    // partial metrics artifact is retrievable after cancel
    const metrics = JSON.parse(
      new TextDecoder().decode(await client.fetchArtifact(job.id, "metrics.json")),
    );
    expect(metrics.cancelled).toBe(true);
  }, 60000);

  it("renders validation errors for a malformed config", async () => {
    await expect(
      client.submitJob({ init: { mode: "nope" } }),
    ).rejects.toMatchObject({ errors: expect.arrayContaining([expect.stringContaining("init.mode")]) });
  }, 20000);
});

function sleep(ms: number): Promise<void> {
  return new Promise((r) => setTimeout(r, ms));
}
