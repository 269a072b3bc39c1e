/**
 * Single-page authoring app: paint init heightfield and mask layers, live
 * 3D preview of the displaced plane, job submission and monitoring.
 */

import { PipelineClient, PreviewResponse, ValidationError } from "./api.js";
import { LossSeries, drawLossChart } from "./chart.js";
import { Brush, CanvasDocument, LayerName } from "./document.js";
import { encodePng16 } from "./png16.js";
import { DEFAULT_ORBIT, Orbit, attachOrbitControls, drawPreview } from "./preview3d.js";
import { RateLimitedDebouncer } from "./debounce.js";

const RESOLUTION = 128;

interface AppState {
  doc: CanvasDocument;
  activeLayer: LayerName;
  brush: Brush;
  orbit: Orbit;
  lastPreview: PreviewResponse | null;
  series: LossSeries;
  jobId: string | null;
  streamAbort: AbortController | null;
}

export function startApp(root: Document = document): void {
  const client = new PipelineClient("");
  const state: AppState = {
    doc: new CanvasDocument(RESOLUTION, RESOLUTION),
    activeLayer: "init",
    brush: { radius: 10, hardness: 0.5, value: 1.0 },
    orbit: { ...DEFAULT_ORBIT },
    lastPreview: null,
    series: new LossSeries(),
    jobId: null,
    streamAbort: null,
  };

  const paintCanvas = root.getElementById("paint") as HTMLCanvasElement;
  const previewCanvas = root.getElementById("preview") as HTMLCanvasElement;
  const chartCanvas = root.getElementById("chart") as HTMLCanvasElement;
  const banner = root.getElementById("banner") as HTMLElement;
  const status = root.getElementById("status") as HTMLElement;
  const paintCtx = paintCanvas.getContext("2d")!;
  const previewCtx = previewCanvas.getContext("2d")!;
  const chartCtx = chartCanvas.getContext("2d")!;

  const previewer = new RateLimitedDebouncer<Float32Array>(async (z) => {
    try {
      state.lastPreview = await client.preview(z, RESOLUTION, RESOLUTION);
      banner.hidden = true;
      redrawPreview();
    } catch {
      banner.hidden = false; // stale preview; painting stays usable
    }
  }, 250);

  function redrawPaint(): void {
    const layer = state.doc.layer(state.activeLayer);
    const img = paintCtx.createImageData(RESOLUTION, RESOLUTION);
    for (let i = 0; i < layer.length; i++) {
      const v = Math.round(layer[i] * 255);
      img.data[4 * i] = v;
      img.data[4 * i + 1] = state.activeLayer === "mask" ? Math.round(v * 0.5) : v;
      img.data[4 * i + 2] = v;
      img.data[4 * i + 3] = 255;
    }
    paintCtx.putImageData(img, 0, 0);
  }

  function redrawPreview(): void {
    const p = state.lastPreview;
    if (!p) return;
    drawPreview(previewCtx, p.positions, p.normals, p.grid_w, p.grid_h, state.orbit);
  }

  function afterPaint(): void {
    redrawPaint();
    previewer.request(state.doc.layer("init").slice());
  }

  let stroke: { x: number; y: number }[] | null = null;
  const toCanvas = (e: PointerEvent) => {
    const r = paintCanvas.getBoundingClientRect();
    return {
      x: ((e.clientX - r.left) / r.width) * RESOLUTION,
      y: ((e.clientY - r.top) / r.height) * RESOLUTION,
    };
  };
  paintCanvas.addEventListener("pointerdown", (e) => {
    stroke = [toCanvas(e)];
    paintCanvas.setPointerCapture(e.pointerId);
  });
  paintCanvas.addEventListener("pointermove", (e) => {
    if (stroke) stroke.push(toCanvas(e));
  });
  paintCanvas.addEventListener("pointerup", () => {
    if (stroke && stroke.length) {
      state.doc.paintStroke(state.activeLayer, stroke, state.brush);
      afterPaint();
    }
    stroke = null;
  });

  bindControls(root, state, afterPaint, redrawPaint);
  attachOrbitControls(previewCanvas, () => redrawPreview(), state.orbit);

  (root.getElementById("submit") as HTMLButtonElement).onclick = async () => {
    try {
      const initUpload = await uploadLayer(client, state.doc.layer("init"));
      const config: Record<string, unknown> = {
        init: { mode: "file", path: initUpload },
        resolution: RESOLUTION,
        guidance: readGuidanceForm(root),
        optimizer: readOptimizerForm(root),
      };
      if (state.doc.layer("mask").some((v) => v > 0)) {
        config.mask = { path: await uploadLayer(client, state.doc.layer("mask")) };
      }
      const job = await client.submitJob(config);
      state.jobId = job.id;
      state.series.clear();
      status.textContent = `job ${job.id}: ${job.state}`;
      monitor(job.id);
    } catch (err) {
      status.textContent =
        err instanceof ValidationError
          ? `rejected: ${err.errors.join("; ")}`
          : `submit failed: ${err}`;
    }
  };

  (root.getElementById("cancel") as HTMLButtonElement).onclick = async () => {
    if (state.jobId) {
      const rec = await client.cancelJob(state.jobId);
      status.textContent = `job ${rec.id}: ${rec.state}`;
    }
  };

  async function uploadLayer(c: PipelineClient, layer: Float32Array): Promise<string> {
    const png = encodePng16(layer, RESOLUTION, RESOLUTION);
    const res = await fetch(`${c.baseUrl}/uploads`, {
      method: "POST",
      body: new Blob([png.buffer as ArrayBuffer]),
    });
    if (!res.ok) throw new Error(`upload failed: HTTP ${res.status}`);
    return (await res.json()).path;
  }

  async function monitor(id: string): Promise<void> {
    await client.streamJob(id, (e) => {
      if (typeof e.iteration === "number" && typeof e.loss === "number") {
        state.series.append(e.iteration, e.loss);
        drawLossChart(chartCtx, state.series);
      }
      if (e.state) status.textContent = `job ${id}: ${e.state}`;
      if (e.state === "done") showArtifactLinks(root, id);
      return true;
    });
  }

  redrawPaint();
  previewer.request(state.doc.layer("init").slice());
}

function bindControls(
  root: Document,
  state: AppState,
  afterPaint: () => void,
  redrawPaint: () => void,
): void {
  const layerSelect = root.getElementById("layer") as HTMLSelectElement;
  layerSelect.onchange = () => {
    state.activeLayer = layerSelect.value as LayerName;
    redrawPaint();
  };
  for (const key of ["radius", "hardness", "value"] as const) {
    const input = root.getElementById(key) as HTMLInputElement;
    input.oninput = () => (state.brush[key] = Number(input.value));
  }
  (root.getElementById("undo") as HTMLButtonElement).onclick = () => {
    if (state.doc.undo()) afterPaint();
  };
}

function readGuidanceForm(root: Document): Record<string, unknown> {
  const mode = (root.getElementById("guidance-mode") as HTMLSelectElement).value;
  if (mode === "oracle") {
    return {
      mode,
      target: (root.getElementById("guidance-target") as HTMLInputElement).value,
    };
  }
  return {
    mode,
    endpoint: (root.getElementById("guidance-endpoint") as HTMLInputElement).value,
  };
}

function readOptimizerForm(root: Document): Record<string, unknown> {
  return {
    max_iterations: Number((root.getElementById("iterations") as HTMLInputElement).value),
    lam: Number((root.getElementById("lam") as HTMLInputElement).value),
    eta: Number((root.getElementById("eta") as HTMLInputElement).value),
  };
}

function showArtifactLinks(root: Document, id: string): void {
  const el = root.getElementById("artifacts") as HTMLElement;
  el.innerHTML = "";
  for (const name of ["brush.exr", "mesh.obj", "metrics.json"]) {
    const a = root.createElement("a");
    a.href = `/jobs/${id}/artifacts/${name}`;
    a.textContent = name;
    a.download = name;
    el.appendChild(a);
    el.appendChild(root.createTextNode(" "));
  }
}
