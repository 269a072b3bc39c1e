/**
 * Thin client for the pipeline service: preview, jobs, artifacts, and the
 * server-sent-events progress stream. Uses fetch only, so it runs in both the
 * browser and node test processes.
 */

export interface PreviewResponse {
  grid_w: number;
  grid_h: number;
  positions: Float32Array; // (grid_w*grid_h, 3) flattened
  normals: Float32Array;
}

export interface JobRecord {
  id: string;
  state: string;
  artifacts?: string[];
  errors?: string[];
  [key: string]: unknown;
}

export interface StreamEvent {
  state?: string;
  iteration?: number;
  loss?: number;
  [key: string]: unknown;
}

export class PipelineClient {
  constructor(readonly baseUrl: string) {}

  /** POST the init heightfield (Z channel) and get back displaced vertices. */
  async preview(z: Float32Array, width: number, height: number): Promise<PreviewResponse> {
    const res = await fetch(`${this.baseUrl}/preview`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ width, height, z_b64: floatsToB64(z) }),
    });
    if (!res.ok) throw new Error(`preview failed: HTTP ${res.status}`);
    const body = await res.json();
    return {
      grid_w: body.grid_w,
      grid_h: body.grid_h,
      positions: b64ToFloats(body.positions_b64),
      normals: b64ToFloats(body.normals_b64),
    };
  }

  async submitJob(config: unknown): Promise<JobRecord> {
    const res = await fetch(`${this.baseUrl}/jobs`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(config),
    });
    const body = await res.json();
    if (res.status !== 202) {
      throw new ValidationError(`job rejected: HTTP ${res.status}`, body.errors ?? []);
    }
    return body;
  }

  async getJob(id: string): Promise<JobRecord> {
    const res = await fetch(`${this.baseUrl}/jobs/${id}`);
    if (!res.ok) throw new Error(`job ${id}: HTTP ${res.status}`);
    return res.json();
  }

  async cancelJob(id: string): Promise<JobRecord> {
    const res = await fetch(`${this.baseUrl}/jobs/${id}`, { method: "DELETE" });
    if (!res.ok) throw new Error(`cancel ${id}: HTTP ${res.status}`);
    return res.json();
  }

  async fetchArtifact(id: string, name: string): Promise<Uint8Array> {
    const res = await fetch(`${this.baseUrl}/jobs/${id}/artifacts/${name}`);
    if (!res.ok) throw new Error(`artifact ${name}: HTTP ${res.status}`);
    return new Uint8Array(await res.arrayBuffer());
  }

  /** Subscribe to the SSE progress stream; resolves when the stream ends or
   * `onEvent` returns false. */
  async streamJob(id: string, onEvent: (e: StreamEvent) => boolean | void): Promise<void> {
    const res = await fetch(`${this.baseUrl}/jobs/${id}/stream`);
    if (!res.ok || !res.body) throw new Error(`stream ${id}: HTTP ${res.status}`);
    const reader = res.body.getReader();
    const decoder = new TextDecoder();
    let buf = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) return;
      buf += decoder.decode(value, { stream: true });
      let nl;
      while ((nl = buf.indexOf("\n")) >= 0) {
        const line = buf.slice(0, nl).trim();
        buf = buf.slice(nl + 1);
        if (!line.startsWith("data: ")) continue;
        const keepGoing = onEvent(JSON.parse(line.slice(6)));
        if (keepGoing === false) {
          await reader.cancel();
          return;
        }
      }
    }
  }
}

export class ValidationError extends Error {
  constructor(message: string, readonly errors: string[]) {
    super(message);
  }
}

export function floatsToB64(arr: Float32Array): string {
  const bytes = new Uint8Array(arr.buffer, arr.byteOffset, arr.byteLength);
  let bin = "";
  for (let i = 0; i < bytes.length; i += 0x8000) {
    bin += String.fromCharCode(...bytes.subarray(i, i + 0x8000));
  }
  return btoa(bin);
}

export function b64ToFloats(b64: string): Float32Array {
  const bin = atob(b64);
  const bytes = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) bytes[i] = bin.charCodeAt(i);
  return new Float32Array(bytes.buffer);
}
