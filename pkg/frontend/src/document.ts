/**
 * Client-side canvas document: an init heightfield layer (maps to the Z
 * channel of the init VDM) and a mask layer, painted with soft-disc stamps.
 * All painting is local; nothing here touches the network.
 */

export type LayerName = "init" | "mask";

export interface Brush {
  radius: number;    // pixels
  hardness: number;  // 0..1; 1 = hard edge
  value: number;     // 0..1 stamp intensity
}

export interface StrokePoint {
  x: number;
  y: number;
}

export const MAX_UNDO = 64; // history bound (must be >= 32)

export class CanvasDocument {
  readonly width: number;
  readonly height: number;
  readonly layers: Record<LayerName, Float32Array>;
  private undoStack: { layer: LayerName; data: Float32Array }[] = [];

  constructor(width: number, height: number) {
    if (width < 2 || height < 2) throw new Error(`degenerate canvas ${width}x${height}`);
    this.width = width;
    this.height = height;
    this.layers = {
      init: new Float32Array(width * height),
      mask: new Float32Array(width * height),
    };
  }

  layer(name: LayerName): Float32Array {
    return this.layers[name];
  }

  undoDepth(): number {
    return this.undoStack.length;
  }

  /** Stamp soft discs along the path. Init layer composites with max-blend,
   * the mask layer with replace (alpha-weighted towards the brush value). */
  paintStroke(layerName: LayerName, path: StrokePoint[], brush: Brush): void {
    const layer = this.layers[layerName];
    this.pushUndo(layerName, layer);
    for (const p of path) {
      this.stamp(layer, layerName, p, brush);
    }
  }

  undo(): boolean {
    const entry = this.undoStack.pop();
    if (!entry) return false;
    this.layers[entry.layer].set(entry.data);
    return true;
  }

  private pushUndo(layerName: LayerName, layer: Float32Array): void {
    this.undoStack.push({ layer: layerName, data: layer.slice() });
    if (this.undoStack.length > MAX_UNDO) this.undoStack.shift();
  }

  private stamp(layer: Float32Array, layerName: LayerName, p: StrokePoint, brush: Brush): void {
    const r = Math.max(brush.radius, 0);
    const x0 = Math.max(0, Math.floor(p.x - r));
    const x1 = Math.min(this.width - 1, Math.ceil(p.x + r));
    const y0 = Math.max(0, Math.floor(p.y - r));
    const y1 = Math.min(this.height - 1, Math.ceil(p.y + r));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const d = Math.hypot(x - p.x, y - p.y);
        if (d > r) continue;
        const alpha = softFalloff(d, r, brush.hardness);
        if (alpha <= 0) continue;
        const i = y * this.width + x;
        if (layerName === "init") {
          layer[i] = Math.max(layer[i], clamp01(brush.value * alpha));
        } else {
          layer[i] = clamp01(layer[i] + alpha * (brush.value - layer[i]));
        }
      }
    }
  }
}

/** 1 inside the hard core, smooth cosine falloff to 0 at the rim. */
export function softFalloff(d: number, radius: number, hardness: number): number {
  if (radius <= 0) return d === 0 ? 1 : 0;
  const core = clamp01(hardness) * radius;
  if (d <= core) return 1;
  if (d >= radius) return 0;
  const t = (d - core) / (radius - core);
  return 0.5 * (1 + Math.cos(Math.PI * t));
}

export function clamp01(v: number): number {
  return v < 0 ? 0 : v > 1 ? 1 : v;
}
