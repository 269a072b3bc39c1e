/**
 * Append-only loss series and a minimal canvas line chart.
 * Points must arrive in iteration order; out-of-order points are rejected so
 * the chart's ordering invariant cannot silently break.
 */

export interface LossPoint {
  iteration: number;
  loss: number;
}

export class LossSeries {
  private points: LossPoint[] = [];

  append(iteration: number, loss: number): void {
    const last = this.points[this.points.length - 1];
    if (last && iteration <= last.iteration) {
      if (iteration === last.iteration) return; // lossy stream may repeat the latest
      throw new Error(
        `iteration ${iteration} arrived after ${last.iteration}; series is append-only`,
      );
    }
    this.points.push({ iteration, loss });
  }

  get data(): readonly LossPoint[] {
    return this.points;
  }

  clear(): void {
    this.points = [];
  }
}

export function drawLossChart(ctx: CanvasRenderingContext2D, series: LossSeries): void {
  const { width, height } = ctx.canvas;
  ctx.fillStyle = "#10131a";
  ctx.fillRect(0, 0, width, height);
  const pts = series.data;
  if (pts.length < 2) return;
  const xMax = pts[pts.length - 1].iteration;
  const xMin = pts[0].iteration;
  let yMax = -Infinity;
  let yMin = Infinity;
  for (const p of pts) {
    yMax = Math.max(yMax, p.loss);
    yMin = Math.min(yMin, p.loss);
  }
  const pad = 8;
  const sx = (it: number) => pad + ((it - xMin) / Math.max(1, xMax - xMin)) * (width - 2 * pad);
  const sy = (l: number) =>
    height - pad - ((l - yMin) / Math.max(1e-12, yMax - yMin)) * (height - 2 * pad);
  ctx.strokeStyle = "#6fb7ff";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.moveTo(sx(pts[0].iteration), sy(pts[0].loss));
  for (const p of pts) ctx.lineTo(sx(p.iteration), sy(p.loss));
  ctx.stroke();
}
