/**
 * Dependency-free 3D heightfield preview: orbit camera, perspective
 * projection, painter's-algorithm quad sort, flat shading from server-side
 * normals, drawn on a 2D canvas.
 */

export interface Orbit {
  elevation: number; // radians
  azimuth: number;
  radius: number;
  fov: number;
}

export const DEFAULT_ORBIT: Orbit = {
  elevation: Math.PI / 4,
  azimuth: Math.PI / 4,
  radius: 2.0,
  fov: (45 * Math.PI) / 180,
};

export interface ProjectedQuad {
  xs: number[]; // 4 screen xs
  ys: number[];
  depth: number; // mean camera-space depth, for painter's sort
  shade: number; // 0..1
}

type Vec3 = [number, number, number];

function orbitPosition(o: Orbit): Vec3 {
  return [
    o.radius * Math.cos(o.elevation) * Math.cos(o.azimuth),
    o.radius * Math.cos(o.elevation) * Math.sin(o.azimuth),
    o.radius * Math.sin(o.elevation),
  ];
}

function orbitBasis(o: Orbit): { eye: Vec3; right: Vec3; up: Vec3; fwd: Vec3 } {
  const eye = orbitPosition(o);
  const fwd = normalize([-eye[0], -eye[1], -eye[2]]);
  let upRef: Vec3 = [0, 0, 1];
  if (Math.abs(dot(fwd, upRef)) > 0.999) upRef = [0, 1, 0];
  const right = normalize(cross(fwd, upRef));
  const up = cross(right, fwd);
  return { eye, right, up, fwd };
}

export function projectPoints(
  positions: Float32Array,
  orbit: Orbit,
  viewW: number,
  viewH: number,
): { screen: Float32Array; depth: Float32Array } {
  const n = positions.length / 3;
  const { eye, right, up, fwd } = orbitBasis(orbit);
  const focal = viewH / (2 * Math.tan(orbit.fov / 2));
  const screen = new Float32Array(n * 2);
  const depth = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    const rel: Vec3 = [
      positions[3 * i] - eye[0],
      positions[3 * i + 1] - eye[1],
      positions[3 * i + 2] - eye[2],
    ];
    const z = dot(rel, fwd);
    depth[i] = z;
    const safe = Math.max(z, 1e-6);
    screen[2 * i] = viewW / 2 + (focal * dot(rel, right)) / safe;
    screen[2 * i + 1] = viewH / 2 - (focal * dot(rel, up)) / safe;
  }
  return { screen, depth };
}

/** Build back-to-front sorted quads for a grid_w x grid_h vertex sheet. */
export function buildQuads(
  positions: Float32Array,
  normals: Float32Array,
  gridW: number,
  gridH: number,
  orbit: Orbit,
  viewW: number,
  viewH: number,
): ProjectedQuad[] {
  const { screen, depth } = projectPoints(positions, orbit, viewW, viewH);
  const { eye } = orbitBasis(orbit);
  const light = normalize([eye[0], eye[1], eye[2] + orbit.radius]);
  const quads: ProjectedQuad[] = [];
  for (let j = 0; j < gridH - 1; j++) {
    for (let i = 0; i < gridW - 1; i++) {
      const idx = [
        j * gridW + i,
        j * gridW + i + 1,
        (j + 1) * gridW + i + 1,
        (j + 1) * gridW + i,
      ];
      let d = 0;
      let nx = 0;
      let ny = 0;
      let nz = 0;
      for (const k of idx) {
        d += depth[k] / 4;
        nx += normals[3 * k] / 4;
        ny += normals[3 * k + 1] / 4;
        nz += normals[3 * k + 2] / 4;
      }
      quads.push({
        xs: idx.map((k) => screen[2 * k]),
        ys: idx.map((k) => screen[2 * k + 1]),
        depth: d,
        shade: Math.max(0.15, dot(normalize([nx, ny, nz]), light)),
      });
    }
  }
  quads.sort((a, b) => b.depth - a.depth); // far first
  return quads;
}

export function drawPreview(
  ctx: CanvasRenderingContext2D,
  positions: Float32Array,
  normals: Float32Array,
  gridW: number,
  gridH: number,
  orbit: Orbit,
): void {
  const { width, height } = ctx.canvas;
  ctx.fillStyle = "#161a22";
  ctx.fillRect(0, 0, width, height);
  for (const q of buildQuads(positions, normals, gridW, gridH, orbit, width, height)) {
    const lum = Math.round(90 + 150 * q.shade);
    ctx.fillStyle = `rgb(${lum * 0.55}, ${lum * 0.75}, ${lum})`;
    ctx.beginPath();
    ctx.moveTo(q.xs[0], q.ys[0]);
    for (let k = 1; k < 4; k++) ctx.lineTo(q.xs[k], q.ys[k]);
    ctx.closePath();
    ctx.fill();
  }
}

/** Attach drag-to-orbit handlers; returns the mutable orbit state. */
export function attachOrbitControls(
  canvas: HTMLCanvasElement,
  onChange: (o: Orbit) => void,
  initial: Orbit = { ...DEFAULT_ORBIT },
): Orbit {
  const orbit = initial;
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  canvas.addEventListener("pointerdown", (e) => {
    dragging = true;
    lastX = e.clientX;
    lastY = e.clientY;
    canvas.setPointerCapture(e.pointerId);
  });
  canvas.addEventListener("pointermove", (e) => {
    if (!dragging) return;
    orbit.azimuth -= (e.clientX - lastX) * 0.01;
    orbit.elevation = Math.min(
      Math.PI / 2 - 0.01,
      Math.max(0.05, orbit.elevation + (e.clientY - lastY) * 0.01),
    );
    lastX = e.clientX;
    lastY = e.clientY;
    onChange(orbit);
  });
  canvas.addEventListener("pointerup", () => (dragging = false));
  canvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    orbit.radius = Math.min(8, Math.max(0.5, orbit.radius * (1 + e.deltaY * 0.001)));
    onChange(orbit);
  });
  return orbit;
}

function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function normalize(v: Vec3): Vec3 {
  const n = Math.hypot(v[0], v[1], v[2]) || 1;
  return [v[0] / n, v[1] / n, v[2] / n];
}
