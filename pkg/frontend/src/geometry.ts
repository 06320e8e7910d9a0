// Pure view math: world (mm, y up) to canvas (px, y down) mapping, polyline
// headings, and the pouch pressure color scale.  No client-side physics:
// everything here only reshapes what the server sent.

export type Point = [number, number];

export interface ViewTransform {
  scale: number; // px per mm
  ox: number; // canvas x of world origin
  oy: number; // canvas y of world origin
}

export interface WorldBox {
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
}

/** Fit a fixed world box into the canvas, preserving aspect, y flipped. */
export function fitTransform(box: WorldBox, width: number, height: number): ViewTransform {
  const sx = width / (box.xMax - box.xMin);
  const sy = height / (box.yMax - box.yMin);
  const scale = Math.min(sx, sy);
  const cx = (box.xMin + box.xMax) / 2;
  const cy = (box.yMin + box.yMax) / 2;
  return {
    scale,
    ox: width / 2 - cx * scale,
    oy: height / 2 + cy * scale,
  };
}

export function toCanvas(t: ViewTransform, p: Point): Point {
  return [t.ox + p[0] * t.scale, t.oy - p[1] * t.scale];
}

/** Heading (deg) of the final polyline segment in world coordinates. */
export function headingDeg(points: Point[]): number {
  if (points.length < 2) return 0;
  const [x0, y0] = points[points.length - 2];
  const [x1, y1] = points[points.length - 1];
  return (Math.atan2(y1 - y0, x1 - x0) * 180) / Math.PI;
}

/** Heading (deg) recovered from canvas-space points (undoes the y flip). */
export function headingDegFromCanvas(points: Point[]): number {
  if (points.length < 2) return 0;
  const [x0, y0] = points[points.length - 2];
  const [x1, y1] = points[points.length - 1];
  return (Math.atan2(-(y1 - y0), x1 - x0) * 180) / Math.PI;
}

/** Pouch fill color: darker green means higher pressure; vacuum reads gray. */
export function pressureColor(kpa: number, maxKpa: number): string {
  if (kpa <= 0) return "#d0d0d0";
  const f = Math.min(1, kpa / maxKpa);
  const light = Math.round(88 - 58 * f); // 88% (faint) down to 30% (dark)
  return `hsl(120, 65%, ${light}%)`;
}

export function clampKpa(value: number, maxKpa: number): number {
  if (!Number.isFinite(value)) return 0;
  return Math.min(maxKpa, Math.max(0, value));
}
