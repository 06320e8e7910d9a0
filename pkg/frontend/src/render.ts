// Canvas scene: backbone polyline, tip marker, pouch pressure dots
// (darker green = higher pressure), warnings, obstacle overlay, scale bar.
// Every drawn pixel derives from the latest server frame.

import { Frame } from "./protocol.js";
import {
  Point,
  ViewTransform,
  WorldBox,
  fitTransform,
  pressureColor,
  toCanvas,
} from "./geometry.js";
import { MAX_SUPPLY_KPA } from "./panel.js";

export interface Scene {
  frame: Frame | null;
  obstacles: Point[][]; // display-only polygons (world mm)
  draft: Point[]; // obstacle being drawn
}

export function worldBox(robotLengthMm: number): WorldBox {
  const m = Math.max(60, robotLengthMm * 0.15);
  return {
    xMin: -m,
    xMax: robotLengthMm + m,
    yMin: -(robotLengthMm * 0.75 + m),
    yMax: robotLengthMm * 0.75 + m,
  };
}

function drawPolyline(
  ctx: CanvasRenderingContext2D,
  t: ViewTransform,
  pts: Point[],
  stroke: string,
  width: number,
): void {
  if (pts.length < 2) return;
  ctx.beginPath();
  const [x0, y0] = toCanvas(t, pts[0]);
  ctx.moveTo(x0, y0);
  for (const p of pts.slice(1)) {
    const [x, y] = toCanvas(t, p);
    ctx.lineTo(x, y);
  }
  ctx.strokeStyle = stroke;
  ctx.lineWidth = width;
  ctx.stroke();
}

/** Positions of the pouch markers: one dot per valve group per side, placed
 * along the backbone at the group centers, offset to its side of the tube. */
function pouchMarkers(frame: Frame): { x: number; y: number; side: string; kpa: number }[] {
  const pts = frame.backbone_mm;
  if (pts.length < 2) return [];
  const groups = new Map<string, number>();
  for (const p of frame.pouches) groups.set(`${p.group}:${p.side}`, p.kpa);
  const markers: { x: number; y: number; side: string; kpa: number }[] = [];
  const nGroups = Math.max(...frame.pouches.map((p) => p.group), 1);
  for (let g = 1; g <= nGroups; g++) {
    // park the marker at the group's fraction of the polyline
    const f = Math.min(1, (g - 0.5) / nGroups);
    const i = Math.min(pts.length - 2, Math.floor(f * (pts.length - 1)));
    const [x0, y0] = pts[i];
    const [x1, y1] = pts[i + 1];
    const len = Math.hypot(x1 - x0, y1 - y0) || 1;
    const nx = -(y1 - y0) / len;
    const ny = (x1 - x0) / len;
    const off = 14;
    for (const side of ["left", "right"] as const) {
      const s = side === "left" ? 1 : -1;
      markers.push({
        x: (x0 + x1) / 2 + s * nx * off,
        y: (y0 + y1) / 2 + s * ny * off,
        side,
        kpa: groups.get(`${g}:${side}`) ?? 0,
      });
    }
  }
  return markers;
}

export function renderScene(
  ctx: CanvasRenderingContext2D,
  scene: Scene,
  width: number,
  height: number,
  robotLengthMm: number,
): void {
  ctx.clearRect(0, 0, width, height);
  const t = fitTransform(worldBox(robotLengthMm), width, height);

  // obstacles first so the robot draws over them
  ctx.globalAlpha = 0.35;
  for (const poly of scene.obstacles) {
    if (poly.length < 3) continue;
    ctx.beginPath();
    const [x0, y0] = toCanvas(t, poly[0]);
    ctx.moveTo(x0, y0);
    for (const p of poly.slice(1)) {
      const [x, y] = toCanvas(t, p);
      ctx.lineTo(x, y);
    }
    ctx.closePath();
    ctx.fillStyle = "#777";
    ctx.fill();
  }
  ctx.globalAlpha = 1.0;
  if (scene.draft.length >= 2) drawPolyline(ctx, t, scene.draft, "#999", 1);

  // base marker
  const [bx, by] = toCanvas(t, [0, 0]);
  ctx.fillStyle = "#444";
  ctx.fillRect(bx - 4, by - 12, 4, 24);

  const frame = scene.frame;
  if (frame && frame.backbone_mm.length >= 1) {
    for (const m of pouchMarkers(frame)) {
      const [x, y] = toCanvas(t, [m.x, m.y]);
      ctx.beginPath();
      ctx.arc(x, y, 5, 0, 2 * Math.PI);
      ctx.fillStyle = pressureColor(m.kpa, MAX_SUPPLY_KPA);
      ctx.fill();
      ctx.strokeStyle = "#666";
      ctx.lineWidth = 0.5;
      ctx.stroke();
    }
    drawPolyline(ctx, t, frame.backbone_mm, "#1a1a1a", 3);
    const tip = frame.backbone_mm[frame.backbone_mm.length - 1];
    const [tx, ty] = toCanvas(t, tip);
    ctx.beginPath();
    ctx.arc(tx, ty, 6, 0, 2 * Math.PI);
    ctx.fillStyle = "#c62828";
    ctx.fill();
  }

  // 50 mm scale bar, bottom left
  const barMm = 50;
  const x1 = 20;
  const y1 = height - 20;
  ctx.strokeStyle = "#333";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(x1, y1);
  ctx.lineTo(x1 + barMm * t.scale, y1);
  ctx.stroke();
  ctx.fillStyle = "#333";
  ctx.font = "12px sans-serif";
  ctx.fillText(`${barMm} mm`, x1, y1 - 6);
}
