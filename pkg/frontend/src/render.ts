// Immediate-mode canvas rendering of the map. The drawing surface is typed
// as the small subset of CanvasRenderingContext2D we use, so tests can pass
// a recording stub instead of a real canvas.

import type { Camera } from "./geometry.js";
import { quadHeading, worldToScreen } from "./geometry.js";
import type { ReviewStore } from "./state.js";
import type { ElementJson, Point } from "./types.js";

export interface DrawSurface {
  lineWidth: number;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  globalAlpha: number;
  font: string;
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  stroke(): void;
  fill(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
}

const PALETTE: Record<string, string> = {
  lane_divider: "#f2c744",
  curb: "#e06c5a",
  stop_line: "#d94f8a",
  arrow: "#4fa3d9",
  speed_bump: "#8a6fd1",
  lane_sign: "#39b3a6",
  marking: "#7aa837",
  crosswalk: "#5a77d9",
  diversion: "#b8763a",
};

export function semanticColor(semantic: string): string {
  const known = PALETTE[semantic];
  if (known) return known;
  let h = 0;
  for (const c of semantic) h = (h * 31 + c.charCodeAt(0)) >>> 0;
  return `hsl(${h % 360}, 60%, 55%)`;
}

export interface RenderStats {
  drawn: number;
  perSemantic: Map<string, number>;
}

function tracePath(ctx: DrawSurface, cam: Camera, height: number, points: Point[], close: boolean): void {
  ctx.beginPath();
  const [x0, y0] = worldToScreen(cam, points[0], height);
  ctx.moveTo(x0, y0);
  for (let i = 1; i < points.length; i++) {
    const [x, y] = worldToScreen(cam, points[i], height);
    ctx.lineTo(x, y);
  }
  if (close) ctx.closePath();
}

function drawHeadingGlyph(ctx: DrawSurface, cam: Camera, height: number, e: ElementJson): void {
  const [hx, hy] = quadHeading(e.points);
  const cx = (e.points[0][0] + e.points[1][0] + e.points[2][0] + e.points[3][0]) / 4;
  const cy = (e.points[0][1] + e.points[1][1] + e.points[2][1] + e.points[3][1]) / 4;
  const tipW: Point = [cx + hx * 1.2, cy + hy * 1.2];
  const leftW: Point = [cx - hy * 0.4, cy + hx * 0.4];
  const rightW: Point = [cx + hy * 0.4, cy - hx * 0.4];
  tracePath(ctx, cam, height, [leftW, tipW, rightW], false);
  ctx.stroke();
}

export function renderMap(
  ctx: DrawSurface,
  store: ReviewStore,
  cam: Camera,
  width: number,
  height: number,
  handleRadius = 4,
): RenderStats {
  ctx.clearRect(0, 0, width, height);
  const stats: RenderStats = { drawn: 0, perSemantic: new Map() };
  for (const e of store.visibleElements()) {
    const selected = e.id === store.selectedId;
    const color = semanticColor(e.semantic);
    ctx.globalAlpha = 1.0;
    ctx.strokeStyle = selected ? "#ffffff" : color;
    ctx.lineWidth = selected ? 3 : 1.5;
    if (e.kind === "line") {
      tracePath(ctx, cam, height, e.points, false);
      ctx.stroke();
    } else if (e.kind === "discrete") {
      tracePath(ctx, cam, height, e.points, true);
      ctx.stroke();
      drawHeadingGlyph(ctx, cam, height, e);
    } else {
      tracePath(ctx, cam, height, e.points, true);
      ctx.fillStyle = color;
      ctx.globalAlpha = 0.25;
      ctx.fill();
      ctx.globalAlpha = 1.0;
      ctx.stroke();
    }
    stats.drawn += 1;
    stats.perSemantic.set(e.semantic, (stats.perSemantic.get(e.semantic) ?? 0) + 1);
  }
  const selected = store.selectedId !== null ? store.get(store.selectedId) : undefined;
  if (selected && store.status.get(selected.id) !== "deleted") {
    ctx.fillStyle = "#ffffff";
    ctx.strokeStyle = "#222222";
    ctx.lineWidth = 1;
    ctx.globalAlpha = 1.0;
    for (const p of selected.points) {
      const [x, y] = worldToScreen(cam, p, height);
      ctx.beginPath();
      ctx.arc(x, y, handleRadius, 0, Math.PI * 2);
      ctx.fill();
      ctx.stroke();
    }
  }
  return stats;
}

export function legendLines(store: ReviewStore): string[] {
  const counts = store.semanticCounts();
  return [...counts.entries()]
    .sort((a, b) => (a[0] < b[0] ? -1 : 1))
    .map(([semantic, count]) => `${semantic}: ${count}`);
}
