// View transforms and hit-testing for the canvas map view.

import type { ElementJson, Point } from "./types.js";

export interface Camera {
  // screen = (world - pan) * zoom, with y flipped so north is up
  panX: number;
  panY: number;
  zoom: number;
}

export function worldToScreen(cam: Camera, p: Point, height: number): Point {
  return [(p[0] - cam.panX) * cam.zoom, height - (p[1] - cam.panY) * cam.zoom];
}

export function screenToWorld(cam: Camera, p: Point, height: number): Point {
  return [p[0] / cam.zoom + cam.panX, (height - p[1]) / cam.zoom + cam.panY];
}

export interface Bounds {
  minX: number;
  minY: number;
  maxX: number;
  maxY: number;
}

export function elementBounds(points: Point[]): Bounds {
  let minX = Infinity;
  let minY = Infinity;
  let maxX = -Infinity;
  let maxY = -Infinity;
  for (const [x, y] of points) {
    if (x < minX) minX = x;
    if (y < minY) minY = y;
    if (x > maxX) maxX = x;
    if (y > maxY) maxY = y;
  }
  return { minX, minY, maxX, maxY };
}

export function mapBounds(elements: Iterable<ElementJson>): Bounds | null {
  let out: Bounds | null = null;
  for (const e of elements) {
    const b = elementBounds(e.points);
    if (out === null) {
      out = { ...b };
    } else {
      out.minX = Math.min(out.minX, b.minX);
      out.minY = Math.min(out.minY, b.minY);
      out.maxX = Math.max(out.maxX, b.maxX);
      out.maxY = Math.max(out.maxY, b.maxY);
    }
  }
  return out;
}

export function fitCamera(bounds: Bounds, width: number, height: number, margin = 20): Camera {
  const spanX = Math.max(bounds.maxX - bounds.minX, 1e-9);
  const spanY = Math.max(bounds.maxY - bounds.minY, 1e-9);
  const zoom = Math.min((width - 2 * margin) / spanX, (height - 2 * margin) / spanY);
  const cx = (bounds.minX + bounds.maxX) / 2;
  const cy = (bounds.minY + bounds.maxY) / 2;
  return {
    zoom,
    panX: cx - width / (2 * zoom),
    panY: cy - height / (2 * zoom),
  };
}

export function pointSegmentDistance(p: Point, a: Point, b: Point): number {
  const abx = b[0] - a[0];
  const aby = b[1] - a[1];
  const denom = abx * abx + aby * aby;
  let t = 0;
  if (denom > 1e-24) {
    t = Math.max(0, Math.min(1, ((p[0] - a[0]) * abx + (p[1] - a[1]) * aby) / denom));
  }
  const dx = p[0] - (a[0] + t * abx);
  const dy = p[1] - (a[1] + t * aby);
  return Math.hypot(dx, dy);
}

export function pointInPolygon(p: Point, ring: Point[]): boolean {
  let inside = false;
  for (let i = 0, j = ring.length - 1; i < ring.length; j = i++) {
    const [xi, yi] = ring[i];
    const [xj, yj] = ring[j];
    if (yi > p[1] !== yj > p[1] && p[0] < ((xj - xi) * (p[1] - yi)) / (yj - yi) + xi) {
      inside = !inside;
    }
  }
  return inside;
}

/** Distance from a world point to an element's drawn geometry (0 inside areas). */
export function distanceToElement(p: Point, e: ElementJson): number {
  const pts = e.points;
  const closed = e.kind !== "line";
  if (closed && pointInPolygon(p, pts)) return 0;
  let best = Infinity;
  const n = pts.length;
  const last = closed ? n : n - 1;
  for (let i = 0; i < last; i++) {
    const d = pointSegmentDistance(p, pts[i], pts[(i + 1) % n]);
    if (d < best) best = d;
  }
  return best;
}

export function centroid(points: Point[]): Point {
  let sx = 0;
  let sy = 0;
  for (const [x, y] of points) {
    sx += x;
    sy += y;
  }
  return [sx / points.length, sy / points.length];
}

/**
 * Facing direction of a discrete element: corners are ordered front-left,
 * front-right, back-right, back-left, so heading points from the back-edge
 * midpoint to the front-edge midpoint.
 */
export function quadHeading(points: Point[]): Point {
  const frontMid: Point = [(points[0][0] + points[1][0]) / 2, (points[0][1] + points[1][1]) / 2];
  const backMid: Point = [(points[2][0] + points[3][0]) / 2, (points[2][1] + points[3][1]) / 2];
  const dx = frontMid[0] - backMid[0];
  const dy = frontMid[1] - backMid[1];
  const norm = Math.hypot(dx, dy) || 1;
  return [dx / norm, dy / norm];
}

/** Uniform-grid index over element bounding boxes for cheap picking. */
export class SpatialIndex {
  private cells = new Map<string, string[]>();

  constructor(private readonly cellSize = 25.0) {}

  private key(ix: number, iy: number): string {
    return `${ix}:${iy}`;
  }

  insert(e: ElementJson): void {
    const b = elementBounds(e.points);
    const x0 = Math.floor(b.minX / this.cellSize);
    const x1 = Math.floor(b.maxX / this.cellSize);
    const y0 = Math.floor(b.minY / this.cellSize);
    const y1 = Math.floor(b.maxY / this.cellSize);
    for (let ix = x0; ix <= x1; ix++) {
      for (let iy = y0; iy <= y1; iy++) {
        const k = this.key(ix, iy);
        const bucket = this.cells.get(k);
        if (bucket) bucket.push(e.id);
        else this.cells.set(k, [e.id]);
      }
    }
  }

  rebuild(elements: Iterable<ElementJson>): void {
    this.cells.clear();
    for (const e of elements) this.insert(e);
  }

  candidates(p: Point, radius: number): string[] {
    const out = new Set<string>();
    const x0 = Math.floor((p[0] - radius) / this.cellSize);
    const x1 = Math.floor((p[0] + radius) / this.cellSize);
    const y0 = Math.floor((p[1] - radius) / this.cellSize);
    const y1 = Math.floor((p[1] + radius) / this.cellSize);
    for (let ix = x0; ix <= x1; ix++) {
      for (let iy = y0; iy <= y1; iy++) {
        for (const id of this.cells.get(this.key(ix, iy)) ?? []) out.add(id);
      }
    }
    return [...out];
  }
}
