// Client-side review state: the loaded map, per-element statuses, selection
// and filters. Mutations are applied optimistically and hand back an undo
// closure so a server rejection can roll the exact change back.

import type { ElementJson, ElementStatus, MapJson, Point } from "./types.js";
import { cloneElement } from "./types.js";

export type EditAction =
  | { kind: "move_vertex"; id: string; vertexIndex: number; point: Point }
  | { kind: "insert_vertex"; id: string; afterIndex: number; point: Point }
  | { kind: "delete_vertex"; id: string; vertexIndex: number }
  | { kind: "set_attr"; id: string; name: string; tag: string }
  | { kind: "set_status"; id: string; status: "accepted" | "deleted" };

export interface Undo {
  (): void;
}

export class ReviewStore {
  frame: MapJson["frame"] | null = null;
  order: string[] = [];
  elements = new Map<string, ElementJson>();
  status = new Map<string, ElementStatus>();
  dirty = new Set<string>();
  selectedId: string | null = null;
  /** null means "show every semantic" */
  filter: Set<string> | null = null;

  loadMap(map: MapJson, statuses?: Record<string, ElementStatus>): void {
    this.frame = map.frame;
    this.order = map.elements.map((e) => e.id);
    this.elements = new Map(map.elements.map((e) => [e.id, cloneElement(e)]));
    this.status = new Map(this.order.map((id) => [id, statuses?.[id] ?? "auto"]));
    this.dirty.clear();
    if (this.selectedId !== null && !this.elements.has(this.selectedId)) {
      this.selectedId = null;
    }
  }

  get(id: string): ElementJson | undefined {
    return this.elements.get(id);
  }

  visibleElements(): ElementJson[] {
    const out: ElementJson[] = [];
    for (const id of this.order) {
      if (this.status.get(id) === "deleted") continue;
      const e = this.elements.get(id)!;
      if (this.filter !== null && !this.filter.has(e.semantic)) continue;
      out.push(e);
    }
    return out;
  }

  semanticCounts(): Map<string, number> {
    const counts = new Map<string, number>();
    for (const e of this.visibleElements()) {
      counts.set(e.semantic, (counts.get(e.semantic) ?? 0) + 1);
    }
    return counts;
  }

  statusSummary(): Record<ElementStatus, number> {
    const out: Record<ElementStatus, number> = { auto: 0, accepted: 0, edited: 0, deleted: 0 };
    for (const s of this.status.values()) out[s] += 1;
    return out;
  }

  select(id: string | null): void {
    this.selectedId = id !== null && this.elements.has(id) ? id : null;
  }

  /** Next reviewable element after the selection, in map order. */
  selectNext(step = 1): string | null {
    const visible = this.order.filter((id) => this.status.get(id) !== "deleted");
    if (visible.length === 0) {
      this.selectedId = null;
      return null;
    }
    const at = this.selectedId === null ? -1 : visible.indexOf(this.selectedId);
    const next = visible[(at + step + visible.length) % visible.length];
    this.selectedId = next;
    return next;
  }

  /** Apply an action locally; returns the element snapshot to send plus an undo. */
  applyLocal(action: EditAction): { element: ElementJson | null; undo: Undo } {
    const id = action.id;
    const before = this.elements.get(id);
    if (before === undefined) {
      throw new Error(`unknown element ${id}`);
    }
    const beforeCopy = cloneElement(before);
    const beforeStatus = this.status.get(id)!;
    const wasDirty = this.dirty.has(id);

    const undo: Undo = () => {
      this.elements.set(id, beforeCopy);
      this.status.set(id, beforeStatus);
      if (!wasDirty) this.dirty.delete(id);
    };

    if (action.kind === "set_status") {
      this.status.set(id, action.status);
      this.dirty.add(id);
      return { element: null, undo };
    }

    const next = cloneElement(before);
    if (action.kind === "move_vertex") {
      next.points[action.vertexIndex] = [action.point[0], action.point[1]];
    } else if (action.kind === "insert_vertex") {
      next.points.splice(action.afterIndex + 1, 0, [action.point[0], action.point[1]]);
    } else if (action.kind === "delete_vertex") {
      next.points.splice(action.vertexIndex, 1);
    } else {
      next.attrs[action.name] = action.tag;
    }
    this.elements.set(id, next);
    this.status.set(id, "edited");
    this.dirty.add(id);
    return { element: next, undo };
  }
}
