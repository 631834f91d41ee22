// Browser entry point: canvas view with pan/zoom, element picking, vertex
// dragging, attribute editing, keyboard review workflow and export.

import { ApiClient } from "./api.js";
import { Editor } from "./editor.js";
import type { Camera } from "./geometry.js";
import {
  SpatialIndex,
  distanceToElement,
  fitCamera,
  mapBounds,
  screenToWorld,
  worldToScreen,
} from "./geometry.js";
import { legendLines, renderMap } from "./render.js";
import { ReviewStore } from "./state.js";
import { SchemaMismatchError } from "./types.js";
import type { Point } from "./types.js";

const store = new ReviewStore();
const api = new ApiClient("");
const editor = new Editor(store, api);
const index = new SpatialIndex();

const canvas = document.getElementById("map") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const sidebar = document.getElementById("sidebar")!;
const banner = document.getElementById("banner")!;
const toast = document.getElementById("toast")!;

let cam: Camera = { panX: 0, panY: 0, zoom: 5 };
let dragging: { mode: "pan"; last: Point } | { mode: "vertex"; id: string; vertex: number } | null = null;
let toastTimer: number | undefined;

function showBanner(message: string): void {
  banner.textContent = message;
  banner.classList.remove("hidden");
}

function showToast(message: string, isError = false): void {
  toast.textContent = message;
  toast.classList.toggle("error", isError);
  toast.classList.remove("hidden");
  window.clearTimeout(toastTimer);
  toastTimer = window.setTimeout(() => toast.classList.add("hidden"), 4000);
}

function resize(): void {
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
  draw();
}

function draw(): void {
  renderMap(ctx, store, cam, canvas.width, canvas.height);
  renderSidebar();
}

function renderSidebar(): void {
  const summary = store.statusSummary();
  const total = store.order.length;
  const lines = legendLines(store);
  const sel = store.selectedId !== null ? store.get(store.selectedId) : undefined;
  const parts: string[] = [
    `<h1>map review</h1>`,
    `<div class="counts">${total} elements &middot; auto ${summary.auto} &middot; ` +
      `accepted ${summary.accepted} &middot; edited ${summary.edited} &middot; deleted ${summary.deleted}</div>`,
    `<h2>legend</h2>`,
    `<ul class="legend">${lines.map((l) => `<li>${l}</li>`).join("")}</ul>`,
  ];
  if (sel) {
    const status = store.status.get(sel.id);
    parts.push(`<h2>selected</h2>`);
    parts.push(
      `<div class="selected"><b>${sel.id}</b><br>${sel.kind} / ${sel.semantic}<br>` +
        `status: ${status}<br>confidence: ${sel.confidence.toFixed(3)}<br>` +
        `${sel.points.length} points</div>`,
    );
    const attrs = Object.entries(sel.attrs);
    if (attrs.length > 0) {
      parts.push(`<h2>attributes</h2>`);
      for (const [name, tag] of attrs) {
        parts.push(
          `<label class="attr">${name} <input data-attr="${name}" value="${tag}"></label>`,
        );
      }
    }
    parts.push(
      `<div class="actions">` +
        `<button id="accept">accept (a)</button>` +
        `<button id="delete">delete (d)</button>` +
        `</div>`,
    );
  }
  parts.push(`<div class="actions"><button id="export">export verified (e)</button></div>`);
  parts.push(`<div class="hint">n/p: next/prev &middot; click: select &middot; drag handle: move vertex</div>`);
  sidebar.innerHTML = parts.join("\n");

  sidebar.querySelector("#accept")?.addEventListener("click", () => void accept());
  sidebar.querySelector("#delete")?.addEventListener("click", () => void remove());
  sidebar.querySelector("#export")?.addEventListener("click", () => void exportVerified());
  for (const input of sidebar.querySelectorAll<HTMLInputElement>("input[data-attr]")) {
    input.addEventListener("change", () => {
      const id = store.selectedId;
      if (id === null) return;
      void editor
        .applyEdit({ kind: "set_attr", id, name: input.dataset.attr!, tag: input.value })
        .then((outcome) => {
          if (!outcome.ok) showToast(`edit rejected: ${outcome.error}`, true);
          draw();
        });
    });
  }
}

async function accept(): Promise<void> {
  const id = store.selectedId;
  if (id === null) return;
  const outcome = await editor.applyEdit({ kind: "set_status", id, status: "accepted" });
  if (!outcome.ok) showToast(`accept failed: ${outcome.error}`, true);
  store.selectNext();
  draw();
}

async function remove(): Promise<void> {
  const id = store.selectedId;
  if (id === null) return;
  const outcome = await editor.applyEdit({ kind: "set_status", id, status: "deleted" });
  if (!outcome.ok) showToast(`delete failed: ${outcome.error}`, true);
  store.selectNext();
  draw();
}

async function exportVerified(): Promise<void> {
  try {
    const result = await editor.exportVerified();
    const s = result.summary;
    showToast(
      `exported to ${result.path}: accepted ${s.accepted}, edited ${s.edited}, deleted ${s.deleted}`,
    );
  } catch (exc) {
    showToast(`export failed: ${exc instanceof Error ? exc.message : String(exc)}`, true);
  }
}

function pick(world: Point): string | null {
  const radius = 12 / cam.zoom;
  let best: string | null = null;
  let bestDist = radius;
  for (const id of index.candidates(world, radius)) {
    if (store.status.get(id) === "deleted") continue;
    const e = store.get(id);
    if (!e) continue;
    if (store.filter !== null && !store.filter.has(e.semantic)) continue;
    const d = distanceToElement(world, e);
    if (d < bestDist) {
      bestDist = d;
      best = id;
    }
  }
  return best;
}

function vertexAt(screen: Point): { id: string; vertex: number } | null {
  const id = store.selectedId;
  if (id === null) return null;
  const e = store.get(id);
  if (!e) return null;
  for (let i = 0; i < e.points.length; i++) {
    const [x, y] = worldToScreen(cam, e.points[i], canvas.height);
    if (Math.hypot(x - screen[0], y - screen[1]) <= 7) {
      return { id, vertex: i };
    }
  }
  return null;
}

canvas.addEventListener("pointerdown", (ev) => {
  const screen: Point = [ev.offsetX, ev.offsetY];
  const handle = vertexAt(screen);
  if (handle !== null) {
    dragging = { mode: "vertex", id: handle.id, vertex: handle.vertex };
    canvas.setPointerCapture(ev.pointerId);
    return;
  }
  const world = screenToWorld(cam, screen, canvas.height);
  const hit = pick(world);
  if (hit !== null) {
    store.select(hit);
    draw();
  }
  dragging = { mode: "pan", last: screen };
  canvas.setPointerCapture(ev.pointerId);
});

canvas.addEventListener("pointermove", (ev) => {
  if (dragging === null) return;
  const screen: Point = [ev.offsetX, ev.offsetY];
  if (dragging.mode === "pan") {
    cam.panX -= (screen[0] - dragging.last[0]) / cam.zoom;
    cam.panY += (screen[1] - dragging.last[1]) / cam.zoom;
    dragging.last = screen;
    draw();
    return;
  }
  // live-preview the vertex drag locally; the PATCH goes out on release
  const e = store.get(dragging.id);
  if (!e) return;
  e.points[dragging.vertex] = screenToWorld(cam, screen, canvas.height);
  draw();
});

canvas.addEventListener("pointerup", (ev) => {
  if (dragging?.mode === "vertex") {
    const { id, vertex } = dragging;
    const e = store.get(id);
    if (e) {
      const point = e.points[vertex];
      void editor.applyEdit({ kind: "move_vertex", id, vertexIndex: vertex, point }).then((outcome) => {
        if (!outcome.ok) showToast(`edit rejected: ${outcome.error}`, true);
        index.rebuild(store.elements.values());
        draw();
      });
    }
  }
  dragging = null;
  canvas.releasePointerCapture(ev.pointerId);
});

canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  const factor = ev.deltaY < 0 ? 1.2 : 1 / 1.2;
  const before = screenToWorld(cam, [ev.offsetX, ev.offsetY], canvas.height);
  cam.zoom *= factor;
  const after = screenToWorld(cam, [ev.offsetX, ev.offsetY], canvas.height);
  cam.panX += before[0] - after[0];
  cam.panY += before[1] - after[1];
  draw();
});

window.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement) return;
  if (ev.key === "n") {
    store.selectNext(1);
    draw();
  } else if (ev.key === "p") {
    store.selectNext(-1);
    draw();
  } else if (ev.key === "a") {
    void accept();
  } else if (ev.key === "d" || ev.key === "Delete") {
    void remove();
  } else if (ev.key === "e") {
    void exportVerified();
  }
});

window.addEventListener("resize", resize);

async function boot(): Promise<void> {
  try {
    await editor.load();
  } catch (exc) {
    if (exc instanceof SchemaMismatchError) {
      showBanner(`map schema mismatch: ${exc.message}`);
    } else {
      showBanner(`failed to load map: ${exc instanceof Error ? exc.message : String(exc)}`);
    }
    return;
  }
  index.rebuild(store.elements.values());
  const bounds = mapBounds(store.visibleElements());
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
  if (bounds !== null) {
    cam = fitCamera(bounds, canvas.width, canvas.height);
  }
  draw();
}

void boot();
