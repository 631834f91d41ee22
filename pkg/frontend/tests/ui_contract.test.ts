// End-to-end contract against the real map service: a served 1000-element
// map is loaded, rendered, edited, reviewed and exported through the same
// code paths the browser client uses.

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { Editor } from "../src/editor.js";
import { fitCamera, mapBounds } from "../src/geometry.js";
import { legendLines, renderMap } from "../src/render.js";
import { ReviewStore } from "../src/state.js";
import type { MapJson, Point } from "../src/types.js";
import { FakeSurface } from "./fake_surface.js";
import { replayJournal, startServer, type ServerFixture } from "./helpers.js";

let server: ServerFixture;
let api: ApiClient;
let store: ReviewStore;
let editor: Editor;

beforeAll(async () => {
  server = await startServer();
  api = new ApiClient(server.baseUrl);
  store = new ReviewStore();
  editor = new Editor(store, api);
  await editor.load();
}, 90_000);

afterAll(async () => {
  await server?.stop();
});

describe("served 1000-element map", () => {
  it("loads and renders every element", () => {
    expect(store.order.length).toBe(1000);
    const bounds = mapBounds(store.visibleElements())!;
    const cam = fitCamera(bounds, 1600, 1000);
    const ctx = new FakeSurface();
    const stats = renderMap(ctx, store, cam, 1600, 1000);
    expect(stats.drawn).toBe(1000);
    const legendTotal = legendLines(store)
      .map((line) => Number(line.split(": ")[1]))
      .reduce((a, b) => a + b, 0);
    expect(legendTotal).toBe(1000);
  });

  it("vertex edit round-trips through PATCH and reload", async () => {
    const id = "line0000";
    const moved: Point = [3.25, 1.5];
    const outcome = await editor.applyEdit({
      kind: "move_vertex",
      id,
      vertexIndex: 1,
      point: moved,
    });
    expect(outcome.ok).toBe(true);
    expect(store.status.get(id)).toBe("edited");

    // a fresh client sees the edit after reload
    const fresh = new ReviewStore();
    const freshEditor = new Editor(fresh, new ApiClient(server.baseUrl));
    await freshEditor.load();
    expect(fresh.get(id)!.points[1]).toEqual(moved);
    expect(fresh.status.get(id)).toBe("edited");
  });

  it("rejects an invariant-violating edit with 422 and visibly reverts", async () => {
    const id = "box0001";
    const before = store.get(id)!.points.map((p) => [...p] as Point);
    // drag a back corner across the front edge: a self-intersecting quad
    const bowtie: Point = [before[0][0] + 1.5, before[0][1] - 0.5];
    const outcome = await editor.applyEdit({
      kind: "move_vertex",
      id,
      vertexIndex: 3,
      point: bowtie,
    });
    expect(outcome.ok).toBe(false);
    expect(outcome.status).toBe(422);
    expect(editor.lastError).toBeTruthy();
    // the store (what the canvas draws) is back to the original geometry
    expect(store.get(id)!.points).toEqual(before);
    expect(store.status.get(id)).toBe("auto");
    const bounds = mapBounds(store.visibleElements())!;
    const stats = renderMap(new FakeSurface(), store, fitCamera(bounds, 800, 600), 800, 600);
    expect(stats.drawn).toBe(1000);
    // and the server agrees
    const onServer = await api.getElement(id);
    expect(onServer.points).toEqual(before);
  });

  it("excludes a deleted element from the export", async () => {
    const victim = "area0002";
    const outcome = await editor.applyEdit({ kind: "set_status", id: victim, status: "deleted" });
    expect(outcome.ok).toBe(true);
    const accepted = await editor.applyEdit({
      kind: "set_status",
      id: "line0003",
      status: "accepted",
    });
    expect(accepted.ok).toBe(true);

    const result = await editor.exportVerified();
    expect(result.summary.deleted).toBe(1);
    const exported = JSON.parse(readFileSync(result.path, "utf-8")) as MapJson;
    expect(exported.elements.length).toBe(999);
    expect(exported.elements.some((e) => e.id === victim)).toBe(false);
    // renderer hides it too
    expect(store.visibleElements().some((e) => e.id === victim)).toBe(false);

    const manifest = JSON.parse(readFileSync(result.manifest_path, "utf-8")) as {
      element_status: Record<string, string>;
      eligible_training_data: boolean;
    };
    expect(manifest.eligible_training_data).toBe(true);
    expect(manifest.element_status[victim]).toBe("deleted");
  });

  it("journal replay reproduces the exported file byte-identically", async () => {
    const result = await editor.exportVerified();
    const replayed = join(server.workDir, "replayed.json");
    replayJournal(server.mapPath, server.journalPath, replayed);
    const exportedBytes = readFileSync(result.path);
    const replayedBytes = readFileSync(replayed);
    expect(replayedBytes.equals(exportedBytes)).toBe(true);
  });

  it("serves the evaluation report endpoint contract", async () => {
    await expect(api.getReport()).rejects.toMatchObject({ status: 404 });
  });
});
