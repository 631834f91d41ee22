import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { Editor } from "../src/editor.js";
import { ReviewStore } from "../src/state.js";
import type { ElementJson, MapJson } from "../src/types.js";

function sampleMap(): MapJson {
  return {
    schema_version: 1,
    frame: { name: "global", unit: "meter" },
    elements: [
      {
        id: "curb:0",
        kind: "line",
        semantic: "curb",
        points: [
          [0, 0],
          [50, 0],
        ],
        attrs: { curb_type: "road_side" },
        confidence: 1,
      },
      {
        id: "arrow:0",
        kind: "discrete",
        semantic: "arrow",
        points: [
          [11.5, 0.5],
          [11.5, -0.5],
          [8.5, -0.5],
          [8.5, 0.5],
        ],
        attrs: { arrow_type: "straight" },
        confidence: 0.9,
      },
      {
        id: "cross:0",
        kind: "area",
        semantic: "crosswalk",
        points: [
          [20, -4],
          [23, -4],
          [23, 4],
          [20, 4],
        ],
        attrs: {},
        confidence: 1,
      },
    ],
  };
}

function loaded(): ReviewStore {
  const store = new ReviewStore();
  store.loadMap(sampleMap());
  return store;
}

describe("ReviewStore", () => {
  it("loads elements in order with auto status", () => {
    const store = loaded();
    expect(store.order).toEqual(["curb:0", "arrow:0", "cross:0"]);
    expect(store.statusSummary()).toEqual({ auto: 3, accepted: 0, edited: 0, deleted: 0 });
  });

  it("hides deleted and filtered elements", () => {
    const store = loaded();
    store.applyLocal({ kind: "set_status", id: "arrow:0", status: "deleted" });
    expect(store.visibleElements().map((e) => e.id)).toEqual(["curb:0", "cross:0"]);
    store.filter = new Set(["crosswalk"]);
    expect(store.visibleElements().map((e) => e.id)).toEqual(["cross:0"]);
    expect(store.semanticCounts().get("crosswalk")).toBe(1);
  });

  it("move_vertex updates geometry and undo restores it exactly", () => {
    const store = loaded();
    const before = store.get("curb:0")!.points.map((p) => [...p]);
    const { undo } = store.applyLocal({
      kind: "move_vertex",
      id: "curb:0",
      vertexIndex: 1,
      point: [50, 3],
    });
    expect(store.get("curb:0")!.points[1]).toEqual([50, 3]);
    expect(store.status.get("curb:0")).toBe("edited");
    undo();
    expect(store.get("curb:0")!.points).toEqual(before);
    expect(store.status.get("curb:0")).toBe("auto");
    expect(store.dirty.has("curb:0")).toBe(false);
  });

  it("insert and delete vertex", () => {
    const store = loaded();
    store.applyLocal({ kind: "insert_vertex", id: "curb:0", afterIndex: 0, point: [25, 1] });
    expect(store.get("curb:0")!.points).toEqual([
      [0, 0],
      [25, 1],
      [50, 0],
    ]);
    store.applyLocal({ kind: "delete_vertex", id: "curb:0", vertexIndex: 1 });
    expect(store.get("curb:0")!.points).toEqual([
      [0, 0],
      [50, 0],
    ]);
  });

  it("set_attr changes one tag", () => {
    const store = loaded();
    store.applyLocal({ kind: "set_attr", id: "curb:0", name: "curb_type", tag: "guardrail" });
    expect(store.get("curb:0")!.attrs.curb_type).toBe("guardrail");
  });

  it("selectNext wraps and skips deleted elements", () => {
    const store = loaded();
    store.applyLocal({ kind: "set_status", id: "arrow:0", status: "deleted" });
    expect(store.selectNext()).toBe("curb:0");
    expect(store.selectNext()).toBe("cross:0");
    expect(store.selectNext()).toBe("curb:0");
    expect(store.selectNext(-1)).toBe("cross:0");
  });

  it("navigation never changes world coordinates", () => {
    const store = loaded();
    const snapshot = JSON.stringify([...store.elements.values()]);
    store.select("curb:0");
    store.selectNext();
    store.filter = new Set(["curb"]);
    store.filter = null;
    expect(JSON.stringify([...store.elements.values()])).toBe(snapshot);
  });
});

describe("Editor rollback", () => {
  function stubApi(overrides: Partial<Record<string, unknown>>): ApiClient {
    const base = {
      async patchElement(e: ElementJson) {
        return e;
      },
      async setStatus() {},
    };
    return { ...base, ...overrides } as unknown as ApiClient;
  }

  it("keeps the optimistic edit when the server accepts", async () => {
    const store = loaded();
    const editor = new Editor(store, stubApi({}));
    const outcome = await editor.applyEdit({
      kind: "move_vertex",
      id: "curb:0",
      vertexIndex: 1,
      point: [50, 2],
    });
    expect(outcome.ok).toBe(true);
    expect(store.get("curb:0")!.points[1]).toEqual([50, 2]);
    expect(editor.lastError).toBeNull();
  });

  it("rolls back and surfaces the message when the server rejects", async () => {
    const store = loaded();
    const { ApiError } = await import("../src/api.js");
    const editor = new Editor(
      store,
      stubApi({
        async patchElement() {
          throw new ApiError(422, "quad is self-intersecting");
        },
      }),
    );
    const outcome = await editor.applyEdit({
      kind: "move_vertex",
      id: "arrow:0",
      vertexIndex: 0,
      point: [0, 0],
    });
    expect(outcome.ok).toBe(false);
    expect(outcome.status).toBe(422);
    expect(store.get("arrow:0")!.points[0]).toEqual([11.5, 0.5]);
    expect(store.status.get("arrow:0")).toBe("auto");
    expect(editor.lastError).toContain("self-intersecting");
  });

  it("serializes mutations one at a time", async () => {
    const store = loaded();
    const active: number[] = [];
    let maxConcurrent = 0;
    const editor = new Editor(
      store,
      stubApi({
        async setStatus() {
          active.push(1);
          maxConcurrent = Math.max(maxConcurrent, active.length);
          await new Promise((r) => setTimeout(r, 10));
          active.pop();
        },
      }),
    );
    await Promise.all([
      editor.applyEdit({ kind: "set_status", id: "curb:0", status: "accepted" }),
      editor.applyEdit({ kind: "set_status", id: "arrow:0", status: "accepted" }),
      editor.applyEdit({ kind: "set_status", id: "cross:0", status: "deleted" }),
    ]);
    expect(maxConcurrent).toBe(1);
    expect(store.statusSummary()).toEqual({ auto: 0, accepted: 2, edited: 0, deleted: 1 });
  });
});
