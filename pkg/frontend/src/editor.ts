// Wires the review store to the HTTP API: optimistic local updates, one
// in-flight mutation at a time (journal order preserved), rollback on
// rejection.

import { ApiClient, ApiError } from "./api.js";
import type { EditAction } from "./state.js";
import { ReviewStore } from "./state.js";
import type { ExportResponse } from "./types.js";

export interface EditOutcome {
  ok: boolean;
  error?: string;
  status?: number;
}

export class Editor {
  lastError: string | null = null;
  private queue: Promise<unknown> = Promise.resolve();

  constructor(
    readonly store: ReviewStore,
    readonly api: ApiClient,
  ) {}

  async load(): Promise<void> {
    const map = await this.api.getMap();
    let statuses: Record<string, never> | Record<string, "auto" | "accepted" | "edited" | "deleted"> = {};
    try {
      statuses = (await this.api.getStatus()).status;
    } catch {
      statuses = {};
    }
    this.store.loadMap(map, statuses);
  }

  /** Apply an edit optimistically and confirm it with the server. */
  applyEdit(action: EditAction): Promise<EditOutcome> {
    const run = this.queue.then(async (): Promise<EditOutcome> => {
      let applied: ReturnType<ReviewStore["applyLocal"]>;
      try {
        applied = this.store.applyLocal(action);
      } catch (exc) {
        const msg = exc instanceof Error ? exc.message : String(exc);
        this.lastError = msg;
        return { ok: false, error: msg };
      }
      try {
        if (action.kind === "set_status") {
          await this.api.setStatus(action.id, action.status);
        } else {
          await this.api.patchElement(applied.element!);
        }
        this.lastError = null;
        return { ok: true };
      } catch (exc) {
        applied.undo();
        if (exc instanceof ApiError) {
          this.lastError = exc.detail;
          return { ok: false, error: exc.detail, status: exc.status };
        }
        const msg = exc instanceof Error ? exc.message : String(exc);
        this.lastError = msg;
        return { ok: false, error: msg };
      }
    });
    // keep the chain alive whatever the outcome
    this.queue = run.catch(() => undefined);
    return run;
  }

  async exportVerified(): Promise<ExportResponse> {
    const result = await this.api.exportVerified();
    this.lastError = null;
    return result;
  }
}
