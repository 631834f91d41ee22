// Thin typed client over the verification service endpoints.

import type { ElementJson, ElementStatus, ExportResponse, MapJson, StatusResponse } from "./types.js";
import { validateMapJson, validateElementJson } from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseDetail(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return res.statusText;
  }
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const res = await fetch(this.baseUrl + path, init);
    if (!res.ok) {
      throw new ApiError(res.status, await parseDetail(res));
    }
    return res.json();
  }

  async getMap(): Promise<MapJson> {
    return validateMapJson(await this.request("/map"));
  }

  async getStatus(): Promise<StatusResponse> {
    return (await this.request("/status")) as StatusResponse;
  }

  async getElement(id: string): Promise<ElementJson> {
    return validateElementJson(await this.request(`/elements/${encodeURIComponent(id)}`));
  }

  async patchElement(element: ElementJson): Promise<ElementJson> {
    const body = JSON.stringify(element);
    return validateElementJson(
      await this.request(`/elements/${encodeURIComponent(element.id)}`, {
        method: "PATCH",
        headers: { "content-type": "application/json" },
        body,
      }),
    );
  }

  async setStatus(id: string, status: Extract<ElementStatus, "accepted" | "deleted">): Promise<void> {
    await this.request(`/elements/${encodeURIComponent(id)}/status`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ status }),
    });
  }

  async exportVerified(): Promise<ExportResponse> {
    return (await this.request("/export", { method: "POST" })) as ExportResponse;
  }

  async getReport(): Promise<unknown> {
    return this.request("/report");
  }
}
