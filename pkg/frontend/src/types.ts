// JSON shapes exchanged with the map service, mirroring its canonical schema.

export type GeomKind = "line" | "discrete" | "area";

export type Point = [number, number];

export interface ElementJson {
  id: string;
  kind: GeomKind;
  semantic: string;
  points: Point[];
  attrs: Record<string, string>;
  confidence: number;
}

export interface FrameTransform {
  theta: number;
  tx: number;
  ty: number;
}

export interface FrameJson {
  name: string;
  unit: "meter" | "pixel";
  transform?: FrameTransform;
}

export interface MapJson {
  schema_version: number;
  frame: FrameJson;
  elements: ElementJson[];
}

export type ElementStatus = "auto" | "accepted" | "edited" | "deleted";

export interface StatusSummary {
  auto: number;
  accepted: number;
  edited: number;
  deleted: number;
}

export interface StatusResponse {
  status: Record<string, ElementStatus>;
  summary: StatusSummary;
}

export interface ExportResponse {
  path: string;
  manifest_path: string;
  summary: StatusSummary;
}

/** Raised when the server payload does not look like a map document. */
export class SchemaMismatchError extends Error {}

const KINDS: readonly string[] = ["line", "discrete", "area"];

function isPoint(p: unknown): p is Point {
  return (
    Array.isArray(p) &&
    p.length === 2 &&
    typeof p[0] === "number" &&
    typeof p[1] === "number" &&
    Number.isFinite(p[0]) &&
    Number.isFinite(p[1])
  );
}

export function validateElementJson(obj: unknown): ElementJson {
  if (typeof obj !== "object" || obj === null) {
    throw new SchemaMismatchError("element is not an object");
  }
  const e = obj as Record<string, unknown>;
  if (typeof e.id !== "string" || e.id.length === 0) {
    throw new SchemaMismatchError("element id missing");
  }
  if (typeof e.kind !== "string" || !KINDS.includes(e.kind)) {
    throw new SchemaMismatchError(`element ${e.id}: unknown kind ${String(e.kind)}`);
  }
  if (typeof e.semantic !== "string") {
    throw new SchemaMismatchError(`element ${e.id}: semantic missing`);
  }
  if (!Array.isArray(e.points) || e.points.length === 0 || !e.points.every(isPoint)) {
    throw new SchemaMismatchError(`element ${e.id}: malformed points`);
  }
  const attrs = (e.attrs ?? {}) as Record<string, unknown>;
  for (const [k, v] of Object.entries(attrs)) {
    if (typeof v !== "string") {
      throw new SchemaMismatchError(`element ${e.id}: attr ${k} is not a string tag`);
    }
  }
  const confidence = e.confidence ?? 1.0;
  if (typeof confidence !== "number" || confidence < 0 || confidence > 1) {
    throw new SchemaMismatchError(`element ${e.id}: bad confidence`);
  }
  return {
    id: e.id,
    kind: e.kind as GeomKind,
    semantic: e.semantic,
    points: (e.points as Point[]).map((p) => [p[0], p[1]]),
    attrs: { ...(attrs as Record<string, string>) },
    confidence,
  };
}

export function validateMapJson(obj: unknown): MapJson {
  if (typeof obj !== "object" || obj === null) {
    throw new SchemaMismatchError("map payload is not an object");
  }
  const m = obj as Record<string, unknown>;
  if (m.schema_version !== undefined && m.schema_version !== 1) {
    throw new SchemaMismatchError(`unsupported schema_version ${String(m.schema_version)}`);
  }
  const frame = m.frame as Record<string, unknown> | undefined;
  if (!frame || typeof frame.name !== "string" || (frame.unit !== "meter" && frame.unit !== "pixel")) {
    throw new SchemaMismatchError("map frame missing or malformed");
  }
  if (!Array.isArray(m.elements)) {
    throw new SchemaMismatchError("map elements missing");
  }
  return {
    schema_version: 1,
    frame: frame as unknown as FrameJson,
    elements: m.elements.map(validateElementJson),
  };
}

export function cloneElement(e: ElementJson): ElementJson {
  return {
    id: e.id,
    kind: e.kind,
    semantic: e.semantic,
    points: e.points.map((p) => [p[0], p[1]] as Point),
    attrs: { ...e.attrs },
    confidence: e.confidence,
  };
}
