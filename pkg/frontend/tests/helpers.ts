// Test fixtures: spawn the real map service (the Python CLI) on a scratch
// map and talk to it over HTTP, exactly like the deployed client would.

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";

const PYTHON = process.env.VMA_PYTHON ?? "python3";

// grid of line / discrete / area elements, 1000 total
const GEN_MAP = `
import sys
from vma.model import MapElement, GeomKind, VectorizedMap
from vma.mapio import save_map

elements = []
i = 0
for row in range(25):
    for col in range(40):
        x, y = col * 12.0, row * 12.0
        kind = i % 3
        if kind == 0:
            elements.append(MapElement(
                f"line{i:04d}", GeomKind.LINE, "curb",
                ((x, y), (x + 8.0, y), (x + 8.0, y + 4.0)),
                {"curb_type": "road_side"}))
        elif kind == 1:
            elements.append(MapElement(
                f"box{i:04d}", GeomKind.DISCRETE, "arrow",
                ((x + 1.5, y + 0.5), (x + 1.5, y - 0.5), (x - 1.5, y - 0.5), (x - 1.5, y + 0.5)),
                {"arrow_type": "straight"}))
        else:
            elements.append(MapElement(
                f"area{i:04d}", GeomKind.AREA, "crosswalk",
                ((x, y), (x + 4.0, y), (x + 4.0, y + 2.0), (x, y + 2.0))))
        i += 1
save_map(VectorizedMap(elements=tuple(elements)), sys.argv[1])
`;

const SERVE = `
import sys
from vma.cli import main
sys.exit(main(["serve", "--map", sys.argv[1], "--port", sys.argv[2]]))
`;

const REPLAY = `
import sys
from vma.mapio import dumps_map, load_map
from vma.server import replay_journal

original = load_map(sys.argv[1])
with open(sys.argv[2], encoding="utf-8") as fh:
    lines = fh.read().splitlines()
with open(sys.argv[3], "w", encoding="utf-8") as out:
    out.write(dumps_map(replay_journal(original, lines)) + "\\n")
`;

export interface ServerFixture {
  baseUrl: string;
  mapPath: string;
  journalPath: string;
  workDir: string;
  stop(): Promise<void>;
}

export function buildSampleMap(mapPath: string): void {
  execFileSync(PYTHON, ["-c", GEN_MAP, mapPath], { stdio: "pipe" });
}

export function replayJournal(mapPath: string, journalPath: string, outPath: string): void {
  execFileSync(PYTHON, ["-c", REPLAY, mapPath, journalPath, outPath], { stdio: "pipe" });
}

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      const port = address.port;
      srv.close(() => resolve(port));
    });
  });
}

async function waitForServer(baseUrl: string, proc: ChildProcess, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    if (proc.exitCode !== null) {
      throw new Error(`server exited early with code ${proc.exitCode}`);
    }
    try {
      const res = await fetch(`${baseUrl}/map`);
      if (res.ok) {
        await res.arrayBuffer();
        return;
      }
    } catch (exc) {
      lastError = exc;
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  throw new Error(`server did not come up: ${String(lastError)}`);
}

export async function startServer(): Promise<ServerFixture> {
  const workDir = mkdtempSync(join(tmpdir(), "vma-ui-"));
  const mapPath = join(workDir, "scene.json");
  buildSampleMap(mapPath);
  const port = await freePort();
  const proc = spawn(PYTHON, ["-c", SERVE, mapPath, String(port)], {
    stdio: ["ignore", "pipe", "pipe"],
  });
  let stderr = "";
  proc.stderr?.on("data", (chunk: Buffer) => {
    stderr += chunk.toString();
  });
  const baseUrl = `http://127.0.0.1:${port}`;
  try {
    await waitForServer(baseUrl, proc);
  } catch (exc) {
    proc.kill("SIGKILL");
    throw new Error(`${String(exc)}\nserver stderr:\n${stderr}`);
  }
  return {
    baseUrl,
    mapPath,
    journalPath: join(workDir, "scene.journal.jsonl"),
    workDir,
    async stop() {
      proc.kill("SIGTERM");
      await new Promise<void>((resolve) => {
        const force = setTimeout(() => {
          proc.kill("SIGKILL");
          resolve();
        }, 5000);
        proc.once("exit", () => {
          clearTimeout(force);
          resolve();
        });
      });
      rmSync(workDir, { recursive: true, force: true });
    },
  };
}
