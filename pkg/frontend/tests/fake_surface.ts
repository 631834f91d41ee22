import type { DrawSurface } from "../src/render.js";

/** Recording stand-in for a 2D canvas context. */
export class FakeSurface implements DrawSurface {
  lineWidth = 1;
  strokeStyle: string | CanvasGradient | CanvasPattern = "#000";
  fillStyle: string | CanvasGradient | CanvasPattern = "#000";
  globalAlpha = 1;
  font = "";

  clears = 0;
  paths = 0;
  strokes = 0;
  fills = 0;
  arcs = 0;
  vertices = 0;

  clearRect(): void {
    this.clears += 1;
  }
  beginPath(): void {
    this.paths += 1;
  }
  moveTo(): void {
    this.vertices += 1;
  }
  lineTo(): void {
    this.vertices += 1;
  }
  closePath(): void {}
  stroke(): void {
    this.strokes += 1;
  }
  fill(): void {
    this.fills += 1;
  }
  arc(): void {
    this.arcs += 1;
  }
}
