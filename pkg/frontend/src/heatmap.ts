/** Pixel-buffer builders for the two panels plus canvas blitting.
 *
 * The RGBA builders are pure so tests can assert on bytes; only
 * drawInto touches the canvas API.
 */

import { valueToRgb } from "./colormap.js";

const MASK_DARK = 24;
const MASK_LIGHT = 233;

export function maskToRgba(mask: Uint8Array, width: number, height: number): Uint8ClampedArray {
  if (mask.length !== width * height) {
    throw new Error(`mask has ${mask.length} pixels, expected ${width * height}`);
  }
  const out = new Uint8ClampedArray(width * height * 4);
  for (let i = 0; i < mask.length; i++) {
    const v = mask[i] ? MASK_LIGHT : MASK_DARK;
    out[i * 4] = v;
    out[i * 4 + 1] = v;
    out[i * 4 + 2] = v;
    out[i * 4 + 3] = 255;
  }
  return out;
}

export function fieldToRgba(
  field: Float32Array,
  width: number,
  height: number,
  min: number,
  max: number,
): Uint8ClampedArray {
  if (field.length !== width * height) {
    throw new Error(`field has ${field.length} values, expected ${width * height}`);
  }
  const out = new Uint8ClampedArray(width * height * 4);
  for (let i = 0; i < field.length; i++) {
    const [r, g, b] = valueToRgb(field[i] ?? min, min, max);
    out[i * 4] = r;
    out[i * 4 + 1] = g;
    out[i * 4 + 2] = b;
    out[i * 4 + 3] = 255;
  }
  return out;
}

/** Field value under a canvas-space cursor, or null outside the panel. */
export function fieldValueAt(
  field: Float32Array,
  rows: number,
  cols: number,
  x: number,
  y: number,
  canvasWidth: number,
  canvasHeight: number,
): number | null {
  if (x < 0 || y < 0 || x >= canvasWidth || y >= canvasHeight) return null;
  const col = Math.min(cols - 1, Math.floor((x / canvasWidth) * cols));
  const row = Math.min(rows - 1, Math.floor((y / canvasHeight) * rows));
  const value = field[row * cols + col];
  return value === undefined ? null : value;
}

export function drawInto(
  canvas: HTMLCanvasElement,
  rgba: Uint8ClampedArray,
  width: number,
  height: number,
): void {
  canvas.width = width;
  canvas.height = height;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas context unavailable");
  // fresh buffer: ImageData insists on non-shared ArrayBuffer storage
  const data = new Uint8ClampedArray(rgba.length);
  data.set(rgba);
  ctx.putImageData(new ImageData(data, width, height), 0, 0);
}
