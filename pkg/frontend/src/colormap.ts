/** Perceptual colormap for stress fields: viridis control points with
 * linear interpolation. Degenerate ranges map to the midpoint color. */

export type Rgb = [number, number, number];

const STOPS: Rgb[] = [
  [68, 1, 84],
  [72, 40, 120],
  [62, 74, 137],
  [49, 104, 142],
  [38, 130, 142],
  [31, 158, 137],
  [53, 183, 121],
  [109, 205, 89],
  [180, 222, 44],
  [253, 231, 37],
];

export function normalize(value: number, min: number, max: number): number {
  if (!Number.isFinite(value)) return 0;
  if (max <= min) return 0.5;
  const t = (value - min) / (max - min);
  return Math.min(1, Math.max(0, t));
}

export function colorFor(t: number): Rgb {
  const scaled = Math.min(1, Math.max(0, t)) * (STOPS.length - 1);
  const idx = Math.min(STOPS.length - 2, Math.floor(scaled));
  const frac = scaled - idx;
  const a = STOPS[idx] as Rgb;
  const b = STOPS[idx + 1] as Rgb;
  return [
    Math.round(a[0] + (b[0] - a[0]) * frac),
    Math.round(a[1] + (b[1] - a[1]) * frac),
    Math.round(a[2] + (b[2] - a[2]) * frac),
  ];
}

export function valueToRgb(value: number, min: number, max: number): Rgb {
  return colorFor(normalize(value, min, max));
}
