/** Slider state: clamping against served bounds and URL-fragment codec. */

import type { LatentBounds } from "./api.js";

export interface MaterialRange {
  min: number;
  max: number;
}

export const MU1_RANGE: MaterialRange = { min: 800, max: 2400 };
export const MU2_RANGE: MaterialRange = { min: 12000, max: 68000 };

export interface SliderState {
  alpha: number[];
  mu1: number;
  mu2: number;
}

export function clampValue(value: number, min: number, max: number): number {
  if (!Number.isFinite(value)) return min;
  return Math.min(max, Math.max(min, value));
}

export function clampState(state: SliderState, bounds: LatentBounds): SliderState {
  const alpha = state.alpha.map((v, i) =>
    clampValue(v, bounds.lo[i] ?? 0, bounds.hi[i] ?? 0),
  );
  return {
    alpha,
    mu1: clampValue(state.mu1, MU1_RANGE.min, MU1_RANGE.max),
    mu2: clampValue(state.mu2, MU2_RANGE.min, MU2_RANGE.max),
  };
}

export function defaultState(bounds: LatentBounds): SliderState {
  return {
    alpha: bounds.lo.map((lo, i) => (lo + (bounds.hi[i] ?? lo)) / 2),
    mu1: (MU1_RANGE.min + MU1_RANGE.max) / 2,
    mu2: (MU2_RANGE.min + MU2_RANGE.max) / 2,
  };
}

/** Encode the state into a shareable "#a=..&m1=..&m2=.." fragment. */
export function encodeFragment(state: SliderState): string {
  const alpha = state.alpha.map((v) => v.toPrecision(8)).join(",");
  return `#a=${alpha}&m1=${state.mu1.toPrecision(8)}&m2=${state.mu2.toPrecision(8)}`;
}

/** Parse a fragment produced by encodeFragment; null when absent or malformed. */
export function decodeFragment(hash: string, alphaWidth: number): SliderState | null {
  if (!hash.startsWith("#")) return null;
  const params = new URLSearchParams(hash.slice(1));
  const alphaText = params.get("a");
  const mu1 = Number(params.get("m1"));
  const mu2 = Number(params.get("m2"));
  if (alphaText === null || !Number.isFinite(mu1) || !Number.isFinite(mu2)) return null;
  const alpha = alphaText.split(",").map(Number);
  if (alpha.length !== alphaWidth || alpha.some((v) => !Number.isFinite(v))) return null;
  return { alpha, mu1, mu2 };
}
