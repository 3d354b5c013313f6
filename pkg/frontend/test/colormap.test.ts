import { describe, expect, it } from "vitest";

import { normalize, valueToRgb } from "../src/colormap.js";

describe("colormap", () => {
  it("degenerate range maps everything to the midpoint", () => {
    expect(normalize(7, 7, 7)).toBe(0.5);
    expect(valueToRgb(7, 7, 7)).toEqual(valueToRgb(0.5, 0, 1));
  });

  it("clamps out-of-range values", () => {
    expect(normalize(-10, 0, 1)).toBe(0);
    expect(normalize(10, 0, 1)).toBe(1);
  });

  it("a 2x2 field of 1,2,3,4 gets four distinct ordered colors", () => {
    const colors = [1, 2, 3, 4].map((v) => valueToRgb(v, 1, 4));
    const keys = colors.map((c) => c.join(","));
    expect(new Set(keys).size).toBe(4);
    // viridis green channel grows monotonically with value
    for (let i = 1; i < colors.length; i++) {
      expect(colors[i]![1]).toBeGreaterThan(colors[i - 1]![1]);
    }
  });
});
