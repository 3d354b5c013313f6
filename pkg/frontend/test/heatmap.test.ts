import { describe, expect, it } from "vitest";

import { fieldToRgba, fieldValueAt, maskToRgba } from "../src/heatmap.js";

describe("maskToRgba", () => {
  it("maps zero and nonzero pixels to two opaque grays", () => {
    const rgba = maskToRgba(new Uint8Array([0, 1, 1, 0]), 2, 2);
    expect(rgba.length).toBe(16);
    expect(rgba[3]).toBe(255);
    expect(rgba[0]).toBeLessThan(rgba[4]!);
    expect(rgba.slice(4, 7)).toEqual(rgba.slice(8, 11));
  });

  it("rejects a size mismatch", () => {
    expect(() => maskToRgba(new Uint8Array(3), 2, 2)).toThrow("expected 4");
  });
});

describe("fieldToRgba", () => {
  it("uniform field renders a single color", () => {
    const rgba = fieldToRgba(new Float32Array([0, 0, 0, 0]), 2, 2, 0, 0);
    for (let i = 4; i < 16; i += 4) {
      expect(rgba.slice(i, i + 3)).toEqual(rgba.slice(0, 3));
    }
  });

  it("distinct values get distinct colors", () => {
    const rgba = fieldToRgba(new Float32Array([1, 2, 3, 4]), 2, 2, 1, 4);
    const keys = [0, 1, 2, 3].map((i) => rgba.slice(i * 4, i * 4 + 3).join(","));
    expect(new Set(keys).size).toBe(4);
  });
});

describe("fieldValueAt", () => {
  const field = new Float32Array([10, 20, 30, 40]);

  it("maps cursor quadrants to cells", () => {
    expect(fieldValueAt(field, 2, 2, 10, 10, 100, 100)).toBe(10);
    expect(fieldValueAt(field, 2, 2, 90, 10, 100, 100)).toBe(20);
    expect(fieldValueAt(field, 2, 2, 10, 90, 100, 100)).toBe(30);
    expect(fieldValueAt(field, 2, 2, 99, 99, 100, 100)).toBe(40);
  });

  it("returns null outside the canvas", () => {
    expect(fieldValueAt(field, 2, 2, -1, 10, 100, 100)).toBeNull();
    expect(fieldValueAt(field, 2, 2, 10, 100, 100, 100)).toBeNull();
  });
});
