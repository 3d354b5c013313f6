import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { debounce } from "../src/debounce.js";

describe("debounce", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("collapses a rapid burst into one trailing call", () => {
    const calls: number[] = [];
    const fn = debounce((v: number) => calls.push(v), 150);
    for (let i = 0; i < 10; i++) {
      fn(i);
      vi.advanceTimersByTime(30);
    }
    expect(calls).toEqual([]);
    vi.advanceTimersByTime(119);
    expect(calls).toEqual([]);
    vi.advanceTimersByTime(1);
    expect(calls).toEqual([9]);
  });

  it("fires again for a second burst", () => {
    const calls: string[] = [];
    const fn = debounce((v: string) => calls.push(v), 150);
    fn("a");
    vi.advanceTimersByTime(150);
    fn("b");
    vi.advanceTimersByTime(150);
    expect(calls).toEqual(["a", "b"]);
  });

  it("cancel drops the pending call", () => {
    const calls: number[] = [];
    const fn = debounce((v: number) => calls.push(v), 150);
    fn(1);
    fn.cancel();
    vi.advanceTimersByTime(1000);
    expect(calls).toEqual([]);
  });
});
