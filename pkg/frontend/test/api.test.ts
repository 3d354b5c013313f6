import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, Client, decodeBytes, decodeField } from "../src/api.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

afterEach(() => vi.unstubAllGlobals());

describe("Client", () => {
  it("posts explore requests and returns the payload", async () => {
    const seen: { url: string; body: unknown }[] = [];
    vi.stubGlobal("fetch", async (url: string, init?: RequestInit) => {
      seen.push({ url, body: JSON.parse(String(init?.body)) });
      return jsonResponse(200, { alpha: [1, 2, 3, 4], field_min: 0, field_max: 1 });
    });
    const client = new Client("http://service");
    const res = await client.explore({ alpha: [1, 2, 3, 4], mu1: 900, mu2: 20000 });
    expect(seen[0]!.url).toBe("http://service/explore");
    expect(seen[0]!.body).toEqual({ alpha: [1, 2, 3, 4], mu1: 900, mu2: 20000 });
    expect(res.alpha).toEqual([1, 2, 3, 4]);
  });

  it("turns machine-readable errors into ApiError", async () => {
    vi.stubGlobal("fetch", async () =>
      jsonResponse(422, { code: "mu1_out_of_range", message: "mu1=1 outside supported range" }),
    );
    const client = new Client("http://service");
    const err = await client.explore({ alpha: [0, 0, 0, 0], mu1: 1, mu2: 20000 }).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(422);
    expect(err.code).toBe("mu1_out_of_range");
  });

  it("same seed produces the same sampled alpha", async () => {
    const alphaForSeed = (seed: number) => [seed * 0.1, seed * 0.2, 0, 1];
    vi.stubGlobal("fetch", async (_url: string, init?: RequestInit) => {
      const body = JSON.parse(String(init?.body)) as { n: number; seed: number };
      return jsonResponse(200, { alphas: [alphaForSeed(body.seed)], images: ["AA=="] });
    });
    const client = new Client("http://service");
    const first = await client.generate(1, 7);
    const second = await client.generate(1, 7);
    const other = await client.generate(1, 8);
    expect(first.alphas).toEqual(second.alphas);
    expect(first.alphas).not.toEqual(other.alphas);
  });
});

describe("payload decoding", () => {
  it("decodes base64 mask bytes", () => {
    expect(Array.from(decodeBytes("AAEBAA=="))).toEqual([0, 1, 1, 0]);
  });

  it("decodes little-endian float32 fields", () => {
    const buf = new ArrayBuffer(8);
    const view = new DataView(buf);
    view.setFloat32(0, 1.5, true);
    view.setFloat32(4, -3.25, true);
    const b64 = btoa(String.fromCharCode(...new Uint8Array(buf)));
    expect(Array.from(decodeField(b64))).toEqual([1.5, -3.25]);
  });
});
