/** Typed client for the design service's JSON endpoints.
 *
 * Masks arrive as base64 raw bytes (one byte per pixel, row-major,
 * nonzero = inclusion); fields as base64 little-endian float32.
 */

export interface LatentBounds {
  lo: number[];
  hi: number[];
}

export interface HealthInfo {
  status: string;
  bundle: string;
}

export interface ModeSummary {
  m1: number;
  m2: number;
  field_rms: number;
}

export interface ExploreRequest {
  alpha?: number[];
  image?: string;
  mu1: number;
  mu2: number;
  field_resolution?: number;
}

export interface ExploreResponse {
  alpha: number[];
  image: string;
  field: string;
  field_shape: [number, number];
  field_min: number;
  field_max: number;
  modes_summary: ModeSummary[];
}

export interface GenerateResponse {
  alphas: number[][];
  images: string[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function asApiError(response: Response): Promise<ApiError> {
  let code = "unknown";
  let message = `request failed with status ${response.status}`;
  try {
    const body = (await response.json()) as { code?: string; message?: string };
    if (body.code) code = body.code;
    if (body.message) message = body.message;
  } catch {
    // non-JSON error body; keep the generic message
  }
  return new ApiError(response.status, code, message);
}

export class Client {
  constructor(readonly base: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.base + path, init);
    if (!response.ok) throw await asApiError(response);
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  health(): Promise<HealthInfo> {
    return this.request<HealthInfo>("/health");
  }

  latentBounds(): Promise<LatentBounds> {
    return this.request<LatentBounds>("/latent-bounds");
  }

  explore(req: ExploreRequest): Promise<ExploreResponse> {
    return this.post<ExploreResponse>("/explore", req);
  }

  generate(n: number, seed: number): Promise<GenerateResponse> {
    return this.post<GenerateResponse>("/generate", { n, seed });
  }
}

export function decodeBytes(b64: string): Uint8Array {
  const raw = atob(b64);
  const out = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) out[i] = raw.charCodeAt(i);
  return out;
}

export function decodeField(b64: string): Float32Array {
  const bytes = decodeBytes(b64);
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const out = new Float32Array(bytes.byteLength / 4);
  for (let i = 0; i < out.length; i++) out[i] = view.getFloat32(i * 4, true);
  return out;
}
