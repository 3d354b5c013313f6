"""HTTP facade over a trained model bundle.

Endpoints (JSON bodies, UTF-8):

* ``GET /health`` — liveness plus a digest of the loaded bundle.
* ``POST /encode`` — geometry mask to latent coefficients.
* ``POST /generate`` — sample new designs from the fitted density.
* ``POST /explore`` — assemble the surrogate for one latent point (or an
  encoded mask) and evaluate its field at one material point.
* ``GET /latent-bounds`` — per-component p1/p99 of the training latents,
  intended as slider ranges for client UIs.

Binary payloads travel as base64. A geometry mask is ``resolution**2`` raw
bytes, row-major, nonzero meaning inclusion; a field is little-endian
float32, row-major. Validation failures return 400 with a machine-readable
``code`` (422 for out-of-range material parameters); unexpected failures
return 500 carrying only an opaque ``error_id``.

The bundle is immutable and shared; handlers never mutate it, so any level
of request concurrency observes the same model state.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import logging
import uuid

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .container import canonical_json
from .oracle import MaterialPoint
from .pipeline import (
    ModelBundle,
    assemble_from_alpha,
    bundle_to_container,
    generate_designs,
)
from .rrae import decode, encode
from .spgd import basis_eval, evaluate

logger = logging.getLogger(__name__)

_LOCAL_ORIGINS = r"^https?://(localhost|127\.0\.0\.1)(:\d+)?$"


class RequestError(Exception):
    """Client error carrying an HTTP status and a machine-readable code."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code


class EncodeRequest(BaseModel):
    image: str


class GenerateRequest(BaseModel):
    n: int
    seed: int = 0


class ExploreRequest(BaseModel):
    alpha: list[float] | None = None
    image: str | None = None
    mu1: float
    mu2: float
    field_resolution: int | None = None


def bundle_digest(bundle: ModelBundle) -> str:
    """Deterministic hex digest of the bundle's serialized content."""
    container = bundle_to_container(bundle)
    h = hashlib.sha256()
    h.update(canonical_json(container.meta))
    for name in sorted(container.arrays):
        arr = np.ascontiguousarray(container.arrays[name])
        h.update(name.encode())
        h.update(str(arr.dtype).encode())
        h.update(arr.tobytes())
    return h.hexdigest()


def _decode_mask(bundle: ModelBundle, data: str) -> np.ndarray:
    res = bundle.resolution
    try:
        raw = base64.b64decode(data, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise RequestError(400, "bad_image", f"image is not valid base64: {exc}")
    if len(raw) != res * res:
        raise RequestError(
            400, "bad_image",
            f"expected {res * res} mask bytes for resolution {res}, got {len(raw)}")
    mask = np.frombuffer(raw, np.uint8).reshape(res, res)
    return (mask > 0).astype(np.float64)


def _encode_mask(mask: np.ndarray) -> str:
    raw = (np.asarray(mask) > 0.5).astype(np.uint8).tobytes()
    return base64.b64encode(raw).decode()


def _alpha_from_request(bundle: ModelBundle, req: ExploreRequest) -> np.ndarray:
    if (req.alpha is None) == (req.image is None):
        raise RequestError(400, "alpha_or_image",
                           "provide exactly one of 'alpha' or 'image'")
    k = bundle.geometry.config.k_max
    if req.alpha is not None:
        alpha = np.asarray(req.alpha, np.float64)
        if alpha.shape != (k,):
            raise RequestError(400, "bad_alpha",
                               f"alpha must have {k} components, got {alpha.shape[0]}")
        if not np.all(np.isfinite(alpha)):
            raise RequestError(400, "bad_alpha", "alpha components must be finite")
        return alpha
    mask = _decode_mask(bundle, req.image)
    return encode(bundle.geometry, mask[None])


def _check_material_point(bundle: ModelBundle, mu1: float, mu2: float) -> MaterialPoint:
    for name, value, basis in (("mu1", mu1, bundle.basis1), ("mu2", mu2, bundle.basis2)):
        if not np.isfinite(value) or not (basis.lo <= value <= basis.hi):
            raise RequestError(
                422, f"{name}_out_of_range",
                f"{name}={value} outside supported range [{basis.lo}, {basis.hi}]")
    return MaterialPoint(mu1, mu2)


def handle_explore(bundle: ModelBundle, req: ExploreRequest) -> dict:
    """Assemble and evaluate the surrogate for one explore request."""
    alpha = _alpha_from_request(bundle, req)
    mu = _check_material_point(bundle, req.mu1, req.mu2)
    factor = 1 if req.field_resolution is None else req.field_resolution
    if factor < 1 or factor > bundle.resolution:
        raise RequestError(400, "bad_field_resolution",
                           f"downsample factor must be in [1, {bundle.resolution}]")
    solution = assemble_from_alpha(bundle, alpha)
    field = evaluate(solution, mu)[::factor, ::factor]
    mask = decode(bundle.geometry, alpha, threshold=True)[0]
    modes = [
        {
            "m1": float(basis_eval(solution.basis1, mu.mu1) @ mode.lambda1),
            "m2": float(basis_eval(solution.basis2, mu.mu2) @ mode.lambda2),
            "field_rms": float(np.sqrt(np.mean(mode.f ** 2))),
        }
        for mode in solution.modes
    ]
    return {
        "alpha": [float(v) for v in alpha],
        "image": _encode_mask(mask),
        "field": base64.b64encode(field.astype("<f4").tobytes()).decode(),
        "field_shape": [int(s) for s in field.shape],
        "field_min": float(field.min()),
        "field_max": float(field.max()),
        "modes_summary": modes,
    }


def build_app(bundle: ModelBundle, digest: str | None = None) -> FastAPI:
    """Construct the FastAPI application around one immutable bundle."""
    app = FastAPI(title="gpdesign service")
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=_LOCAL_ORIGINS,
        allow_methods=["*"],
        allow_headers=["*"],
    )
    bundle_hash = digest if digest is not None else bundle_digest(bundle)

    @app.exception_handler(RequestError)
    async def _request_error(_: Request, exc: RequestError) -> JSONResponse:
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": str(exc)})

    @app.exception_handler(Exception)
    async def _internal_error(_: Request, exc: Exception) -> JSONResponse:
        error_id = uuid.uuid4().hex
        logger.exception("internal error %s", error_id, exc_info=exc)
        return JSONResponse(status_code=500,
                            content={"code": "internal_error", "error_id": error_id})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "bundle": bundle_hash}

    @app.post("/encode")
    def encode_endpoint(req: EncodeRequest) -> dict:
        mask = _decode_mask(bundle, req.image)
        alpha = encode(bundle.geometry, mask[None])
        return {"alpha": [float(v) for v in alpha]}

    @app.post("/generate")
    def generate_endpoint(req: GenerateRequest) -> dict:
        if req.n < 1:
            raise RequestError(400, "bad_count", "n must be at least 1")
        designs = generate_designs(bundle, req.n, req.seed)
        return {
            "alphas": [[float(v) for v in alpha] for alpha, _, _ in designs],
            "images": [_encode_mask(mask) for _, mask, _ in designs],
        }

    @app.post("/explore")
    def explore_endpoint(req: ExploreRequest) -> dict:
        return handle_explore(bundle, req)

    @app.get("/latent-bounds")
    def latent_bounds() -> dict:
        lo = np.percentile(bundle.alpha_train, 1.0, axis=0)
        hi = np.percentile(bundle.alpha_train, 99.0, axis=0)
        return {"lo": [float(v) for v in lo], "hi": [float(v) for v in hi]}

    return app
