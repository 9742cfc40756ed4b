"""HTTP layer: the exact wire contract the sampling engine's remote
backend speaks.

Endpoints
  GET  /v1/health         -> {"status", "native_resolution", "latent_channels"}
  POST /v1/denoise        -> {"prediction_b64", "shape"}
  POST /v1/encode         -> {"latent_b64", "shape"}
  POST /v1/decode         -> {"image_b64", "shape"}
  POST /v1/generate_base  -> {"image_b64", "shape"}

Payloads are base64 of little-endian float32 in C order. Errors: 400
for malformed bodies or base64, 422 for shape or sigma violations, 503
until the model has loaded.
"""

from __future__ import annotations

import base64
import binascii
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .models import ServiceConfig, build_model

MAX_SIDE = 4096


class DenoiseBody(BaseModel):
    shape: list[int]
    latent_b64: str
    sigma: float
    condition: str | None = None


class EncodeBody(BaseModel):
    shape: list[int]
    image_b64: str


class DecodeBody(BaseModel):
    shape: list[int]
    latent_b64: str


class GenerateBody(BaseModel):
    prompt: str = ""
    seed: int
    width: int
    height: int


def _decode_array(payload_b64: str, shape: list[int], key: str) -> np.ndarray:
    try:
        raw = base64.b64decode(payload_b64.encode("ascii"), validate=True)
    except (UnicodeEncodeError, binascii.Error, ValueError) as exc:
        raise HTTPException(400, f"{key} is not valid base64: {exc}") from exc
    if len(shape) != 3 or any(int(v) < 1 for v in shape):
        raise HTTPException(422, f"shape must be three positive ints, got {shape}")
    c, h, w = (int(v) for v in shape)
    if len(raw) != 4 * c * h * w:
        raise HTTPException(
            422, f"payload holds {len(raw)} bytes, shape {shape} needs {4 * c * h * w}"
        )
    return np.frombuffer(raw, dtype="<f4").reshape(c, h, w).copy()


def _encode_array(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f4").tobytes()).decode("ascii")


def _model_of(request: Request):
    model = getattr(request.app.state, "model", None)
    if model is None:
        raise HTTPException(503, "model is loading")
    return model


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    cfg = config or ServiceConfig()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.model = build_model(cfg)
        yield
        app.state.model = None

    app = FastAPI(title="denoiser-service", lifespan=lifespan)

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        # unparseable or mistyped bodies are 400; semantic range
        # violations stay 422 (raised explicitly by the handlers)
        return JSONResponse(status_code=400, content={"error": str(exc)[:500]})

    @app.get("/v1/health")
    def health(request: Request):
        model = _model_of(request)
        return {
            "status": "ok",
            "native_resolution": cfg.native_resolution,
            "latent_channels": model.latent_channels,
        }

    @app.post("/v1/denoise")
    def denoise(body: DenoiseBody, request: Request):
        model = _model_of(request)
        latent = _decode_array(body.latent_b64, body.shape, "latent_b64")
        if not np.isfinite(body.sigma) or body.sigma < 0:
            raise HTTPException(422, f"sigma out of range: {body.sigma}")
        pred = model.denoise(latent, body.sigma, body.condition)
        return {"prediction_b64": _encode_array(pred), "shape": list(pred.shape)}

    @app.post("/v1/encode")
    def encode(body: EncodeBody, request: Request):
        model = _model_of(request)
        image = _decode_array(body.image_b64, body.shape, "image_b64")
        try:
            latent = model.encode(image)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc
        return {"latent_b64": _encode_array(latent), "shape": list(latent.shape)}

    @app.post("/v1/decode")
    def decode(body: DecodeBody, request: Request):
        model = _model_of(request)
        latent = _decode_array(body.latent_b64, body.shape, "latent_b64")
        try:
            image = model.decode(latent)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc
        return {"image_b64": _encode_array(image), "shape": list(image.shape)}

    @app.post("/v1/generate_base")
    def generate_base(body: GenerateBody, request: Request):
        model = _model_of(request)
        if not (1 <= body.width <= MAX_SIDE and 1 <= body.height <= MAX_SIDE):
            raise HTTPException(422, f"size out of range: {body.width}x{body.height}")
        try:
            image = model.generate(body.prompt, body.seed, body.height, body.width)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc
        return {"image_b64": _encode_array(image), "shape": list(image.shape)}

    return app
