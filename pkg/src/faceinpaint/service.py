"""HTTP inference service: landmark prediction and inpainting over JSON +
base64 PNG payloads."""

from __future__ import annotations

import base64
import binascii
import io
import threading

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image as PILImage
from pydantic import BaseModel

from .checkpoint import load_checkpoint
from .imaging import (
    Image,
    LandmarkSet,
    Mask,
    from_uint8,
    to_uint8,
)
from .inference import InpaintPipeline
from .training import load_inpaint_nets, load_landmark_net

DEFAULT_MAX_PAYLOAD = 8 * 1024 * 1024  # bytes of decoded PNG data


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class PredictRequest(BaseModel):
    image: str
    mask: str


class InpaintRequest(BaseModel):
    image: str
    mask: str
    landmarks: list[list[float]] | None = None


def _decode_png(field: str, payload: str, limit: int) -> np.ndarray:
    try:
        raw = base64.b64decode(payload, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ServiceError(400, "bad_base64", f"{field}: invalid base64: {exc}")
    if len(raw) > limit:
        raise ServiceError(
            413, "payload_too_large", f"{field}: {len(raw)} bytes exceeds {limit}"
        )
    try:
        img = PILImage.open(io.BytesIO(raw))
        img.load()
    except Exception as exc:
        raise ServiceError(400, "bad_png", f"{field}: cannot decode image: {exc}")
    return np.asarray(img)


def _decode_image(payload: str, limit: int) -> Image:
    arr = _decode_png("image", payload, limit)
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    if arr.ndim != 3:
        raise ServiceError(422, "bad_dimensions", f"image has shape {arr.shape}")
    return Image(from_uint8(arr[..., :3]))


def _decode_mask(payload: str, limit: int, image: Image) -> Mask:
    arr = _decode_png("mask", payload, limit)
    if arr.ndim == 3:
        arr = arr[..., 0]
    if arr.shape != image.pixels.shape[:2]:
        raise ServiceError(
            422,
            "bad_dimensions",
            f"mask {arr.shape} does not match image {image.pixels.shape[:2]}",
        )
    return Mask((arr > 127).astype(np.uint8))


def _decode_landmarks(points: list[list[float]] | None) -> LandmarkSet | None:
    if points is None:
        return None
    try:
        return LandmarkSet(np.asarray(points, dtype=np.float32))
    except ValueError as exc:
        raise ServiceError(422, "bad_landmarks", str(exc))


def _encode_png(pixels: np.ndarray) -> str:
    buf = io.BytesIO()
    PILImage.fromarray(to_uint8(pixels)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode()


def _points(landmarks: LandmarkSet) -> list[list[float]]:
    return [[float(x), float(y)] for x, y in landmarks.points]


def create_app(
    inpaint_checkpoint: str | None = None,
    landmark_checkpoint: str | None = None,
    max_payload: int = DEFAULT_MAX_PAYLOAD,
    max_concurrency: int = 2,
    static_dir: str | None = None,
) -> FastAPI:
    """Build the service; checkpoints load once at startup and stay
    read-only, so concurrent requests are safe."""
    app = FastAPI(title="faceinpaint")
    pipeline: InpaintPipeline | None = None
    fingerprint = "none"
    if inpaint_checkpoint:
        ckpt = load_checkpoint(inpaint_checkpoint)
        generator, _ = load_inpaint_nets(ckpt)
        landmark_net = None
        if landmark_checkpoint:
            lmk_ckpt = load_checkpoint(landmark_checkpoint)
            landmark_net = load_landmark_net(lmk_ckpt)
            fingerprint = f"{ckpt.fingerprint}+{lmk_ckpt.fingerprint}"
        else:
            fingerprint = ckpt.fingerprint
        pipeline = InpaintPipeline(generator, landmark_net)
    gate = threading.Semaphore(max_concurrency)

    @app.exception_handler(ServiceError)
    async def service_error_handler(request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": exc.message}
        )

    @app.exception_handler(Exception)
    async def fallback_handler(request: Request, exc: Exception):
        return JSONResponse(
            status_code=500, content={"code": "internal_error", "message": str(exc)}
        )

    def require_pipeline() -> InpaintPipeline:
        if pipeline is None:
            raise ServiceError(503, "model_not_loaded", "no checkpoint loaded")
        return pipeline

    @app.get("/health")
    def health():
        return {
            "status": "ok" if pipeline is not None else "degraded",
            "model_fingerprint": fingerprint,
        }

    @app.post("/predict-landmarks")
    def predict_landmarks_endpoint(req: PredictRequest):
        pipe = require_pipeline()
        if pipe.landmark_net is None:
            raise ServiceError(503, "model_not_loaded", "no landmark checkpoint loaded")
        image = _decode_image(req.image, max_payload)
        mask = _decode_mask(req.mask, max_payload, image)
        with gate:
            landmarks = pipe.predict(image, mask)
        return {"landmarks": _points(landmarks)}

    @app.post("/inpaint")
    def inpaint_endpoint(req: InpaintRequest):
        pipe = require_pipeline()
        image = _decode_image(req.image, max_payload)
        mask = _decode_mask(req.mask, max_payload, image)
        landmarks = _decode_landmarks(req.landmarks)
        if landmarks is None and pipe.landmark_net is None:
            raise ServiceError(
                503, "model_not_loaded", "no landmark checkpoint loaded; pass landmarks"
            )
        with gate:
            completed, used, _ = pipe.inpaint(image, mask, landmarks)
        return {"image": _encode_png(completed.pixels), "landmarks_used": _points(used)}

    if static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="editor")

    return app
