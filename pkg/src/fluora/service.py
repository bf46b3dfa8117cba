"""HTTP API over classification, boundary estimation, and saliency.

Requests are stateless and served from a single immutable loaded artifact;
the reload endpoint swaps the artifact atomically between requests. An
image in which no strip is fluorescent is a legitimate clinical finding, so
it is reported as a 200 with a reason, not an error status.
"""

import os
from dataclasses import dataclass

from fastapi import FastAPI, Request, Response, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import boundary as boundary_mod
from .classifier import load_artifact, predict
from .dataset import DISTAL_DIRECTIONS, DISTAL_INCREASING
from .errors import (
    ArtifactCorrupt,
    DecodeError,
    ImageTooNarrow,
    NoFluorescentRegion,
)
from .imgio import encode_png, load_image
from .saliency import compute_saliency, render_overlay

DEFAULT_MAX_UPLOAD = 20 * 1024 * 1024
MODEL_DIR_ENV = "FA_MODEL_DIR"


@dataclass
class ServiceConfig:
    model_dir: str | None = None     # falls back to $FA_MODEL_DIR
    host: str = "127.0.0.1"
    port: int = 8000
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD
    request_timeout_s: float = 30.0
    allowed_formats: tuple = ("png", "jpeg")

    def __post_init__(self):
        if self.max_upload_bytes <= 0:
            raise ValueError("max_upload_bytes must be positive")
        if self.model_dir is None:
            self.model_dir = os.environ.get(MODEL_DIR_ENV)


class _PayloadTooLarge(Exception):
    pass


class _ModelNotLoaded(Exception):
    pass


async def _read_upload(image, limit):
    if image is None:
        raise DecodeError("multipart field 'image' missing")
    data = await image.read(limit + 1)
    if len(data) > limit:
        raise _PayloadTooLarge()
    return data


def create_app(config=None):
    config = config or ServiceConfig()
    app = FastAPI(title="fluorescence angiography service")
    app.state.config = config
    app.state.artifact = None

    def try_load():
        if not config.model_dir:
            return None
        try:
            app.state.artifact = load_artifact(config.model_dir)
        except (ArtifactCorrupt, OSError):
            app.state.artifact = None
        return app.state.artifact

    @app.on_event("startup")
    def _startup():
        try_load()

    @app.exception_handler(RequestValidationError)
    async def _bad_request(_req: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    def artifact_or_503():
        art = app.state.artifact
        if art is None:
            raise _ModelNotLoaded()
        return art

    @app.exception_handler(_ModelNotLoaded)
    async def _not_loaded(_req, _exc):
        return JSONResponse(status_code=503, content={"error": "model not loaded"})

    @app.exception_handler(_PayloadTooLarge)
    async def _too_large(_req, _exc):
        return JSONResponse(status_code=413, content={"error": "upload too large"})

    @app.exception_handler(DecodeError)
    async def _undecodable(_req, exc):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/healthz")
    def healthz():
        if app.state.artifact is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        return Response(content="ok", media_type="text/plain")

    @app.get("/api/v1/model")
    def model_info():
        art = artifact_or_503()
        return {
            "architecture_id": art.architecture_id,
            "input_size": art.input_size,
            "threshold": art.threshold,
            "version": art.version,
            "training_config": art.training_config,
        }

    @app.post("/api/v1/reload")
    def reload_model():
        art = try_load()
        if art is None:
            raise _ModelNotLoaded()
        return {"version": art.version}

    @app.post("/api/v1/classify")
    async def classify(image: UploadFile | None = None):
        art = artifact_or_503()
        data = await _read_upload(image, config.max_upload_bytes)
        result = predict(art, load_image(data))
        return result.to_json()

    @app.post("/api/v1/boundary")
    async def boundary(image: UploadFile | None = None,
                       strip_width: int = boundary_mod.DEFAULT_STRIP_WIDTH,
                       axis: str = boundary_mod.AXIS_HORIZONTAL,
                       distal: str = DISTAL_INCREASING,
                       threshold: float | None = None):
        art = artifact_or_503()
        if strip_width < 1:
            return JSONResponse(status_code=400,
                                content={"error": "strip_width must be >= 1"})
        if axis not in (boundary_mod.AXIS_HORIZONTAL, boundary_mod.AXIS_VERTICAL):
            return JSONResponse(status_code=400,
                                content={"error": f"unknown axis {axis!r}"})
        if distal not in DISTAL_DIRECTIONS:
            return JSONResponse(status_code=400,
                                content={"error": f"unknown distal direction {distal!r}"})
        thr = art.threshold if threshold is None else threshold
        if not (0.0 <= thr <= 1.0):
            return JSONResponse(status_code=400,
                                content={"error": "threshold must be in [0, 1]"})
        data = await _read_upload(image, config.max_upload_bytes)
        frame = load_image(data)
        try:
            est = boundary_mod.analyze_image(
                art, frame, strip_width=strip_width, axis=axis,
                distal_direction=distal, threshold=thr)
        except ImageTooNarrow as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        except NoFluorescentRegion as exc:
            return {
                "boundary_x": None,
                "reason": "no_fluorescent_region",
                "distal_direction": distal,
                "contiguous": False,
                "saturated": False,
                "threshold": thr,
                "strips": [s.to_json() for s in exc.strips],
            }
        return est.to_json()

    @app.post("/api/v1/saliency")
    async def saliency(image: UploadFile | None = None, opacity: float = 0.6):
        art = artifact_or_503()
        if not (0.0 <= opacity <= 1.0):
            return JSONResponse(status_code=400,
                                content={"error": "opacity must be in [0, 1]"})
        data = await _read_upload(image, config.max_upload_bytes)
        frame = load_image(data)
        smap = compute_saliency(art, frame)
        overlay = render_overlay(frame, smap, opacity)
        return Response(content=encode_png(overlay), media_type="image/png")

    return app


def run(config=None):
    """Blocking server entry point used by the CLI."""
    import uvicorn

    config = config or ServiceConfig()
    uvicorn.run(create_app(config), host=config.host, port=config.port)
