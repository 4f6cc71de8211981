"""HTTP ingestion and analysis service.

Wire contract (all JSON, field names identical to the storage record format):

* ``PUT  /api/v1/images/{image}``                          register dimensions
* ``GET  /api/v1/images/{image}``                          registered dimensions
* ``POST /api/v1/tests/{t}/images/{i}/users/{u}/events``   one event or a batch
* ``POST /api/v1/tests/{t}/images/{i}/users/{u}/marks``    phase-2 rectangles
* ``GET  /api/v1/tests/{t}/images/{i}/heatmap``            heat map + mask
* ``GET  /api/v1/tests/{t}/images/{i}/validation``         Jaccard report
* ``GET  /api/v1/healthz``

Analysis responses are serialized through the shared pipeline encoder, so the
bytes match the CLI's file output for the same stored logs and configuration.
"""

from __future__ import annotations

from contextlib import asynccontextmanager
from typing import Literal

from fastapi import FastAPI, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, model_validator

from .config import CliConfig
from .engine import BoundingBox, EventKind, OrderViolationError, ViewportEvent, clamp_bbox
from .pipeline import heatmap_payload, render_overlays, to_json_bytes, validation_payload
from .storage import (
    EventStore,
    ImageConflictError,
    ImageRegistry,
    StreamKey,
    StreamNotFoundError,
)


class ImageRegistrationIn(BaseModel):
    width: int = Field(ge=1)
    height: int = Field(ge=1)


class EventIn(BaseModel):
    kind: Literal["zoom", "pan", "session_end"]
    t: int = Field(ge=0)
    x0: int | None = None
    y0: int | None = None
    x1: int | None = None
    y1: int | None = None

    @model_validator(mode="after")
    def _bbox_presence(self) -> "EventIn":
        corners = (self.x0, self.y0, self.x1, self.y1)
        if self.kind == "session_end":
            if any(c is not None for c in corners):
                raise ValueError("session_end events carry no bounding box")
        elif any(c is None for c in corners):
            raise ValueError("zoom/pan events require x0, y0, x1, y1")
        return self


class RectIn(BaseModel):
    x0: int
    y0: int
    x1: int
    y1: int


def create_app(config: CliConfig) -> FastAPI:
    store = EventStore(config.data_dir, fsync=config.fsync)
    registry = ImageRegistry(config.data_dir)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        store.flush()
        store.close()

    app = FastAPI(title="interest-miner", openapi_url="/api/v1/openapi.json", lifespan=lifespan)
    app.state.store = store
    app.state.registry = registry
    app.state.config = config

    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:3])})

    @app.exception_handler(StreamNotFoundError)
    async def not_found(request: Request, exc: StreamNotFoundError):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(OrderViolationError)
    async def out_of_order(request: Request, exc: OrderViolationError):
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.exception_handler(ImageConflictError)
    async def image_conflict(request: Request, exc: ImageConflictError):
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.get("/api/v1/healthz")
    def healthz():
        return {"status": "ok"}

    @app.put("/api/v1/images/{image_id}", status_code=200)
    def register_image(image_id: str, body: ImageRegistrationIn):
        meta = registry.register(image_id, body.width, body.height)
        return {"image_id": meta.image_id, "width": meta.width, "height": meta.height}

    @app.get("/api/v1/images/{image_id}")
    def get_image(image_id: str):
        meta = registry.require(image_id)
        return {"image_id": meta.image_id, "width": meta.width, "height": meta.height}

    def _to_event(body: EventIn, meta) -> ViewportEvent:
        if body.kind == "session_end":
            return ViewportEvent(EventKind.SESSION_END, body.t)
        bbox = clamp_bbox(body.x0, body.y0, body.x1, body.y1, meta)
        if bbox is None:
            raise RequestValidationError(
                [{"msg": "bounding box has no area inside the image", "loc": ("body",)}]
            )
        return ViewportEvent(EventKind(body.kind), body.t, bbox)

    @app.post("/api/v1/tests/{test_id}/images/{image_id}/users/{user_id}/events")
    def post_events(
        test_id: str, image_id: str, user_id: str, body: EventIn | list[EventIn]
    ):
        key = StreamKey(test_id, image_id, user_id)
        meta = registry.require(image_id)
        if isinstance(body, list):
            if len(body) > app.state.config.batch_cap:
                return JSONResponse(
                    status_code=413,
                    content={
                        "error": f"batch of {len(body)} exceeds cap "
                        f"{app.state.config.batch_cap}"
                    },
                )
            if not body:
                return JSONResponse(status_code=400, content={"error": "empty batch"})
            events = [_to_event(item, meta) for item in body]
            seqs = store.append_batch(key, events)
            return JSONResponse(status_code=201, content={"seqs": seqs})
        event = _to_event(body, meta)
        seq = store.append(key, event)
        return JSONResponse(status_code=201, content={"seq": seq})

    @app.post("/api/v1/tests/{test_id}/images/{image_id}/users/{user_id}/marks")
    def post_marks(test_id: str, image_id: str, user_id: str, body: list[RectIn]):
        meta = registry.require(image_id)
        rects = [
            clamped
            for rect in body
            if (clamped := clamp_bbox(rect.x0, rect.y0, rect.x1, rect.y1, meta)) is not None
        ]
        if not rects:
            return JSONResponse(
                status_code=400,
                content={"error": "no rectangle with positive area inside the image"},
            )
        count = store.append_marks(StreamKey(test_id, image_id, user_id), rects)
        return JSONResponse(status_code=201, content={"count": count})

    @app.get("/api/v1/tests/{test_id}/images/{image_id}/heatmap")
    def get_heatmap(
        test_id: str,
        image_id: str,
        user: str | None = None,
        threshold: float | None = Query(default=None),
        format: str = Query(default="grid"),
    ):
        if threshold is not None and not 0.0 <= threshold <= 1.0:
            return JSONResponse(
                status_code=400, content={"error": "threshold outside [0, 1]"}
            )
        if format not in ("grid", "raster"):
            return JSONResponse(
                status_code=400, content={"error": f"unknown format {format!r}"}
            )
        payload = heatmap_payload(
            store,
            registry,
            test_id,
            image_id,
            scale=app.state.config.scale,
            user_id=user,
            threshold=threshold
            if threshold is not None
            else app.state.config.threshold,
            fmt=format,
        )
        return Response(content=to_json_bytes(payload), media_type="application/json")

    @app.get("/api/v1/tests/{test_id}/images/{image_id}/validation")
    def get_validation(
        test_id: str,
        image_id: str,
        threshold: float | None = Query(default=None),
        sweep: str | None = Query(default=None),
        full_res: bool = Query(default=False),
    ):
        if threshold is not None and not 0.0 <= threshold <= 1.0:
            return JSONResponse(
                status_code=400, content={"error": "threshold outside [0, 1]"}
            )
        grid = None
        if sweep:
            try:
                grid = [float(v) for v in sweep.split(",")]
            except ValueError:
                return JSONResponse(
                    status_code=400, content={"error": "sweep must be comma-separated floats"}
                )
        cut = threshold if threshold is not None else app.state.config.threshold
        try:
            payload = validation_payload(
                store,
                registry,
                test_id,
                image_id,
                scale=app.state.config.scale,
                threshold=cut,
                sweep=grid,
                full_res=full_res,
            )
        except ValueError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        render_overlays(
            store,
            registry,
            test_id,
            image_id,
            scale=app.state.config.scale,
            out_root=config.data_dir,
            threshold=cut,
        )
        return Response(content=to_json_bytes(payload), media_type="application/json")

    return app
