"""HTTP service exposing scene composition over a loaded checkpoint."""

from __future__ import annotations

import threading
import time
from pathlib import Path

import numpy as np
import torch
from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel, model_validator

from .dataset_io import read_dataset
from .errors import ShapeMismatch
from .images import b64_to_image, image_to_b64, png_bytes
from .model import batch_to_tensor, checkpoint_hash, load_checkpoint, tensor_to_image


class FrameRef(BaseModel):
    """Either a dataset frame (clip_id + frame_index) or an inline base64 PNG."""

    clip_id: str | None = None
    frame_index: int | None = None
    image_b64: str | None = None

    @model_validator(mode="after")
    def _one_form(self) -> "FrameRef":
        dataset_form = self.clip_id is not None and self.frame_index is not None
        inline_form = self.image_b64 is not None
        if dataset_form == inline_form:
            raise ValueError("provide either clip_id+frame_index or image_b64, not both")
        return self

    @property
    def is_dataset_ref(self) -> bool:
        return self.clip_id is not None


class ComposeRequest(BaseModel):
    character_ref: FrameRef
    t1_ref: FrameRef
    t2_ref: FrameRef
    background_ref: FrameRef


class ComposeResponse(BaseModel):
    image_b64: str
    predicted_transform: list[float]
    latency_ms: float


class AnimateRequest(BaseModel):
    character_ref: FrameRef
    background_ref: FrameRef
    clip_id: str
    t1_index: int = 0


class AnimateResponse(BaseModel):
    frames_b64: list[str]
    predicted_transforms: list[list[float]]
    latency_ms: float


def create_app(
    checkpoint_path: str | Path,
    dataset_path: str | Path | None = None,
    max_concurrency: int = 4,
) -> FastAPI:
    """Build the app with the model loaded once, read-only."""
    model, _ = load_checkpoint(checkpoint_path)
    model.eval()
    ckpt_hash = checkpoint_hash(checkpoint_path)
    clips_by_id: dict[str, object] = {}
    clip_order: list[str] = []
    if dataset_path is not None:
        dataset = read_dataset(dataset_path)
        for clip in dataset.clips:
            clips_by_id[clip.clip_id] = clip
            clip_order.append(clip.clip_id)

    slots = threading.BoundedSemaphore(max_concurrency)
    app = FastAPI(title="scenefactor", version="0.1.0")

    def resolve(ref: FrameRef) -> np.ndarray:
        if ref.is_dataset_ref:
            clip = clips_by_id.get(ref.clip_id)
            if clip is None:
                raise HTTPException(404, f"unknown clip {ref.clip_id!r}")
            if not 0 <= ref.frame_index < clip.num_frames:
                raise HTTPException(404, f"clip {ref.clip_id!r} has no frame {ref.frame_index}")
            return clip.frames[ref.frame_index]
        try:
            return b64_to_image(ref.image_b64)
        except Exception as exc:
            raise HTTPException(422, f"cannot decode inline image: {exc}") from exc

    def check_transform_pair(t1: FrameRef, t2: FrameRef) -> None:
        if t1.is_dataset_ref and t2.is_dataset_ref and t1.clip_id != t2.clip_id:
            raise HTTPException(422, "t1_ref and t2_ref must come from the same clip")

    def compose_once(x_c, x_t1, x_t2, x_b) -> tuple[np.ndarray, np.ndarray]:
        try:
            with torch.inference_mode():
                z1 = model.encode_character(batch_to_tensor([x_t1]))
                z2 = model.encode_character(batch_to_tensor([x_t2]))
                theta = model.predict_transform(z1, z2)
                warped = model.apply_transform(theta, model.encode_character(batch_to_tensor([x_c])))
                out = model.decode(warped + model.encode_background(batch_to_tensor([x_b])))
        except ShapeMismatch as exc:
            raise HTTPException(422, str(exc)) from exc
        return tensor_to_image(out), theta[0].double().numpy()

    def with_slot(fn):
        if not slots.acquire(blocking=False):
            raise HTTPException(503, "service saturated, retry later")
        try:
            return fn()
        finally:
            slots.release()

    @app.get("/health")
    def health() -> dict:
        c, h, w = model.feature_shape
        return {"status": "ok", "checkpoint_hash": ckpt_hash, "feature_shape": [c, h, w]}

    @app.get("/clips")
    def list_clips(page: int = 1, page_size: int = 24) -> dict:
        if page < 1 or page_size < 1:
            raise HTTPException(422, "page and page_size must be positive")
        start = (page - 1) * page_size
        entries = []
        for cid in clip_order[start : start + page_size]:
            clip = clips_by_id[cid]
            entries.append(
                {
                    "id": cid,
                    "num_frames": clip.num_frames,
                    "thumbnail_url": f"/clips/{cid}/frames/0",
                }
            )
        return {"clips": entries, "page": page, "page_size": page_size, "total": len(clip_order)}

    @app.get("/clips/{clip_id}/frames/{index}")
    def get_frame(clip_id: str, index: int) -> Response:
        clip = clips_by_id.get(clip_id)
        if clip is None:
            raise HTTPException(404, f"unknown clip {clip_id!r}")
        if not 0 <= index < clip.num_frames:
            raise HTTPException(404, f"clip {clip_id!r} has no frame {index}")
        return Response(content=png_bytes(clip.frames[index]), media_type="image/png")

    @app.post("/compose", response_model=ComposeResponse)
    def compose(req: ComposeRequest) -> ComposeResponse:
        def run() -> ComposeResponse:
            check_transform_pair(req.t1_ref, req.t2_ref)
            started = time.perf_counter()
            image, theta = compose_once(
                resolve(req.character_ref),
                resolve(req.t1_ref),
                resolve(req.t2_ref),
                resolve(req.background_ref),
            )
            return ComposeResponse(
                image_b64=image_to_b64(image),
                predicted_transform=[float(v) for v in theta.ravel()],
                latency_ms=(time.perf_counter() - started) * 1000.0,
            )

        return with_slot(run)

    @app.post("/animate", response_model=AnimateResponse)
    def animate(req: AnimateRequest) -> AnimateResponse:
        def run() -> AnimateResponse:
            clip = clips_by_id.get(req.clip_id)
            if clip is None:
                raise HTTPException(404, f"unknown clip {req.clip_id!r}")
            if not 0 <= req.t1_index < clip.num_frames:
                raise HTTPException(422, f"t1_index {req.t1_index} out of range")
            started = time.perf_counter()
            x_c = resolve(req.character_ref)
            x_b = resolve(req.background_ref)
            x_t1 = clip.frames[req.t1_index]
            frames, transforms = [], []
            for k in range(clip.num_frames):
                image, theta = compose_once(x_c, x_t1, clip.frames[k], x_b)
                frames.append(image_to_b64(image))
                transforms.append([float(v) for v in theta.ravel()])
            return AnimateResponse(
                frames_b64=frames,
                predicted_transforms=transforms,
                latency_ms=(time.perf_counter() - started) * 1000.0,
            )

        return with_slot(run)

    return app


def serve(
    checkpoint_path: str | Path,
    dataset_path: str | Path | None,
    bind: str = "127.0.0.1:8000",
    max_concurrency: int = 4,
) -> None:
    import uvicorn

    host, _, port = bind.rpartition(":")
    app = create_app(checkpoint_path, dataset_path, max_concurrency=max_concurrency)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
