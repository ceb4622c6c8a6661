"""HTTP review service: browse clips, accept/reject tracks, refine masks by
point prompts, and launch collection jobs.

All durable state lives in the dataset store; the service itself only holds
the in-process job registry, which is persisted to ``jobs.json`` and whose
unfinished entries are marked failed ("RESTARTED") when the service comes
back up. Per-clip mutations serialize on the manifest lock; a held lock
surfaces as HTTP 409.
"""

from __future__ import annotations

import io
import json
import logging
import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from PIL import Image
from pydantic import BaseModel, Field, field_validator

from . import store
from .config import PipelineConfig
from .errors import (
    ClipBusyError,
    DimensionMismatchError,
    FlowUnavailableError,
    FrameOutOfRangeError,
    MaskTrackError,
    NoCandidateError,
    UnknownTrackError,
)
from .flow import directory_flow_lookup
from .mask import rle_decode, rle_encode
from .pipeline import collect_clip
from .sampling import Point
from .segmenter import OracleSegmenter, PointPrompt, RemoteConfig, RemoteSegmenter
from .synthworld import load_scene, read_pgm

logger = logging.getLogger(__name__)

DEFAULT_UI_ORIGIN = "http://localhost:5173"

# Fixed overlay palette for label-map rendering; background stays dark.
_PALETTE = [
    (230, 80, 60),
    (70, 160, 240),
    (90, 200, 120),
    (240, 200, 70),
    (180, 110, 230),
    (250, 140, 50),
    (110, 220, 220),
    (240, 120, 180),
]


class PromptModel(BaseModel):
    x: float
    y: float
    label: Literal["pos", "neg"]


class RefineRequest(BaseModel):
    frame: int = Field(ge=1)
    prompts: List[PromptModel]

    @field_validator("prompts")
    @classmethod
    def _needs_positive(cls, v):
        if not any(p.label == "pos" for p in v):
            raise ValueError("at least one positive prompt is required")
        return v


class CommitRequest(BaseModel):
    frame: int = Field(ge=1)
    mask: Dict[str, Any]
    actor: str = "annotator"


class StatusRequest(BaseModel):
    status: Literal["accepted", "rejected"]
    actor: str


class JobRequest(BaseModel):
    clip_id: str
    config: Dict[str, Any] = Field(default_factory=dict)


def _http_error(status: int, exc: Exception) -> HTTPException:
    code = exc.code if isinstance(exc, MaskTrackError) else "INTERNAL"
    return HTTPException(status_code=status, detail={"code": code, "message": str(exc)})


class JobRegistry:
    """In-process collection jobs with a bounded worker pool and a JSON
    journal. One queued-or-running job per clip at a time."""

    def __init__(self, data_dir: Path, run_collect, workers: int = 2):
        self._path = data_dir / "jobs.json"
        self._run_collect = run_collect
        self._lock = threading.Lock()
        self._pool = ThreadPoolExecutor(max_workers=workers)
        self.jobs: Dict[str, Dict[str, Any]] = {}
        self._recover()

    def _recover(self) -> None:
        if self._path.exists():
            self.jobs = json.loads(self._path.read_text())
            for job in self.jobs.values():
                if job["state"] in ("queued", "running"):
                    job["state"] = "failed"
                    job["error"] = "RESTARTED"
            self._persist()

    def _persist(self) -> None:
        tmp = self._path.with_name(self._path.name + ".tmp")
        tmp.write_text(json.dumps(self.jobs, indent=2) + "\n")
        os.replace(tmp, self._path)

    def get(self, job_id: str) -> Optional[Dict[str, Any]]:
        with self._lock:
            return self.jobs.get(job_id)

    def submit(self, clip_id: str, config: PipelineConfig) -> Dict[str, Any]:
        with self._lock:
            busy = any(
                j["clip_id"] == clip_id and j["state"] in ("queued", "running")
                for j in self.jobs.values()
            )
            if busy:
                raise ClipBusyError(f"a job is already active for clip {clip_id!r}")
            job = {
                "job_id": uuid.uuid4().hex[:12],
                "clip_id": clip_id,
                "config": config.to_dict(),
                "state": "queued",
                "progress": {"done": 0, "total": 0},
                "error": None,
            }
            self.jobs[job["job_id"]] = job
            self._persist()
        self._pool.submit(self._run, job["job_id"], clip_id, config)
        return job

    def _run(self, job_id: str, clip_id: str, config: PipelineConfig) -> None:
        def progress(done: int, total: int) -> None:
            with self._lock:
                self.jobs[job_id]["progress"] = {"done": done, "total": total}

        with self._lock:
            self.jobs[job_id]["state"] = "running"
            self._persist()
        try:
            self._run_collect(clip_id, config, progress)
        except Exception as exc:
            logger.exception("job %s failed", job_id)
            with self._lock:
                self.jobs[job_id]["state"] = "failed"
                self.jobs[job_id]["error"] = f"{type(exc).__name__}: {exc}"
                self._persist()
            return
        with self._lock:
            job = self.jobs[job_id]
            job["state"] = "done"
            job["progress"]["done"] = job["progress"]["total"]
            self._persist()


def create_app(
    data_dir,
    segmenter: str = "synthetic",
    ui_origin: Optional[str] = None,
    job_workers: int = 2,
) -> FastAPI:
    """Build the service over a data directory of clip subdirectories.

    ``segmenter`` is ``synthetic`` (ground-truth oracle from each clip's
    scene.json) or ``remote:URL`` for an external segmentation server.
    """
    base = Path(data_dir)
    if not base.is_dir():
        raise ValueError(f"data directory {base} does not exist")
    app = FastAPI(title="masktrack review service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[ui_origin or DEFAULT_UI_ORIGIN],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def clip_dir(clip_id: str) -> Path:
        d = base / clip_id
        if "/" in clip_id or not d.is_dir():
            raise HTTPException(status_code=404, detail={"code": "UNKNOWN", "message": f"no clip {clip_id!r}"})
        return d

    def manifest_path(clip_id: str) -> Path:
        path = store.default_manifest_path(clip_dir(clip_id))
        if path is None:
            raise HTTPException(
                status_code=404, detail={"code": "UNKNOWN", "message": f"clip {clip_id!r} has no manifest"}
            )
        return path

    def load_clip(clip_id: str) -> Dict[str, Any]:
        try:
            return store.load_manifest(manifest_path(clip_id))
        except MaskTrackError as exc:
            raise _http_error(500, exc)

    def make_segmenter(clip_id: str, dims) -> Any:
        if segmenter == "synthetic":
            return OracleSegmenter(load_scene(clip_dir(clip_id)))
        if segmenter.startswith("remote:"):
            return RemoteSegmenter(RemoteConfig(segmenter[len("remote:"):], (dims[0], dims[1])))
        raise ValueError(f"unknown segmenter spec {segmenter!r}")

    def flow_lookup_for(clip_id: str):
        d = clip_dir(clip_id)
        if (d / "scene.json").exists():
            scene = load_scene(d)
            return lambda a, b: scene.flow(b)
        return directory_flow_lookup(d)

    def review_gamma(manifest: Dict[str, Any]) -> float:
        return float(manifest.get("filter_gamma", manifest["config"]["gamma"]))

    def run_collect(clip_id: str, config: PipelineConfig, progress) -> None:
        d = clip_dir(clip_id)
        scene = load_scene(d) if (d / "scene.json").exists() else None
        if scene is not None:
            frames = scene.frame_names()
            dims = (scene.height, scene.width)
            flow_source = "exact"
        else:
            frames = sorted(p.name for p in d.glob("frame_*.pgm"))
            if not frames:
                raise FlowUnavailableError(f"clip {clip_id!r} has no frames")
            first = read_pgm(d / frames[0])
            dims = first.shape
            flow_source = "files"
        manifest = collect_clip(
            frames,
            dims,
            flow_lookup_for(clip_id),
            make_segmenter(clip_id, dims),
            config,
            clip_id=clip_id,
            flow_source=flow_source,
            progress=progress,
        )
        target = d / store.COLLECTED_MANIFEST
        with store.manifest_lock(target):
            store.save_manifest(manifest, target)

    registry = JobRegistry(base, run_collect, workers=job_workers)
    app.state.registry = registry

    @app.get("/api/clips")
    def list_clips() -> List[Dict[str, Any]]:
        out = []
        for d in sorted(base.iterdir()):
            if not d.is_dir():
                continue
            mpath = store.default_manifest_path(d)
            if mpath is not None:
                man = store.load_manifest(mpath)
                statuses: Dict[str, int] = {}
                for track in man["tracks"]:
                    statuses[track["status"]] = statuses.get(track["status"], 0) + 1
                out.append(
                    {
                        "clip_id": d.name,
                        "dims": man["dims"],
                        "frame_count": len(man["frames"]),
                        "track_count": len(man["tracks"]),
                        "statuses": statuses,
                        "manifest": mpath.name,
                    }
                )
            elif (d / "scene.json").exists():
                scene = load_scene(d)
                out.append(
                    {
                        "clip_id": d.name,
                        "dims": [scene.height, scene.width],
                        "frame_count": scene.frame_count,
                        "track_count": 0,
                        "statuses": {},
                        "manifest": None,
                    }
                )
        return out

    @app.get("/api/clips/{clip_id}/tracks")
    def list_tracks(clip_id: str) -> Dict[str, Any]:
        man = load_clip(clip_id)
        tracks = []
        for track in man["tracks"]:
            entries = track["frames"]
            tracks.append(
                {
                    "track_id": track["track_id"],
                    "status": track["status"],
                    "start_frame": entries[0]["frame_index"],
                    "length": len(entries),
                    "step_ious": [e.get("step_iou") for e in entries],
                    "sources": [e["source"] for e in entries],
                }
            )
        return {
            "clip_id": clip_id,
            "frame_count": len(man["frames"]),
            "gamma": review_gamma(man),
            "tracks": tracks,
        }

    @app.get("/api/clips/{clip_id}/frames/{frame}")
    def get_frame(clip_id: str, frame: int) -> Response:
        d = clip_dir(clip_id)
        pgm = d / f"frame_{frame:04d}.pgm"
        if pgm.exists():
            labels = read_pgm(pgm)
        elif (d / "scene.json").exists():
            scene = load_scene(d)
            if not 1 <= frame <= scene.frame_count:
                raise HTTPException(status_code=404, detail={"code": "UNKNOWN", "message": f"no frame {frame}"})
            labels = scene.label_map(frame)
        else:
            raise HTTPException(status_code=404, detail={"code": "UNKNOWN", "message": f"no frame {frame}"})
        rgb = np.full(labels.shape + (3,), 28, dtype=np.uint8)
        for value in np.unique(labels):
            if value == 0:
                continue
            rgb[labels == value] = _PALETTE[(int(value) - 1) % len(_PALETTE)]
        img = Image.fromarray(rgb, "RGB")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.get("/api/tracks/{clip_id}/{track_id}")
    def get_track(clip_id: str, track_id: str) -> Dict[str, Any]:
        man = load_clip(clip_id)
        try:
            track = store.get_track(man, track_id)
        except UnknownTrackError as exc:
            raise _http_error(404, exc)
        return {
            "clip_id": clip_id,
            "dims": man["dims"],
            "frame_count": len(man["frames"]),
            "gamma": review_gamma(man),
            "track": track,
        }

    @app.post("/api/tracks/{clip_id}/{track_id}/status")
    def set_status(clip_id: str, track_id: str, body: StatusRequest) -> Dict[str, Any]:
        mpath = manifest_path(clip_id)
        try:
            with store.manifest_lock(mpath):
                man = store.load_manifest(mpath)
                store.set_track_status(
                    man, track_id, body.status, body.actor, timestamp=store.utc_timestamp()
                )
                store.save_manifest(man, mpath)
        except ClipBusyError as exc:
            raise _http_error(409, exc)
        except UnknownTrackError as exc:
            raise _http_error(404, exc)
        return {"track_id": track_id, "status": body.status}

    @app.post("/api/tracks/{clip_id}/{track_id}/refine")
    def refine(clip_id: str, track_id: str, body: RefineRequest) -> Dict[str, Any]:
        man = load_clip(clip_id)
        try:
            store.get_track(man, track_id)
        except UnknownTrackError as exc:
            raise _http_error(404, exc)
        if body.frame > len(man["frames"]):
            raise HTTPException(
                status_code=400,
                detail={"code": "FRAME_OUT_OF_RANGE", "message": f"frame {body.frame} of {len(man['frames'])}"},
            )
        prompts = [
            PointPrompt(Point(p.x, p.y), "positive" if p.label == "pos" else "negative")
            for p in body.prompts
        ]
        seg = make_segmenter(clip_id, man["dims"])
        try:
            candidates = seg.segment(
                man["frames"][body.frame - 1], prompts, man["config"]["max_candidates"]
            )
        except NoCandidateError:
            candidates = []
        return {
            "frame": body.frame,
            "candidates": [
                {
                    "mask": rle_encode(c.mask),
                    "predicted_iou": c.predicted_iou,
                    "stability": c.stability,
                }
                for c in candidates
            ],
        }

    @app.post("/api/tracks/{clip_id}/{track_id}/refine/commit")
    def commit(clip_id: str, track_id: str, body: CommitRequest) -> Dict[str, Any]:
        mpath = manifest_path(clip_id)
        try:
            mask = rle_decode(body.mask)
        except MaskTrackError as exc:
            raise _http_error(400, exc)
        try:
            with store.manifest_lock(mpath):
                man = store.load_manifest(mpath)
                store.splice_refined_mask(
                    man,
                    track_id,
                    body.frame,
                    mask,
                    actor=body.actor,
                    flow_lookup=flow_lookup_for(clip_id),
                    timestamp=store.utc_timestamp(),
                )
                store.save_manifest(man, mpath)
                track = store.get_track(man, track_id)
        except ClipBusyError as exc:
            raise _http_error(409, exc)
        except UnknownTrackError as exc:
            raise _http_error(404, exc)
        except (DimensionMismatchError, FrameOutOfRangeError) as exc:
            raise _http_error(400, exc)
        return {"clip_id": clip_id, "track": track}

    @app.post("/api/jobs")
    def create_job(body: JobRequest) -> Dict[str, Any]:
        clip_dir(body.clip_id)
        try:
            config = PipelineConfig.from_dict(body.config)
        except (ValueError, TypeError) as exc:
            raise HTTPException(status_code=400, detail={"code": "BAD_CONFIG", "message": str(exc)})
        try:
            return registry.submit(body.clip_id, config)
        except ClipBusyError as exc:
            raise _http_error(409, exc)

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str) -> Dict[str, Any]:
        job = registry.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail={"code": "UNKNOWN", "message": f"no job {job_id!r}"})
        return job

    return app
