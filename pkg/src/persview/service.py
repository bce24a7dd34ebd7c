"""HTTP facade over the correction engine.

A session is one uploaded bundle with its camera-independent stages
(bilateral smoothing, back-projection, texture coordinates) precomputed;
renders are pure functions of the query parameters, so identical queries
return byte-identical PNG bodies. Sessions are memory-resident with LRU
eviction and never mutated after creation.
"""

from __future__ import annotations

import os
import tempfile
import threading
import time
import uuid
import zipfile
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .bundle import SessionBundle, load_bundle
from .camera import halve_distance_init
from .errors import PersviewError, ValidationError
from .fileio import png_bytes
from .mesh import RangeGridMesh
from .pipeline import PipelineConfig, prepare_mesh, run_correct

MODES = ("warped", "generated", "blended", "visibility")


@dataclass(frozen=True)
class SessionHandle:
    id: str
    bundle: SessionBundle
    prebuilt: RangeGridMesh


class SessionStore:
    """Thread-safe LRU map of live sessions."""

    def __init__(self, cap: int = 8):
        self.cap = cap
        self._lock = threading.Lock()
        self._sessions: OrderedDict[str, SessionHandle] = OrderedDict()

    def put(self, handle: SessionHandle) -> None:
        with self._lock:
            self._sessions[handle.id] = handle
            while len(self._sessions) > self.cap:
                self._sessions.popitem(last=False)

    def get(self, session_id: str) -> SessionHandle | None:
        with self._lock:
            handle = self._sessions.get(session_id)
            if handle is not None:
                self._sessions.move_to_end(session_id)
            return handle


def _error(status: int, code: str, message: str, member: str | None = None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"code": code, "member": member, "message": message}},
    )


def _assemble_upload(files: list[UploadFile], workdir: Path) -> Path:
    """Write uploaded parts to disk; a single zip part is extracted. Returns
    the directory containing manifest.json."""
    if len(files) == 1 and (files[0].filename or "").lower().endswith(".zip"):
        zip_path = workdir / "bundle.zip"
        zip_path.write_bytes(files[0].file.read())
        with zipfile.ZipFile(zip_path) as zf:
            zf.extractall(workdir / "unzipped")
        candidates = sorted((workdir / "unzipped").rglob("manifest.json"))
        if not candidates:
            raise ValidationError("zip contains no manifest.json")
        return candidates[0].parent
    for part in files:
        name = os.path.basename(part.filename or "")
        if not name:
            raise ValidationError("upload part without a filename")
        (workdir / name).write_bytes(part.file.read())
    return workdir


def create_app(session_cap: int = 8) -> FastAPI:
    app = FastAPI(title="persview render service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[os.environ.get("PERSVIEW_UI_ORIGIN", "*")],
        allow_methods=["*"],
        allow_headers=["*"],
        expose_headers=["X-Visible-Fraction", "X-Render-Millis"],
    )
    store = SessionStore(cap=session_cap)
    app.state.sessions = store

    @app.exception_handler(PersviewError)
    async def _persview_error(request: Request, exc: PersviewError):
        member = getattr(exc, "member", None)
        return _error(400, type(exc).__name__, str(exc), member)

    @app.post("/sessions", status_code=201)
    def create_session(files: list[UploadFile] = File(...)):
        with tempfile.TemporaryDirectory(prefix="persview-upload-") as tmp:
            bundle_dir = _assemble_upload(files, Path(tmp))
            bundle = load_bundle(bundle_dir)
        prebuilt = prepare_mesh(bundle, PipelineConfig())
        handle = SessionHandle(id=uuid.uuid4().hex, bundle=bundle, prebuilt=prebuilt)
        store.put(handle)
        return {"id": handle.id}

    def _parse_params(yaw: str, pitch: str, roll: str, tz: str | None, mode: str):
        try:
            angles = [float(yaw), float(pitch), float(roll)]
        except ValueError as exc:
            raise ValueError(f"angles must be numeric: {exc}")
        for name, v in zip(("yaw", "pitch", "roll"), angles):
            if not -90.0 <= v <= 90.0:
                raise ValueError(f"{name}={v} out of range [-90, 90]")
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        tz_value = None
        tz_half = False
        if tz is not None and tz != "":
            if tz == "half":
                tz_half = True
            else:
                try:
                    tz_value = float(tz)
                except ValueError:
                    raise ValueError(f"tz must be a number or 'half', got {tz!r}")
                if not tz_value > 0:
                    raise ValueError(f"tz must be positive, got {tz_value}")
        return angles, tz_value, tz_half, mode

    @app.get("/sessions/{session_id}/render")
    def render(session_id: str, yaw: str = "0", pitch: str = "0", roll: str = "0",
               tz: str | None = None, mode: str = "warped"):
        handle = store.get(session_id)
        if handle is None:
            return _error(404, "UnknownSession", f"no session {session_id!r}")
        try:
            angles, tz_value, tz_half, mode = _parse_params(yaw, pitch, roll, tz, mode)
            cfg = PipelineConfig(yaw=angles[0], pitch=angles[1], roll=angles[2],
                                 tz=tz_value, tz_half=tz_half)
        except (ValueError, ValidationError) as exc:
            return _error(422, "BadParameters", str(exc))
        if mode in ("blended", "generated") and handle.bundle.generated_image is None:
            return _error(409, "MissingGenerated",
                          "session bundle has no generated image", member="generated")

        t0 = time.perf_counter()
        result = run_correct(handle.bundle, cfg, prebuilt_mesh=handle.prebuilt,
                             blend=(mode == "blended"))
        if mode == "warped":
            img = result.render.color
        elif mode == "blended":
            img = result.blended
        elif mode == "visibility":
            img = result.mask_binary
        else:
            img = handle.bundle.generated_image
        body = png_bytes(img)
        millis = (time.perf_counter() - t0) * 1000.0
        return Response(content=body, media_type="image/png", headers={
            "X-Visible-Fraction": f"{result.visible_fraction:.4f}",
            "X-Render-Millis": str(int(round(millis))),
        })

    @app.get("/sessions/{session_id}/meta")
    def meta(session_id: str):
        handle = store.get(session_id)
        if handle is None:
            return _error(404, "UnknownSession", f"no session {session_id!r}")
        modes = [m for m in MODES
                 if handle.bundle.generated_image is not None
                 or m not in ("blended", "generated")]
        w, h = handle.bundle.resolution
        return {
            "id": handle.id,
            "camera": handle.bundle.original_camera.to_json_dict(),
            "resolution": [w, h],
            "modes": modes,
            "tz_half_value": halve_distance_init(handle.bundle.original_camera.t_z),
        }

    return app


app = create_app(session_cap=int(os.environ.get("PERSVIEW_SESSION_CAP", "8")))
