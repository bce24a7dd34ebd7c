"""The on-disk session bundle: one directory tying together the portrait, its
depth map, optional matte / generated fallback / landmarks, the original
camera, and the reparametrization anchors.

Layout is manifest-driven: ``manifest.json`` names the member files. Float
payloads travel as PFM, images as PNG, cameras and landmarks as JSON.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .camera import CameraParams, ReparamContext
from .errors import (
    CorruptMember,
    DimensionMismatch,
    IoFailure,
    MissingManifest,
    ValidationError,
)
from .fileio import atomic_write_bytes, read_pfm, read_png, write_pfm, write_png
from .fit import LandmarkSet
from .mesh import DepthMap

MANIFEST_VERSION = 1


@dataclass
class SessionBundle:
    source_image: np.ndarray            # (H, W, 3) float in [0, 1]
    depth: DepthMap
    original_camera: CameraParams
    matte: Optional[np.ndarray] = None          # (H, W) float in [0, 1]
    generated_image: Optional[np.ndarray] = None
    landmarks: Optional[LandmarkSet] = None
    reparam: Optional[ReparamContext] = None

    def __post_init__(self):
        h, w = self.source_image.shape[:2]
        if self.source_image.ndim != 3 or self.source_image.shape[2] != 3:
            raise ValidationError("source image must be HxWx3")
        if (self.depth.height, self.depth.width) != (h, w):
            raise DimensionMismatch("depth", f"{self.depth.values.shape} vs source {(h, w)}")
        if self.matte is not None and self.matte.shape != (h, w):
            raise DimensionMismatch("matte", f"{self.matte.shape} vs source {(h, w)}")
        if self.generated_image is not None and self.generated_image.shape[:2] != (h, w):
            raise DimensionMismatch(
                "generated", f"{self.generated_image.shape} vs source {(h, w)}")
        if self.original_camera.resolution != (w, h):
            raise DimensionMismatch(
                "camera", f"camera resolution {self.original_camera.resolution} vs image {(w, h)}")

    @property
    def resolution(self) -> tuple[int, int]:
        return self.original_camera.resolution


def _load_member(kind: str, path: Path, loader):
    if not path.is_file():
        raise CorruptMember(kind, f"member file missing: {path.name}")
    try:
        return loader(path)
    except DimensionMismatch:
        raise
    except CorruptMember as exc:
        if exc.member == kind:
            raise
        raise CorruptMember(kind, str(exc)) from exc
    except Exception as exc:
        raise CorruptMember(kind, f"cannot read {path.name}: {exc}") from exc


def load_bundle(path) -> SessionBundle:
    """Read and validate a bundle directory. Missing optional members yield
    absent fields; any structural problem raises a member-named error."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise MissingManifest(f"no manifest.json in {root}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except Exception as exc:
        raise CorruptMember("manifest", f"manifest.json unreadable: {exc}") from exc
    if manifest.get("version") != MANIFEST_VERSION:
        raise CorruptMember("manifest", f"unsupported version {manifest.get('version')!r}")
    for required in ("source", "depth", "camera"):
        if not manifest.get(required):
            raise CorruptMember("manifest", f"manifest lacks required member {required!r}")

    source = _load_member("source", root / manifest["source"], read_png)
    if source.ndim == 2:
        source = np.stack([source] * 3, axis=2)

    depth_vals = _load_member("depth", root / manifest["depth"], read_pfm)
    try:
        depth = DepthMap.from_values(depth_vals)
    except ValidationError as exc:
        raise CorruptMember("depth", str(exc)) from exc

    def _load_camera(p):
        try:
            return CameraParams.load_json(p)
        except ValidationError as exc:
            raise CorruptMember("camera", str(exc)) from exc

    camera = _load_member("camera", root / manifest["camera"], _load_camera)

    matte = None
    if manifest.get("matte"):
        matte = _load_member("matte", root / manifest["matte"], read_png)
        if matte.ndim == 3:
            matte = matte.mean(axis=2)

    generated = None
    if manifest.get("generated"):
        generated = _load_member("generated", root / manifest["generated"], read_png)
        if generated.ndim == 2:
            generated = np.stack([generated] * 3, axis=2)

    landmarks = None
    if manifest.get("landmarks"):
        def _load_lm(p):
            with open(p) as fh:
                d = json.load(fh)
            try:
                return LandmarkSet.from_json_dict(d)
            except ValidationError as exc:
                raise CorruptMember("landmarks", str(exc)) from exc
        landmarks = _load_member("landmarks", root / manifest["landmarks"], _load_lm)

    reparam = None
    if manifest.get("reparam"):
        r = manifest["reparam"]
        try:
            reparam = ReparamContext(d0=float(r["d0"]), f0=float(r["f0"]), t_z0=float(r["tz0"]))
        except (KeyError, TypeError, ValueError, ValidationError) as exc:
            raise CorruptMember("reparam", f"bad reparam block: {exc}") from exc

    try:
        return SessionBundle(
            source_image=source, depth=depth, original_camera=camera,
            matte=matte, generated_image=generated, landmarks=landmarks, reparam=reparam,
        )
    except DimensionMismatch:
        raise
    except ValidationError as exc:
        raise CorruptMember("bundle", str(exc)) from exc


def save_bundle(path, bundle: SessionBundle) -> None:
    """Write a bundle directory with the standard member names."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {
        "version": MANIFEST_VERSION,
        "source": "source.png",
        "depth": "depth.pfm",
        "camera": "camera.json",
    }
    write_png(root / "source.png", bundle.source_image)
    depth_out = np.where(bundle.depth.valid, bundle.depth.values, -1.0)
    write_pfm(root / "depth.pfm", depth_out)
    bundle.original_camera.save_json(root / "camera.json")
    if bundle.matte is not None:
        write_png(root / "matte.png", bundle.matte)
        manifest["matte"] = "matte.png"
    if bundle.generated_image is not None:
        write_png(root / "generated.png", bundle.generated_image)
        manifest["generated"] = "generated.png"
    if bundle.landmarks is not None:
        (root / "landmarks.json").write_text(json.dumps(bundle.landmarks.to_json_dict()))
        manifest["landmarks"] = "landmarks.json"
    if bundle.reparam is not None:
        manifest["reparam"] = {
            "d0": bundle.reparam.d0, "f0": bundle.reparam.f0, "tz0": bundle.reparam.t_z0,
        }
    atomic_write_bytes(root / "manifest.json",
                       lambda fh: fh.write(json.dumps(manifest, indent=2).encode()))


def save_outputs(out_dir, render, blend: np.ndarray, mask: np.ndarray) -> list[str]:
    """Write the standard pipeline outputs atomically; returns written names."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise IoFailure(f"output directory not writable: {out}")
    except OSError as exc:
        raise IoFailure(f"cannot create output directory {out}: {exc}") from exc
    write_png(out / "warped.png", render.color)
    write_png(out / "blended.png", blend)
    write_png(out / "mask.png", mask)
    zb = render.zbuffer.copy()
    zb[~np.isfinite(zb)] = -1.0
    write_pfm(out / "zbuffer.pfm", zb)
    return ["warped.png", "blended.png", "mask.png", "zbuffer.pfm"]
