"""End-to-end perspective correction: reparametrize -> smooth -> mesh ->
cull -> rasterize -> visibility -> mask -> blend.

The novel camera orbits the mesh centroid by the requested yaw/pitch/roll
and optionally dollies to a new t_z with the focal length slaved through
the reparametrization.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .blend import build_blend_mask, dilate_and_blur, laplacian_blend
from .bundle import SessionBundle
from .camera import CameraParams, ReparamContext, dolly_to_distance, halve_distance_init, orbit_about_pivot
from .errors import MissingGenerated, ValidationError
from .mesh import RangeGridMesh, compute_texcoords, depth_to_range_grid, smooth_depth_bilateral
from .raster import RenderOutput, cull_grazing_faces, rasterize, vertex_visibility


@dataclass
class PipelineConfig:
    """Novel-view and processing parameters for one correction run."""

    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0
    tz: Optional[float] = None   # None keeps the original distance
    tz_half: bool = False        # halve-initial-distance rule
    cull_deg: float = 80.0
    bilateral_k: int = 5
    sigma_color: float = 0.1
    sigma_space: float = 1.0
    levels: int = 3
    erode: int = 2
    blur: int = 5
    threads: Optional[int] = None

    def __post_init__(self):
        for name in ("yaw", "pitch", "roll"):
            v = getattr(self, name)
            if not -90.0 <= v <= 90.0:
                raise ValidationError(f"{name} must be in [-90, 90], got {v}")
        if not 0.0 < self.cull_deg <= 90.0:
            raise ValidationError(f"cull-deg must be in (0, 90], got {self.cull_deg}")
        if self.tz is not None and self.tz_half:
            raise ValidationError("tz and tz-half are mutually exclusive")
        if self.tz is not None and not self.tz > 0:
            raise ValidationError(f"tz must be positive, got {self.tz}")

    def to_json_dict(self) -> dict:
        return {
            "yaw": self.yaw, "pitch": self.pitch, "roll": self.roll,
            "tz": self.tz, "tz_half": self.tz_half, "cull_deg": self.cull_deg,
            "bilateral_k": self.bilateral_k, "sigma_color": self.sigma_color,
            "sigma_space": self.sigma_space, "levels": self.levels,
            "erode": self.erode, "blur": self.blur,
        }


@dataclass
class CorrectionResult:
    novel_camera: CameraParams
    mesh: RangeGridMesh
    render: RenderOutput
    mask_binary: np.ndarray    # 1 where warped content is trustworthy
    mask: np.ndarray           # eroded + blurred composition mask
    blended: Optional[np.ndarray]
    visible_fraction: float
    timings_ms: dict = field(default_factory=dict)


def reparam_context(bundle: SessionBundle) -> ReparamContext:
    """Bundle's stored anchors, or a same-distance fallback where the eye
    plane is assumed at the camera distance."""
    if bundle.reparam is not None:
        return bundle.reparam
    cam = bundle.original_camera
    return ReparamContext(d0=cam.t_z, f0=cam.focal, t_z0=cam.t_z)


def prepare_mesh(bundle: SessionBundle, cfg: PipelineConfig) -> RangeGridMesh:
    """Camera-independent stages: bilateral smoothing, back-projection,
    texture coordinates."""
    smoothed = smooth_depth_bilateral(bundle.depth, cfg.bilateral_k,
                                      cfg.sigma_color, cfg.sigma_space)
    mesh = depth_to_range_grid(smoothed, bundle.original_camera)
    return compute_texcoords(mesh, bundle.original_camera)


def novel_camera_for(bundle: SessionBundle, cfg: PipelineConfig,
                     pivot: np.ndarray) -> CameraParams:
    cam = orbit_about_pivot(bundle.original_camera, pivot, cfg.yaw, cfg.pitch, cfg.roll)
    if cfg.tz_half or cfg.tz is not None:
        ctx = reparam_context(bundle)
        tz = halve_distance_init(ctx.t_z0) if cfg.tz_half else cfg.tz
        cam = dolly_to_distance(cam, tz, ctx)
    return cam


def run_correct(bundle: SessionBundle, cfg: PipelineConfig,
                novel_cam: Optional[CameraParams] = None,
                prebuilt_mesh: Optional[RangeGridMesh] = None,
                blend: bool = True) -> CorrectionResult:
    """Run the full correction. novel_cam overrides the config's camera
    deltas; prebuilt_mesh skips the camera-independent stages (used by the
    render service to cache per-session work)."""
    timings: dict[str, float] = {}

    def clocked(name, fn, *args, **kw):
        t0 = time.perf_counter()
        out = fn(*args, **kw)
        timings[name] = (time.perf_counter() - t0) * 1000.0
        return out

    if blend and bundle.generated_image is None:
        raise MissingGenerated("bundle has no generated image; blending impossible")

    mesh = prebuilt_mesh if prebuilt_mesh is not None else clocked(
        "prepare_mesh", prepare_mesh, bundle, cfg)
    if novel_cam is None:
        novel_cam = novel_camera_for(bundle, cfg, mesh.centroid())

    mesh = clocked("cull", cull_grazing_faces, mesh, novel_cam, cfg.cull_deg)
    render = clocked("rasterize", rasterize, mesh, bundle.source_image, novel_cam,
                     threads=cfg.threads)
    mesh = clocked("visibility", vertex_visibility, mesh, render, novel_cam)

    mask_binary = clocked("mask", build_blend_mask, render, mesh, None)
    covered_visible = int((mask_binary == 1.0).sum())
    if bundle.matte is not None:
        denom = int((bundle.matte > 0.5).sum())
    else:
        denom = int(bundle.depth.valid.sum())
    visible_fraction = covered_visible / denom if denom else 0.0

    masked = mask_binary * bundle.matte if bundle.matte is not None else mask_binary
    mask = clocked("dilate_blur", dilate_and_blur, masked, cfg.erode, cfg.blur)

    blended = None
    if blend:
        # fill warp holes with generated content before the pyramid so its
        # band-pass levels never see the artificial black cliff at coverage
        # boundaries (the mask already routes those pixels to generated)
        filled = render.color.copy()
        filled[~render.coverage] = bundle.generated_image[~render.coverage]
        blended = clocked("blend", laplacian_blend, filled,
                          bundle.generated_image, mask, cfg.levels)

    return CorrectionResult(novel_camera=novel_cam, mesh=mesh, render=render,
                            mask_binary=mask_binary, mask=mask, blended=blended,
                            visible_fraction=visible_fraction, timings_ms=timings)
