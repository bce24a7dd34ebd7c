"""Synthetic test scenes with exact analytic depth and ground-truth views.

Each fixture is a procedurally textured surface placed in front of a pinhole
camera: a fronto-parallel plane, a triangular ridge prism, or a sphere cap.
The texture is a smooth function of the 3D surface point, so any view can be
ray-traced exactly; the generator emits the source view as a session bundle
plus an independently ray-traced novel view for comparison. The world origin
sits at the surface center, the source camera at distance 1 on the +z axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bundle import SessionBundle, save_bundle
from .camera import CameraParams, ReparamContext, backproject, orbit_about_pivot
from .errors import ValidationError
from .fileio import write_png
from .fit import NUM_LANDMARKS, LandmarkSet, project_landmarks
from .mesh import DepthMap

KINDS = ("plane", "ridge", "sphere-cap")

_DISTANCE = 1.0        # source camera distance, scene units
_RIDGE_SLOPE = 0.4
_SPHERE_RADIUS = 0.75
_SPHERE_CENTER_Z = 0.55


def texture(points: np.ndarray) -> np.ndarray:
    """Smooth RGB texture evaluated at world-space surface points (..., 3)."""
    x, y, z = points[..., 0], points[..., 1], points[..., 2]
    r = 0.5 + 0.4 * np.sin(19.0 * x + 5.0 * y + 0.8) * np.cos(7.0 * y)
    g = 0.5 + 0.4 * np.sin(17.0 * y + 4.0 * z + 2.1) * np.cos(6.0 * x + 1.0)
    b = 0.5 + 0.4 * np.sin(15.0 * z + 21.0 * x + 4.2)
    return np.clip(np.stack([r, g, b], axis=-1), 0.0, 1.0)


def _intersect(kind: str, origin: np.ndarray, dirs: np.ndarray):
    """Ray-trace the analytic surface. Returns (points (..., 3), hit (...,))."""
    ox, oy, oz = origin
    dx, dy, dz = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    if kind == "plane":
        # z_world = 0
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -oz / dz
        hit = np.isfinite(t) & (t > 0)
    elif kind == "ridge":
        # z_world = slope * |x_world|, nearest consistent branch wins
        a = _RIDGE_SLOPE
        t = np.full(dz.shape, np.inf)
        for sign in (1.0, -1.0):
            denom = dz - sign * a * dx
            with np.errstate(divide="ignore", invalid="ignore"):
                tc = (sign * a * ox - oz) / denom
            xc = ox + tc * dx
            good = np.isfinite(tc) & (tc > 0) & (sign * xc >= 0)
            t = np.where(good & (tc < t), tc, t)
        hit = np.isfinite(t)
    elif kind == "sphere-cap":
        center = np.array([0.0, 0.0, _SPHERE_CENTER_Z])
        oc = np.asarray(origin, dtype=float) - center
        b = dx * oc[0] + dy * oc[1] + dz * oc[2]
        norm2 = dx ** 2 + dy ** 2 + dz ** 2
        c = oc @ oc - _SPHERE_RADIUS ** 2
        disc = b ** 2 - norm2 * c
        hit = disc >= 0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        t = np.where(hit, (-b - sq) / norm2, np.inf)
        hit = hit & (t > 0)
    else:
        raise ValidationError(f"unknown fixture kind {kind!r}; choose from {KINDS}")
    t = np.where(hit, t, np.nan)
    points = origin + t[..., None] * dirs
    return points, hit


def _render_view(kind: str, cam: CameraParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact ray-traced view: (color, camera-space depth, hit mask)."""
    w, h = cam.resolution
    xs = (np.arange(w) + 0.5 - cam.principal_point[0]) / cam.focal
    ys = (np.arange(h) + 0.5 - cam.principal_point[1]) / cam.focal
    gx, gy = np.meshgrid(xs, ys)
    dirs_cam = np.stack([gx, gy, np.ones_like(gx)], axis=-1)
    dirs_world = dirs_cam @ cam.rotation  # R^T applied to each direction
    origin = cam.center()
    points, hit = _intersect(kind, origin, dirs_world)
    color = np.where(hit[..., None], texture(np.nan_to_num(points)), 0.0)
    cam_z = (points - origin) @ cam.rotation.T[:, 2]
    depth = np.where(hit, cam_z, -1.0)
    return color, depth, hit


def source_camera(size: int) -> CameraParams:
    return CameraParams(
        rotation=np.eye(3),
        translation=np.array([0.0, 0.0, _DISTANCE]),
        focal=float(size),
        principal_point=np.array([size / 2.0, size / 2.0]),
        resolution=(size, size),
    )


def _surface_landmarks(kind: str, cam: CameraParams) -> LandmarkSet:
    """478 deterministic surface points: rays through a sunflower-spiral
    pattern inside the image, intersected with the surface."""
    i = np.arange(NUM_LANDMARKS)
    radius = 0.42 * np.sqrt((i + 0.5) / NUM_LANDMARKS)
    angle = i * 2.399963229728653  # golden angle
    w, h = cam.resolution
    px = cam.principal_point[0] + radius * np.cos(angle) * w
    py = cam.principal_point[1] + radius * np.sin(angle) * h
    dirs = np.stack([(px - cam.principal_point[0]) / cam.focal,
                     (py - cam.principal_point[1]) / cam.focal,
                     np.ones(NUM_LANDMARKS)], axis=-1)
    dirs_world = dirs @ cam.rotation
    points, hit = _intersect(kind, cam.center(), dirs_world)
    # landmarks that miss the surface snap to the z=0 plane so the set stays complete
    fallback, _ = _intersect("plane", cam.center(), dirs_world)
    points = np.where(hit[:, None], points, fallback)
    return LandmarkSet(points=points)


@dataclass
class Fixture:
    bundle_dir: Path
    bundle: SessionBundle
    novel_camera: CameraParams
    novel_truth: np.ndarray
    novel_hit: np.ndarray
    geometry: LandmarkSet


def make_fixture(kind: str, size: int, out_path, yaw_deg: float = 5.0,
                 pitch_deg: float = 0.0, roll_deg: float = 0.0) -> Fixture:
    """Generate a fixture bundle plus ground-truth novel view on disk.

    The novel camera orbits the surface's visible centroid by the given
    angles at unchanged distance; the ground-truth render of that view is
    stored beside the bundle (novel_truth.png / novel_camera.json), and the
    raw 3D landmark geometry as geometry.json for camera-fit runs.
    """
    if kind not in KINDS:
        raise ValidationError(f"unknown fixture kind {kind!r}; choose from {KINDS}")
    if size < 16:
        raise ValidationError(f"fixture size must be >= 16, got {size}")

    cam = source_camera(size)
    color, depth, hit = _render_view(kind, cam)

    geometry = _surface_landmarks(kind, cam)
    observed = project_landmarks(geometry, cam)

    # pivot: centroid of the back-projected valid surface samples
    rows, cols = np.nonzero(hit)
    centers = np.column_stack([cols + 0.5, rows + 0.5])
    pivot = backproject(centers, depth[rows, cols], cam).mean(axis=0)
    novel_cam = orbit_about_pivot(cam, pivot, yaw_deg, pitch_deg, roll_deg)
    truth, _, truth_hit = _render_view(kind, novel_cam)

    bundle = SessionBundle(
        source_image=color,
        depth=DepthMap(values=np.where(hit, depth, -1.0), valid=hit),
        original_camera=cam,
        matte=hit.astype(float),
        # the ideal generated image for the novel view is the ground truth itself
        generated_image=truth,
        landmarks=observed,
        reparam=ReparamContext(d0=_DISTANCE, f0=cam.focal, t_z0=_DISTANCE),
    )

    root = Path(out_path)
    save_bundle(root, bundle)
    write_png(root / "novel_truth.png", truth)
    write_png(root / "novel_hit.png", truth_hit.astype(float))
    novel_cam.save_json(root / "novel_camera.json")
    (root / "geometry.json").write_text(json.dumps(geometry.to_json_dict()))
    (root / "pivot.json").write_text(json.dumps({"pivot": pivot.tolist()}))

    return Fixture(bundle_dir=root, bundle=bundle, novel_camera=novel_cam,
                   novel_truth=truth, novel_hit=truth_hit, geometry=geometry)
