"""Pinhole camera model and the focal-length/distance reparametrization.

Convention used throughout the package:
- right-handed, camera looks down +z in camera space, y down in pixel space
- world -> camera: x_cam = R @ x_world + t
- pixel = principal_point + focal * (x_cam/z_cam, y_cam/z_cam)
- pixel centers sit at (i + 0.5, j + 0.5); pixel (0, 0) is top-left
- depth means camera-space z, not distance along the ray

Scene units are arbitrary but shared by depth maps and translations; focal
length and principal point are in pixels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import EyesBehindCamera, NonPositiveDepth, NonPositiveDistance, ValidationError

# Depth-positivity guard: well above f64 noise, below any plausible face depth.
EPS_Z = 1e-6


@dataclass(frozen=True)
class CameraParams:
    """Extrinsics (world->camera rotation + translation) and intrinsics."""

    rotation: np.ndarray        # (3, 3) orthonormal
    translation: np.ndarray     # (3,), translation[2] is t_z
    focal: float                # pixels
    principal_point: np.ndarray  # (2,) pixels
    resolution: tuple[int, int]  # (width, height) pixels

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float))
        object.__setattr__(self, "principal_point", np.asarray(self.principal_point, dtype=float))
        object.__setattr__(self, "resolution", (int(self.resolution[0]), int(self.resolution[1])))
        if self.rotation.shape != (3, 3):
            raise ValidationError("rotation must be 3x3")
        err = np.abs(self.rotation.T @ self.rotation - np.eye(3)).max()
        if err >= 1e-6:
            raise ValidationError(f"rotation is not orthonormal (deviation {err:.2e})")
        if self.translation.shape != (3,):
            raise ValidationError("translation must be a 3-vector")
        if not self.focal > 0:
            raise ValidationError("focal must be positive")
        if self.principal_point.shape != (2,):
            raise ValidationError("principal_point must be a 2-vector")
        if self.resolution[0] <= 0 or self.resolution[1] <= 0:
            raise ValidationError("resolution components must be positive")
        if not self.translation[2] > 0:
            raise ValidationError("t_z must be positive (camera in front of the face)")

    @property
    def t_z(self) -> float:
        return float(self.translation[2])

    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def view_axis(self) -> np.ndarray:
        """Unit world-space direction of the optical axis (+z of camera space)."""
        return self.rotation.T @ np.array([0.0, 0.0, 1.0])

    def to_json_dict(self) -> dict:
        return {
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "focal": float(self.focal),
            "principal_point": self.principal_point.tolist(),
            "resolution": [self.resolution[0], self.resolution[1]],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "CameraParams":
        return cls(
            rotation=np.array(d["rotation"], dtype=float),
            translation=np.array(d["translation"], dtype=float),
            focal=float(d["focal"]),
            principal_point=np.array(d["principal_point"], dtype=float),
            resolution=(int(d["resolution"][0]), int(d["resolution"][1])),
        )

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    @classmethod
    def load_json(cls, path) -> "CameraParams":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class ReparamContext:
    """Anchors for the focal/distance coupling: eye depth d0 and the original
    focal f0 and camera distance t_z0."""

    d0: float
    f0: float
    t_z0: float

    def __post_init__(self):
        if not self.d0 > 0:
            raise ValidationError("d0 must be positive")
        if not self.f0 > 0:
            raise ValidationError("f0 must be positive")


def project(point, cam: CameraParams) -> np.ndarray:
    """Project world point(s) to continuous pixel coordinates.

    Accepts a (3,) vector or an (N, 3) array; returns matching (2,) or (N, 2).
    Raises NonPositiveDepth if any point has camera-space z <= EPS_Z.
    """
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    cam_pts = pts @ cam.rotation.T + cam.translation
    z = cam_pts[:, 2]
    if np.any(z <= EPS_Z):
        raise NonPositiveDepth(f"point depth {z.min():.3g} <= {EPS_Z}")
    pix = cam.principal_point + cam.focal * cam_pts[:, :2] / z[:, None]
    return pix[0] if single else pix


def project_points(points: np.ndarray, cam: CameraParams):
    """Vectorized projection that never raises.

    Returns (pixels (N, 2), depth (N,), valid (N,)). Pixels of invalid points
    (z <= EPS_Z) are NaN.
    """
    pts = np.asarray(points, dtype=float)
    cam_pts = pts @ cam.rotation.T + cam.translation
    z = cam_pts[:, 2]
    valid = z > EPS_Z
    pix = np.full((pts.shape[0], 2), np.nan)
    zi = np.where(valid, z, 1.0)
    pix[valid] = (cam.principal_point + cam.focal * cam_pts[:, :2] / zi[:, None])[valid]
    return pix, z, valid


def backproject(pixel, depth, cam: CameraParams) -> np.ndarray:
    """Lift pixel(s) at the given camera-space depth(s) back to world points.

    Accepts ((2,), scalar) or ((N, 2), (N,)); inverse of project within 1e-4 px.
    """
    pix = np.asarray(pixel, dtype=float)
    single = pix.ndim == 1
    pix = np.atleast_2d(pix)
    d = np.atleast_1d(np.asarray(depth, dtype=float))
    if np.any(d <= 0):
        raise NonPositiveDepth(f"depth {d.min():.3g} <= 0")
    xy = (pix - cam.principal_point) * d[:, None] / cam.focal
    cam_pts = np.column_stack([xy, d])
    world = (cam_pts - cam.translation) @ cam.rotation
    return world[0] if single else world


def reparam_focal(ctx: ReparamContext, t_z: float) -> float:
    """Focal length slaved to camera distance so eye-plane magnification is
    preserved: f = alpha * f0 with alpha = (d0 - (t_z0 - t_z)) / d0."""
    alpha = (ctx.d0 - (ctx.t_z0 - t_z)) / ctx.d0
    if not alpha > 0:
        raise EyesBehindCamera(
            f"t_z={t_z:.3g} puts the eye plane at or behind the camera "
            f"(d0={ctx.d0:.3g}, t_z0={ctx.t_z0:.3g})"
        )
    return alpha * ctx.f0


def halve_distance_init(t_z0: float) -> float:
    """Initialization rule for the camera distance: halve the per-image value."""
    if not t_z0 > 0:
        raise NonPositiveDistance(f"t_z0 must be positive, got {t_z0!r}")
    return t_z0 / 2.0


def rotation_about_axis(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    ax = np.asarray(axis, dtype=float)
    n = np.linalg.norm(ax)
    if n == 0:
        return np.eye(3)
    ax = ax / n
    K = np.array([
        [0.0, -ax[2], ax[1]],
        [ax[2], 0.0, -ax[0]],
        [-ax[1], ax[0], 0.0],
    ])
    return np.eye(3) + np.sin(angle_rad) * K + (1.0 - np.cos(angle_rad)) * (K @ K)


def rotation_from_rotvec(rotvec: np.ndarray) -> np.ndarray:
    """Rotation matrix from an axis-angle 3-vector (angle = vector norm)."""
    v = np.asarray(rotvec, dtype=float)
    angle = np.linalg.norm(v)
    if angle < 1e-300:
        return np.eye(3)
    return rotation_about_axis(v / angle, angle)


def orbit_about_pivot(cam: CameraParams, pivot: np.ndarray,
                      yaw_deg: float = 0.0, pitch_deg: float = 0.0,
                      roll_deg: float = 0.0) -> CameraParams:
    """Rotate the camera rig about a world-space pivot point.

    Yaw/pitch/roll are right-hand rotations about the camera's own y/x/z axes.
    The pivot projects to the same pixel before and after, so steering angles
    pan around the face rather than around the camera origin.
    """
    yaw = np.deg2rad(yaw_deg)
    pitch = np.deg2rad(pitch_deg)
    roll = np.deg2rad(roll_deg)
    d = (rotation_about_axis([0, 1, 0], yaw)
         @ rotation_about_axis([1, 0, 0], pitch)
         @ rotation_about_axis([0, 0, 1], roll))
    pivot_cam = cam.rotation @ np.asarray(pivot, dtype=float) + cam.translation
    r_new = d.T @ cam.rotation
    t_new = d.T @ (cam.translation - pivot_cam) + pivot_cam
    return replace(cam, rotation=r_new, translation=t_new)


def dolly_to_distance(cam: CameraParams, t_z: float, ctx: ReparamContext) -> CameraParams:
    """Move the camera along its own view axis to distance t_z, slaving the
    focal length through the reparametrization so magnification at the eye
    plane is unchanged."""
    f = reparam_focal(ctx, t_z)
    t_new = cam.translation.copy()
    t_new[2] = t_z
    return replace(cam, translation=t_new, focal=f)
