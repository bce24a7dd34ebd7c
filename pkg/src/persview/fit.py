"""Camera recovery from 3D face landmarks.

The observation model mirrors how a face-mesh detector sees a rendered
portrait: each 3D reference point is projected through the camera to pixel
(u, v), a relative-depth coordinate w = f * (z - mean z) / mean z is attached,
and the resulting 478-point cloud is normalized to centroid zero / RMS radius
one. Fitting minimizes the summed squared distance between the predicted and
observed normalized keypoints by gradient descent on rotation (axis-angle
increments composed onto the current matrix) and translation, with focal
length slaved to t_z through the perspective-preserving reparametrization.
Perspective convergence is what makes t_z observable after normalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import EPS_Z, CameraParams, ReparamContext, reparam_focal, rotation_from_rotvec
from .errors import (
    DegenerateLandmarks,
    DimensionMismatch,
    DivergedFit,
    EyesBehindCamera,
    NonPositiveDepth,
    ValidationError,
)

NUM_LANDMARKS = 478


@dataclass(frozen=True)
class LandmarkSet:
    """Exactly 478 finite 3D keypoints."""

    points: np.ndarray  # (478, 3)

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        if self.points.shape != (NUM_LANDMARKS, 3):
            raise ValidationError(
                f"landmark set must be {NUM_LANDMARKS}x3, got {self.points.shape}")
        if not np.isfinite(self.points).all():
            raise ValidationError("landmarks must be finite")

    def to_json_dict(self) -> dict:
        return {"points": self.points.tolist()}

    @classmethod
    def from_json_dict(cls, d: dict) -> "LandmarkSet":
        return cls(points=np.array(d["points"], dtype=float))


@dataclass
class FitConfig:
    alpha1: float = 1.0
    alpha2: float = 1.0
    learning_rate: float = 0.001
    max_iters: int = 200
    alternation_period: int = 1
    convergence_tol: float = 1e-9

    def __post_init__(self):
        if self.learning_rate <= 0 or self.max_iters <= 0 or self.alternation_period <= 0:
            raise ValidationError("rates and iteration counts must be positive")
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ValidationError("loss weights must be >= 0")


@dataclass
class FitResult:
    camera: CameraParams
    loss_trace: np.ndarray
    iterations_run: int
    converged: bool
    # per-iteration (t_z, focal) snapshots for checking the reparam coupling
    tz_trace: np.ndarray = field(default=None)
    focal_trace: np.ndarray = field(default=None)

    def to_json_dict(self) -> dict:
        return {
            "camera": self.camera.to_json_dict(),
            "loss_trace": self.loss_trace.tolist(),
            "iterations_run": self.iterations_run,
            "converged": self.converged,
            "tz_trace": self.tz_trace.tolist(),
            "focal_trace": self.focal_trace.tolist(),
        }


def normalize_landmarks(raw) -> LandmarkSet:
    """Shift to zero centroid and scale to unit RMS radius.

    This makes the landmark distance invariant to translation and global
    scale, so only shape (and perspective distortion of shape) matters.
    """
    pts = raw.points if isinstance(raw, LandmarkSet) else np.asarray(raw, dtype=float)
    if pts.shape != (NUM_LANDMARKS, 3):
        raise ValidationError(f"expected {NUM_LANDMARKS}x3 landmarks, got {pts.shape}")
    centered = pts - pts.mean(axis=0)
    rms = np.sqrt((centered ** 2).sum(axis=1).mean())
    if rms < 1e-12:
        raise DegenerateLandmarks("landmarks have zero spread")
    return LandmarkSet(points=centered / rms)


def landmark_loss(m: LandmarkSet, m_hat: LandmarkSet) -> float:
    """Summed squared distance between corresponding normalized keypoints."""
    return float(((m.points - m_hat.points) ** 2).sum())


def mse_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Mean-squared-error photometric plug-in."""
    return float(((np.asarray(a, float) - np.asarray(b, float)) ** 2).mean())


def one_minus_ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Structural-dissimilarity photometric plug-in."""
    from .metrics import ssim
    return 1.0 - ssim(a, b)


def combined_loss(target, rendered, m: LandmarkSet, m_hat: LandmarkSet,
                  cfg: FitConfig, photometric=mse_distance) -> float:
    """alpha1 * photometric(target, rendered) + alpha2 * landmark_loss(m, m_hat)."""
    target = np.asarray(target, dtype=float)
    rendered = np.asarray(rendered, dtype=float)
    if target.shape != rendered.shape:
        raise DimensionMismatch("rendered", f"{rendered.shape} vs {target.shape}")
    photo = photometric(target, rendered) if cfg.alpha1 != 0 else 0.0
    return cfg.alpha1 * photo + cfg.alpha2 * landmark_loss(m, m_hat)


def _observe(points: np.ndarray, rotation: np.ndarray, translation: np.ndarray,
             focal: float, principal_point: np.ndarray):
    """Forward observation model. Returns the raw (u, v, w) cloud and the
    intermediates needed by the backward pass."""
    p = points @ rotation.T + translation
    z = p[:, 2]
    if np.any(z <= EPS_Z):
        raise NonPositiveDepth("landmark behind camera during fit")
    zbar = z.mean()
    u = principal_point[0] + focal * p[:, 0] / z
    v = principal_point[1] + focal * p[:, 1] / z
    w = focal * (z - zbar) / zbar
    return np.column_stack([u, v, w]), p, z, zbar


def project_landmarks(geometry: LandmarkSet, cam: CameraParams) -> LandmarkSet:
    """Predicted normalized keypoints for scene-space geometry seen by cam."""
    raw, _, _, _ = _observe(geometry.points, cam.rotation, cam.translation,
                            cam.focal, cam.principal_point)
    return normalize_landmarks(raw)


def landmark_loss_and_grad(geometry: np.ndarray, observed: np.ndarray,
                           rotation: np.ndarray, translation: np.ndarray,
                           ctx: ReparamContext, principal_point: np.ndarray):
    """Loss and its analytic gradient w.r.t. an axis-angle rotation increment
    (applied as exp([phi]x) @ R at phi = 0) and the translation vector.

    The focal length is not a free parameter: f = reparam_focal(ctx, t_z), so
    the t_z component of the gradient includes the focal chain term.
    """
    focal = reparam_focal(ctx, float(translation[2]))
    raw, p, z, zbar = _observe(geometry, rotation, translation, focal, principal_point)
    n = len(geometry)

    c = raw.mean(axis=0)
    centered = raw - c
    s = np.sqrt((centered ** 2).sum(axis=1).mean())
    if s < 1e-12:
        raise DegenerateLandmarks("predicted landmarks collapsed")
    y = centered / s
    diff = y - observed
    loss = float((diff ** 2).sum())

    # through normalization: dL/draw_k = (g_k - mean g)/s - (sum_i g_i.y_i) y_k / (n s)
    g_y = 2.0 * diff
    g_raw = (g_y - g_y.mean(axis=0)) / s - (g_y * y).sum() * y / (n * s)

    g_u, g_v, g_w = g_raw[:, 0], g_raw[:, 1], g_raw[:, 2]
    g_p = np.empty_like(p)
    g_p[:, 0] = g_u * focal / z
    g_p[:, 1] = g_v * focal / z
    g_p[:, 2] = (-(g_u * p[:, 0] + g_v * p[:, 1]) * focal / z ** 2
                 + g_w * focal / zbar
                 - (g_w * z).sum() * focal / (zbar ** 2 * n))
    g_f = float((g_u * p[:, 0] / z + g_v * p[:, 1] / z + g_w * (z / zbar - 1.0)).sum())

    q = geometry @ rotation.T
    g_phi = np.cross(q, g_p).sum(axis=0)
    g_t = g_p.sum(axis=0)
    g_t[2] += g_f * ctx.f0 / ctx.d0  # focal slaved to t_z
    return loss, g_phi, g_t


def fit_camera(reference_geometry: LandmarkSet, observed: LandmarkSet,
               init: CameraParams, ctx: ReparamContext, cfg: FitConfig) -> FitResult:
    """Recover rotation and translation by alternating-block gradient descent
    with backtracking step halving.

    Even blocks update rotation, odd blocks update (translation, t_z); the
    block switches every cfg.alternation_period iterations. Each block's step
    size halves while the loss would increase and grows 1.3x after a clean
    success. The focal length follows t_z through the reparametrization at
    every step.
    """
    obs = observed.points
    obs_rms = np.sqrt(((obs - obs.mean(axis=0)) ** 2).sum(axis=1).mean())
    if obs_rms < 1e-12:
        raise DegenerateLandmarks("observed landmarks have zero spread")

    geo = reference_geometry.points
    rotation = init.rotation.copy()
    translation = init.translation.copy()
    pp = init.principal_point

    lrs = [cfg.learning_rate, cfg.learning_rate]  # per-block step sizes
    trace, tz_trace, f_trace = [], [], []
    converged = False

    def evaluate(rot, t):
        return landmark_loss_and_grad(geo, obs, rot, t, ctx, pp)

    loss, g_phi, g_t = evaluate(rotation, translation)
    for it in range(cfg.max_iters):
        if not np.isfinite(loss):
            raise DivergedFit(f"loss became non-finite at iteration {it}")
        trace.append(loss)
        tz_trace.append(float(translation[2]))
        f_trace.append(reparam_focal(ctx, float(translation[2])))

        if loss < 1e-12:
            converged = True
            break
        if it >= 10:
            prev = trace[-11]
            if abs(prev - trace[-1]) < cfg.convergence_tol * max(abs(prev), 1e-30):
                converged = True
                break

        block = (it // cfg.alternation_period) % 2
        accepted = False
        first_try = True
        for _ in range(40):
            if block == 0:
                rot_new = rotation_from_rotvec(-lrs[0] * g_phi) @ rotation
                t_new = translation
            else:
                rot_new = rotation
                t_new = translation - lrs[1] * g_t
            try:
                new_loss, new_gphi, new_gt = evaluate(rot_new, t_new)
            except (NonPositiveDepth, DegenerateLandmarks, EyesBehindCamera):
                # trial step left the feasible region; treat as a loss increase
                new_loss = np.inf
                new_gphi, new_gt = g_phi, g_t
            if new_loss <= loss:
                rotation, translation = rot_new, t_new
                loss, g_phi, g_t = new_loss, new_gphi, new_gt
                if first_try:
                    # step was comfortable; let it grow so shallow directions
                    # (t_z along the reparam manifold) keep moving
                    lrs[block] *= 1.3
                accepted = True
                break
            first_try = False
            lrs[block] /= 2.0
        # when the step size is exhausted the parameters simply stay put

    iterations_run = len(trace)
    focal = reparam_focal(ctx, float(translation[2]))
    camera = CameraParams(rotation=rotation, translation=translation, focal=focal,
                          principal_point=pp, resolution=init.resolution)
    return FitResult(camera=camera, loss_trace=np.array(trace),
                     iterations_run=iterations_run, converged=converged,
                     tz_trace=np.array(tz_trace), focal_trace=np.array(f_trace))
