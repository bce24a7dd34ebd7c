"""Recovering camera pose and distance from 3D face landmarks.

A known camera observes a synthetic 478-point landmark cloud; the observation
is the normalized cloud of projected keypoints. Starting from a perturbed
camera (2 degrees of rotation, +5% distance), alternating-block gradient
descent with the focal slaved to t_z recovers the truth. The loss trace
plateaus well inside the iteration budget.
"""

import numpy as np

from persview import CameraParams, FitConfig, LandmarkSet, ReparamContext, fit_camera
from persview.camera import reparam_focal, rotation_about_axis
from persview.fit import NUM_LANDMARKS, project_landmarks

rng = np.random.default_rng(9)

geometry = LandmarkSet(points=rng.normal(size=(NUM_LANDMARKS, 3))
                       * np.array([0.30, 0.35, 0.18]))
true_cam = CameraParams(rotation_about_axis([0.3, 1.0, 0.1], np.deg2rad(8.0)),
                        [0.02, -0.01, 0.95], 560.0, [256.0, 256.0], (512, 512))
ctx = ReparamContext(d0=true_cam.t_z, f0=true_cam.focal, t_z0=true_cam.t_z)
observed = project_landmarks(geometry, true_cam)

axis = rng.normal(size=3)
axis /= np.linalg.norm(axis)
t0 = true_cam.translation.copy()
t0[2] *= 1.05
init = CameraParams(rotation_about_axis(axis, np.deg2rad(2.0)) @ true_cam.rotation,
                    t0, reparam_focal(ctx, t0[2]),
                    true_cam.principal_point, true_cam.resolution)

result = fit_camera(geometry, observed, init, ctx, FitConfig())

rel = result.camera.rotation @ true_cam.rotation.T
angle = np.rad2deg(np.arccos(np.clip((np.trace(rel) - 1) / 2, -1, 1)))
print(f"iterations: {result.iterations_run}   converged: {result.converged}")
print(f"rotation error: {angle:.4f} deg (started at 2.0)")
print(f"t_z error: {abs(result.camera.t_z - true_cam.t_z) / true_cam.t_z * 100:.4f}% "
      f"(started at 5%)")
print(f"focal recovered: {result.camera.focal:.2f} (truth {true_cam.focal})")

print("\nloss trace (every 10th iteration):")
for i in range(0, result.iterations_run, 10):
    bar = "#" * max(1, int(44 + np.log10(max(result.loss_trace[i], 1e-22)) * 2))
    print(f"  iter {i:3d}  {result.loss_trace[i]:12.3e}  {bar}")
