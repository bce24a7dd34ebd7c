"""Perspective correction for close-up portraits.

A distorted selfie plus a dense depth map become a novel-view image through
depth-induced mesh warping, z-buffer visibility analysis, and Laplacian-
pyramid compositing with a generated fallback image. Camera parameters can
be recovered from 3D face landmarks with the focal length slaved to camera
distance so magnification at the eye plane stays fixed.
"""

from .camera import (
    CameraParams,
    ReparamContext,
    backproject,
    dolly_to_distance,
    halve_distance_init,
    orbit_about_pivot,
    project,
    reparam_focal,
)
from .mesh import DepthMap, RangeGridMesh, compute_texcoords, depth_to_range_grid, smooth_depth_bilateral
from .raster import RenderOutput, bilinear_sample, cull_grazing_faces, rasterize, vertex_visibility
from .blend import (
    build_blend_mask,
    build_gaussian_pyramid,
    build_laplacian_pyramid,
    dilate_and_blur,
    laplacian_blend,
    reconstruct_laplacian,
)
from .fit import (
    FitConfig,
    FitResult,
    LandmarkSet,
    combined_loss,
    fit_camera,
    landmark_loss,
    normalize_landmarks,
    project_landmarks,
)
from .metrics import MetricReport, MetricRow, aggregate_report, id_score, psnr, ssim
from .bundle import SessionBundle, load_bundle, save_bundle, save_outputs
from .pipeline import CorrectionResult, PipelineConfig, prepare_mesh, run_correct
from . import errors

__version__ = "0.1.0"
