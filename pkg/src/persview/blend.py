"""Visibility-based blend mask construction and Laplacian-pyramid compositing.

The warped render keeps a pixel only when its winning triangle is non-culled
and fully visible; everything else comes from the generated fallback image.
The binary mask is eroded (seams must land on generated content, not on
stretched warped texture) and box-blurred, then the two images are fused
with a multi-level Laplacian pyramid under the Gaussian pyramid of the mask.

All blending runs on float images in [0, 1]; 8-bit conversion happens only
at I/O boundaries.
"""

from __future__ import annotations

import numpy as np

from .errors import BadKernel, DimensionMismatch, TooSmall
from .mesh import RangeGridMesh
from .raster import RenderOutput

# 5-tap binomial kernel; entries are exact binary fractions, so constant
# images survive blurring bit-exactly.
_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def build_blend_mask(render: RenderOutput, mesh: RangeGridMesh,
                     matte: np.ndarray | None = None) -> np.ndarray:
    """Per-pixel warped-content weight: 1 where the covering face is non-culled
    and all three of its vertices are visible, else 0; multiplied by the matte
    when one is provided."""
    face_ok = np.zeros(mesh.num_faces + 1, dtype=bool)
    if mesh.num_faces:
        face_ok[:-1] = ~mesh.face_culled & mesh.vertex_visible[mesh.faces].all(axis=1)
    # face_id -1 indexes the sentinel False slot
    weights = (render.coverage & face_ok[render.face_id]).astype(float)
    if matte is not None:
        matte = np.asarray(matte, dtype=float)
        if matte.shape != weights.shape:
            raise DimensionMismatch("matte", f"matte {matte.shape} vs render {weights.shape}")
        weights = weights * matte
    return weights


def _minimum_filter(mask: np.ndarray, radius: int) -> np.ndarray:
    """Grayscale erosion with a (2r+1)^2 square element, reflect padding."""
    if radius == 0:
        return mask.copy()
    out = np.pad(mask, radius, mode="reflect")
    for axis in (0, 1):
        sl = [slice(None)] * 2
        stacked = []
        for off in range(2 * radius + 1):
            sl[axis] = slice(off, off + mask.shape[axis])
            stacked.append(out[tuple(sl)])
        out = np.min(stacked, axis=0)
    return out


def _box_blur(mask: np.ndarray, size: int) -> np.ndarray:
    """Separable box blur, reflect padding."""
    if size == 1:
        return mask.copy()
    r = size // 2
    out = mask
    for axis in (0, 1):
        pad = [(0, 0), (0, 0)]
        pad[axis] = (r, r)
        padded = np.pad(out, pad, mode="reflect")
        acc = np.zeros_like(mask, dtype=float)
        sl = [slice(None)] * 2
        for off in range(size):
            sl[axis] = slice(off, off + mask.shape[axis])
            acc += padded[tuple(sl)]
        out = acc / size
    return out


def dilate_and_blur(mask: np.ndarray, erode_px: int = 2, blur_px: int = 5) -> np.ndarray:
    """Shrink the warped region by erode_px, then box-blur with a blur_px
    kernel to produce the soft composition mask in [0, 1]."""
    if erode_px < 0:
        raise BadKernel(f"erode_px must be >= 0, got {erode_px}")
    if blur_px < 1 or blur_px % 2 == 0:
        raise BadKernel(f"blur_px must be odd and >= 1, got {blur_px}")
    mask = np.asarray(mask, dtype=float)
    out = _box_blur(_minimum_filter(mask, erode_px), blur_px)
    return np.clip(out, 0.0, 1.0)


def _conv_axis(a: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    r = len(kernel) // 2
    pad = [(0, 0)] * a.ndim
    pad[axis] = (r, r)
    padded = np.pad(a, pad, mode="reflect")
    out = np.zeros(a.shape, dtype=float)
    sl = [slice(None)] * a.ndim
    for i, k in enumerate(kernel):
        sl[axis] = slice(i, i + a.shape[axis])
        out += k * padded[tuple(sl)]
    return out


def _blur(img: np.ndarray, gain: float = 1.0) -> np.ndarray:
    k = _KERNEL * gain
    return _conv_axis(_conv_axis(img, k, 0), k, 1)


def pyr_down(img: np.ndarray) -> np.ndarray:
    """Blur then drop every other row/column."""
    return _blur(img)[::2, ::2]


def pyr_up(img: np.ndarray, target_shape: tuple[int, int]) -> np.ndarray:
    """Zero-insertion upsampling to target_shape, then blur with x2 gain per
    axis to restore DC."""
    shape = (target_shape[0], target_shape[1]) + img.shape[2:]
    out = np.zeros(shape, dtype=float)
    out[::2, ::2] = img
    return _conv_axis(_conv_axis(out, _KERNEL * 2.0, 0), _KERNEL * 2.0, 1)


def build_gaussian_pyramid(img: np.ndarray, levels: int) -> list[np.ndarray]:
    pyr = [np.asarray(img, dtype=float)]
    for _ in range(levels - 1):
        pyr.append(pyr_down(pyr[-1]))
    return pyr


def build_laplacian_pyramid(img: np.ndarray, levels: int) -> list[np.ndarray]:
    """Band-pass levels 0..levels-2 plus the residual low-pass at the end."""
    gauss = build_gaussian_pyramid(img, levels)
    pyr = [gauss[i] - pyr_up(gauss[i + 1], gauss[i].shape[:2]) for i in range(levels - 1)]
    pyr.append(gauss[-1])
    return pyr


def reconstruct_laplacian(pyr: list[np.ndarray]) -> np.ndarray:
    out = pyr[-1]
    for lvl in reversed(pyr[:-1]):
        out = lvl + pyr_up(out, lvl.shape[:2])
    return out


def laplacian_blend(warped: np.ndarray, generated: np.ndarray,
                    mask: np.ndarray, levels: int = 3) -> np.ndarray:
    """Fuse warped and generated under the mask, per pyramid level:
    L_out = L_warped * G_mask + L_generated * (1 - G_mask)."""
    warped = np.asarray(warped, dtype=float)
    generated = np.asarray(generated, dtype=float)
    mask = np.asarray(mask, dtype=float)
    if warped.shape != generated.shape:
        raise DimensionMismatch("generated", f"{generated.shape} vs {warped.shape}")
    if mask.shape != warped.shape[:2]:
        raise DimensionMismatch("mask", f"{mask.shape} vs {warped.shape[:2]}")
    if levels < 1:
        raise TooSmall("levels must be >= 1")
    h, w = warped.shape[:2]
    if min(h, w) < 2 ** levels:
        raise TooSmall(f"image {w}x{h} too small for {levels} pyramid levels")

    lap_w = build_laplacian_pyramid(warped, levels)
    lap_g = build_laplacian_pyramid(generated, levels)
    gauss_m = build_gaussian_pyramid(mask, levels)
    blended = []
    for lw, lg, m in zip(lap_w, lap_g, gauss_m):
        if lw.ndim == 3:
            m = m[:, :, None]
        blended.append(lw * m + lg * (1.0 - m))
    return np.clip(reconstruct_laplacian(blended), 0.0, 1.0)
