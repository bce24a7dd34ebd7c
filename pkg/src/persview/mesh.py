"""Depth maps and the range-grid mesh built from them.

A depth map's valid pixels become mesh vertices by back-projection through
the source camera; 2x2 blocks of valid pixels become two triangles split
along the top-left/bottom-right diagonal. Blocks touching an invalid pixel
produce no faces, so masked-out regions stay holes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .camera import CameraParams, backproject, project_points
from .errors import BadKernel, DegenerateDepth, DimensionMismatch, ValidationError


@dataclass
class DepthMap:
    """Per-pixel metric depth with a validity mask.

    values is (height, width) row-major; valid pixels must be finite and > 0.
    """

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.ndim != 2:
            raise ValidationError("depth values must be a 2D array")
        if self.valid.shape != self.values.shape:
            raise DimensionMismatch("depth", "valid mask shape differs from values")
        bad = self.valid & ~(np.isfinite(self.values) & (self.values > 0))
        if bad.any():
            raise ValidationError("valid depth pixels must be finite and > 0")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_values(cls, values: np.ndarray) -> "DepthMap":
        """Build a map treating non-finite or <= 0 entries as invalid."""
        values = np.asarray(values, dtype=float)
        valid = np.isfinite(values) & (values > 0)
        return cls(values=values, valid=valid)


@dataclass
class RangeGridMesh:
    """Grid-connected mesh over the valid pixels of a depth map."""

    vertices: np.ndarray              # (V, 3) world coordinates
    grid_index: np.ndarray            # (V, 2) source (row, col) per vertex
    faces: np.ndarray                 # (F, 3) vertex index triples
    texcoords: Optional[np.ndarray] = None  # (V, 2) in [0,1]^2, None until computed
    vertex_visible: np.ndarray = field(default=None)  # (V,) bool
    face_culled: np.ndarray = field(default=None)     # (F,) bool

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.grid_index = np.asarray(self.grid_index, dtype=int)
        self.faces = np.asarray(self.faces, dtype=int).reshape(-1, 3)
        if self.vertex_visible is None:
            self.vertex_visible = np.ones(len(self.vertices), dtype=bool)
        if self.face_culled is None:
            self.face_culled = np.zeros(len(self.faces), dtype=bool)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def save_obj(self, path):
        """Debug export: positions + uv as ASCII OBJ."""
        with open(path, "w") as fh:
            for v in self.vertices:
                fh.write(f"v {v[0]} {v[1]} {v[2]}\n")
            if self.texcoords is not None:
                for t in self.texcoords:
                    fh.write(f"vt {t[0]} {t[1]}\n")
            for f in self.faces:
                a, b, c = f + 1
                if self.texcoords is not None:
                    fh.write(f"f {a}/{a} {b}/{b} {c}/{c}\n")
                else:
                    fh.write(f"f {a} {b} {c}\n")


def smooth_depth_bilateral(d: DepthMap, kernel: int = 5, sigma_color: float = 0.1,
                           sigma_space: float = 1.0) -> DepthMap:
    """Bilateral smoothing of the depth values.

    The range term operates on depth normalized by the median valid depth, so
    sigma_color is scale-free. Invalid neighbors get zero weight; each output
    value is a convex combination of valid values inside the window, and the
    validity mask is passed through unchanged.
    """
    if kernel < 1 or kernel % 2 == 0:
        raise BadKernel(f"kernel must be odd and >= 1, got {kernel}")
    if not (sigma_color > 0 and sigma_space > 0):
        raise BadKernel("sigmas must be positive")
    if not d.valid.any():
        return DepthMap(values=d.values.copy(), valid=d.valid.copy())

    half = kernel // 2
    med = np.median(d.values[d.valid])
    # invalid entries may be NaN; zero them so 0-weight neighbors cannot
    # poison the accumulators
    safe = np.where(d.valid, d.values, 0.0)
    norm = safe / med

    h, w = d.values.shape
    pad_vals = np.zeros((h + 2 * half, w + 2 * half))
    pad_norm = np.zeros_like(pad_vals)
    pad_valid = np.zeros_like(pad_vals, dtype=bool)
    pad_vals[half:half + h, half:half + w] = safe
    pad_norm[half:half + h, half:half + w] = norm
    pad_valid[half:half + h, half:half + w] = d.valid

    acc = np.zeros((h, w))
    wsum = np.zeros((h, w))
    for dy in range(-half, half + 1):
        for dx in range(-half, half + 1):
            vals = pad_vals[half + dy:half + dy + h, half + dx:half + dx + w]
            nrm = pad_norm[half + dy:half + dy + h, half + dx:half + dx + w]
            ok = pad_valid[half + dy:half + dy + h, half + dx:half + dx + w]
            ws = np.exp(-(dx * dx + dy * dy) / (2.0 * sigma_space ** 2))
            wc = np.exp(-((nrm - norm) ** 2) / (2.0 * sigma_color ** 2))
            weight = np.where(ok, ws * wc, 0.0)
            acc += weight * vals
            wsum += weight
    out = d.values.copy()
    out[d.valid] = acc[d.valid] / wsum[d.valid]
    return DepthMap(values=out, valid=d.valid.copy())


def depth_to_range_grid(d: DepthMap, cam: CameraParams) -> RangeGridMesh:
    """Back-project valid depth pixels into a world-space grid mesh.

    One vertex per valid pixel at its pixel center; each fully valid 2x2
    block contributes two triangles split along the TL-BR diagonal.
    """
    h, w = d.values.shape
    rows, cols = np.nonzero(d.valid)
    if len(rows) == 0:
        raise DegenerateDepth("depth map has no valid pixels")

    centers = np.column_stack([cols + 0.5, rows + 0.5])
    vertices = backproject(centers, d.values[rows, cols], cam)
    grid_index = np.column_stack([rows, cols])

    index_map = np.full((h, w), -1, dtype=int)
    index_map[rows, cols] = np.arange(len(rows))

    block = (d.valid[:-1, :-1] & d.valid[:-1, 1:] & d.valid[1:, :-1] & d.valid[1:, 1:])
    br_, bc_ = np.nonzero(block)
    if len(br_) == 0:
        raise DegenerateDepth("no 2x2 block of valid pixels")

    tl = index_map[br_, bc_]
    tr = index_map[br_, bc_ + 1]
    bl = index_map[br_ + 1, bc_]
    br = index_map[br_ + 1, bc_ + 1]
    # two triangles per block, interleaved in block order
    faces = np.empty((2 * len(br_), 3), dtype=int)
    faces[0::2] = np.column_stack([tl, tr, br])
    faces[1::2] = np.column_stack([tl, br, bl])
    return RangeGridMesh(vertices=vertices, grid_index=grid_index, faces=faces)


def compute_texcoords(mesh: RangeGridMesh, original_cam: CameraParams) -> RangeGridMesh:
    """Project vertices through the original camera to get texture coordinates
    normalized by resolution.

    Vertices that land behind the original camera are flagged invisible and
    every face touching them is dropped; coordinates outside [0,1]^2 are kept
    and clamped at sampling time.
    """
    pix, _, ok = project_points(mesh.vertices, original_cam)
    tex = np.zeros((mesh.num_vertices, 2))
    tex[ok] = pix[ok] / np.array(original_cam.resolution, dtype=float)
    visible = mesh.vertex_visible & ok
    face_ok = ok[mesh.faces].all(axis=1)
    return replace(
        mesh,
        texcoords=tex,
        vertex_visible=visible,
        faces=mesh.faces[face_ok],
        face_culled=mesh.face_culled[face_ok],
    )
