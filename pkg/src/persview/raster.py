"""Software rasterizer: z-buffered triangle rendering with perspective-correct
texture resampling, grazing-face culling, and z-buffer vertex visibility.

Fill convention: pixel centers at (i + 0.5, j + 0.5), top-left rule, so
adjacent triangles never double-cover a pixel. The winner at a pixel is the
covering face with minimal perspective-correct depth; ties go to the lower
face index, which makes the output independent of processing order. The
rasterizer may therefore run over horizontal tile bands in parallel
(PERSVIEW_THREADS) and stays bit-identical to a single-band run.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .camera import EPS_Z, CameraParams, project_points
from .errors import EmptyMesh, ValidationError
from .mesh import RangeGridMesh

# Relative z tolerance for visibility classification; absolute epsilons break
# across scene scales.
EPS_VIS = 1e-3

# Face-chunk budget for the vectorized candidate-pixel pass.
_CHUNK_CELLS = 4_000_000


@dataclass
class RenderOutput:
    """Result of rasterizing a mesh under a camera."""

    color: np.ndarray     # (H, W, 3) in [0, 1]; zero where uncovered
    zbuffer: np.ndarray   # (H, W) camera-space depth, +inf where empty
    face_id: np.ndarray   # (H, W) winning face index into mesh.faces, -1 if none
    coverage: np.ndarray  # (H, W) bool

    @property
    def width(self) -> int:
        return self.color.shape[1]

    @property
    def height(self) -> int:
        return self.color.shape[0]


def bilinear_sample(image: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sample image at continuous pixel coordinates (centers at +0.5) with
    bilinear filtering and clamp-to-edge for out-of-frame coordinates."""
    h, w = image.shape[:2]
    fx = np.asarray(x, dtype=float) - 0.5
    fy = np.asarray(y, dtype=float) - 0.5
    x0 = np.floor(fx).astype(int)
    y0 = np.floor(fy).astype(int)
    tx = fx - x0
    ty = fy - y0
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    if image.ndim == 3:
        tx = tx[..., None]
        ty = ty[..., None]
    return ((1 - tx) * (1 - ty) * image[y0c, x0c]
            + tx * (1 - ty) * image[y0c, x1c]
            + (1 - tx) * ty * image[y1c, x0c]
            + tx * ty * image[y1c, x1c])


def cull_grazing_faces(mesh: RangeGridMesh, novel_cam: CameraParams,
                       threshold_deg: float = 80.0) -> RangeGridMesh:
    """Flag faces whose normal is nearly orthogonal to the viewing direction.

    The angle is measured between the face normal and the camera's optical
    axis (sign-free, so winding does not matter); a face is culled iff the
    angle strictly exceeds threshold_deg. Degenerate faces count as 90 deg.
    """
    v = mesh.vertices
    f = mesh.faces
    if len(f) == 0:
        return replace(mesh, face_culled=np.zeros(0, dtype=bool))
    n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    norms = np.linalg.norm(n, axis=1)
    axis = novel_cam.view_axis()
    cosang = np.zeros(len(f))
    ok = norms > 0
    cosang[ok] = np.abs(n[ok] @ axis) / norms[ok]
    angle = np.degrees(np.arccos(np.clip(cosang, 0.0, 1.0)))
    # tiny slack keeps an exactly-at-threshold face on the "kept" side
    culled = angle > threshold_deg + 1e-9
    return replace(mesh, face_culled=culled)


def _prepare_faces(mesh: RangeGridMesh, novel_cam: CameraParams):
    """Project vertices, drop unusable faces, and orient screen triangles
    positively. Returns per-face screen coords, depths, texcoords, and the
    original face ids used for deterministic tie-breaking."""
    keep = ~mesh.face_culled
    faces = mesh.faces[keep]
    face_ids = np.flatnonzero(keep)
    if len(faces) == 0:
        raise EmptyMesh("all faces culled")

    pix, z, ok = project_points(mesh.vertices, novel_cam)
    usable = ok[faces].all(axis=1)
    faces = faces[usable]
    face_ids = face_ids[usable]
    if len(faces) == 0:
        raise EmptyMesh("no face has all vertices in front of the camera")

    p = pix[faces]                      # (F, 3, 2)
    fz = z[faces]                       # (F, 3)
    uv = mesh.texcoords[faces]          # (F, 3, 2)

    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    area2 = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    flip = area2 < 0
    p[flip] = p[flip][:, [0, 2, 1]]
    fz[flip] = fz[flip][:, [0, 2, 1]]
    uv[flip] = uv[flip][:, [0, 2, 1]]
    area2 = np.abs(area2)
    nz = area2 > 0
    return p[nz], fz[nz], uv[nz], area2[nz], face_ids[nz]


def _edge_accepts_zero(p: np.ndarray) -> np.ndarray:
    """Top-left rule per edge of positively wound triangles: a pixel center
    exactly on edge k (from vertex k to k+1) is inside iff that edge is a top
    edge (horizontal, pointing +x) or a left edge (pointing +y, y down)."""
    nxt = np.roll(np.arange(3), -1)
    dx = p[:, nxt, 0] - p[:, :, 0]
    dy = p[:, nxt, 1] - p[:, :, 1]
    return ((dy == 0) & (dx > 0)) | (dy > 0)


def _gather_candidates(p, fz, uv, area2, face_ids, y_lo, y_hi, width):
    """Collect (pixel, depth, face, u, v) rows for every pixel center covered
    by some face within scanline band [y_lo, y_hi)."""
    xmin = p[:, :, 0].min(axis=1)
    xmax = p[:, :, 0].max(axis=1)
    ymin = p[:, :, 1].min(axis=1)
    ymax = p[:, :, 1].max(axis=1)

    ix0 = np.maximum(np.ceil(xmin - 0.5).astype(int), 0)
    ix1 = np.minimum(np.floor(xmax - 0.5).astype(int), width - 1)
    iy0 = np.maximum(np.ceil(ymin - 0.5).astype(int), y_lo)
    iy1 = np.minimum(np.floor(ymax - 0.5).astype(int), y_hi - 1)

    nx = ix1 - ix0 + 1
    ny = iy1 - iy0 + 1
    alive = (nx > 0) & (ny > 0)
    if not alive.any():
        return [np.empty(0, dtype=t) for t in (np.int64, float, np.int64, float, float)]

    order = np.argsort((nx * ny)[alive], kind="stable")
    idx_alive = np.flatnonzero(alive)[order]
    accept_zero = _edge_accepts_zero(p)

    out_pix, out_depth, out_face, out_u, out_v = [], [], [], [], []
    pos = 0
    while pos < len(idx_alive):
        # grow the chunk until the candidate-cell budget is hit; faces are
        # sorted by bbox area, so the last face bounds the grid size
        end = pos + 1
        while end < len(idx_alive):
            cells = nx[idx_alive[end]] * ny[idx_alive[end]]
            if cells * (end + 1 - pos) > _CHUNK_CELLS:
                break
            end += 1
        sel = idx_alive[pos:end]
        pos = end

        bw = int(nx[sel].max())
        bh = int(ny[sel].max())
        gx = np.arange(bw)
        gy = np.arange(bh)
        ix = ix0[sel, None, None] + gx[None, None, :]
        iy = iy0[sel, None, None] + gy[None, :, None]
        in_bbox = (ix <= ix1[sel, None, None]) & (iy <= iy1[sel, None, None])
        px = ix + 0.5
        py = iy + 0.5

        ps = p[sel]
        inside = in_bbox
        ew = np.empty((len(sel), bh, bw, 3))
        for k in range(3):
            kn = (k + 1) % 3
            ax = ps[:, k, 0][:, None, None]
            ay = ps[:, k, 1][:, None, None]
            dx = ps[:, kn, 0][:, None, None] - ax
            dy = ps[:, kn, 1][:, None, None] - ay
            e = dx * (py - ay) - dy * (px - ax)
            acc = accept_zero[sel, k][:, None, None]
            inside = inside & ((e > 0) | ((e == 0) & acc))
            # edge k (v_k -> v_{k+1}) is opposite vertex k+2
            ew[:, :, :, (k + 2) % 3] = e

        if not inside.any():
            continue
        f_i, r_i, c_i = np.nonzero(inside)
        lam = ew[f_i, r_i, c_i] / area2[sel][f_i, None]
        zs = fz[sel][f_i]
        inv_z = (lam / zs).sum(axis=1)
        depth = 1.0 / inv_z
        uvs = uv[sel][f_i]
        u = (lam * uvs[:, :, 0] / zs).sum(axis=1) * depth
        v = (lam * uvs[:, :, 1] / zs).sum(axis=1) * depth

        out_pix.append(iy[f_i, r_i, 0] * width + ix[f_i, 0, c_i])
        out_depth.append(depth)
        out_face.append(face_ids[sel][f_i])
        out_u.append(u)
        out_v.append(v)

    if not out_pix:
        return [np.empty(0, dtype=t) for t in (np.int64, float, np.int64, float, float)]
    return [np.concatenate(a) for a in (out_pix, out_depth, out_face, out_u, out_v)]


def _resolve_band(prep, y_lo, y_hi, width, source_image, color, zbuf, face_id, coverage):
    p, fz, uv, area2, face_ids = prep
    pixidx, depth, face, u, v = _gather_candidates(p, fz, uv, area2, face_ids, y_lo, y_hi, width)
    if len(pixidx) == 0:
        return
    order = np.lexsort((face, depth, pixidx))
    pixidx, depth, face, u, v = (a[order] for a in (pixidx, depth, face, u, v))
    first = np.ones(len(pixidx), dtype=bool)
    first[1:] = pixidx[1:] != pixidx[:-1]
    pixidx, depth, face, u, v = (a[first] for a in (pixidx, depth, face, u, v))

    ys, xs = np.divmod(pixidx, width)
    sh, sw = source_image.shape[:2]
    color[ys, xs] = bilinear_sample(source_image, u * sw, v * sh)
    zbuf[ys, xs] = depth
    face_id[ys, xs] = face
    coverage[ys, xs] = True


def rasterize(mesh: RangeGridMesh, source_image: np.ndarray,
              novel_cam: CameraParams, threads: int | None = None) -> RenderOutput:
    """Render the mesh under novel_cam, resampling color from source_image at
    the mesh texture coordinates.

    Per pixel the non-culled triangle with minimal perspective-correct depth
    wins; its texcoords are interpolated 1/z-weighted and sampled bilinearly.
    threads > 1 splits the image into horizontal bands (same output bytes).
    """
    if mesh.texcoords is None:
        raise ValidationError("mesh texcoords not set; call compute_texcoords first")
    source_image = np.asarray(source_image, dtype=float)
    if source_image.ndim == 2:
        source_image = source_image[:, :, None].repeat(3, axis=2)

    width, height = novel_cam.resolution
    prep = _prepare_faces(mesh, novel_cam)

    color = np.zeros((height, width, 3))
    zbuf = np.full((height, width), np.inf)
    face_id = np.full((height, width), -1, dtype=int)
    coverage = np.zeros((height, width), dtype=bool)

    if threads is None:
        threads = int(os.environ.get("PERSVIEW_THREADS", "1"))
    threads = max(1, min(threads, height))

    if threads == 1:
        _resolve_band(prep, 0, height, width, source_image, color, zbuf, face_id, coverage)
    else:
        bounds = np.linspace(0, height, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = [
                pool.submit(_resolve_band, prep, int(bounds[i]), int(bounds[i + 1]),
                            width, source_image, color, zbuf, face_id, coverage)
                for i in range(threads)
                if bounds[i] < bounds[i + 1]
            ]
            for f in futs:
                f.result()

    return RenderOutput(color=color, zbuffer=zbuf, face_id=face_id, coverage=coverage)


def vertex_visibility(mesh: RangeGridMesh, render: RenderOutput,
                      novel_cam: CameraParams) -> RangeGridMesh:
    """Classify each vertex against the z-buffer.

    A vertex is visible iff it projects in-frame and its camera-space depth
    does not exceed the depth of its pixel's winning face by more than a
    relative tolerance. The winner's depth is evaluated at the vertex's exact
    projected position (plane extension of the winning triangle), not at the
    pixel center: a vertex covered by one of its own faces then compares
    against exactly its own depth, so visibility does not pick up half-pixel
    slope noise on steep geometry. Uncovered pixels leave the vertex visible.
    """
    pix, z, ok = project_points(mesh.vertices, novel_cam)
    w, h = novel_cam.resolution
    inframe = ok & (pix[:, 0] >= 0) & (pix[:, 0] < w) & (pix[:, 1] >= 0) & (pix[:, 1] < h)
    visible = np.zeros(mesh.num_vertices, dtype=bool)
    idx = np.flatnonzero(inframe)
    if len(idx) == 0:
        return replace(mesh, vertex_visible=visible)
    ix = np.floor(pix[idx, 0]).astype(int)
    iy = np.floor(pix[idx, 1]).astype(int)
    zref = render.zbuffer[iy, ix].copy()

    fid = render.face_id[iy, ix]
    cov = fid >= 0
    if cov.any():
        f = mesh.faces[fid[cov]]
        p0, p1, p2 = pix[f[:, 0]], pix[f[:, 1]], pix[f[:, 2]]
        z012 = np.column_stack([z[f[:, 0]], z[f[:, 1]], z[f[:, 2]]])
        pv = pix[idx[cov]]

        def cross2(a, b):
            return a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]

        den = cross2(p1 - p0, p2 - p0)
        good = np.abs(den) > 1e-14
        den_safe = np.where(good, den, 1.0)
        l1 = cross2(pv - p0, p2 - p0) / den_safe
        l2 = cross2(p1 - p0, pv - p0) / den_safe
        lam = np.column_stack([1.0 - l1 - l2, l1, l2])
        with np.errstate(divide="ignore", invalid="ignore"):
            interp = 1.0 / (lam / z012).sum(axis=1)
        good &= np.isfinite(interp) & (interp > 0)
        zcov = zref[cov]
        zcov[good] = interp[good]
        zref[cov] = zcov

    zv = z[idx]
    visible[idx] = zv <= zref + EPS_VIS * zv
    return replace(mesh, vertex_visible=visible)
