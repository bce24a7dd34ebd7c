"""Independent brute-force reference implementations used to verify the
library. Everything here is written as plain per-element loops or closed
forms, deliberately sharing no code with the implementations under test.
"""

import numpy as np


def bilateral_direct(values, valid, kernel, sigma_color, sigma_space):
    """Direct-summation bilateral filter over the window, zero weight for
    invalid neighbors, range term on median-normalized depth."""
    h, w = values.shape
    half = kernel // 2
    med = np.median(values[valid])
    out = values.astype(float).copy()
    for r in range(h):
        for c in range(w):
            if not valid[r, c]:
                continue
            num = 0.0
            den = 0.0
            for dr in range(-half, half + 1):
                for dc in range(-half, half + 1):
                    rr, cc = r + dr, c + dc
                    if rr < 0 or rr >= h or cc < 0 or cc >= w or not valid[rr, cc]:
                        continue
                    ws = np.exp(-(dr * dr + dc * dc) / (2.0 * sigma_space ** 2))
                    dn = values[rr, cc] / med - values[r, c] / med
                    wc = np.exp(-(dn * dn) / (2.0 * sigma_color ** 2))
                    num += ws * wc * values[rr, cc]
                    den += ws * wc
            out[r, c] = num / den
    return out


def erode_then_box_blur(mask, erode_px, blur_px):
    """Reflect-padded min filter then box blur, looped per pixel."""
    h, w = mask.shape

    def ref(i, n):
        # numpy 'reflect' (edge sample not repeated), applied repeatedly
        while i < 0 or i >= n:
            if i < 0:
                i = -i
            if i >= n:
                i = 2 * (n - 1) - i
        return i

    eroded = np.empty_like(mask, dtype=float)
    r = erode_px
    for i in range(h):
        for j in range(w):
            lo = min(mask[ref(i + di, h), ref(j + dj, w)]
                     for di in range(-r, r + 1) for dj in range(-r, r + 1))
            eroded[i, j] = lo
    out = np.empty_like(eroded)
    b = blur_px // 2
    for i in range(h):
        for j in range(w):
            acc = sum(eroded[ref(i + di, h), ref(j + dj, w)]
                      for di in range(-b, b + 1) for dj in range(-b, b + 1))
            out[i, j] = acc / (blur_px * blur_px)
    return out


def blend_mask_direct(render, mesh, matte=None):
    """Recompute the blend mask per pixel from the raw flags."""
    h, w = render.coverage.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            if not render.coverage[y, x]:
                continue
            f = render.face_id[y, x]
            if f < 0 or mesh.face_culled[f]:
                continue
            a, b, c = mesh.faces[f]
            if mesh.vertex_visible[a] and mesh.vertex_visible[b] and mesh.vertex_visible[c]:
                out[y, x] = 1.0
    if matte is not None:
        out = out * matte
    return out


def project_pinhole(points, cam):
    """Plain pinhole projection, no shared code: returns pixels and depths."""
    p = points @ np.asarray(cam.rotation).T + np.asarray(cam.translation)
    z = p[:, 2]
    pix = np.stack([cam.principal_point[0] + cam.focal * p[:, 0] / z,
                    cam.principal_point[1] + cam.focal * p[:, 1] / z], axis=1)
    return pix, z


def covering_faces_min_depth(mesh, cam, px, py, eps=1e-9):
    """Minimal perspective-correct depth over every non-culled face whose
    closed triangle contains the pixel center (px, py); None if no face."""
    pix, z = project_pinhole(mesh.vertices, cam)
    best = None
    pc = np.array([px, py])
    for fi in range(mesh.num_faces):
        if mesh.face_culled[fi]:
            continue
        i, j, k = mesh.faces[fi]
        if z[i] <= 1e-6 or z[j] <= 1e-6 or z[k] <= 1e-6:
            continue
        v0, v1, v2 = pix[i], pix[j], pix[k]
        d00 = v1 - v0
        d01 = v2 - v0
        dp = pc - v0
        den = d00[0] * d01[1] - d00[1] * d01[0]
        if abs(den) < 1e-12:
            continue
        l1 = (dp[0] * d01[1] - dp[1] * d01[0]) / den
        l2 = (d00[0] * dp[1] - d00[1] * dp[0]) / den
        l0 = 1.0 - l1 - l2
        if l0 < -eps or l1 < -eps or l2 < -eps:
            continue
        depth = 1.0 / (l0 / z[i] + l1 / z[j] + l2 / z[k])
        if best is None or depth < best:
            best = depth
    return best


def zbuffer_violations(mesh, cam, render):
    """Count covered pixels whose z-buffer depth exceeds the minimal
    perspective-correct depth over all non-culled faces containing the pixel
    center (closed triangles, tiny barycentric slack). Vectorized over faces
    per pixel so 32x32 grids stay tractable."""
    pix, z = project_pinhole(mesh.vertices, cam)
    faces = mesh.faces[~mesh.face_culled]
    front = (z[faces] > 1e-6).all(axis=1)
    faces = faces[front]
    v0 = pix[faces[:, 0]]
    v1 = pix[faces[:, 1]]
    v2 = pix[faces[:, 2]]
    z3 = z[faces]
    d00 = v1 - v0
    d01 = v2 - v0
    den = d00[:, 0] * d01[:, 1] - d00[:, 1] * d01[:, 0]
    ok = np.abs(den) > 1e-12
    den_safe = np.where(ok, den, 1.0)

    bad = 0
    ys, xs = np.nonzero(render.coverage)
    for y, x in zip(ys, xs):
        dp = np.array([x + 0.5, y + 0.5]) - v0
        l1 = (dp[:, 0] * d01[:, 1] - dp[:, 1] * d01[:, 0]) / den_safe
        l2 = (d00[:, 0] * dp[:, 1] - d00[:, 1] * dp[:, 0]) / den_safe
        l0 = 1.0 - l1 - l2
        eps = 1e-9
        inside = ok & (l0 >= -eps) & (l1 >= -eps) & (l2 >= -eps)
        if not inside.any():
            bad += 1
            continue
        depth = 1.0 / (l0[inside] / z3[inside, 0] + l1[inside] / z3[inside, 1]
                       + l2[inside] / z3[inside, 2])
        if render.zbuffer[y, x] > depth.min() * (1 + 1e-9) + 1e-12:
            bad += 1
    return bad, len(ys)


def visibility_ray_test(mesh, cam):
    """O(V*F) segment-triangle occlusion test (Moller-Trumbore): a vertex is
    visible iff it projects in-frame and no non-culled face strictly blocks
    the open segment from the vertex to the camera center."""
    center = -np.asarray(cam.rotation).T @ np.asarray(cam.translation)
    pix, z = project_pinhole(mesh.vertices, cam)
    w, h = cam.resolution
    inframe = (z > 1e-6) & (pix[:, 0] >= 0) & (pix[:, 0] < w) \
        & (pix[:, 1] >= 0) & (pix[:, 1] < h)
    faces = mesh.faces[~mesh.face_culled]
    v0 = mesh.vertices[faces[:, 0]]
    e1 = mesh.vertices[faces[:, 1]] - v0
    e2 = mesh.vertices[faces[:, 2]] - v0
    out = np.zeros(mesh.num_vertices, dtype=bool)
    for i in range(mesh.num_vertices):
        if not inframe[i]:
            continue
        orig = mesh.vertices[i]
        d = center - orig
        pvec = np.cross(d[None, :], e2)
        det = (e1 * pvec).sum(axis=1)
        nz = np.abs(det) > 1e-14
        inv = np.where(nz, 1.0 / np.where(nz, det, 1.0), 0.0)
        tvec = orig - v0
        u = (tvec * pvec).sum(axis=1) * inv
        qvec = np.cross(tvec, e1)
        v = (d[None, :] * qvec).sum(axis=1) * inv
        t = (e2 * qvec).sum(axis=1) * inv
        eps = 1e-9
        hit = nz & (u >= -eps) & (v >= -eps) & (u + v <= 1 + eps) \
            & (t > 1e-6) & (t < 1 - 1e-6)
        out[i] = not hit.any()
    return out


def plane_homography(cam_a, cam_b, plane_depth):
    """Pixel map A->B for the fronto-parallel plane z_camA = plane_depth."""
    def K(c):
        return np.array([[c.focal, 0, c.principal_point[0]],
                         [0, c.focal, c.principal_point[1]],
                         [0, 0, 1.0]])
    r_rel = cam_b.rotation @ cam_a.rotation.T
    t_rel = cam_b.translation - r_rel @ cam_a.translation
    n = np.array([0.0, 0.0, 1.0])
    return K(cam_b) @ (r_rel + np.outer(t_rel, n) / plane_depth) @ np.linalg.inv(K(cam_a))


def bilinear_lookup(image, x, y):
    """Straightforward bilinear sample with clamped edges, centers at +0.5."""
    h, w = image.shape[:2]
    fx = np.asarray(x, dtype=float) - 0.5
    fy = np.asarray(y, dtype=float) - 0.5
    x0 = np.floor(fx).astype(int)
    y0 = np.floor(fy).astype(int)
    tx = fx - x0
    ty = fy - y0
    if image.ndim == 3:
        tx = tx[..., None]
        ty = ty[..., None]

    def at(yy, xx):
        return image[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]

    return ((1 - tx) * (1 - ty) * at(y0, x0) + tx * (1 - ty) * at(y0, x0 + 1)
            + (1 - tx) * ty * at(y0 + 1, x0) + tx * ty * at(y0 + 1, x0 + 1))


def ssim_windowed(x, y, size=11, sigma=1.5, k1=0.01, k2=0.03):
    """Naive per-window SSIM on single-channel images, valid positions."""
    half = size // 2
    ax = np.arange(-half, half + 1, dtype=float)
    g = np.exp(-(ax ** 2) / (2 * sigma ** 2))
    win = np.outer(g, g)
    win /= win.sum()
    c1, c2 = k1 ** 2, k2 ** 2
    h, w = x.shape
    vals = []
    for i in range(h - size + 1):
        for j in range(w - size + 1):
            px = x[i:i + size, j:j + size]
            py = y[i:i + size, j:j + size]
            mx = (win * px).sum()
            my = (win * py).sum()
            vx = (win * px * px).sum() - mx * mx
            vy = (win * py * py).sum() - my * my
            cxy = (win * px * py).sum() - mx * my
            vals.append(((2 * mx * my + c1) * (2 * cxy + c2))
                        / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return float(np.mean(vals))
