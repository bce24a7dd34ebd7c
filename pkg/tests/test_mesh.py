import numpy as np
import pytest

from persview.camera import CameraParams
from persview.errors import BadKernel, DegenerateDepth
from persview.mesh import DepthMap, compute_texcoords, depth_to_range_grid, smooth_depth_bilateral

from oracles import bilateral_direct, project_pinhole


def grid_cam(n, f=None):
    return CameraParams(np.eye(3), [0.0, 0.0, 1.0], float(f or n),
                        [n / 2.0, n / 2.0], (n, n))


class TestBilateral:
    def test_constant_map_unchanged(self):
        d = DepthMap.from_values(np.full((9, 9), 3.7))
        out = smooth_depth_bilateral(d)
        np.testing.assert_allclose(out.values, 3.7, atol=1e-12)

    def test_kernel_one_is_identity(self, rng):
        d = DepthMap.from_values(rng.uniform(0.5, 2.0, size=(7, 11)))
        out = smooth_depth_bilateral(d, kernel=1)
        np.testing.assert_array_equal(out.values, d.values)

    def test_step_edge_matches_direct_summation(self):
        vals = np.full((5, 5), 1.0)
        vals[:, 3:] = 2.0
        d = DepthMap.from_values(vals)
        out = smooth_depth_bilateral(d, kernel=5, sigma_color=0.1, sigma_space=1.0)
        want = bilateral_direct(vals, d.valid, 5, 0.1, 1.0)
        np.testing.assert_allclose(out.values, want, atol=1e-12)

    def test_holes_get_zero_weight(self, rng):
        vals = rng.uniform(1.0, 2.0, size=(8, 8))
        vals[3, 3] = -1.0
        vals[5, 1] = np.nan
        d = DepthMap.from_values(vals)
        out = smooth_depth_bilateral(d, kernel=3)
        want = bilateral_direct(vals, d.valid, 3, 0.1, 1.0)
        np.testing.assert_allclose(out.values[d.valid], want[d.valid], atol=1e-12)
        np.testing.assert_array_equal(out.valid, d.valid)

    def test_stays_within_local_range(self, rng):
        vals = rng.uniform(0.5, 3.0, size=(12, 12))
        d = DepthMap.from_values(vals)
        out = smooth_depth_bilateral(d, kernel=5)
        h, w = vals.shape
        for r in range(h):
            for c in range(w):
                win = vals[max(0, r - 2):r + 3, max(0, c - 2):c + 3]
                assert win.min() - 1e-12 <= out.values[r, c] <= win.max() + 1e-12

    def test_even_kernel_rejected(self):
        d = DepthMap.from_values(np.ones((4, 4)))
        with pytest.raises(BadKernel):
            smooth_depth_bilateral(d, kernel=4)
        with pytest.raises(BadKernel):
            smooth_depth_bilateral(d, kernel=-3)


class TestRangeGrid:
    def test_minimal_2x2(self):
        d = DepthMap.from_values(np.full((2, 2), 1.0))
        mesh = depth_to_range_grid(d, grid_cam(2))
        assert mesh.num_vertices == 4
        assert mesh.num_faces == 2

    def test_center_hole_kills_all_blocks(self):
        vals = np.full((3, 3), 1.0)
        vals[1, 1] = -1.0
        with pytest.raises(DegenerateDepth):
            depth_to_range_grid(DepthMap.from_values(vals), grid_cam(3))
        # the enumeration behind it: 8 valid pixels, every 2x2 block touches the hole
        valid = DepthMap.from_values(vals).valid
        assert valid.sum() == 8
        blocks = [(r, c) for r in range(2) for c in range(2)
                  if valid[r:r + 2, c:c + 2].all()]
        assert blocks == []

    def test_fronto_parallel_plane_is_coplanar(self):
        d = DepthMap.from_values(np.full((6, 6), 1.5))
        mesh = depth_to_range_grid(d, grid_cam(6))
        z = mesh.vertices[:, 2]
        assert z.max() - z.min() < 1e-6

    def test_holes_never_reach_faces(self, rng):
        vals = rng.uniform(0.8, 1.6, size=(10, 10))
        holes = rng.uniform(size=(10, 10)) < 0.25
        vals[holes] = np.nan
        d = DepthMap.from_values(vals)
        try:
            mesh = depth_to_range_grid(d, grid_cam(10))
        except DegenerateDepth:
            return
        used = mesh.grid_index[mesh.faces.ravel()]
        assert d.valid[used[:, 0], used[:, 1]].all()

    def test_face_count_matches_block_enumeration(self, rng):
        vals = rng.uniform(0.5, 2.0, size=(9, 9))
        vals[rng.uniform(size=(9, 9)) < 0.2] = -1.0
        d = DepthMap.from_values(vals)
        blocks = sum(d.valid[r:r + 2, c:c + 2].all()
                     for r in range(8) for c in range(8))
        if blocks == 0:
            with pytest.raises(DegenerateDepth):
                depth_to_range_grid(d, grid_cam(9))
            return
        mesh = depth_to_range_grid(d, grid_cam(9))
        assert mesh.num_faces == 2 * blocks


class TestTexcoords:
    def test_same_camera_roundtrip(self, rng):
        vals = rng.uniform(0.8, 1.4, size=(8, 8))
        cam = grid_cam(8)
        mesh = depth_to_range_grid(DepthMap.from_values(vals), cam)
        mesh = compute_texcoords(mesh, cam)
        own_pix = (mesh.grid_index[:, ::-1] + 0.5) / 8.0  # (col,row)+0.5 over res
        assert np.abs(mesh.texcoords - own_pix).max() < 1e-4 / 8.0

    def test_matches_projection_oracle(self, rng):
        vals = rng.uniform(0.5, 2.5, size=(7, 7))
        cam = grid_cam(7)
        other = CameraParams(np.eye(3), [0.1, -0.05, 1.2], 9.0, [3.0, 4.0], (7, 7))
        mesh = depth_to_range_grid(DepthMap.from_values(vals), cam)
        mesh = compute_texcoords(mesh, other)
        pix, _ = project_pinhole(mesh.vertices, other)
        np.testing.assert_allclose(mesh.texcoords, pix / 7.0, atol=1e-12)

    def test_vertex_behind_camera_flagged_and_faces_dropped(self):
        vals = np.full((3, 3), 1.0)
        cam = grid_cam(3)
        mesh = depth_to_range_grid(DepthMap.from_values(vals), cam)
        # a camera so far forward that part of the plane sits behind it
        forward = CameraParams(np.eye(3), [0.0, 0.0, 1e-9], 3.0, [1.5, 1.5], (3, 3))
        mesh.vertices = mesh.vertices - np.array([0.0, 0.0, 0.5]) * (
            mesh.grid_index[:, 1] >= 1)[:, None] * 4.0
        out = compute_texcoords(mesh, forward)
        behind = mesh.vertices[:, 2] + 1e-9 <= 1e-6
        assert (~out.vertex_visible[behind]).all()
        assert not any(behind[f].any() for f in out.faces)
