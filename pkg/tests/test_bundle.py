import json

import numpy as np
import pytest

from persview.bundle import load_bundle, save_bundle, save_outputs
from persview.errors import (
    CorruptMember,
    DimensionMismatch,
    IoFailure,
    MissingGenerated,
    MissingManifest,
)
from persview.fileio import read_pfm, read_png, write_pfm
from persview.fixtures import make_fixture
from persview.pipeline import PipelineConfig, run_correct


@pytest.fixture()
def bundle_dir(tmp_path):
    make_fixture("sphere-cap", 32, tmp_path / "b")
    return tmp_path / "b"


class TestLoad:
    def test_complete_fixture_roundtrip(self, bundle_dir):
        b = load_bundle(bundle_dir)
        assert b.matte is not None
        assert b.generated_image is not None
        assert b.landmarks is not None
        assert b.reparam is not None
        assert b.source_image.shape == (32, 32, 3)
        assert b.original_camera.resolution == (32, 32)

    def test_save_load_preserves_floats_exactly(self, bundle_dir, tmp_path):
        b = load_bundle(bundle_dir)
        save_bundle(tmp_path / "copy", b)
        again = load_bundle(tmp_path / "copy")
        np.testing.assert_array_equal(again.depth.values[again.depth.valid],
                                      b.depth.values[b.depth.valid])
        np.testing.assert_array_equal(again.depth.valid, b.depth.valid)
        np.testing.assert_array_equal(again.original_camera.rotation,
                                      b.original_camera.rotation)
        np.testing.assert_array_equal(again.landmarks.points, b.landmarks.points)
        assert again.reparam == b.reparam
        # images quantized to 8 bits
        assert np.abs(again.source_image - b.source_image).max() <= 1.0 / 255

    def test_missing_generated_is_absent_not_defaulted(self, bundle_dir):
        manifest = json.loads((bundle_dir / "manifest.json").read_text())
        del manifest["generated"]
        (bundle_dir / "manifest.json").write_text(json.dumps(manifest))
        b = load_bundle(bundle_dir)
        assert b.generated_image is None
        with pytest.raises(MissingGenerated):
            run_correct(b, PipelineConfig(), blend=True)

    def test_no_manifest(self, tmp_path):
        with pytest.raises(MissingManifest):
            load_bundle(tmp_path)


class TestBrokenCorpus:
    def test_wrong_size_depth(self, bundle_dir):
        write_pfm(bundle_dir / "depth.pfm", np.full((16, 16), 1.0))
        with pytest.raises(DimensionMismatch) as ei:
            load_bundle(bundle_dir)
        assert ei.value.member == "depth"

    def test_truncated_depth(self, bundle_dir):
        raw = (bundle_dir / "depth.pfm").read_bytes()
        (bundle_dir / "depth.pfm").write_bytes(raw[:len(raw) // 2])
        with pytest.raises(CorruptMember) as ei:
            load_bundle(bundle_dir)
        assert ei.value.member == "depth"

    def test_non_orthonormal_rotation(self, bundle_dir):
        cam = json.loads((bundle_dir / "camera.json").read_text())
        cam["rotation"][0][1] = 0.01
        (bundle_dir / "camera.json").write_text(json.dumps(cam))
        with pytest.raises(CorruptMember) as ei:
            load_bundle(bundle_dir)
        assert ei.value.member == "camera"

    def test_477_landmarks(self, bundle_dir):
        lm = json.loads((bundle_dir / "landmarks.json").read_text())
        lm["points"] = lm["points"][:477]
        (bundle_dir / "landmarks.json").write_text(json.dumps(lm))
        with pytest.raises(CorruptMember) as ei:
            load_bundle(bundle_dir)
        assert ei.value.member == "landmarks"

    def test_camera_resolution_mismatch(self, bundle_dir):
        cam = json.loads((bundle_dir / "camera.json").read_text())
        cam["resolution"] = [64, 64]
        (bundle_dir / "camera.json").write_text(json.dumps(cam))
        with pytest.raises(DimensionMismatch) as ei:
            load_bundle(bundle_dir)
        assert ei.value.member == "camera"

    def test_unreadable_png(self, bundle_dir):
        (bundle_dir / "source.png").write_bytes(b"not a png")
        with pytest.raises(CorruptMember) as ei:
            load_bundle(bundle_dir)
        assert ei.value.member == "source"

    def test_bad_manifest_version(self, bundle_dir):
        manifest = json.loads((bundle_dir / "manifest.json").read_text())
        manifest["version"] = 99
        (bundle_dir / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(CorruptMember) as ei:
            load_bundle(bundle_dir)
        assert ei.value.member == "manifest"


class TestSaveOutputs:
    def test_zbuffer_pfm_bit_exact(self, bundle_dir, tmp_path):
        b = load_bundle(bundle_dir)
        res = run_correct(b, PipelineConfig(yaw=4.0))
        out = tmp_path / "out"
        save_outputs(out, res.render, res.blended, res.mask)
        zb = read_pfm(out / "zbuffer.pfm")
        want = res.render.zbuffer.astype(np.float32).astype(float)
        want[~np.isfinite(want)] = -1.0
        np.testing.assert_array_equal(zb, want)

    def test_png_quantization_bound(self, bundle_dir, tmp_path):
        b = load_bundle(bundle_dir)
        res = run_correct(b, PipelineConfig(yaw=4.0))
        out = tmp_path / "out"
        save_outputs(out, res.render, res.blended, res.mask)
        again = read_png(out / "blended.png")
        assert np.abs(again - res.blended).max() <= 1.0 / 255
        mask_again = read_png(out / "mask.png")
        assert np.abs(mask_again - res.mask).max() <= 1.0 / 255

    def test_unwritable_target(self, bundle_dir, tmp_path):
        b = load_bundle(bundle_dir)
        res = run_correct(b, PipelineConfig())
        blocker = tmp_path / "blocker"
        blocker.write_text("file, not a directory")
        with pytest.raises(IoFailure):
            save_outputs(blocker / "sub", res.render, res.blended, res.mask)
