import io
import json
import zipfile

import numpy as np
import pytest
from fastapi.testclient import TestClient

from persview.fileio import read_pfm, write_pfm
from persview.fixtures import make_fixture
from persview.service import create_app

MEMBERS = ("manifest.json", "source.png", "depth.pfm", "camera.json",
           "matte.png", "generated.png", "landmarks.json")


@pytest.fixture(scope="module")
def bundle_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    make_fixture("sphere-cap", 32, root / "b")
    return root / "b"


@pytest.fixture()
def client():
    return TestClient(create_app(session_cap=3))


def upload_files(bundle_dir, skip=(), corrupt=None):
    files = []
    for name in MEMBERS:
        path = bundle_dir / name
        if name in skip or not path.exists():
            continue
        data = path.read_bytes()
        if name == corrupt:
            data = data[: len(data) // 2]
        files.append(("files", (name, data)))
    return files


def make_session(client, bundle_dir, **kw):
    r = client.post("/sessions", files=upload_files(bundle_dir, **kw))
    assert r.status_code == 201, r.text
    return r.json()["id"]


class TestSessions:
    def test_upload_and_meta(self, client, bundle_dir):
        sid = make_session(client, bundle_dir)
        r = client.get(f"/sessions/{sid}/meta")
        assert r.status_code == 200
        meta = r.json()
        assert meta["resolution"] == [32, 32]
        assert set(meta["modes"]) == {"warped", "generated", "blended", "visibility"}
        assert meta["camera"]["focal"] > 0

    def test_duplicate_uploads_get_distinct_ids(self, client, bundle_dir):
        a = make_session(client, bundle_dir)
        b = make_session(client, bundle_dir)
        assert a != b

    def test_zip_upload(self, client, bundle_dir):
        buf = io.BytesIO()
        with zipfile.ZipFile(buf, "w") as zf:
            for name in MEMBERS:
                zf.write(bundle_dir / name, arcname=f"bundle/{name}")
        r = client.post("/sessions", files=[("files", ("bundle.zip", buf.getvalue()))])
        assert r.status_code == 201

    def test_corrupt_depth_names_member(self, client, bundle_dir):
        r = client.post("/sessions", files=upload_files(bundle_dir, corrupt="depth.pfm"))
        assert r.status_code == 400
        err = r.json()["error"]
        assert err["member"] == "depth"

    def test_lru_eviction(self, client, bundle_dir):
        ids = [make_session(client, bundle_dir) for _ in range(4)]  # cap is 3
        r = client.get(f"/sessions/{ids[0]}/render")
        assert r.status_code == 404
        r = client.get(f"/sessions/{ids[-1]}/render")
        assert r.status_code == 200


class TestRender:
    def test_identity_warped_matches_source(self, client, bundle_dir):
        sid = make_session(client, bundle_dir)
        r = client.get(f"/sessions/{sid}/render", params={"mode": "warped"})
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        from PIL import Image
        img = np.asarray(Image.open(io.BytesIO(r.content)).convert("RGB")) / 255.0
        src = np.asarray(Image.open(bundle_dir / "source.png").convert("RGB")) / 255.0
        covered = img.sum(axis=2) > 0
        mse = ((img[covered] - src[covered]) ** 2).mean()
        assert 10 * np.log10(1.0 / max(mse, 1e-30)) >= 40.0

    def test_identical_queries_identical_bytes(self, client, bundle_dir):
        sid = make_session(client, bundle_dir)
        q = {"yaw": "4", "pitch": "-3", "mode": "blended"}
        r1 = client.get(f"/sessions/{sid}/render", params=q)
        r2 = client.get(f"/sessions/{sid}/render", params=q)
        assert r1.status_code == 200
        assert r1.content == r2.content

    def test_headers_present(self, client, bundle_dir):
        sid = make_session(client, bundle_dir)
        r = client.get(f"/sessions/{sid}/render", params={"yaw": "5"})
        frac = float(r.headers["X-Visible-Fraction"])
        assert 0.0 <= frac <= 1.5
        assert len(r.headers["X-Visible-Fraction"].split(".")[1]) == 4
        assert int(r.headers["X-Render-Millis"]) >= 0

    def test_out_of_range_yaw_422(self, client, bundle_dir):
        sid = make_session(client, bundle_dir)
        r = client.get(f"/sessions/{sid}/render", params={"yaw": "85"})
        assert r.status_code == 200  # 85 is within [-90, 90]
        r = client.get(f"/sessions/{sid}/render", params={"yaw": "95"})
        assert r.status_code == 422
        r = client.get(f"/sessions/{sid}/render", params={"tz": "-1"})
        assert r.status_code == 422
        r = client.get(f"/sessions/{sid}/render", params={"mode": "nope"})
        assert r.status_code == 422

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/deadbeef/render").status_code == 404

    def test_tz_half_accepted(self, client, bundle_dir):
        sid = make_session(client, bundle_dir)
        r = client.get(f"/sessions/{sid}/render", params={"tz": "half"})
        assert r.status_code == 200

    def test_blended_without_generated_409(self, client, bundle_dir, tmp_path):
        stripped = tmp_path / "stripped"
        stripped.mkdir()
        for name in MEMBERS:
            if name == "generated.png":
                continue
            data = (bundle_dir / name).read_bytes()
            if name == "manifest.json":
                manifest = json.loads(data)
                del manifest["generated"]
                data = json.dumps(manifest).encode()
            (stripped / name).write_bytes(data)
        sid = make_session(client, stripped)
        for mode in ("blended", "generated"):
            r = client.get(f"/sessions/{sid}/render", params={"mode": mode})
            assert r.status_code == 409
            assert r.json()["error"]["member"] == "generated"
        r = client.get(f"/sessions/{sid}/meta")
        assert set(r.json()["modes"]) == {"warped", "visibility"}

    def test_visibility_mode_is_grayscale_mask(self, client, bundle_dir):
        sid = make_session(client, bundle_dir)
        r = client.get(f"/sessions/{sid}/render", params={"mode": "visibility"})
        assert r.status_code == 200
        from PIL import Image
        img = Image.open(io.BytesIO(r.content))
        assert img.mode == "L"
