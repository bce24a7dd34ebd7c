"""The HTTP render service, exercised in-process.

A session is one uploaded bundle with its camera-independent stages cached;
renders are pure functions of the query string, so a UI can scrub sliders
and trust that equal queries give byte-identical frames. The same flow works
against a real server started with `persview serve`.
"""

import pathlib
import tempfile

from fastapi.testclient import TestClient

from persview.fixtures import make_fixture
from persview.service import create_app

client = TestClient(create_app())

with tempfile.TemporaryDirectory() as tmp:
    bundle_dir = pathlib.Path(tmp) / "bundle"
    make_fixture("sphere-cap", 96, bundle_dir)

    files = [("files", (p.name, p.read_bytes())) for p in sorted(bundle_dir.iterdir())]
    r = client.post("/sessions", files=files)
    session = r.json()["id"]
    print(f"POST /sessions -> {r.status_code}, id {session}")

    meta = client.get(f"/sessions/{session}/meta").json()
    print(f"meta: resolution {meta['resolution']}, modes {meta['modes']}")

    for query in ({"mode": "warped"},
                  {"yaw": "5", "mode": "warped"},
                  {"yaw": "5", "mode": "blended"},
                  {"yaw": "5", "tz": "half", "mode": "blended"},
                  {"yaw": "12", "mode": "visibility"}):
        r = client.get(f"/sessions/{session}/render", params=query)
        print(f"GET /render {str(query):52s} -> {r.status_code}, "
              f"{len(r.content):6d} bytes, visible {r.headers['X-Visible-Fraction']}, "
              f"{r.headers['X-Render-Millis']} ms")

    twice = [client.get(f"/sessions/{session}/render", params={"yaw": "5"}).content
             for _ in range(2)]
    print(f"determinism: identical queries give identical bytes: {twice[0] == twice[1]}")

    r = client.get(f"/sessions/{session}/render", params={"yaw": "95"})
    print(f"out-of-range yaw -> {r.status_code} {r.json()['error']['code']}")
