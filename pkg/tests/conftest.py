import pathlib
import sys

import numpy as np
import pytest

sys.path.insert(0, str(pathlib.Path(__file__).parent))

from persview.fixtures import make_fixture


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    """One set of generated scenes shared by the whole run."""
    root = tmp_path_factory.mktemp("scenes")
    out = {}
    for kind in ("plane", "ridge", "sphere-cap"):
        out[kind] = make_fixture(kind, 64, root / kind.replace("-", "_"))
    return out


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
