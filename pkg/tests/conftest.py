import os

import pytest

FIXTURE_DIR = os.path.abspath(
    os.path.join(os.path.dirname(__file__), os.pardir, "fixtures", "toy")
)


@pytest.fixture(scope="session")
def toy_paths():
    paths = {
        "captions": os.path.join(FIXTURE_DIR, "captions.jsonl"),
        "embeddings": os.path.join(FIXTURE_DIR, "embeddings.txt"),
        "features": os.path.join(FIXTURE_DIR, "features.txt"),
        "config": os.path.join(FIXTURE_DIR, "config.json"),
    }
    for path in paths.values():
        assert os.path.exists(path), f"missing bundled fixture file {path}"
    return paths
