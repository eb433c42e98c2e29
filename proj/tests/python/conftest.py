import os

import pytest

SMALL = {
    "grid": {"X": 20.0, "n": 256},
    "noise": {"M": 32},
    "run": {"horizon": 0.5, "ensemble_size": 4, "sample_every": 50, "seed": 7},
}


@pytest.fixture
def small():
    return {k: dict(v) for k, v in SMALL.items()}


@pytest.fixture
def cli():
    path = os.environ.get("CGLMIX_CLI")
    if not path or not os.path.exists(path):
        pytest.skip("CGLMIX_CLI does not point at the cglmix executable")
    return path
