import numpy as np
import pytest

from faceanim.datagen import generate_dataset
from faceanim.data import load_manifest
from faceanim.sprites import RenderSpec


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Small 64px dataset shared by data/training/service unit tests."""
    out = tmp_path_factory.mktemp("tiny_ds")
    generate_dataset(6, 6, seed=11, spec=RenderSpec(resolution=64), out_dir=out)
    return out


@pytest.fixture(scope="session")
def tiny_manifest(tiny_dataset):
    return load_manifest(tiny_dataset / "manifest.json")


@pytest.fixture
def rng():
    return np.random.default_rng(0)
