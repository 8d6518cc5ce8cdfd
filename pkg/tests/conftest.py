import numpy as np
import pytest

from mvmask.synth import SyntheticScene


@pytest.fixture(scope="session")
def scene() -> SyntheticScene:
    """One shared synthetic scene; frames are cached inside it."""
    return SyntheticScene(cameras=7, width=640, height=360, pedestrians=8, seed=3)


@pytest.fixture(scope="session")
def corpus(scene):
    """Five (image, mask) pairs at 640x360 spanning cameras and time."""
    return scene.corpus(5)


@pytest.fixture(scope="session")
def corpus_masks(corpus):
    return [mask for _, mask in corpus]


@pytest.fixture
def rgb_image():
    """Small deterministic color image, dims not multiples of the patch size."""
    rng = np.random.default_rng(1234)
    return rng.integers(0, 256, size=(46, 67, 3), dtype=np.uint8)
