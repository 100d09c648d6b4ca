import numpy as np
import pytest
from PIL import Image

from convdesc import kernels


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    """Run a test once per available kernel backend."""
    previous = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)


def random_weight_layers(rng, scale=0.05):
    """Shape-valid random backbone layers as (name, weights, biases)."""
    shapes = [(64, 3, 3, 3), (64, 3, 3, 64), (128, 3, 3, 64), (128, 3, 3, 128)]
    names = ["conv1_1", "conv1_2", "conv2_1", "conv2_2"]
    layers = []
    for name, shape in zip(names, shapes):
        layers.append((name,
                       rng.normal(0.0, scale, size=shape).astype(np.float32),
                       rng.normal(0.0, scale, size=shape[0]).astype(np.float32)))
    return layers


def write_stripe_image(path, horizontal, rng, size=64, period=8):
    """A noisy stripe texture; the two orientations are the two classes."""
    axis = np.arange(size)
    wave = ((axis // period) % 2) * 200.0 + 20.0
    img = np.tile(wave[:, None] if horizontal else wave[None, :], (1, size) if horizontal else (size, 1))
    img = img + rng.normal(0.0, 8.0, size=(size, size))
    img = np.clip(img, 0, 255).astype(np.uint8)
    Image.fromarray(img, mode="L").convert("RGB").save(path)


@pytest.fixture
def stripe_dataset(tmp_path):
    """40-image two-class texture dataset (horizontal vs vertical stripes)."""
    rng = np.random.default_rng(20240813)
    root = tmp_path / "stripes"
    for cls, horizontal in (("horizontal", True), ("vertical", False)):
        directory = root / cls
        directory.mkdir(parents=True)
        for i in range(20):
            write_stripe_image(directory / f"{cls}_{i:02d}.png", horizontal, rng)
    return root
