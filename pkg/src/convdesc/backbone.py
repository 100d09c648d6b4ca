"""Front section of the VGG-16 backbone, run to the 2nd max-pooling layer.

Four 3x3 same-padded convolutions with ReLU and two 2x2 max-pools take a
224x224x3 image to a 56x56x128 map set:

    conv(3->64)  relu  conv(64->64)   relu  pool
    conv(64->128) relu conv(128->128) relu  pool

Weights come from an externally produced "CDWT" file
(see convdesc.formats); this package never trains the network.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import formats
from .errors import FormatError, InvalidArgumentError
from .tensor import DTYPE, FilterBank, Tensor, conv2d, maxpool2, relu

INPUT_SIZE = 224
POOL2_SIZE = 56
POOL2_CHANNELS = 128

# (kernel_count, kernel_height, kernel_width, in_channels) per conv layer
CONV_SHAPES = (
    (64, 3, 3, 3),
    (64, 3, 3, 64),
    (128, 3, 3, 64),
    (128, 3, 3, 128),
)
# pool after the 2nd and 4th convolutions
POOL_AFTER = (1, 3)

# ImageNet channel means in BGR order (the training-time convention of the
# published weights); preprocessing reorders RGB input to BGR by default.
DEFAULT_CHANNEL_MEANS = (103.939, 116.779, 123.68)
DEFAULT_CHANNEL_ORDER = "bgr"

# ITU-R BT.601 luma weights for the grayscale baseline
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

SOURCE_CONVMAP = "convmap"
SOURCE_GRAYSCALE = "grayscale"


@dataclass(frozen=True)
class PreprocessConfig:
    """Input normalization applied before the backbone."""

    channel_means: tuple[float, float, float] = DEFAULT_CHANNEL_MEANS
    channel_order: str = DEFAULT_CHANNEL_ORDER

    def __post_init__(self):
        if self.channel_order not in ("rgb", "bgr"):
            raise InvalidArgumentError(
                f"channel_order must be 'rgb' or 'bgr', got {self.channel_order!r}"
            )

    def metadata(self) -> dict:
        return {
            "channel_means": list(self.channel_means),
            "channel_order": self.channel_order,
            "input_size": INPUT_SIZE,
        }


@dataclass(frozen=True)
class WeightStore:
    """Shape-validated filter banks for the four backbone convolutions."""

    banks: tuple[FilterBank, ...]
    layer_names: tuple[str, ...]
    source_name: str
    checksum: int

    def __post_init__(self):
        if len(self.banks) != len(CONV_SHAPES):
            raise FormatError(
                f"backbone needs {len(CONV_SHAPES)} conv layers, got {len(self.banks)}"
            )


@dataclass(frozen=True)
class ConvMapSet:
    """Per-channel maps handed to the descriptors.

    The backbone path yields 56x56x128 maps; the grayscale baseline path
    yields an HxWx1 luma map.
    """

    maps: Tensor
    source_kind: str

    def __post_init__(self):
        if self.source_kind not in (SOURCE_CONVMAP, SOURCE_GRAYSCALE):
            raise InvalidArgumentError(f"unknown source kind {self.source_kind!r}")
        if self.source_kind == SOURCE_CONVMAP:
            expected = (POOL2_SIZE, POOL2_SIZE, POOL2_CHANNELS)
            if self.maps.shape != expected:
                raise InvalidArgumentError(
                    f"convmap source requires {expected} maps, got {self.maps.shape}"
                )
        elif self.maps.channels != 1:
            raise InvalidArgumentError(
                f"grayscale source requires a single channel, got {self.maps.channels}"
            )


def load_weights(path) -> WeightStore:
    """Load and validate a CDWT weight file.

    Raises FileNotFoundError for a missing file, FormatError naming the
    offending layer on a shape mismatch, and IntegrityError on checksum
    failure.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"weight file not found: {path}")
    layers, crc = formats.read_weights(path)
    if len(layers) != len(CONV_SHAPES):
        raise FormatError(
            f"{path}: expected {len(CONV_SHAPES)} conv layers, found {len(layers)}"
        )
    banks = []
    names = []
    for index, ((name, weights, biases), expected) in enumerate(zip(layers, CONV_SHAPES)):
        if weights.shape != expected:
            raise FormatError(
                f"{path}: layer {index} ({name}) has shape {weights.shape}, "
                f"expected {expected}"
            )
        banks.append(FilterBank(weights, biases))
        names.append(name)
    return WeightStore(tuple(banks), tuple(names), path.name, crc)


def save_weights(path, store: WeightStore) -> int:
    """Write a WeightStore back to a CDWT file; returns the CRC32."""
    layers = [
        (name, bank.weights, bank.biases)
        for name, bank in zip(store.layer_names, store.banks)
    ]
    return formats.write_weights(path, layers)


def decode_image(path) -> np.ndarray:
    """Decode a raster file to an 8-bit RGB (H, W, 3) array.

    Alpha channels are dropped; palette and grayscale images are expanded.
    """
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        arr = np.asarray(rgb, dtype=np.uint8)
    if arr.size == 0:
        raise InvalidArgumentError(f"{path}: image has no pixels")
    return arr


def bilinear_resize(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bilinear resampling with half-pixel-centered sampling.

    Output pixel i samples the source at (i + 0.5) * scale - 0.5, clamped
    to the source extent. Works on (H, W) or (H, W, C) float arrays;
    computes in float64.
    """
    arr = np.asarray(image, dtype=np.float64)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    in_h, in_w = arr.shape[:2]

    def axis_coords(n_in, n_out):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        lo = np.floor(src).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        frac = src - lo
        return lo, hi, frac

    y0, y1, fy = axis_coords(in_h, out_h)
    x0, x1, fx = axis_coords(in_w, out_w)
    rows = arr[y0] * (1.0 - fy)[:, None, None] + arr[y1] * fy[:, None, None]
    out = (rows[:, x0] * (1.0 - fx)[None, :, None]
           + rows[:, x1] * fx[None, :, None])
    return out[:, :, 0] if squeeze else out


def preprocess_image(raster: np.ndarray,
                     config: PreprocessConfig = PreprocessConfig()) -> Tensor:
    """Resize a decoded RGB image to 224x224 and subtract channel means.

    The channel order of the produced tensor follows the config (BGR by
    default, matching the published weights' training convention).
    """
    arr = np.asarray(raster)
    if arr.size == 0:
        raise InvalidArgumentError("image has no pixels")
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidArgumentError(f"expected an RGB (H, W, 3) raster, got {arr.shape}")
    resized = bilinear_resize(arr.astype(np.float64), INPUT_SIZE, INPUT_SIZE)
    if config.channel_order == "bgr":
        resized = resized[:, :, ::-1]
    resized = resized - np.asarray(config.channel_means, dtype=np.float64)
    return Tensor(resized.astype(DTYPE))


def forward_to_pool2(inp: Tensor, store: WeightStore) -> ConvMapSet:
    """Run the backbone front section; returns the 56x56x128 map set."""
    if inp.shape != (INPUT_SIZE, INPUT_SIZE, 3):
        raise InvalidArgumentError(
            f"backbone input must be {INPUT_SIZE}x{INPUT_SIZE}x3, got "
            f"{inp.height}x{inp.width}x{inp.channels}"
        )
    current = inp
    for index, bank in enumerate(store.banks):
        current = relu(conv2d(current, bank, padding="same"))
        if index in POOL_AFTER:
            current = maxpool2(current)
    return ConvMapSet(current, SOURCE_CONVMAP)


def grayscale_map_set(raster: np.ndarray) -> ConvMapSet:
    """Luma-convert and resize a decoded RGB image for the baseline path.

    Values stay on the 0..255 scale; the descriptors are shift- and
    scale-tolerant so no mean subtraction is applied.
    """
    arr = np.asarray(raster)
    if arr.size == 0:
        raise InvalidArgumentError("image has no pixels")
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidArgumentError(f"expected an RGB (H, W, 3) raster, got {arr.shape}")
    luma = (arr[:, :, 0] * LUMA_WEIGHTS[0]
            + arr[:, :, 1] * LUMA_WEIGHTS[1]
            + arr[:, :, 2] * LUMA_WEIGHTS[2])
    resized = bilinear_resize(luma, INPUT_SIZE, INPUT_SIZE)
    return ConvMapSet(Tensor(resized.astype(DTYPE)[:, :, None]), SOURCE_GRAYSCALE)
