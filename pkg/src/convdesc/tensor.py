"""Dense rank-3 tensors and the three numerical primitives of the
backbone: stride-1 2-D convolution with bias, ReLU, and 2x2 max-pooling.

Tensors are immutable float32 arrays laid out (height, width, channels);
every constructor rejects non-finite values, so any tensor reachable
through this module is finite. All operations are pure functions.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import InvalidArgumentError

DTYPE = np.float32


class Tensor:
    """Immutable (height, width, channels) array of finite float32 values."""

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.ascontiguousarray(data, dtype=DTYPE)
        if arr.ndim != 3:
            raise InvalidArgumentError(
                f"tensor data must be rank 3 (height, width, channels), got rank {arr.ndim}"
            )
        if min(arr.shape) < 1:
            raise InvalidArgumentError(f"tensor dimensions must be positive, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise InvalidArgumentError("tensor contains non-finite values")
        arr.setflags(write=False)
        self._data = arr

    @classmethod
    def from_flat(cls, height: int, width: int, channels: int, values) -> "Tensor":
        """Build from a flat sequence in row-major (y, x, channel) order."""
        flat = np.asarray(values, dtype=DTYPE)
        if flat.size != height * width * channels:
            raise InvalidArgumentError(
                f"expected {height * width * channels} values for "
                f"{height}x{width}x{channels}, got {flat.size}"
            )
        return cls(flat.reshape(height, width, channels))

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def height(self) -> int:
        return self._data.shape[0]

    @property
    def width(self) -> int:
        return self._data.shape[1]

    @property
    def channels(self) -> int:
        return self._data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self._data.shape

    def __repr__(self):
        return f"Tensor({self.height}x{self.width}x{self.channels})"


class FilterBank:
    """A set of convolution kernels with one scalar bias per kernel.

    Weights are laid out (kernel, ky, kx, in_channel).
    """

    __slots__ = ("_weights", "_biases")

    def __init__(self, weights, biases):
        w = np.ascontiguousarray(weights, dtype=DTYPE)
        b = np.ascontiguousarray(biases, dtype=DTYPE)
        if w.ndim != 4:
            raise InvalidArgumentError(
                f"filter weights must be rank 4 (kernel, ky, kx, cin), got rank {w.ndim}"
            )
        if min(w.shape) < 1:
            raise InvalidArgumentError(f"filter dimensions must be positive, got {w.shape}")
        if b.shape != (w.shape[0],):
            raise InvalidArgumentError(
                f"expected {w.shape[0]} biases, got shape {b.shape}"
            )
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise InvalidArgumentError("filter bank contains non-finite values")
        w.setflags(write=False)
        b.setflags(write=False)
        self._weights = w
        self._biases = b

    @classmethod
    def from_flat(cls, kernel_count, kernel_height, kernel_width, in_channels,
                  weights, biases) -> "FilterBank":
        """Build from a flat weight sequence in (k, ky, kx, cin) order."""
        flat = np.asarray(weights, dtype=DTYPE)
        expected = kernel_count * kernel_height * kernel_width * in_channels
        if flat.size != expected:
            raise InvalidArgumentError(
                f"expected {expected} weights, got {flat.size}"
            )
        return cls(flat.reshape(kernel_count, kernel_height, kernel_width, in_channels),
                   biases)

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def biases(self) -> np.ndarray:
        return self._biases

    @property
    def kernel_count(self) -> int:
        return self._weights.shape[0]

    @property
    def kernel_height(self) -> int:
        return self._weights.shape[1]

    @property
    def kernel_width(self) -> int:
        return self._weights.shape[2]

    @property
    def in_channels(self) -> int:
        return self._weights.shape[3]

    def __repr__(self):
        return (f"FilterBank({self.kernel_count} kernels, "
                f"{self.kernel_height}x{self.kernel_width}x{self.in_channels})")


def conv2d(inp: Tensor, bank: FilterBank, padding: str = "same") -> Tensor:
    """Stride-1 2-D convolution (cross-correlation convention) with bias.

    "same" zero-pads so the spatial size is preserved; "valid" computes
    only fully-overlapping positions.
    """
    if inp.channels != bank.in_channels:
        raise InvalidArgumentError(
            f"input has {inp.channels} channels but filter bank expects {bank.in_channels}"
        )
    kh, kw = bank.kernel_height, bank.kernel_width
    if padding == "same":
        pads = ((kh - 1) // 2, kh // 2, (kw - 1) // 2, kw // 2)
    elif padding == "valid":
        if kh > inp.height or kw > inp.width:
            raise InvalidArgumentError(
                f"{kh}x{kw} kernel does not fit {inp.height}x{inp.width} input "
                "with valid padding"
            )
        pads = (0, 0, 0, 0)
    else:
        raise InvalidArgumentError(f"padding must be 'same' or 'valid', got {padding!r}")
    out = kernels.conv2d(inp.data, bank.weights, bank.biases, pads)
    return Tensor(out)


def relu(inp: Tensor) -> Tensor:
    """Elementwise max(0, x)."""
    return Tensor(np.maximum(inp.data, DTYPE(0)))


def maxpool2(inp: Tensor) -> Tensor:
    """Max over non-overlapping 2x2 windows, per channel.

    Odd spatial dimensions are rejected; the backbone never produces them
    and silent truncation would hide bugs.
    """
    if inp.height % 2 or inp.width % 2:
        raise InvalidArgumentError(
            f"maxpool2 requires even spatial dimensions, got {inp.height}x{inp.width}"
        )
    return Tensor(kernels.maxpool2(inp.data))
