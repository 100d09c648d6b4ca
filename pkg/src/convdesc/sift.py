"""Dense SIFT over every channel of a map set.

Patches are tiled on a fixed grid (no keypoint detection, no rotation
normalization, flat spatial weighting). Each patch is described by 4x4
cells of 8-bin orientation histograms, magnitude-weighted with bilinear
soft-assignment across cells and orientation bins, then L2-normalized,
clamped at 0.2 and renormalized. Zero-gradient patches yield the zero
vector so descriptor counts stay deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .backbone import ConvMapSet
from .errors import InvalidArgumentError
from .tensor import DTYPE, Tensor

DESCRIPTOR_DIM = 128
CLAMP = 0.2


@dataclass(frozen=True)
class DenseGridParams:
    """Patch geometry for dense description."""

    patch_size: int = 16
    step: int = 8

    def __post_init__(self):
        if self.patch_size < 4 or self.patch_size % 4:
            raise InvalidArgumentError(
                f"patch_size must be >= 4 and divisible by 4, got {self.patch_size}"
            )
        if self.step < 1:
            raise InvalidArgumentError(f"step must be >= 1, got {self.step}")

    def grid_shape(self, height: int, width: int) -> tuple[int, int]:
        if self.patch_size > min(height, width):
            raise InvalidArgumentError(
                f"{self.patch_size}px patches do not fit a {height}x{width} map"
            )
        return ((height - self.patch_size) // self.step + 1,
                (width - self.patch_size) // self.step + 1)


@dataclass(frozen=True)
class SiftDescriptor:
    values: np.ndarray  # (128,) float32
    position: tuple[float, float]  # (y, x) patch center
    channel_index: int


def gradient_field(map_tensor: Tensor) -> tuple[Tensor, Tensor]:
    """Gradient magnitude and orientation of a single-channel map.

    Central differences in the interior, one-sided at the borders.
    Orientation is atan2(dy, dx) wrapped to [0, 2*pi).
    """
    if map_tensor.channels != 1:
        raise InvalidArgumentError(
            f"gradient_field expects a single channel, got {map_tensor.channels}"
        )
    if map_tensor.height < 3 or map_tensor.width < 3:
        raise InvalidArgumentError(
            f"map must be at least 3x3, got {map_tensor.height}x{map_tensor.width}"
        )
    mag, ori = _gradients(map_tensor.data[:, :, 0].astype(np.float64))
    return (Tensor(mag.astype(DTYPE)[:, :, None]),
            Tensor(ori.astype(DTYPE)[:, :, None]))


def _gradients(plane: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dy = np.empty_like(plane)
    dx = np.empty_like(plane)
    dy[1:-1, :] = (plane[2:, :] - plane[:-2, :]) * 0.5
    dy[0, :] = plane[1, :] - plane[0, :]
    dy[-1, :] = plane[-1, :] - plane[-2, :]
    dx[:, 1:-1] = (plane[:, 2:] - plane[:, :-2]) * 0.5
    dx[:, 0] = plane[:, 1] - plane[:, 0]
    dx[:, -1] = plane[:, -1] - plane[:, -2]
    mag = np.hypot(dy, dx)
    ori = np.arctan2(dy, dx)
    ori[ori < 0] += 2.0 * np.pi
    # atan2 can return exactly 2*pi after the wrap when dy is -0.0
    ori[ori >= 2.0 * np.pi] = 0.0
    return mag, ori


def normalize_descriptor(hist: np.ndarray) -> np.ndarray:
    """L2-normalize, clamp at 0.2, renormalize; zero stays zero."""
    vec = hist.astype(np.float64)
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        return np.zeros(DESCRIPTOR_DIM, dtype=DTYPE)
    vec /= norm
    np.minimum(vec, CLAMP, out=vec)
    vec /= np.linalg.norm(vec)
    return vec.astype(DTYPE)


def dense_sift_matrix(maps,
                      grid: DenseGridParams = DenseGridParams()) -> np.ndarray:
    """All descriptors of a map set (or bare Tensor) as one (n, 128)
    float32 matrix.

    Rows are ordered channel-major, then row-major over the patch grid.
    """
    tensor = maps if isinstance(maps, Tensor) else maps.maps
    ny, nx = grid.grid_shape(tensor.height, tensor.width)
    if tensor.height < 3 or tensor.width < 3:
        raise InvalidArgumentError("maps must be at least 3x3 for gradients")
    per_channel = ny * nx
    out = np.empty((per_channel * tensor.channels, DESCRIPTOR_DIM), dtype=DTYPE)
    for c in range(tensor.channels):
        mag, ori = _gradients(tensor.data[:, :, c].astype(np.float64))
        hists = kernels.sift_histograms(mag.astype(DTYPE), ori.astype(DTYPE),
                                        grid.patch_size, grid.step)
        for i in range(per_channel):
            out[c * per_channel + i] = normalize_descriptor(hists[i])
    return out


def dense_sift(maps,
               grid: DenseGridParams = DenseGridParams()) -> list[SiftDescriptor]:
    """Dense descriptors with their patch centers and channel indices."""
    tensor = maps if isinstance(maps, Tensor) else maps.maps
    ny, nx = grid.grid_shape(tensor.height, tensor.width)
    matrix = dense_sift_matrix(maps, grid)
    half = (grid.patch_size - 1) / 2.0
    descriptors = []
    row = 0
    for c in range(tensor.channels):
        for gy in range(ny):
            for gx in range(nx):
                descriptors.append(SiftDescriptor(
                    values=matrix[row],
                    position=(gy * grid.step + half, gx * grid.step + half),
                    channel_index=c,
                ))
                row += 1
    return descriptors
