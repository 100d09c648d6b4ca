"""Higher-order local autocorrelation features over binarized maps.

Each channel is thresholded with Otsu's method, binarized, and scanned
with the 25 canonical 3x3 offset masks of order <= 2 (1 singleton, 4
pairs, 20 triples after translation dedupe). Feature m counts the
interior reference pixels whose mask offsets are all foreground. The
per-channel 25-vectors are concatenated channel-major: 3,200 dims for
the 128-map backbone output, 25 for the grayscale baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import kernels
from .backbone import ConvMapSet, SOURCE_CONVMAP
from .errors import InvalidArgumentError
from .features import FeatureVector
from .tensor import Tensor

HLAC_DIM = 25
HISTOGRAM_BINS = 256

_NEIGHBORHOOD = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)]

Mask = tuple[tuple[int, int], ...]


def _canonical(offsets) -> Mask:
    """Smallest in-window translate of an offset set that contains (0, 0)."""
    candidates = []
    for oy, ox in offsets:
        shifted = tuple(sorted((dy - oy, dx - ox) for dy, dx in offsets))
        if all(-1 <= dy <= 1 and -1 <= dx <= 1 for dy, dx in shifted):
            candidates.append(shifted)
    return min(candidates)


def enumerate_masks() -> tuple[Mask, ...]:
    """The 25 canonical masks: order, then lexicographic on sorted offsets.

    Every offset set {(0,0)} | S with S drawn from the 3x3 neighborhood,
    |S| <= 2, deduplicated under translation equivalence.
    """
    others = [o for o in _NEIGHBORHOOD if o != (0, 0)]
    seen = {}
    for size in (0, 1, 2):
        for combo in combinations(others, size):
            mask = _canonical(((0, 0),) + combo)
            seen.setdefault(mask, None)
    return tuple(sorted(seen, key=lambda m: (len(m), m)))


MASKS = enumerate_masks()

# dense offset table consumed by the counting kernels
_MASK_OFFSETS = np.zeros((len(MASKS), 3, 2), dtype=np.int64)
_MASK_SIZES = np.array([len(m) for m in MASKS], dtype=np.int64)
for _i, _mask in enumerate(MASKS):
    for _j, (_dy, _dx) in enumerate(_mask):
        _MASK_OFFSETS[_i, _j] = (_dy, _dx)


@dataclass(frozen=True)
class BinaryMap:
    """A thresholded single-channel map."""

    bits: np.ndarray  # (H, W) uint8 of {0, 1}
    threshold: float
    channel_index: int = 0

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


def otsu_threshold(plane) -> float:
    """Threshold maximizing between-class variance on a 256-bin histogram.

    The histogram spans [min, max]; the returned value is the upper
    boundary of the winning bin (first bin on ties). A constant map
    returns the constant itself, which binarizes to all zeros under the
    strict > rule.
    """
    values = _as_plane(plane).ravel()
    if values.size == 0:
        raise InvalidArgumentError("cannot threshold an empty map")
    lo = float(values.min())
    hi = float(values.max())
    if lo == hi:
        return lo
    hist = np.bincount(_bin_indices(values, lo, hi), minlength=HISTOGRAM_BINS)
    p = hist.astype(np.float64) / values.size
    centers = np.arange(HISTOGRAM_BINS, dtype=np.float64)
    w0 = np.cumsum(p)
    m0 = np.cumsum(p * centers)
    total_mean = m0[-1]
    w1 = 1.0 - w0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = m0 / w0
        mu1 = (total_mean - m0) / w1
        sigma_b = w0 * w1 * (mu0 - mu1) ** 2
    sigma_b[~np.isfinite(sigma_b)] = 0.0
    best = int(np.argmax(sigma_b))
    return lo + (best + 1) * (hi - lo) / HISTOGRAM_BINS


def _bin_indices(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    scaled = (values.astype(np.float64) - lo) / (hi - lo) * HISTOGRAM_BINS
    return np.minimum(scaled.astype(np.int64), HISTOGRAM_BINS - 1)


def binarize(plane, threshold: float, channel_index: int = 0) -> BinaryMap:
    """bit = 1 iff value > threshold."""
    data = _as_plane(plane)
    return BinaryMap((data > threshold).astype(np.uint8), float(threshold),
                     channel_index)


def hlac25(binary: BinaryMap, masks=None) -> np.ndarray:
    """The 25 mask-product counts over interior reference pixels."""
    if binary.height < 3 or binary.width < 3:
        raise InvalidArgumentError(
            f"map must be at least 3x3, got {binary.height}x{binary.width}"
        )
    if masks is None:
        offsets, sizes = _MASK_OFFSETS, _MASK_SIZES
    else:
        offsets = np.zeros((len(masks), 3, 2), dtype=np.int64)
        sizes = np.array([len(m) for m in masks], dtype=np.int64)
        for i, mask in enumerate(masks):
            for j, off in enumerate(mask):
                offsets[i, j] = off
    bits = np.ascontiguousarray(binary.bits, dtype=np.uint8)
    return kernels.hlac_counts(bits, offsets, sizes)


def hlac_concat(maps: ConvMapSet) -> FeatureVector:
    """Per-channel Otsu + binarize + count, concatenated channel-major."""
    tensor: Tensor = maps.maps
    out = np.empty(tensor.channels * HLAC_DIM, dtype=np.float32)
    for c in range(tensor.channels):
        plane = tensor.data[:, :, c]
        thr = otsu_threshold(plane)
        counts = hlac25(binarize(plane, thr, channel_index=c))
        out[c * HLAC_DIM:(c + 1) * HLAC_DIM] = counts
    return FeatureVector(values=out, kind="hlac", source_kind=maps.source_kind)


def _as_plane(plane) -> np.ndarray:
    if isinstance(plane, Tensor):
        if plane.channels != 1:
            raise InvalidArgumentError(
                f"expected a single-channel map, got {plane.channels} channels"
            )
        return plane.data[:, :, 0]
    arr = np.asarray(plane)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"expected a 2-D map, got rank {arr.ndim}")
    return arr
