"""The per-image feature vector handed to the classifier."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

KINDS = ("bow", "hlac")
BOW_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class FeatureVector:
    """Final per-image descriptor: a BoW histogram or HLAC concatenation."""

    values: np.ndarray  # float32
    kind: str
    source_kind: str

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float32)
        if arr.ndim != 1 or arr.size == 0:
            raise InvalidArgumentError("feature values must be a nonempty 1-D array")
        if not np.isfinite(arr).all():
            raise InvalidArgumentError("feature vector contains non-finite values")
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown feature kind {self.kind!r}")
        if self.kind == "bow":
            if (arr < 0).any():
                raise InvalidArgumentError("bow histogram has negative entries")
            total = float(arr.sum(dtype=np.float64))
            if abs(total - 1.0) > BOW_SUM_TOLERANCE:
                raise InvalidArgumentError(
                    f"bow histogram must be L1-normalized, sums to {total}"
                )
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return self.values.size
