"""Visual codebook training and bag-of-words encoding.

One k-means codebook (default k=1,000) is trained over SIFT descriptors
pooled from every channel and shared across all kernels; an image is
encoded as the L1-normalized histogram of nearest-codeword assignments
of all its descriptors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .features import FeatureVector
from .sift import DESCRIPTOR_DIM, SiftDescriptor

DEFAULT_K = 1000
ASSIGN_CHUNK = 8192


@dataclass(frozen=True)
class TrainingMeta:
    iterations: int
    distortion: float
    seed: int


@dataclass(frozen=True)
class Codebook:
    """k centroids in descriptor space."""

    centroids: np.ndarray  # (k, 128) float32
    meta: TrainingMeta | None = None

    def __post_init__(self):
        c = np.ascontiguousarray(self.centroids, dtype=np.float32)
        if c.ndim != 2:
            raise InvalidArgumentError("centroids must be a 2-D matrix")
        if not np.isfinite(c).all():
            raise InvalidArgumentError("centroids contain non-finite values")
        if len(np.unique(c, axis=0)) != len(c):
            raise InvalidArgumentError("codebook contains duplicate centroids")
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def assign(descriptors: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the nearest centroid (squared Euclidean, ties -> lowest
    index) for each descriptor row."""
    x = np.asarray(descriptors, dtype=np.float64)
    c = np.asarray(centroids, dtype=np.float64)
    c_sq = (c * c).sum(axis=1)
    out = np.empty(len(x), dtype=np.int64)
    for start in range(0, len(x), ASSIGN_CHUNK):
        chunk = x[start:start + ASSIGN_CHUNK]
        d = chunk @ c.T
        d *= -2.0
        d += c_sq[None, :]
        d += (chunk * chunk).sum(axis=1)[:, None]
        out[start:start + ASSIGN_CHUNK] = np.argmin(d, axis=1)
    return out


def _point_sq_dists(x: np.ndarray, centroids: np.ndarray,
                    labels: np.ndarray) -> np.ndarray:
    out = np.empty(len(x), dtype=np.float64)
    for start in range(0, len(x), ASSIGN_CHUNK):
        stop = start + ASSIGN_CHUNK
        diff = x[start:stop] - centroids[labels[start:stop]]
        out[start:stop] = (diff * diff).sum(axis=1)
    return out


def _distortion(x: np.ndarray, centroids: np.ndarray, labels: np.ndarray) -> float:
    return float(_point_sq_dists(x, centroids, labels).sum())


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded k-means++: D^2-weighted sampling of initial centroids."""
    n = len(x)
    centroids = np.empty((k, x.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = x[first]
    d2 = ((x - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining points coincide with a chosen centroid
            choice = int(rng.integers(n))
        else:
            r = rng.random() * total
            choice = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            choice = min(choice, n - 1)
        centroids[i] = x[choice]
        d2 = np.minimum(d2, ((x - centroids[i]) ** 2).sum(axis=1))
    return centroids


def train_codebook(descriptors: np.ndarray, k: int = DEFAULT_K,
                   max_iters: int = 100, seed: int = 0) -> Codebook:
    """Lloyd's k-means with k-means++ initialization, deterministic per
    (descriptors, k, seed).

    Iterates to an assignment fixpoint or max_iters. A cluster that
    empties is re-seeded to the point currently farthest from its
    assigned centroid, which keeps per-iteration distortion
    non-increasing.
    """
    x = np.asarray(descriptors, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != DESCRIPTOR_DIM:
        raise InvalidArgumentError(
            f"descriptors must be (n, {DESCRIPTOR_DIM}), got {x.shape}"
        )
    if len(x) < k:
        raise InvalidArgumentError(
            f"need at least k={k} descriptors, got {len(x)}"
        )
    if k < 1:
        raise InvalidArgumentError(f"k must be positive, got {k}")
    rng = np.random.Generator(np.random.PCG64(seed))
    centroids = _kmeans_pp_init(x, k, rng)
    labels = assign(x, centroids)
    distortion = _distortion(x, centroids, labels)
    iterations = 0
    for _ in range(max_iters):
        iterations += 1
        sums = np.stack(
            [np.bincount(labels, weights=x[:, j], minlength=k)
             for j in range(x.shape[1])], axis=1)
        counts = np.bincount(labels, minlength=k).astype(np.float64)
        empty = np.flatnonzero(counts == 0)
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]
        if len(empty):
            # re-seed each empty cluster to the next-farthest point from
            # its currently assigned centroid
            order = np.argsort(-_point_sq_dists(x, centroids, labels),
                               kind="stable")
            for j, cluster in enumerate(empty):
                centroids[cluster] = x[order[j]]
        new_labels = assign(x, centroids)
        new_distortion = _distortion(x, centroids, new_labels)
        if new_distortion > distortion * (1.0 + 1e-12) + 1e-9:
            raise AssertionError(
                f"k-means distortion increased: {distortion} -> {new_distortion}"
            )
        converged = bool((new_labels == labels).all())
        labels = new_labels
        distortion = new_distortion
        if converged:
            break
    return Codebook(
        centroids=centroids.astype(np.float32),
        meta=TrainingMeta(iterations=iterations, distortion=distortion, seed=seed),
    )


def encode_bow(descriptors, codebook: Codebook,
               source_kind: str = "convmap") -> FeatureVector:
    """Hard-assignment histogram over the codebook, L1-normalized.

    Descriptors from all channels pool into the single histogram;
    accepts a (n, 128) matrix or a list of SiftDescriptor.
    """
    matrix = _descriptor_matrix(descriptors)
    if matrix.shape[0] == 0:
        raise InvalidArgumentError("cannot encode an empty descriptor list")
    if matrix.shape[1] != codebook.dim:
        raise InvalidArgumentError(
            f"descriptor dim {matrix.shape[1]} != codebook dim {codebook.dim}"
        )
    labels = assign(matrix, codebook.centroids)
    counts = np.bincount(labels, minlength=codebook.k).astype(np.float64)
    hist = counts / counts.sum()
    return FeatureVector(values=hist.astype(np.float32), kind="bow",
                         source_kind=source_kind)


def subsample_descriptors(matrix: np.ndarray, cap: int, seed: int) -> np.ndarray:
    """Uniform random subsample (without replacement) down to cap rows."""
    if len(matrix) <= cap:
        return matrix
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = np.sort(rng.choice(len(matrix), size=cap, replace=False))
    return matrix[idx]


def _descriptor_matrix(descriptors) -> np.ndarray:
    if isinstance(descriptors, np.ndarray):
        return descriptors
    if len(descriptors) and isinstance(descriptors[0], SiftDescriptor):
        return np.stack([d.values for d in descriptors])
    return np.asarray(descriptors, dtype=np.float32).reshape(len(descriptors), -1)
