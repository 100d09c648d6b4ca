"""Dataset scanning, deterministic splitting, cached feature extraction,
and the grayscale-vs-convmap comparison protocol.

A run is fully determined by (dataset, split seed, pipeline config): all
randomness flows from explicit seeds and every seed used is echoed into
the report, so reruns are byte-identical. Features are cached per
(image content hash, config hash); cache corruption is detected by CRC
and reported, never silently recomputed.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import backbone, bow, formats, hlac, sift, svm
from .errors import (ConfigurationError, FormatError, IntegrityError,
                     InvalidArgumentError)

LAYOUT_MULTICLASS = "multiclass-dirs"
LAYOUT_BINARY = "binary-posneg"
LAYOUTS = (LAYOUT_MULTICLASS, LAYOUT_BINARY)
BINARY_CLASS_DIRS = ("neg", "pos")

DESCRIPTORS = ("sift-bow", "hlac")
SOURCES = (backbone.SOURCE_CONVMAP, backbone.SOURCE_GRAYSCALE)

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".ppm", ".pgm",
                    ".gif", ".tif", ".tiff"}

CACHE_ENV_VAR = "CONVDESC_CACHE_DIR"


def derive_seed(master: int, role: str) -> int:
    """Stable per-role sub-seed from the master seed."""
    digest = hashlib.sha256(f"{master}:{role}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


# --- dataset scanning and splitting -----------------------------------------


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    layout: str
    root: str
    entries: tuple[tuple[str, str], ...]  # (relative path, label), sorted
    content_hash: str

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(sorted({label for _, label in self.entries}))

    def by_label(self) -> dict[str, list[str]]:
        grouped: dict[str, list[str]] = {}
        for path, label in self.entries:
            grouped.setdefault(label, []).append(path)
        return grouped


def _hash_entries(entries) -> str:
    digest = hashlib.sha256()
    for path, label in entries:
        digest.update(f"{path}\t{label}\n".encode())
    return digest.hexdigest()


def scan_dataset(root, layout: str) -> DatasetManifest:
    """Scan a class-per-directory tree into a deterministic manifest.

    multiclass-dirs: every immediate subdirectory is a class.
    binary-posneg: exactly the subdirectories "pos" and "neg".
    """
    root = Path(root)
    if layout not in LAYOUTS:
        raise InvalidArgumentError(f"layout must be one of {LAYOUTS}, got {layout!r}")
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root not found: {root}")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if layout == LAYOUT_BINARY:
        names = tuple(sorted(p.name for p in class_dirs))
        if names != BINARY_CLASS_DIRS:
            raise FormatError(
                f"{root}: binary-posneg layout requires exactly 'pos' and "
                f"'neg' directories, found {list(names)}"
            )
    if len(class_dirs) < 2:
        raise FormatError(f"{root}: need at least 2 class directories")
    entries = []
    for class_dir in class_dirs:
        files = sorted(
            p for p in class_dir.iterdir()
            if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
        )
        if not files:
            raise FormatError(f"{root}: class directory {class_dir.name!r} "
                              "contains no images")
        for path in files:
            if not os.access(path, os.R_OK):
                raise OSError(f"unreadable image file: {path}")
            entries.append((str(path.relative_to(root)), class_dir.name))
    entries.sort()
    return DatasetManifest(
        name=root.name,
        layout=layout,
        root=str(root),
        entries=tuple(entries),
        content_hash=_hash_entries(entries),
    )


@dataclass(frozen=True)
class SplitSpec:
    """Seeded per-class train/test sampling.

    train_per_class is one count applied to every class, or a mapping of
    label to count for layouts with uneven training sets.
    """

    train_per_class: int | dict[str, int]
    seed: int = 0

    def count_for(self, label: str) -> int:
        if isinstance(self.train_per_class, dict):
            if label not in self.train_per_class:
                raise InvalidArgumentError(
                    f"no training count given for class {label!r}"
                )
            return int(self.train_per_class[label])
        return int(self.train_per_class)


def split(manifest: DatasetManifest, spec: SplitSpec):
    """Deterministic per-class uniform split; returns (train, test) entry
    lists, each sorted by path."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    train: list[tuple[str, str]] = []
    test: list[tuple[str, str]] = []
    grouped = manifest.by_label()
    for label in sorted(grouped):
        paths = grouped[label]
        n_train = spec.count_for(label)
        if n_train < 1:
            raise InvalidArgumentError(
                f"train count for class {label!r} must be positive, got {n_train}"
            )
        if n_train >= len(paths):
            raise InvalidArgumentError(
                f"class {label!r} has {len(paths)} images; cannot reserve "
                f"{n_train} for training and still test"
            )
        order = rng.permutation(len(paths))
        chosen = set(order[:n_train].tolist())
        for i, path in enumerate(paths):
            (train if i in chosen else test).append((path, label))
    train.sort()
    test.sort()
    return train, test


def split_hash(train, test) -> str:
    digest = hashlib.sha256()
    for path, label in train:
        digest.update(f"T{path}\t{label}\n".encode())
    for path, label in test:
        digest.update(f"E{path}\t{label}\n".encode())
    return digest.hexdigest()


# --- pipeline configuration ---------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    """One (descriptor, source) cell of the comparison grid."""

    descriptor: str
    source: str
    weights_path: str | None = None
    codebook_path: str | None = None
    codebook_k: int = bow.DEFAULT_K
    codebook_max_iters: int = 100
    descriptor_cap: int = 200_000
    patch_size: int = 16
    step: int = 8
    svm_c: float = svm.DEFAULT_C
    svm_epochs: int = svm.DEFAULT_EPOCHS
    seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        if self.descriptor not in DESCRIPTORS:
            raise InvalidArgumentError(
                f"descriptor must be one of {DESCRIPTORS}, got {self.descriptor!r}"
            )
        if self.source not in SOURCES:
            raise InvalidArgumentError(
                f"source must be one of {SOURCES}, got {self.source!r}"
            )

    @property
    def grid(self) -> sift.DenseGridParams:
        return sift.DenseGridParams(patch_size=self.patch_size, step=self.step)

    def seeds(self) -> dict[str, int]:
        return {
            "master": self.seed,
            "codebook": derive_seed(self.seed, "codebook"),
            "subsample": derive_seed(self.seed, "subsample"),
            "svm": derive_seed(self.seed, "svm"),
        }


# --- feature cache -------------------------------------------------------------


def resolve_cache_dir(explicit=None) -> Path:
    if explicit:
        return Path(explicit)
    env = os.environ.get(CACHE_ENV_VAR)
    if env:
        return Path(env)
    return Path("convdesc-cache")


class FeatureCache:
    """Content-addressed cache of maps, descriptors and features.

    Filenames combine the image content hash with a hash of every config
    field that influences the stored value, so parameter changes
    invalidate cleanly. Writes are write-temp-then-rename.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.hits = 0
        self.misses = 0

    def _path(self, kind: str, image_hash: str, config_key: dict, suffix: str) -> Path:
        blob = json.dumps(config_key, sort_keys=True).encode()
        config_hash = hashlib.sha256(blob).hexdigest()[:16]
        directory = self.root / kind
        directory.mkdir(parents=True, exist_ok=True)
        return directory / f"{image_hash[:24]}-{config_hash}{suffix}"

    def _atomic_write(self, path: Path, writer):
        tmp = path.with_name(path.name + ".tmp")
        writer(tmp)
        os.replace(tmp, path)

    def map_path(self, image_hash: str, key: dict) -> Path:
        return self._path("maps", image_hash, key, ".cdmd")

    def load_map(self, path: Path):
        try:
            return formats.read_map(path)
        except IntegrityError as exc:
            raise IntegrityError(
                f"{exc}; delete the file to re-extract it"
            ) from exc

    def store_map(self, path: Path, data):
        self._atomic_write(path, lambda p: formats.write_map(p, data))

    def descriptor_path(self, image_hash: str, key: dict) -> Path:
        return self._path("descriptors", image_hash, key, ".cdsd")

    def feature_path(self, image_hash: str, key: dict) -> Path:
        return self._path("features", image_hash, key, ".cdfv")

    def load_feature(self, path: Path):
        try:
            return formats.read_feature(path)
        except IntegrityError as exc:
            raise IntegrityError(
                f"{exc}; delete the file to re-extract it"
            ) from exc


def hash_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


# --- feature extraction ---------------------------------------------------------


class FeatureExtractor:
    """Computes per-image map sets, descriptors and feature vectors with
    caching at each stage."""

    def __init__(self, config: PipelineConfig, cache: FeatureCache):
        self.config = config
        self.cache = cache
        self.preprocess = backbone.PreprocessConfig()
        self._weights = None
        self.weights_checksum = None
        if config.source == backbone.SOURCE_CONVMAP:
            if not config.weights_path:
                raise ConfigurationError(
                    "source 'convmap' requires a weights file"
                )
            self._weights = backbone.load_weights(config.weights_path)
            self.weights_checksum = self._weights.checksum

    def _map_key(self) -> dict:
        key = {"source": self.config.source}
        if self.config.source == backbone.SOURCE_CONVMAP:
            key["weights_crc"] = self.weights_checksum
            key["preprocess"] = self.preprocess.metadata()
        return key

    def _descriptor_key(self) -> dict:
        key = self._map_key()
        key.update({"descriptor": "dense-sift",
                    "patch_size": self.config.patch_size,
                    "step": self.config.step})
        return key

    def _feature_key(self, codebook_hash: str | None) -> dict:
        key = self._map_key()
        key["descriptor"] = self.config.descriptor
        if self.config.descriptor == "sift-bow":
            key.update({"patch_size": self.config.patch_size,
                        "step": self.config.step,
                        "codebook": codebook_hash})
        return key

    def map_set(self, image_path, image_hash: str | None = None,
                write_cache: bool = False) -> backbone.ConvMapSet:
        image_hash = image_hash or hash_file(image_path)
        path = self.cache.map_path(image_hash, self._map_key())
        if path.is_file():
            self.cache.hits += 1
            data = self.cache.load_map(path)
            return backbone.ConvMapSet(backbone.Tensor(data), self.config.source)
        self.cache.misses += 1
        raster = backbone.decode_image(image_path)
        if self.config.source == backbone.SOURCE_CONVMAP:
            maps = backbone.forward_to_pool2(
                backbone.preprocess_image(raster, self.preprocess), self._weights)
        else:
            maps = backbone.grayscale_map_set(raster)
        if write_cache:
            self.cache.store_map(path, maps.maps.data)
        return maps

    def descriptors(self, image_path, image_hash: str | None = None) -> np.ndarray:
        image_hash = image_hash or hash_file(image_path)
        path = self.cache.descriptor_path(image_hash, self._descriptor_key())
        if path.is_file():
            self.cache.hits += 1
            return formats.read_descriptors(path)
        self.cache.misses += 1
        maps = self.map_set(image_path, image_hash)
        matrix = sift.dense_sift_matrix(maps, self.config.grid)
        self.cache._atomic_write(path, lambda p: formats.write_descriptors(p, matrix))
        return matrix

    def feature(self, image_path, codebook=None,
                codebook_hash: str | None = None) -> np.ndarray:
        image_hash = hash_file(image_path)
        path = self.cache.feature_path(image_hash, self._feature_key(codebook_hash))
        if path.is_file():
            self.cache.hits += 1
            kind, values = self.cache.load_feature(path)
            return values
        self.cache.misses += 1
        if self.config.descriptor == "hlac":
            maps = self.map_set(image_path, image_hash)
            vector = hlac.hlac_concat(maps)
        else:
            matrix = self.descriptors(image_path, image_hash)
            vector = bow.encode_bow(matrix, codebook, source_kind=self.config.source)
        self.cache._atomic_write(
            path, lambda p: formats.write_feature(p, vector.kind, vector.values))
        return vector.values


def _parallel_map(fn, items, workers):
    if workers is None:
        workers = os.cpu_count() or 1
    workers = max(1, min(workers, len(items) or 1))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --- experiment ------------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    """Everything one run produced, in JSON-serializable form."""

    dataset: dict
    split: dict
    config: dict
    seeds: dict
    labels: tuple[str, ...]
    confusion: tuple[tuple[int, ...], ...]
    accuracy: float
    per_class_recall: dict[str, float]
    mean_per_class_recall: float
    codebook_meta: dict | None = None

    def to_json(self) -> str:
        payload = {
            "dataset": self.dataset,
            "split": self.split,
            "config": self.config,
            "seeds": self.seeds,
            "labels": list(self.labels),
            "confusion": [list(row) for row in self.confusion],
            "accuracy": self.accuracy,
            "per_class_recall": self.per_class_recall,
            "mean_per_class_recall": self.mean_per_class_recall,
            "codebook_meta": self.codebook_meta,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        payload = json.loads(text)
        return cls(
            dataset=payload["dataset"],
            split=payload["split"],
            config=payload["config"],
            seeds=payload["seeds"],
            labels=tuple(payload["labels"]),
            confusion=tuple(tuple(row) for row in payload["confusion"]),
            accuracy=payload["accuracy"],
            per_class_recall=payload["per_class_recall"],
            mean_per_class_recall=payload["mean_per_class_recall"],
            codebook_meta=payload.get("codebook_meta"),
        )

    @property
    def approach(self) -> str:
        descriptor = {"sift-bow": "SIFT+BoW", "hlac": "HLAC"}[self.config["descriptor"]]
        source = {"convmap": "ConvMaps", "grayscale": "Grayscale"}[self.config["source"]]
        return f"{descriptor}, {source}"

    def table_text(self) -> str:
        lines = [
            f"Recognition rate for the {self.dataset['name']} dataset",
            "",
            f"{'Approach':<24}{'%':>8}",
            "-" * 32,
            f"{self.approach:<24}{self.accuracy * 100:>8.2f}",
        ]
        return "\n".join(lines) + "\n"

    def confusion_csv(self) -> str:
        lines = ["true\\predicted," + ",".join(self.labels)]
        for label, row in zip(self.labels, self.confusion):
            lines.append(label + "," + ",".join(str(v) for v in row))
        return "\n".join(lines) + "\n"


def run_experiment(manifest: DatasetManifest, split_spec: SplitSpec,
                   config: PipelineConfig, cache_dir=None) -> EvalReport:
    """Extract features, train, evaluate; the paper-style protocol for
    one (descriptor, source) cell.

    The codebook (sift-bow only) is trained exclusively on training-split
    images. Every stage is cached under cache_dir.
    """
    cache = FeatureCache(resolve_cache_dir(cache_dir))
    extractor = FeatureExtractor(config, cache)
    seeds = config.seeds()
    seeds["split"] = split_spec.seed
    train, test = split(manifest, split_spec)
    root = Path(manifest.root)

    codebook = None
    codebook_hash = None
    codebook_meta = None
    if config.descriptor == "sift-bow":
        codebook, codebook_hash, codebook_meta = _codebook_for_run(
            extractor, root, train, config, seeds)

    def extract(entry):
        path, _ = entry
        return extractor.feature(root / path, codebook, codebook_hash)

    train_features = np.stack(_parallel_map(extract, train, config.workers))
    test_features = np.stack(_parallel_map(extract, test, config.workers))
    train_labels = [label for _, label in train]
    test_labels = [label for _, label in test]

    model = svm.train_multiclass(train_features, train_labels, C=config.svm_c,
                                 seed=seeds["svm"], epochs=config.svm_epochs)
    predictions = svm.predict_many(model, test_features)

    labels = tuple(sorted(manifest.labels))
    index = {label: i for i, label in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for truth, predicted in zip(test_labels, predictions):
        confusion[index[truth], index[predicted]] += 1
    accuracy = float(np.trace(confusion) / confusion.sum())
    recalls = {}
    for label in labels:
        i = index[label]
        row_total = int(confusion[i].sum())
        recalls[label] = float(confusion[i, i] / row_total) if row_total else 0.0
    mean_recall = float(np.mean(list(recalls.values())))

    return EvalReport(
        dataset={"name": manifest.name, "layout": manifest.layout,
                 "manifest_hash": manifest.content_hash},
        split={"seed": split_spec.seed,
               "train_per_class": split_spec.train_per_class
               if isinstance(split_spec.train_per_class, int)
               else dict(split_spec.train_per_class),
               "split_hash": split_hash(train, test),
               "train_count": len(train), "test_count": len(test)},
        config=_config_echo(config, extractor),
        seeds=seeds,
        labels=labels,
        confusion=tuple(tuple(int(v) for v in row) for row in confusion),
        accuracy=accuracy,
        per_class_recall=recalls,
        mean_per_class_recall=mean_recall,
        codebook_meta=codebook_meta,
    )


def _codebook_for_run(extractor: FeatureExtractor, root: Path, train,
                      config: PipelineConfig, seeds: dict):
    if config.codebook_path:
        centroids = formats.read_codebook(config.codebook_path)
        codebook = bow.Codebook(centroids)
        meta = {"path": str(config.codebook_path), "pretrained": True}
    else:
        stacks = [extractor.descriptors(root / path) for path, _ in train]
        pooled = np.concatenate(stacks, axis=0)
        pooled = bow.subsample_descriptors(pooled, config.descriptor_cap,
                                           seeds["subsample"])
        codebook = bow.train_codebook(pooled, k=config.codebook_k,
                                      max_iters=config.codebook_max_iters,
                                      seed=seeds["codebook"])
        meta = {"k": codebook.k,
                "iterations": codebook.meta.iterations,
                "distortion": codebook.meta.distortion,
                "trained_descriptors": int(len(pooled)),
                "pretrained": False}
    codebook_hash = hashlib.sha256(
        np.ascontiguousarray(codebook.centroids).tobytes()).hexdigest()
    meta["hash"] = codebook_hash
    return codebook, codebook_hash, meta


def _config_echo(config: PipelineConfig, extractor: FeatureExtractor) -> dict:
    echo = {
        "descriptor": config.descriptor,
        "source": config.source,
        "svm_c": config.svm_c,
        "svm_epochs": config.svm_epochs,
    }
    if config.descriptor == "sift-bow":
        echo.update({"patch_size": config.patch_size, "step": config.step,
                     "codebook_k": config.codebook_k,
                     "codebook_max_iters": config.codebook_max_iters,
                     "descriptor_cap": config.descriptor_cap})
    if config.source == backbone.SOURCE_CONVMAP:
        echo["weights_crc"] = extractor.weights_checksum
        echo["preprocess"] = extractor.preprocess.metadata()
    return echo


# --- report comparison --------------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    rows: tuple[tuple[str, float], ...]  # (approach, accuracy fraction)
    delta_points: float  # percentage points, B minus A

    def table_text(self) -> str:
        lines = [f"{'Approach':<24}{'%':>8}", "-" * 32]
        for approach, accuracy in self.rows:
            lines.append(f"{approach:<24}{accuracy * 100:>8.2f}")
        lines.append("-" * 32)
        lines.append(f"{'Delta':<24}{self.delta_points:>+8.2f}")
        return "\n".join(lines) + "\n"


def compare_reports(report_a: EvalReport, report_b: EvalReport) -> Comparison:
    """Accuracy delta in percentage points (B minus A); both reports must
    come from the same manifest and split."""
    if report_a.dataset["manifest_hash"] != report_b.dataset["manifest_hash"]:
        raise InvalidArgumentError(
            "reports compare different datasets (manifest hashes differ)"
        )
    if report_a.split["split_hash"] != report_b.split["split_hash"]:
        raise InvalidArgumentError(
            "reports compare different train/test splits (split hashes differ)"
        )
    delta = (report_b.accuracy - report_a.accuracy) * 100.0
    return Comparison(
        rows=((report_a.approach, report_a.accuracy),
              (report_b.approach, report_b.accuracy)),
        delta_points=delta,
    )
