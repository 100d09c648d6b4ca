"""Command-line orchestration of the full workflow.

Subcommands mirror the pipeline's natural checkpoints so the expensive
stages are resumable:

    extract-maps    populate the map cache for a dataset
    dump-map        write one image's map set to a CDMD file
    train-codebook  train and save a visual codebook
    run             run one (descriptor, source) experiment cell
    compare         print the delta table between two run reports

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 integrity
error. The CONVDESC_CACHE_DIR environment variable overrides the cache
location.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import backbone, bow, formats, harness
from .errors import (ConfigurationError, FormatError, IntegrityError,
                     InvalidArgumentError)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTEGRITY = 3

LAYOUT_FLAGS = {"multiclass": harness.LAYOUT_MULTICLASS,
                "posneg": harness.LAYOUT_BINARY}


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_dataset_args(parser):
    parser.add_argument("--dataset", required=True, help="dataset root directory")
    parser.add_argument("--layout", choices=sorted(LAYOUT_FLAGS), default="multiclass",
                        help="dataset directory layout")


def _add_split_args(parser):
    parser.add_argument("--train-per-class", type=int, required=True,
                        help="training images sampled per class")
    parser.add_argument("--seed", type=int, default=0, help="master seed")


def _add_cache_args(parser):
    parser.add_argument("--cache-dir", default=None,
                        help=f"cache location (default ./convdesc-cache; "
                             f"${harness.CACHE_ENV_VAR} overrides)")
    parser.add_argument("--workers", type=int, default=None,
                        help="parallel feature extraction workers")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="convdesc",
                     description="Hand-crafted descriptors over CNN "
                                 "convolutional maps vs. grayscale input.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-maps", parents=[], help="populate the map cache")
    _add_dataset_args(p)
    p.add_argument("--source", choices=harness.SOURCES, default="convmap")
    p.add_argument("--weights", default=None, help="CDWT weight file")
    _add_cache_args(p)

    p = sub.add_parser("dump-map", help="write one image's maps to a CDMD file")
    p.add_argument("--image", required=True)
    p.add_argument("--source", choices=harness.SOURCES, default="convmap")
    p.add_argument("--weights", default=None, help="CDWT weight file")
    p.add_argument("--out", required=True, help="output .cdmd path")

    p = sub.add_parser("train-codebook", help="train and save a visual codebook")
    _add_dataset_args(p)
    _add_split_args(p)
    p.add_argument("--source", choices=harness.SOURCES, default="convmap")
    p.add_argument("--weights", default=None)
    p.add_argument("--k", type=int, default=bow.DEFAULT_K, help="codebook size")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--descriptor-cap", type=int, default=200_000,
                   help="max descriptors sampled for training")
    p.add_argument("--patch-size", type=int, default=16)
    p.add_argument("--step", type=int, default=8)
    p.add_argument("--out", required=True, help="output .cdcb path")
    _add_cache_args(p)

    p = sub.add_parser("run", help="run one experiment cell")
    _add_dataset_args(p)
    _add_split_args(p)
    p.add_argument("--descriptor", choices=harness.DESCRIPTORS, required=True)
    p.add_argument("--source", choices=harness.SOURCES, required=True)
    p.add_argument("--weights", default=None)
    p.add_argument("--codebook", default=None,
                   help="pretrained codebook file (sift-bow only)")
    p.add_argument("--k", type=int, default=bow.DEFAULT_K)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--descriptor-cap", type=int, default=200_000)
    p.add_argument("--patch-size", type=int, default=16)
    p.add_argument("--step", type=int, default=8)
    p.add_argument("--svm-c", type=float, default=1.0)
    p.add_argument("--svm-epochs", type=int, default=1000)
    p.add_argument("--out", required=True, help="report output directory")
    _add_cache_args(p)

    p = sub.add_parser("compare", help="delta table between two run reports")
    p.add_argument("report_a", help="report.json of the baseline run")
    p.add_argument("report_b", help="report.json of the run to compare")

    return parser


def cmd_extract_maps(args) -> int:
    manifest = harness.scan_dataset(args.dataset, LAYOUT_FLAGS[args.layout])
    config = harness.PipelineConfig(descriptor="hlac", source=args.source,
                                    weights_path=args.weights)
    cache = harness.FeatureCache(harness.resolve_cache_dir(args.cache_dir))
    extractor = harness.FeatureExtractor(config, cache)
    root = Path(manifest.root)
    total = len(manifest.entries)
    for i, (path, _) in enumerate(manifest.entries, start=1):
        before = cache.hits
        extractor.map_set(root / path, write_cache=True)
        status = "cached" if cache.hits > before else "extracted"
        print(f"[{i}/{total}] {path} ({status})")
    print(f"done: {cache.misses} extracted, {cache.hits} cache hits")
    return EXIT_OK


def cmd_dump_map(args) -> int:
    config = harness.PipelineConfig(descriptor="hlac", source=args.source,
                                    weights_path=args.weights)
    raster = backbone.decode_image(args.image)
    if args.source == backbone.SOURCE_CONVMAP:
        if not args.weights:
            raise ConfigurationError("--weights is required for source 'convmap'")
        store = backbone.load_weights(args.weights)
        maps = backbone.forward_to_pool2(
            backbone.preprocess_image(raster), store)
    else:
        maps = backbone.grayscale_map_set(raster)
    formats.write_map(args.out, maps.maps.data)
    h, w, c = maps.maps.shape
    print(f"wrote {h}x{w}x{c} map dump to {args.out}")
    return EXIT_OK


def cmd_train_codebook(args) -> int:
    manifest = harness.scan_dataset(args.dataset, LAYOUT_FLAGS[args.layout])
    config = harness.PipelineConfig(
        descriptor="sift-bow", source=args.source, weights_path=args.weights,
        codebook_k=args.k, codebook_max_iters=args.max_iters,
        descriptor_cap=args.descriptor_cap, patch_size=args.patch_size,
        step=args.step, seed=args.seed, workers=args.workers)
    cache = harness.FeatureCache(harness.resolve_cache_dir(args.cache_dir))
    extractor = harness.FeatureExtractor(config, cache)
    seeds = config.seeds()
    train, _ = harness.split(manifest,
                             harness.SplitSpec(args.train_per_class, args.seed))
    root = Path(manifest.root)
    stacks = [extractor.descriptors(root / path) for path, _ in train]
    pooled = np.concatenate(stacks, axis=0)
    pooled = bow.subsample_descriptors(pooled, args.descriptor_cap,
                                       seeds["subsample"])
    if len(pooled) < args.k:
        print(f"convdesc: error: {len(pooled)} descriptors available but "
              f"k={args.k}", file=sys.stderr)
        return EXIT_DATA
    codebook = bow.train_codebook(pooled, k=args.k, max_iters=args.max_iters,
                                  seed=seeds["codebook"])
    formats.write_codebook(args.out, codebook.centroids)
    print(f"k={codebook.k} iterations={codebook.meta.iterations} "
          f"distortion={codebook.meta.distortion:.6g}")
    print(f"wrote codebook to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    manifest = harness.scan_dataset(args.dataset, LAYOUT_FLAGS[args.layout])
    config = harness.PipelineConfig(
        descriptor=args.descriptor, source=args.source,
        weights_path=args.weights, codebook_path=args.codebook,
        codebook_k=args.k, codebook_max_iters=args.max_iters,
        descriptor_cap=args.descriptor_cap, patch_size=args.patch_size,
        step=args.step, svm_c=args.svm_c, svm_epochs=args.svm_epochs,
        seed=args.seed, workers=args.workers)
    split_spec = harness.SplitSpec(args.train_per_class, args.seed)
    report = harness.run_experiment(manifest, split_spec, config,
                                    cache_dir=args.cache_dir)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "table.txt").write_text(report.table_text())
    (out / "confusion.csv").write_text(report.confusion_csv())
    print(f"{report.approach}: accuracy {report.accuracy * 100:.2f}% "
          f"(mean per-class recall {report.mean_per_class_recall * 100:.2f}%)")
    print(f"report written to {out / 'report.json'}")
    return EXIT_OK


def cmd_compare(args) -> int:
    reports = []
    for path in (args.report_a, args.report_b):
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"report file not found: {path}")
        reports.append(harness.EvalReport.from_json(path.read_text()))
    comparison = harness.compare_reports(*reports)
    print(comparison.table_text(), end="")
    return EXIT_OK


COMMANDS = {
    "extract-maps": cmd_extract_maps,
    "dump-map": cmd_dump_map,
    "train-codebook": cmd_train_codebook,
    "run": cmd_run,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, InvalidArgumentError) as exc:
        print(f"convdesc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrityError as exc:
        print(f"convdesc: integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (FormatError, OSError) as exc:
        print(f"convdesc: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
