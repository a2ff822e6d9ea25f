"""Command-line front end for scripted evaluation and plot-data export.

Exit codes: 0 success, 1 usage error, 2 input error, 3 internal error.
Failures print one machine-parseable line to stderr:
``sparseval: error: <Kind>: <detail>``.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as container_io
from .core import ClassCatalog, ConfidenceVector, EvalConfig, LabelArray, MEASURES
from .errors import SparsevalError, SpecInvalid
from .pipeline import evaluate_split, per_frame_class_ause
from .sparsification import FractionGrid, curve_pair
from .synth import ScenarioSpec, degenerate_class_scenario, generate, write_dataset

_MEASURE_FLAGS = {"softmax": "max_softmax", "entropy": "neg_entropy"}

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to status 2; usage errors are 1
        self.exit(EXIT_USAGE, f"{self.prog}: usage error: {message}\n")


def _add_common_flags(p: argparse.ArgumentParser, *, with_measure: bool = True):
    p.add_argument("--manifest", required=True, help="dataset manifest path")
    p.add_argument("--out-dir", help="directory for output files")
    if with_measure:
        p.add_argument(
            "--measure",
            choices=("softmax", "entropy", "both"),
            default="both",
            help="confidence measure(s) to evaluate",
        )
    p.add_argument("--grid-steps", type=int, help="sparsification grid resolution")
    p.add_argument("--filter-threshold", type=float, help="IoU outlier threshold")
    p.add_argument(
        "--ranking-domain",
        choices=("subset", "global"),
        help="rank within the class-relevant subset or the whole point set",
    )
    p.add_argument(
        "--tie-break",
        choices=("stable_index", "seeded_random"),
        help="how equal confidences are ordered",
    )
    p.add_argument("--seed", type=int, help="seed for sampling and tie shuffling")
    p.add_argument("--threads", type=int, default=1, help="worker threads")


def _resolved_config(manifest: container_io.Manifest, args) -> EvalConfig:
    config = manifest.apply_overrides(EvalConfig())
    updates = {}
    if getattr(args, "grid_steps", None) is not None:
        updates["grid_steps"] = args.grid_steps
    if getattr(args, "filter_threshold", None) is not None:
        updates["iou_filter_threshold"] = args.filter_threshold
    if getattr(args, "ranking_domain", None) is not None:
        updates["ranking_domain"] = args.ranking_domain
    if getattr(args, "tie_break", None) is not None:
        updates["tie_break"] = args.tie_break
    if getattr(args, "seed", None) is not None:
        updates["rng_seed"] = args.seed
    if getattr(args, "ece_bins", None) is not None:
        updates["ece_bins"] = args.ece_bins
    return replace(config, **updates) if updates else config


def _selected_measures(flag: str) -> tuple[str, ...]:
    if flag == "both":
        return MEASURES
    return (_MEASURE_FLAGS[flag],)


def _cmd_evaluate(args) -> int:
    manifest = container_io.read_manifest(args.manifest)
    config = _resolved_config(manifest, args)
    measures = _selected_measures(args.measure)
    report = evaluate_split(
        manifest, manifest.catalog, config, measures=measures, threads=args.threads
    )
    if args.per_frame:
        report.provenance["per_frame_ause"] = per_frame_class_ause(
            manifest, manifest.catalog, config, measures=measures
        )
    out_dir = Path(args.out_dir or ".")
    formats = ("json", "csv") if args.format == "both" else (args.format,)
    written = container_io.write_report(report, out_dir, formats)
    if "csv" in formats:
        written["scatter"] = container_io.write_scatter_csv(
            report, out_dir / "scatter.csv"
        )
    for kind, path in written.items():
        print(f"{kind}: {path}")
    return EXIT_OK


def _cmd_curves(args) -> int:
    manifest = container_io.read_manifest(args.manifest)
    config = _resolved_config(manifest, args)
    measure = _MEASURE_FLAGS[args.measure]
    catalog = manifest.catalog
    class_index = catalog.index_of(args.class_name)

    # pool the split exactly like evaluate does, then keep one class
    from .pipeline import _reduce_frame

    reduced = [
        _reduce_frame(src, i, catalog, config) for i, src in enumerate(manifest.frames)
    ]
    gt = LabelArray(np.concatenate([item[1] for item in reduced]))
    pred = LabelArray(np.concatenate([item[2] for item in reduced]))
    column = 3 if measure == "max_softmax" else 4
    conf = ConfidenceVector(
        measure, np.concatenate([item[column] for item in reduced])
    )
    pair = curve_pair(
        pred,
        gt,
        conf,
        catalog,
        class_index,
        FractionGrid(config.grid_steps),
        tie_break=config.tie_break,
        seed=config.rng_seed,
        ranking_domain=config.ranking_domain,
    )
    lines = ["fraction,sparsification_error,oracle_error,difference"]
    for f, s, o in zip(pair.grid.steps, pair.sparsification_error, pair.oracle_error):
        f, s, o = float(f), float(s), float(o)
        lines.append(f"{f!r},{s!r},{o!r},{(s - o)!r}")
    text = "\n".join(lines) + "\n"
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"curves_{args.class_name}_{measure}.csv"
        path.write_text(text, encoding="utf-8")
        print(f"csv: {path}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _spec_from_json(path: str, seed_override: int | None) -> tuple[ScenarioSpec, int]:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise SpecInvalid("a scenario spec file must hold one JSON object")
    frames = int(raw.pop("frames", 1))
    known = {
        "n",
        "class_frequencies",
        "per_class_accuracy",
        "calibration_mode",
        "gamma",
        "confusion_profile",
        "seed",
        "confidence_spread",
        "class_names",
    }
    unknown = set(raw) - known
    if unknown:
        raise SpecInvalid(f"unknown scenario fields {sorted(unknown)}")
    if seed_override is not None:
        raw["seed"] = seed_override
    try:
        spec = ScenarioSpec(
            n=int(raw["n"]),
            class_frequencies=tuple(raw["class_frequencies"]),
            per_class_accuracy=tuple(raw["per_class_accuracy"]),
            calibration_mode=raw.get("calibration_mode", "calibrated"),
            gamma=float(raw.get("gamma", 1.0)),
            confusion_profile=raw.get("confusion_profile"),
            seed=int(raw.get("seed", 0)),
            confidence_spread=float(raw.get("confidence_spread", 0.15)),
            class_names=tuple(raw["class_names"]) if raw.get("class_names") else None,
        )
    except (KeyError, TypeError) as exc:
        raise SpecInvalid(f"scenario spec is missing or mistypes a field: {exc}") from exc
    return spec, frames


def _cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    if args.preset == "degenerate-class":
        gt, probs = degenerate_class_scenario(seed=args.seed or 0)
        catalog = ClassCatalog(("class_00", "class_01", "class_02"))
        manifest_path = write_dataset(gt, probs, catalog, out_dir, frames=args.frames)
    else:
        spec, spec_frames = _spec_from_json(args.spec, args.seed)
        frames = args.frames if args.frames != 1 else spec_frames
        gt, probs = generate(spec)
        manifest_path = write_dataset(
            gt, probs, spec.catalog(), out_dir, frames=frames
        )
    print(f"manifest: {manifest_path}")
    return EXIT_OK


def _cmd_ece(args) -> int:
    manifest = container_io.read_manifest(args.manifest)
    config = _resolved_config(manifest, args)
    from .pipeline import _reduce_frame, binned_ece

    reduced = [
        _reduce_frame(src, i, manifest.catalog, config)
        for i, src in enumerate(manifest.frames)
    ]
    gt = np.concatenate([item[1] for item in reduced])
    pred = np.concatenate([item[2] for item in reduced])
    scores = np.concatenate([item[3] for item in reduced])
    print(repr(binned_ece(scores, pred == gt, config.ece_bins)))
    return EXIT_OK


def _cmd_inspect(args) -> int:
    path = Path(args.path)
    if not path.exists():
        raise FileNotFoundError(f"{path} does not exist")
    with path.open("rb") as fh:
        head = fh.read(len(container_io.MAGIC))
    if head == container_io.MAGIC:
        box = container_io.read_tensor(path)
        dtype_names = {1: "float32", 2: "uint8", 3: "uint16"}
        print(f"tensor: {path}")
        print(f"dtype: {dtype_names[box.dtype_tag]}")
        print(f"shape: {'x'.join(str(d) for d in box.data.shape)}")
        print(f"elements: {box.data.size}")
        print("checksum: ok")
        return EXIT_OK
    manifest = container_io.read_manifest(path)
    print(f"manifest: {path}")
    print(f"classes: {manifest.catalog.k} ({', '.join(manifest.catalog.names)})")
    print(f"ignore_index: {manifest.catalog.ignore_index}")
    if manifest.overrides:
        print(f"overrides: {manifest.overrides}")
    print(f"frames: {len(manifest.frames)}")
    for entry in manifest.frames:
        kind = "probs" if entry.probs_path else "logits"
        extra = " +stddev" if entry.stddev_path else ""
        print(f"  {entry.name}: {kind}{extra} samples={entry.samples}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparseval", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="full-split report with both aggregates")
    _add_common_flags(p)
    p.add_argument("--format", choices=("csv", "json", "both"), default="both")
    p.add_argument("--ece-bins", type=int, help="bins for the ECE baseline")
    p.add_argument(
        "--per-frame",
        action="store_true",
        help="embed diagnostic per-frame AUSE values in the JSON report",
    )
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("curves", help="per-fraction curve data for one class")
    _add_common_flags(p, with_measure=False)
    p.add_argument("--class", dest="class_name", required=True, help="class name")
    p.add_argument(
        "--measure",
        choices=("softmax", "entropy"),
        default="softmax",
        help="confidence measure behind the ranking",
    )
    p.set_defaults(func=_cmd_curves)

    p = sub.add_parser("synth", help="write a synthetic scenario dataset")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--spec", help="scenario description (JSON)")
    group.add_argument("--preset", choices=("degenerate-class",))
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, help="overrides the scenario seed")
    p.add_argument("--frames", type=int, default=1, help="files to split points into")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ece", help="expected calibration error of the split")
    _add_common_flags(p, with_measure=False)
    p.add_argument("--bins", dest="ece_bins", type=int, help="bin count")
    p.set_defaults(func=_cmd_ece)

    p = sub.add_parser("inspect", help="describe a tensor container or manifest")
    p.add_argument("--path", required=True)
    p.set_defaults(func=_cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (SparsevalError, FileNotFoundError, IsADirectoryError, json.JSONDecodeError) as exc:
        kind = type(exc).__name__
        detail = " ".join(str(exc).split())
        print(f"sparseval: error: {kind}: {detail}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - defensive
        kind = type(exc).__name__
        detail = " ".join(str(exc).split())
        print(f"sparseval: error: {kind}: {detail}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
