"""Dataset-level orchestration: pooled evaluation, filtering, ECE, scatter.

Frames are pooled into one logical point set before any per-class ranking, so
rare classes are judged on every point they have in the split rather than on
frame-sized fragments. Confusion counts are accumulated per frame and merged,
which makes the result independent of how the split is partitioned.
"""
from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .confidence import (
    LogitTensor,
    aggregate_samples,
    derive_stream_seed,
    entropy_confidence,
    max_softmax_confidence,
    sample_probabilistic_logits,
    softmax,
)
from .core import (
    ClassCatalog,
    ConfidenceVector,
    EvalConfig,
    LabelArray,
    MEASURES,
    ProbabilityStack,
    validate_inputs,
)
from .errors import AllClassesFiltered, EmptySplit, SparsevalError
from .segmetrics import confusion, iou, merge, miou, miou_with_absent_as_zero
from .sparsification import ause, class_curves_by_measure


@dataclass(frozen=True)
class ArrayFrame:
    """An in-memory dataset frame; file-backed frames come from the io module."""

    labels: LabelArray
    probs: ProbabilityStack | None = None
    logits: LogitTensor | None = None
    samples: int = 1
    name: str = "frame"

    def __post_init__(self):
        if (self.probs is None) == (self.logits is None):
            raise ValueError("provide exactly one of probs or logits")
        if self.samples < 1:
            raise ValueError("samples must be at least 1")

    def load(self) -> tuple[ProbabilityStack | LogitTensor, LabelArray]:
        payload = self.probs if self.probs is not None else self.logits
        return payload, self.labels

    def digest(self) -> str:
        h = hashlib.sha256()
        arrays = [self.labels.values]
        if self.probs is not None:
            arrays.append(self.probs.data)
        else:
            arrays.append(self.logits.values)
            if self.logits.stddev is not None:
                arrays.append(self.logits.stddev)
        for arr in arrays:
            h.update(str(arr.shape).encode())
            h.update(str(arr.dtype).encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


@dataclass
class ClassRow:
    """One report row; ause maps measure name to a value or None when undefined."""

    name: str
    index: int
    iou: float | None
    ause: dict[str, float | None]
    relevant_count: int
    filtered: bool = False


@dataclass
class EvalReport:
    """Everything the split evaluation produces, serializable without arrays."""

    class_names: tuple[str, ...]
    ignore_index: int
    measures: tuple[str, ...]
    rows: list[ClassRow]
    overall_ause: dict[str, float | None]
    filtered_ause: dict[str, float | None]
    miou_present: float | None
    miou_all_classes: float | None
    ece: float | None
    filter_threshold: float
    confusion_counts: list[list[int]]
    provenance: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ScatterExport:
    """(IoU, AUSE) pairs per defined class, plus the outlier threshold."""

    threshold: float
    points: dict[str, list[tuple[str, float, float]]]


def _frame_sources(dataset) -> list:
    frames = getattr(dataset, "frames", None)
    sources = list(frames) if frames is not None else list(dataset)
    if not sources:
        raise EmptySplit("the dataset references no frames")
    return sources


def _frame_name(source, index: int) -> str:
    return getattr(source, "name", None) or f"frame_{index:04d}"


def _reduce_frame(source, index: int, catalog: ClassCatalog, config: EvalConfig):
    """Load one frame and collapse it to pooled per-point columns."""
    name = _frame_name(source, index)
    try:
        payload, labels = source.load()
        if isinstance(payload, LogitTensor):
            if payload.stddev is not None:
                samples = int(getattr(source, "samples", 1))
                stack = sample_probabilistic_logits(
                    payload, samples, seed=derive_stream_seed(config.rng_seed, index)
                )
                stack = aggregate_samples(stack)
            else:
                stack = softmax(payload)
        else:
            stack = aggregate_samples(payload)
        validate_inputs(stack, labels, catalog)
        conf_sm, pred = max_softmax_confidence(stack)
        conf_ent = entropy_confidence(stack)
        counts = confusion(pred, labels, catalog)
    except SparsevalError as exc:
        raise type(exc)(f"frame {index} ({name}): {exc}") from exc
    keep = labels.values != catalog.ignore_index
    return (
        counts,
        labels.values[keep].astype(np.int64),
        pred.values[keep],
        conf_sm.scores[keep],
        conf_ent.scores[keep],
        {"name": name, "digest": source.digest()},
    )


def binned_ece(scores: np.ndarray, correct: np.ndarray, bins: int) -> float:
    """Occupancy-weighted mean |accuracy - confidence| over equal-width bins."""
    if bins < 1:
        raise ValueError("bins must be at least 1")
    if scores.size == 0:
        raise EmptySplit("no evaluable points for the calibration error")
    idx = np.minimum((scores * bins).astype(np.int64), bins - 1)
    count = np.bincount(idx, minlength=bins).astype(np.float64)
    conf_sum = np.bincount(idx, weights=scores, minlength=bins)
    acc_sum = np.bincount(idx, weights=correct.astype(np.float64), minlength=bins)
    occupied = count > 0
    gaps = np.abs(
        acc_sum[occupied] / count[occupied] - conf_sum[occupied] / count[occupied]
    )
    return float((count[occupied] * gaps).sum() / scores.size)


def ece(
    probs: ProbabilityStack,
    gt: LabelArray,
    bins: int,
    *,
    ignore_index: int | None = None,
) -> float:
    """Expected calibration error of the max-softmax confidence.

    Equal-width bins over [0, 1]; empty bins contribute nothing.
    """
    conf, pred = max_softmax_confidence(probs)
    scores = conf.scores
    correct = pred.values == gt.values
    if ignore_index is not None:
        keep = gt.values != ignore_index
        scores = scores[keep]
        correct = correct[keep]
    return binned_ece(scores, correct, bins)


def filter_and_aggregate(report: EvalReport, threshold: float | None = None) -> EvalReport:
    """Mark outlier rows (IoU strictly below the threshold, or undefined) and
    recompute the filtered mean AUSE over the remaining rows.

    The unfiltered aggregates are kept untouched so both views stay available.
    """
    thr = report.filter_threshold if threshold is None else float(threshold)
    for row in report.rows:
        row.filtered = row.iou is None or row.iou < thr
    kept = [row for row in report.rows if not row.filtered]
    report.filter_threshold = thr
    if not kept:
        report.filtered_ause = {m: None for m in report.measures}
        raise AllClassesFiltered(
            f"every class falls below the IoU threshold {thr}"
        )
    filtered: dict[str, float | None] = {}
    for m in report.measures:
        vals = [row.ause[m] for row in kept if row.ause[m] is not None]
        filtered[m] = float(np.mean(vals)) if vals else None
    report.filtered_ause = filtered
    return report


def scatter_export(report: EvalReport) -> ScatterExport:
    """Plot-ready (IoU, AUSE) pairs; rows without a defined AUSE are dropped."""
    points: dict[str, list[tuple[str, float, float]]] = {}
    for m in report.measures:
        pairs = []
        for row in report.rows:
            if row.ause[m] is None or row.iou is None:
                continue
            pairs.append((row.name, row.iou, row.ause[m]))
        points[m] = pairs
    return ScatterExport(report.filter_threshold, points)


def evaluate_split(
    dataset,
    catalog: ClassCatalog | None = None,
    config: EvalConfig | None = None,
    *,
    measures: tuple[str, ...] = MEASURES,
    threads: int = 1,
) -> EvalReport:
    """Evaluate a whole validation split into one report.

    ``dataset`` is a manifest or any iterable of frame sources (objects with
    ``load()`` and ``digest()``). All frames are pooled, ignored points are
    dropped, and IoU, per-class AUSE under each measure, both mIoU
    conventions, the ECE baseline, and the outlier filter are computed.
    Deterministic for a given frame order and config, whatever ``threads`` is.
    """
    sources = _frame_sources(dataset)
    if catalog is None:
        catalog = getattr(dataset, "catalog", None)
    if catalog is None:
        raise ValueError("a class catalog is required")
    config = config or EvalConfig()
    for m in measures:
        if m not in MEASURES:
            raise ValueError(f"unknown confidence measure {m!r}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reduced = list(
                pool.map(
                    lambda pair: _reduce_frame(pair[1], pair[0], catalog, config),
                    enumerate(sources),
                )
            )
    else:
        reduced = [
            _reduce_frame(src, i, catalog, config) for i, src in enumerate(sources)
        ]

    counts = reduced[0][0]
    for item in reduced[1:]:
        counts = merge(counts, item[0])

    gt_values = np.concatenate([item[1] for item in reduced])
    if gt_values.size == 0:
        raise EmptySplit("all points in the split carry the ignore label")
    gt_pool = LabelArray(gt_values)
    pred_pool = LabelArray(np.concatenate([item[2] for item in reduced]))
    confs: dict[str, ConfidenceVector] = {}
    if "max_softmax" in measures:
        confs["max_softmax"] = ConfidenceVector(
            "max_softmax", np.concatenate([item[3] for item in reduced])
        )
    if "neg_entropy" in measures:
        confs["neg_entropy"] = ConfidenceVector(
            "neg_entropy", np.concatenate([item[4] for item in reduced])
        )

    iou_vec = iou(counts)
    curve_sets = class_curves_by_measure(pred_pool, gt_pool, confs, catalog, config)

    rows: list[ClassRow] = []
    for class_index, name in enumerate(catalog.names):
        iou_val = (
            float(iou_vec.values[class_index]) if iou_vec.present[class_index] else None
        )
        pairs = curve_sets[class_index]
        if pairs is None:
            row_ause: dict[str, float | None] = {m: None for m in measures}
            rel = 0
        else:
            row_ause = {m: ause(pairs[m]) for m in measures}
            rel = next(iter(pairs.values())).relevant_count
        rows.append(ClassRow(name, class_index, iou_val, row_ause, rel))

    overall: dict[str, float | None] = {}
    for m in measures:
        vals = [row.ause[m] for row in rows if row.ause[m] is not None]
        overall[m] = float(np.mean(vals)) if vals else None

    # the ECE baseline always bins the max-softmax confidence, whatever
    # measures were requested for the curves
    sm_scores = np.concatenate([item[3] for item in reduced])
    ece_val = binned_ece(
        sm_scores, pred_pool.values == gt_pool.values, config.ece_bins
    )

    try:
        miou_present = miou(iou_vec)
    except SparsevalError:
        miou_present = None

    report = EvalReport(
        class_names=catalog.names,
        ignore_index=catalog.ignore_index,
        measures=tuple(measures),
        rows=rows,
        overall_ause=overall,
        filtered_ause={m: None for m in measures},
        miou_present=miou_present,
        miou_all_classes=miou_with_absent_as_zero(iou_vec),
        ece=ece_val,
        filter_threshold=config.iou_filter_threshold,
        confusion_counts=[[int(v) for v in row] for row in counts.counts],
        provenance={
            "config": {
                "grid_steps": config.grid_steps,
                "iou_filter_threshold": config.iou_filter_threshold,
                "ece_bins": config.ece_bins,
                "tie_break": config.tie_break,
                "rng_seed": config.rng_seed,
                "ranking_domain": config.ranking_domain,
            },
            "catalog": {"names": list(catalog.names), "ignore_index": catalog.ignore_index},
            "frames": [item[5] for item in reduced],
            "points_evaluated": int(len(gt_pool)),
        },
    )
    try:
        filter_and_aggregate(report, config.iou_filter_threshold)
    except AllClassesFiltered:
        # the strict operation raises; the pipeline keeps the report usable
        pass
    return report


def per_frame_class_ause(
    dataset,
    catalog: ClassCatalog | None = None,
    config: EvalConfig | None = None,
    *,
    measures: tuple[str, ...] = MEASURES,
) -> list[dict]:
    """Diagnostic per-frame AUSE values; not part of the headline numbers."""
    sources = _frame_sources(dataset)
    if catalog is None:
        catalog = getattr(dataset, "catalog", None)
    if catalog is None:
        raise ValueError("a class catalog is required")
    config = config or EvalConfig()
    out = []
    for index, source in enumerate(sources):
        item = _reduce_frame(source, index, catalog, config)
        _, gt_vals, pred_vals, sm, ent, info = item
        if gt_vals.size == 0:
            out.append({"frame": info["name"], "ause": {m: {} for m in measures}})
            continue
        gt_arr = LabelArray(gt_vals)
        pred_arr = LabelArray(pred_vals)
        confs = {}
        if "max_softmax" in measures:
            confs["max_softmax"] = ConfidenceVector("max_softmax", sm)
        if "neg_entropy" in measures:
            confs["neg_entropy"] = ConfidenceVector("neg_entropy", ent)
        curve_sets = class_curves_by_measure(pred_arr, gt_arr, confs, catalog, config)
        per_measure: dict[str, dict[str, float | None]] = {m: {} for m in confs}
        for class_index, name in enumerate(catalog.names):
            pairs = curve_sets[class_index]
            for m in confs:
                per_measure[m][name] = None if pairs is None else ause(pairs[m])
        out.append({"frame": info["name"], "ause": per_measure})
    return out
