"""Bit-exact file formats: tensor containers, dataset manifests, reports.

Tensor container layout (all integers little-endian, documented in
docs/tensor_format.md):

    offset 0   8 bytes   magic "SPARSEV1"
    offset 8   uint32    dtype tag: 1 = float32, 2 = uint8, 3 = uint16
    offset 12  uint32    rank r (1 <= r <= 8)
    offset 16  r*uint32  dimensions, each >= 1
    ...        payload   row-major element bytes
    tail       8 bytes   BLAKE2b-64 digest of the payload

Readers reject malformed files instead of guessing; partial results are
never produced.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .confidence import LogitTensor
from .core import ClassCatalog, LabelArray, ProbabilityStack
from .errors import (
    BadHeader,
    BadMagic,
    ChecksumMismatch,
    IoFailure,
    ManifestError,
    ShapeMismatch,
    TruncatedFile,
)
from .pipeline import ClassRow, EvalReport, scatter_export

MAGIC = b"SPARSEV1"
DTYPE_FLOAT32 = 1
DTYPE_UINT8 = 2
DTYPE_UINT16 = 3

_TAG_TO_DTYPE = {
    DTYPE_FLOAT32: np.dtype("<f4"),
    DTYPE_UINT8: np.dtype("u1"),
    DTYPE_UINT16: np.dtype("<u2"),
}

_MAX_RANK = 8
_MAX_ELEMENTS = 1 << 40

MANIFEST_HEADER = "sparseval-manifest v1"

_CONFIG_OVERRIDE_KEYS = {
    "grid_steps": int,
    "iou_filter_threshold": float,
    "ece_bins": int,
    "tie_break": str,
    "rng_seed": int,
    "ranking_domain": str,
}


def _payload_checksum(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=8).digest()


@dataclass(frozen=True)
class TensorContainer:
    """One stored array plus its dtype tag."""

    dtype_tag: int
    data: np.ndarray

    def __post_init__(self):
        if self.dtype_tag not in _TAG_TO_DTYPE:
            raise ValueError(f"unknown dtype tag {self.dtype_tag}")
        arr = np.ascontiguousarray(self.data, dtype=_TAG_TO_DTYPE[self.dtype_tag])
        if arr.ndim < 1 or arr.ndim > _MAX_RANK:
            raise ValueError(f"rank {arr.ndim} outside 1..{_MAX_RANK}")
        if min(arr.shape) < 1:
            raise ValueError("every dimension must be at least 1")
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, array: np.ndarray) -> "TensorContainer":
        arr = np.asarray(array)
        for tag, dtype in _TAG_TO_DTYPE.items():
            if arr.dtype.kind == dtype.kind and arr.dtype.itemsize == dtype.itemsize:
                return cls(tag, arr)
        raise ValueError(f"unsupported array dtype {arr.dtype}")


def write_tensor(container: TensorContainer, path: str | Path) -> None:
    """Serialize a container; write then read is a bitwise identity."""
    path = Path(path)
    arr = container.data
    payload = arr.tobytes(order="C")
    header = MAGIC + struct.pack("<II", container.dtype_tag, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "wb") as fh:
            fh.write(header)
            fh.write(payload)
            fh.write(_payload_checksum(payload))
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _read_exact(fh, size: int, what: str) -> bytes:
    data = fh.read(size)
    if len(data) != size:
        raise TruncatedFile(f"file ends inside the {what}")
    return data


def read_tensor(path: str | Path) -> TensorContainer:
    """Parse and verify a container file."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = _read_exact(fh, len(MAGIC), "magic")
        if magic != MAGIC:
            raise BadMagic(f"{path} does not start with {MAGIC!r}")
        dtype_tag, rank = struct.unpack("<II", _read_exact(fh, 8, "header"))
        if dtype_tag not in _TAG_TO_DTYPE:
            raise BadHeader(f"unknown dtype tag {dtype_tag}")
        if not 1 <= rank <= _MAX_RANK:
            raise BadHeader(f"rank {rank} outside 1..{_MAX_RANK}")
        dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank, "dimensions"))
        if min(dims) < 1:
            raise BadHeader(f"zero-sized dimension in {dims}")
        n_elements = 1
        for d in dims:
            n_elements *= d
        if n_elements > _MAX_ELEMENTS:
            raise BadHeader(f"element count {n_elements} is implausibly large")
        dtype = _TAG_TO_DTYPE[dtype_tag]
        payload = _read_exact(fh, n_elements * dtype.itemsize, "payload")
        stored = _read_exact(fh, 8, "checksum")
        if fh.read(1):
            raise BadHeader(f"{path} carries trailing bytes past the checksum")
    if _payload_checksum(payload) != stored:
        raise ChecksumMismatch(f"payload checksum of {path} does not verify")
    data = np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
    return TensorContainer(dtype_tag, data)


@dataclass(frozen=True)
class FrameEntry:
    """Paths of one manifest frame, resolved to absolute at load time."""

    labels_path: Path
    probs_path: Path | None = None
    logits_path: Path | None = None
    stddev_path: Path | None = None
    samples: int = 1

    def __post_init__(self):
        if (self.probs_path is None) == (self.logits_path is None):
            raise ManifestError("a frame needs exactly one of probs or logits")
        if self.stddev_path is not None and self.logits_path is None:
            raise ManifestError("stddev only accompanies logits")
        if self.samples < 1:
            raise ManifestError("samples must be at least 1")

    @property
    def name(self) -> str:
        source = self.probs_path or self.logits_path
        return Path(source).name

    def paths(self) -> list[Path]:
        out = [p for p in (self.probs_path, self.logits_path, self.stddev_path) if p]
        out.append(self.labels_path)
        return [Path(p) for p in out]

    def load(self) -> tuple[ProbabilityStack | LogitTensor, LabelArray]:
        return load_frame(self)

    def digest(self) -> str:
        h = hashlib.sha256()
        for p in self.paths():
            h.update(p.name.encode())
            h.update(p.read_bytes())
        return h.hexdigest()


def _dequantized_probabilities(raw: np.ndarray) -> np.ndarray:
    # 16-bit fixed point, value/65535; rows are renormalized after dequantizing
    scaled = raw.astype(np.float32) / np.float32(65535.0)
    sums = scaled.sum(axis=2, keepdims=True, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        scaled = (scaled / sums).astype(np.float32)
    return scaled


def load_frame(entry: FrameEntry) -> tuple[ProbabilityStack | LogitTensor, LabelArray]:
    """Materialize a manifest frame into validated-shape in-memory types."""
    labels_box = read_tensor(entry.labels_path)
    if labels_box.dtype_tag not in (DTYPE_UINT8, DTYPE_UINT16) or labels_box.data.ndim != 1:
        raise ShapeMismatch(
            f"{entry.labels_path} must hold a rank-1 uint8 or uint16 label array"
        )
    labels = LabelArray(labels_box.data.astype(np.int64))

    if entry.probs_path is not None:
        box = read_tensor(entry.probs_path)
        if box.data.ndim != 3:
            raise ShapeMismatch(
                f"{entry.probs_path} must hold a rank-3 samples x points x classes tensor"
            )
        if box.dtype_tag == DTYPE_FLOAT32:
            stack = ProbabilityStack(box.data)
        elif box.dtype_tag == DTYPE_UINT16:
            stack = ProbabilityStack(_dequantized_probabilities(box.data))
        else:
            raise ShapeMismatch(
                f"{entry.probs_path}: probabilities must be float32 or uint16"
            )
        if entry.samples != 1 and entry.samples != stack.samples:
            raise ShapeMismatch(
                f"manifest declares {entry.samples} samples but "
                f"{entry.probs_path} holds {stack.samples}"
            )
        if stack.points != len(labels):
            raise ShapeMismatch(
                f"{entry.probs_path} covers {stack.points} points but "
                f"{entry.labels_path} covers {len(labels)}"
            )
        return stack, labels

    box = read_tensor(entry.logits_path)
    if box.dtype_tag != DTYPE_FLOAT32 or box.data.ndim != 2:
        raise ShapeMismatch(
            f"{entry.logits_path} must hold a rank-2 float32 points x classes tensor"
        )
    stddev = None
    if entry.stddev_path is not None:
        sd_box = read_tensor(entry.stddev_path)
        if sd_box.dtype_tag != DTYPE_FLOAT32 or sd_box.data.shape != box.data.shape:
            raise ShapeMismatch(
                f"{entry.stddev_path} must match the logits shape {box.data.shape}"
            )
        stddev = sd_box.data
    logits = LogitTensor(box.data, stddev)
    if logits.points != len(labels):
        raise ShapeMismatch(
            f"{entry.logits_path} covers {logits.points} points but "
            f"{entry.labels_path} covers {len(labels)}"
        )
    return logits, labels


@dataclass(frozen=True)
class Manifest:
    """A class catalog, a frame list, and optional config overrides."""

    catalog: ClassCatalog
    frames: tuple[FrameEntry, ...]
    overrides: dict

    def apply_overrides(self, config):
        from dataclasses import replace

        return replace(config, **self.overrides) if self.overrides else config


def read_manifest(path: str | Path) -> Manifest:
    """Parse a manifest and check that every referenced file exists."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read {path}: {exc}") from exc
    base = path.parent
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != MANIFEST_HEADER:
        raise ManifestError(f"{path} does not start with {MANIFEST_HEADER!r}")

    names: tuple[str, ...] | None = None
    ignore_index = 255
    overrides: dict = {}
    entries: list[FrameEntry] = []
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        rest = rest.strip()
        if key == "classes":
            names = tuple(part.strip() for part in rest.split(","))
        elif key == "ignore_index":
            ignore_index = int(rest)
        elif key in _CONFIG_OVERRIDE_KEYS:
            overrides[key] = _CONFIG_OVERRIDE_KEYS[key](rest)
        elif key == "frame":
            fields: dict[str, str] = {}
            for token in rest.split():
                tk, eq, tv = token.partition("=")
                if not eq:
                    raise ManifestError(f"malformed frame token {token!r} in {path}")
                fields[tk] = tv
            unknown = set(fields) - {"probs", "logits", "stddev", "labels", "samples"}
            if unknown:
                raise ManifestError(f"unknown frame keys {sorted(unknown)} in {path}")
            if "labels" not in fields:
                raise ManifestError(f"frame without labels in {path}")
            try:
                entries.append(
                    FrameEntry(
                        labels_path=(base / fields["labels"]).resolve(),
                        probs_path=(base / fields["probs"]).resolve()
                        if "probs" in fields
                        else None,
                        logits_path=(base / fields["logits"]).resolve()
                        if "logits" in fields
                        else None,
                        stddev_path=(base / fields["stddev"]).resolve()
                        if "stddev" in fields
                        else None,
                        samples=int(fields.get("samples", "1")),
                    )
                )
            except ManifestError as exc:
                raise ManifestError(f"{path}: {exc}") from exc
        else:
            raise ManifestError(f"unknown manifest key {key!r} in {path}")

    if names is None:
        raise ManifestError(f"{path} declares no classes")
    try:
        catalog = ClassCatalog(names, ignore_index)
    except ValueError as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    missing = [
        str(p) for entry in entries for p in entry.paths() if not p.is_file()
    ]
    if missing:
        raise ManifestError(f"{path} references missing files: {', '.join(missing)}")
    return Manifest(catalog, tuple(entries), overrides)


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    """Emit the manifest with paths relative to its own directory."""
    path = Path(path)
    base = path.parent.resolve()
    for name in manifest.catalog.names:
        if "," in name or "\n" in name:
            raise ManifestError(f"class name {name!r} cannot be stored in a manifest")
    lines = [MANIFEST_HEADER]
    lines.append("classes " + ",".join(manifest.catalog.names))
    lines.append(f"ignore_index {manifest.catalog.ignore_index}")
    for key, value in manifest.overrides.items():
        if key not in _CONFIG_OVERRIDE_KEYS:
            raise ManifestError(f"unknown config override {key!r}")
        lines.append(f"{key} {value}")
    for entry in manifest.frames:
        parts = ["frame"]
        if entry.probs_path is not None:
            parts.append(f"probs={os.path.relpath(entry.probs_path, base)}")
        if entry.logits_path is not None:
            parts.append(f"logits={os.path.relpath(entry.logits_path, base)}")
        if entry.stddev_path is not None:
            parts.append(f"stddev={os.path.relpath(entry.stddev_path, base)}")
        parts.append(f"labels={os.path.relpath(entry.labels_path, base)}")
        if entry.samples != 1:
            parts.append(f"samples={entry.samples}")
        line = " ".join(parts)
        if any(" " in p for p in parts[1:]):
            raise ManifestError("manifest paths cannot contain spaces")
        lines.append(line)
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _report_payload(report: EvalReport) -> dict:
    scatter = scatter_export(report)
    return {
        "format": "sparseval-report-v1",
        "catalog": {
            "names": list(report.class_names),
            "ignore_index": report.ignore_index,
        },
        "measures": list(report.measures),
        "classes": [
            {
                "name": row.name,
                "index": row.index,
                "iou": row.iou,
                "ause": {m: row.ause[m] for m in report.measures},
                "relevant_count": row.relevant_count,
                "filtered": row.filtered,
            }
            for row in report.rows
        ],
        "aggregates": {
            "overall_ause": dict(report.overall_ause),
            "filtered_ause": dict(report.filtered_ause),
            "miou_present": report.miou_present,
            "miou_all_classes": report.miou_all_classes,
            "ece": report.ece,
            "filter_threshold": report.filter_threshold,
        },
        "confusion_counts": report.confusion_counts,
        "scatter": {
            "threshold": scatter.threshold,
            "points": {
                m: [[name, iou_val, ause_val] for name, iou_val, ause_val in pairs]
                for m, pairs in scatter.points.items()
            },
        },
        "provenance": report.provenance,
    }


def write_report(
    report: EvalReport,
    out_dir: str | Path,
    formats: tuple[str, ...] = ("json", "csv"),
    *,
    base_name: str = "report",
) -> dict[str, Path]:
    """Write the report as JSON and/or CSV; never emits an empty file."""
    if not report.rows:
        raise ValueError("refusing to write an empty report")
    for fmt in formats:
        if fmt not in ("json", "csv"):
            raise ValueError(f"unknown report format {fmt!r}")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written: dict[str, Path] = {}
        if "json" in formats:
            json_path = out_dir / f"{base_name}.json"
            with open(json_path, "w", encoding="utf-8") as fh:
                json.dump(_report_payload(report), fh, indent=2)
                fh.write("\n")
            written["json"] = json_path
        if "csv" in formats:
            csv_path = out_dir / f"{base_name}.csv"
            with open(csv_path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                header = ["class", "iou"]
                header += [f"ause_{m}" for m in report.measures]
                header += ["filtered", "relevant_count"]
                writer.writerow(header)
                for row in report.rows:
                    writer.writerow(
                        [row.name, _fmt(row.iou)]
                        + [_fmt(row.ause[m]) for m in report.measures]
                        + [_fmt(row.filtered), row.relevant_count]
                    )
                kept = [r for r in report.rows if not r.filtered]
                kept_iou = (
                    float(np.mean([r.iou for r in kept])) if kept else None
                )
                writer.writerow(
                    ["all", _fmt(report.miou_all_classes)]
                    + [_fmt(report.overall_ause[m]) for m in report.measures]
                    + ["", sum(r.relevant_count for r in report.rows)]
                )
                writer.writerow(
                    ["all (filtered)", _fmt(kept_iou)]
                    + [_fmt(report.filtered_ause[m]) for m in report.measures]
                    + ["", sum(r.relevant_count for r in kept)]
                )
            written["csv"] = csv_path
        return written
    except OSError as exc:
        raise IoFailure(f"cannot write report files under {out_dir}: {exc}") from exc


def write_scatter_csv(report: EvalReport, path: str | Path) -> Path:
    """One row per defined class per measure, with the outlier threshold."""
    scatter = scatter_export(report)
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["measure", "class", "iou", "ause", "filter_threshold"])
            for m, pairs in scatter.points.items():
                for name, iou_val, ause_val in pairs:
                    writer.writerow(
                        [m, name, _fmt(iou_val), _fmt(ause_val), _fmt(scatter.threshold)]
                    )
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def read_report(path: str | Path) -> EvalReport:
    """Parse a JSON report back into the in-memory form."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "sparseval-report-v1":
        raise ValueError(f"{path} is not a sparseval report")
    measures = tuple(payload["measures"])
    rows = [
        ClassRow(
            name=entry["name"],
            index=entry["index"],
            iou=entry["iou"],
            ause={m: entry["ause"][m] for m in measures},
            relevant_count=entry["relevant_count"],
            filtered=entry["filtered"],
        )
        for entry in payload["classes"]
    ]
    agg = payload["aggregates"]
    return EvalReport(
        class_names=tuple(payload["catalog"]["names"]),
        ignore_index=payload["catalog"]["ignore_index"],
        measures=measures,
        rows=rows,
        overall_ause={m: agg["overall_ause"][m] for m in measures},
        filtered_ause={m: agg["filtered_ause"][m] for m in measures},
        miou_present=agg["miou_present"],
        miou_all_classes=agg["miou_all_classes"],
        ece=agg["ece"],
        filter_threshold=agg["filter_threshold"],
        confusion_counts=[[int(v) for v in row] for row in payload["confusion_counts"]],
        provenance=payload["provenance"],
    )
