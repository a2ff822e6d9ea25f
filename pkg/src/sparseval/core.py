"""Domain types, input validation, and the shared evaluation configuration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, LabelOutOfRange, NotADistribution, UnknownClass

ROW_SUM_TOL = 1e-5
DEFAULT_IGNORE_INDEX = 255

MEASURES = ("max_softmax", "neg_entropy")
TIE_BREAKS = ("stable_index", "seeded_random")
RANKING_DOMAINS = ("subset", "global")

_SEED_MASK = 0xFFFF_FFFF_FFFF_FFFF

# points per block when scanning large stacks
_VALIDATE_CHUNK = 1 << 20


@dataclass(frozen=True)
class ClassCatalog:
    """Ordered class names plus the label value excluded from all metrics.

    The evaluated class count k is always taken from here, never inferred
    from data, so classes absent from a frame still get report rows.
    """

    names: tuple[str, ...]
    ignore_index: int = DEFAULT_IGNORE_INDEX

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        if len(self.names) < 2:
            raise ValueError("a catalog needs at least two classes")
        if len(set(self.names)) != len(self.names):
            raise ValueError("class names must be unique")
        if 0 <= self.ignore_index < len(self.names):
            raise ValueError(
                f"ignore_index {self.ignore_index} collides with an evaluated class"
            )

    @property
    def k(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownClass(f"class {name!r} is not in the catalog") from None


@dataclass(frozen=True)
class LabelArray:
    """Per-point integer class labels, ground truth or predictions."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.dtype.kind not in "iu":
            raise ValueError("labels must be integers")
        if arr.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if arr.shape[0] < 1:
            raise ValueError("labels must cover at least one point")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class ProbabilityStack:
    """Per-sample class probabilities with shape (samples, points, classes)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        if arr.ndim != 3:
            raise ValueError("a probability stack is samples x points x classes")
        if min(arr.shape) < 1:
            raise ValueError(f"degenerate stack shape {arr.shape}")
        object.__setattr__(self, "data", arr)

    @property
    def samples(self) -> int:
        return int(self.data.shape[0])

    @property
    def points(self) -> int:
        return int(self.data.shape[1])

    @property
    def classes(self) -> int:
        return int(self.data.shape[2])


@dataclass(frozen=True)
class ConfidenceVector:
    """Per-point scores in [0, 1] under one measure; higher means more trusted."""

    measure: str
    scores: np.ndarray

    def __post_init__(self):
        if self.measure not in MEASURES:
            raise ValueError(f"unknown confidence measure {self.measure!r}")
        arr = np.asarray(self.scores, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("confidence scores must be one-dimensional")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("confidence scores must stay within [0, 1]")
        object.__setattr__(self, "scores", arr)

    def __len__(self) -> int:
        return int(self.scores.shape[0])


@dataclass(frozen=True)
class EvalConfig:
    """Knobs shared by the whole evaluation chain.

    grid_steps removal fractions j/grid_steps, j = 0..grid_steps-1, sample the
    sparsification curves; iou_filter_threshold marks outlier classes
    (strictly below); tie_break decides how equal confidences are ordered.
    """

    grid_steps: int = 100
    iou_filter_threshold: float = 0.03
    ece_bins: int = 15
    tie_break: str = "stable_index"
    rng_seed: int = 0
    ranking_domain: str = "subset"

    def __post_init__(self):
        if self.grid_steps < 2:
            raise ValueError("grid_steps must be at least 2")
        if not 0.0 <= self.iou_filter_threshold < 1.0:
            raise ValueError("iou_filter_threshold must lie in [0, 1)")
        if self.ece_bins < 1:
            raise ValueError("ece_bins must be at least 1")
        if self.tie_break not in TIE_BREAKS:
            raise ValueError(f"tie_break must be one of {TIE_BREAKS}")
        if self.ranking_domain not in RANKING_DOMAINS:
            raise ValueError(f"ranking_domain must be one of {RANKING_DOMAINS}")
        object.__setattr__(self, "rng_seed", int(self.rng_seed) & _SEED_MASK)


@dataclass(frozen=True)
class EvalBundle:
    """Inputs that passed validate_inputs, ready for the metric chain."""

    probs: ProbabilityStack
    gt: LabelArray
    catalog: ClassCatalog


def validate_inputs(
    probs: ProbabilityStack,
    gt: LabelArray,
    catalog: ClassCatalog,
    *,
    row_sum_tol: float = ROW_SUM_TOL,
) -> EvalBundle:
    """Check shapes, probability rows, and label ranges; return the bundle.

    Pure and deterministic. The first offending index is reported in the
    error message. Points labeled with the ignore index are accepted here
    and dropped later by the metric stages.
    """
    data = probs.data
    n_samples, n_points, k = data.shape
    if len(gt) != n_points:
        raise DimensionMismatch(
            f"probabilities cover {n_points} points but labels cover {len(gt)}"
        )
    if k != catalog.k:
        raise DimensionMismatch(
            f"probabilities have {k} classes but the catalog has {catalog.k}"
        )

    for start in range(0, n_points, _VALIDATE_CHUNK):
        block = data[:, start : start + _VALIDATE_CHUNK, :]
        lo, hi = float(block.min()), float(block.max())
        if lo < 0.0 or hi > 1.0:
            bad = np.argwhere((block < 0.0) | (block > 1.0))[0]
            s, i, c = int(bad[0]), int(bad[1]) + start, int(bad[2])
            raise NotADistribution(
                f"value {block[bad[0], bad[1], bad[2]]} outside [0, 1] at "
                f"sample {s}, point {i}, class {c}"
            )
        sums = block.sum(axis=2, dtype=np.float64)
        off = np.abs(sums - 1.0) > row_sum_tol
        # NaN payloads compare False above, so test them explicitly
        off |= ~np.isfinite(sums)
        if off.any():
            s, i = (int(v) for v in np.argwhere(off)[0])
            raise NotADistribution(
                f"row sum {sums[s, i]!r} at sample {s}, point {i + start}"
            )

    vals = gt.values
    bad = (vals != catalog.ignore_index) & ((vals < 0) | (vals >= k))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise LabelOutOfRange(
            f"label {int(vals[i])} at point {i} is neither a class index "
            f"below {k} nor the ignore index {catalog.ignore_index}"
        )

    return EvalBundle(probs, gt, catalog)
