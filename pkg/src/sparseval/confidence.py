"""Predictive distributions and per-point confidence scores.

Confidence is always computed on an aggregated stack (samples == 1): multi
sample stacks are averaged into one predictive distribution first, matching
how ensembles of stochastic forward passes are consumed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .core import ConfidenceVector, LabelArray, ProbabilityStack
from .errors import MissingStddev, NonFiniteInput

_ENTROPY_CHUNK = 1 << 20

# SplitMix64 finalizer constants plus one odd multiplier per index axis;
# the noise value at (sample, point, class) depends only on the seed and
# those three indices, so generation may be partitioned along any axis.
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_AX_SAMPLE = np.uint64(0xA0761D6478BD642F)
_AX_POINT = np.uint64(0xE7037ED1A0B428DB)
_AX_CLASS = np.uint64(0x8EBC6AF09C88C6E3)


@dataclass(frozen=True)
class LogitTensor:
    """Raw network outputs, optionally with a per-logit Gaussian scale."""

    values: np.ndarray
    stddev: np.ndarray | None = None

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        if arr.ndim != 2:
            raise ValueError("logits are points x classes")
        object.__setattr__(self, "values", arr)
        if self.stddev is not None:
            sd = np.asarray(self.stddev)
            if sd.dtype.kind != "f":
                sd = sd.astype(np.float64)
            if sd.shape != arr.shape:
                raise ValueError("stddev must match the logit shape")
            if sd.size and float(sd.min()) < 0.0:
                raise ValueError("stddev entries must be non-negative")
            object.__setattr__(self, "stddev", sd)

    @property
    def points(self) -> int:
        return int(self.values.shape[0])

    @property
    def classes(self) -> int:
        return int(self.values.shape[1])


def _mix64(z: np.uint64 | np.ndarray) -> np.uint64 | np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def derive_stream_seed(seed: int, stream: int) -> int:
    """A decorrelated 64-bit seed for a numbered substream."""
    with np.errstate(over="ignore"):
        z = _mix64(np.uint64(seed & 0xFFFF_FFFF_FFFF_FFFF) + _GAMMA)
        z = _mix64(z ^ (np.uint64(stream & 0xFFFF_FFFF_FFFF_FFFF) * _AX_SAMPLE + _GAMMA))
    return int(z)


def _normal_field(seed: int, samples: int, points: int, classes: int) -> np.ndarray:
    """Standard-normal noise addressable by (seed, sample, point, class)."""
    with np.errstate(over="ignore"):
        z = _mix64(np.uint64(seed & 0xFFFF_FFFF_FFFF_FFFF) + _GAMMA)
        si = np.arange(samples, dtype=np.uint64).reshape(samples, 1, 1)
        pi = np.arange(points, dtype=np.uint64).reshape(1, points, 1)
        ci = np.arange(classes, dtype=np.uint64).reshape(1, 1, classes)
        z = _mix64(z ^ (si * _AX_SAMPLE + _GAMMA))
        z = _mix64(z ^ (pi * _AX_POINT + _GAMMA))
        z = _mix64(z ^ (ci * _AX_CLASS + _GAMMA))
    # top 53 bits give a uniform draw strictly inside (0, 1)
    u = (z >> np.uint64(11)).astype(np.float64) * 2.0**-53 + 2.0**-54
    return ndtri(u)


def _stabilized_softmax(values: np.ndarray) -> np.ndarray:
    shifted = values - values.max(axis=-1, keepdims=True)
    np.exp(shifted, out=shifted)
    shifted /= shifted.sum(axis=-1, keepdims=True)
    return shifted


def softmax(logits: LogitTensor) -> ProbabilityStack:
    """Row-wise softmax as a single-sample stack.

    Stabilized by max subtraction, so adding a constant to a logit row does
    not change the output and large magnitudes cannot overflow.
    """
    values = logits.values.astype(np.float64, copy=True)
    if not np.isfinite(values).all():
        raise NonFiniteInput("logits contain NaN or infinite entries")
    return ProbabilityStack(_stabilized_softmax(values)[None])


def sample_probabilistic_logits(
    logits: LogitTensor, samples: int, seed: int = 0
) -> ProbabilityStack:
    """Draw softmax samples from Gaussian logits: softmax(mean + stddev * noise).

    Deterministic for a given seed; sample s of point i and class c sees a
    noise value that depends only on (seed, s, i, c).
    """
    if logits.stddev is None:
        raise MissingStddev("probabilistic sampling needs a stddev tensor")
    if samples < 1:
        raise ValueError("sample count must be at least 1")
    mean = logits.values.astype(np.float64, copy=False)
    scale = logits.stddev.astype(np.float64, copy=False)
    if not (np.isfinite(mean).all() and np.isfinite(scale).all()):
        raise NonFiniteInput("logit mean or stddev contains NaN or infinite entries")
    noise = _normal_field(seed, samples, logits.points, logits.classes)
    noise *= scale[None]
    noise += mean[None]
    return ProbabilityStack(_stabilized_softmax(noise))


def aggregate_samples(stack: ProbabilityStack) -> ProbabilityStack:
    """Mean over the sample axis; the single-sample predictive distribution."""
    if stack.samples == 1:
        return stack
    mean = stack.data.mean(axis=0, dtype=np.float64)
    return ProbabilityStack(mean.astype(stack.data.dtype, copy=False)[None])


def _require_aggregated(probs: ProbabilityStack) -> np.ndarray:
    if probs.samples != 1:
        raise ValueError("confidence expects an aggregated stack (samples == 1)")
    return probs.data[0]


def max_softmax_confidence(
    probs: ProbabilityStack,
) -> tuple[ConfidenceVector, LabelArray]:
    """Highest class probability per point, plus the argmax predictions.

    Ties break to the lowest class index so reports are reproducible.
    """
    rows = _require_aggregated(probs)
    scores = rows.max(axis=1).astype(np.float64)
    preds = rows.argmax(axis=1)
    return ConfidenceVector("max_softmax", scores), LabelArray(preds)


def entropy_confidence(probs: ProbabilityStack) -> ConfidenceVector:
    """1 - H(p) / log(k): normalized Shannon entropy flipped into a confidence.

    The normalization by the maximum entropy makes the logarithm base cancel;
    0 * log 0 counts as 0.
    """
    rows = _require_aggregated(probs)
    n, k = rows.shape
    if k < 2:
        raise ValueError("entropy confidence needs at least two classes")
    inv_log_k = 1.0 / math.log(k)
    scores = np.empty(n, dtype=np.float64)
    for start in range(0, n, _ENTROPY_CHUNK):
        block = rows[start : start + _ENTROPY_CHUNK].astype(np.float64, copy=True)
        logs = np.zeros_like(block)
        np.log(block, out=logs, where=block > 0.0)
        entropy = -np.einsum("ij,ij->i", block, logs)
        scores[start : start + block.shape[0]] = 1.0 - entropy * inv_log_k
    np.clip(scores, 0.0, 1.0, out=scores)
    return ConfidenceVector("neg_entropy", scores)


def confidence_for_measure(
    probs: ProbabilityStack, measure: str
) -> tuple[ConfidenceVector, LabelArray]:
    """Confidence under the named measure together with argmax predictions."""
    scores, preds = max_softmax_confidence(probs)
    if measure == "max_softmax":
        return scores, preds
    if measure == "neg_entropy":
        return entropy_confidence(probs), preds
    raise ValueError(f"unknown confidence measure {measure!r}")
