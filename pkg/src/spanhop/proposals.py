"""Deterministic conversion of score arrays into temporal proposals.

Saliency branch: threshold the score vector at a fraction of its maximum
and merge the surviving frame runs into spans. Similarity branch: smooth
each query row with a size-3 average pool, softmax with temperature, apply
the same relative threshold per row, then union the row results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationFailure
from .spans import SpanSet, TimeSpan, normalize
from .grounding import DEFAULT_TAU

SALIENCY_COEF = 0.7
SIMILARITY_COEF = 0.10


class ProposalError(ValidationFailure):
    pass


@dataclass(frozen=True)
class FrameAxis:
    """Maps frame indices to seconds: frame i covers [i/fps, (i+1)/fps) + offset."""

    num_frames: int
    frames_per_second: float = 1.0
    clip_offset: float = 0.0

    def __post_init__(self) -> None:
        if self.num_frames < 1:
            raise ProposalError(f"num_frames must be >= 1, got {self.num_frames}")
        if self.frames_per_second <= 0:
            raise ProposalError(f"frames_per_second must be > 0, got {self.frames_per_second}")

    def span_for_run(self, first: int, last: int) -> TimeSpan:
        fps = self.frames_per_second
        return TimeSpan(self.clip_offset + first / fps, self.clip_offset + (last + 1) / fps)


def _runs_above(values: np.ndarray, threshold: float) -> list[tuple[int, int]]:
    # strict ">": ties at the threshold are excluded
    selected = values > threshold
    runs: list[tuple[int, int]] = []
    start = None
    for i, flag in enumerate(selected):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(selected) - 1))
    return runs


def saliency_to_spans(scores: np.ndarray, coef: float = SALIENCY_COEF, axis: FrameAxis | None = None) -> SpanSet:
    """Frames scoring above coef * max(scores) become spans, run by run."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 1 or scores.size == 0:
        raise ProposalError("saliency scores must be a non-empty vector")
    axis = axis or FrameAxis(num_frames=scores.size)
    if axis.num_frames != scores.size:
        raise ProposalError(
            f"axis covers {axis.num_frames} frames but scores have {scores.size}"
        )
    threshold = coef * float(scores.max())
    return normalize([axis.span_for_run(a, b) for a, b in _runs_above(scores, threshold)])


def smooth_rows(sim: np.ndarray) -> np.ndarray:
    """Size-3, stride-1 average pooling per row with edge-replicated padding."""
    sim = np.asarray(sim, dtype=float)
    if sim.ndim != 2 or sim.shape[1] < 1:
        raise ProposalError("similarity matrix must be 2-D with at least one column")
    padded = np.pad(sim, ((0, 0), (1, 1)), mode="edge")
    return (padded[:, :-2] + padded[:, 1:-1] + padded[:, 2:]) / 3.0


def _row_softmax(sim: np.ndarray, tau: float) -> np.ndarray:
    if tau <= 0:
        raise ProposalError(f"tau must be positive, got {tau}")
    a = sim / tau
    a -= a.max(axis=1, keepdims=True)
    e = np.exp(a)
    return e / e.sum(axis=1, keepdims=True)


def per_row_spans(
    sim: np.ndarray,
    tau: float = DEFAULT_TAU,
    coef: float = SIMILARITY_COEF,
    axis: FrameAxis | None = None,
) -> list[SpanSet]:
    """Span set per grounding query: smooth, softmax, threshold each row."""
    sim = np.asarray(sim, dtype=float)
    if sim.ndim != 2 or sim.size == 0:
        raise ProposalError("similarity matrix must be a non-empty 2-D array")
    axis = axis or FrameAxis(num_frames=sim.shape[1])
    if axis.num_frames != sim.shape[1]:
        raise ProposalError(
            f"axis covers {axis.num_frames} frames but matrix has {sim.shape[1]}"
        )
    scores = _row_softmax(smooth_rows(sim), tau)
    out: list[SpanSet] = []
    for row in scores:
        threshold = coef * float(row.max())
        out.append(normalize([axis.span_for_run(a, b) for a, b in _runs_above(row, threshold)]))
    return out


def similarity_to_spans(
    sim: np.ndarray,
    tau: float = DEFAULT_TAU,
    coef: float = SIMILARITY_COEF,
    axis: FrameAxis | None = None,
) -> SpanSet:
    """Union of the per-row proposals, renormalized."""
    rows = per_row_spans(sim, tau, coef, axis)
    merged: list[TimeSpan] = []
    for row in rows:
        merged.extend(row.spans)
    return normalize(merged)
