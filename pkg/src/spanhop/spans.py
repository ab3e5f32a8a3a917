"""Interval algebra over sets of time spans.

Spans are closed real intervals measured in seconds. A SpanSet is the
normalized form every other module relies on: sorted, pairwise disjoint,
possibly empty. Set operations are measure-oriented, so zero-length spans
are legal and contribute nothing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import ValidationFailure


class SpanValidationError(ValidationFailure):
    """A raw interval violates the start <= end / finiteness contract."""


@dataclass(frozen=True, order=True)
class TimeSpan:
    """Closed interval [start, end] in seconds, start <= end, both >= 0."""

    start: float
    end: float

    def __post_init__(self) -> None:
        start, end = float(self.start), float(self.end)
        if not (math.isfinite(start) and math.isfinite(end)):
            raise SpanValidationError(f"non-finite span [{self.start}, {self.end}]")
        if start < 0:
            raise SpanValidationError(f"negative start in span [{start}, {end}]")
        if start > end:
            raise SpanValidationError(f"reversed span [{start}, {end}]")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)

    @property
    def length(self) -> float:
        return self.end - self.start

    def as_pair(self) -> list[float]:
        return [_plain_number(self.start), _plain_number(self.end)]


@dataclass(frozen=True)
class SpanSet:
    """Sorted, pairwise-disjoint collection of TimeSpans.

    Construct through :func:`normalize` (or the from_* helpers, which
    normalize); the constructor trusts its input.
    """

    spans: tuple[TimeSpan, ...] = ()

    def __iter__(self) -> Iterator[TimeSpan]:
        return iter(self.spans)

    def __len__(self) -> int:
        return len(self.spans)

    def __bool__(self) -> bool:
        return bool(self.spans)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]], merge_epsilon: float = 0.0) -> "SpanSet":
        return normalize([TimeSpan(p[0], p[1]) for p in pairs], merge_epsilon)

    @classmethod
    def from_json(cls, text: str) -> "SpanSet":
        data = json.loads(text)
        if not isinstance(data, list):
            raise SpanValidationError("span-set JSON must be an array of [start, end] pairs")
        return cls.from_pairs(data)

    def to_pairs(self) -> list[list[float]]:
        return [s.as_pair() for s in self.spans]

    def to_json(self) -> str:
        return json.dumps(self.to_pairs())

    def total_length(self) -> float:
        return total_length(self)

    def intersect(self, other: "SpanSet") -> "SpanSet":
        return intersect(self, other)

    def union(self, other: "SpanSet") -> "SpanSet":
        return union(self, other)


EMPTY = SpanSet()


def _plain_number(x: float) -> float:
    # Integral values serialize as JSON integers ([[9, 15]], not [[9.0, 15.0]]);
    # prompt assets depend on that textual form.
    return int(x) if float(x).is_integer() else float(x)


def normalize(raw: Iterable[TimeSpan], merge_epsilon: float = 0.0) -> SpanSet:
    """Sort spans and merge any pair overlapping or within merge_epsilon.

    Overlap at a single point counts as overlap. The covered measure is
    preserved except for the merged gaps.
    """
    if merge_epsilon < 0:
        raise SpanValidationError(f"merge_epsilon must be >= 0, got {merge_epsilon}")
    spans = sorted(raw, key=lambda s: (s.start, s.end))
    if not spans:
        return EMPTY
    merged: list[TimeSpan] = [spans[0]]
    for span in spans[1:]:
        last = merged[-1]
        if span.start <= last.end + merge_epsilon:
            if span.end > last.end:
                merged[-1] = TimeSpan(last.start, span.end)
        else:
            merged.append(span)
    return SpanSet(tuple(merged))


def total_length(s: SpanSet) -> float:
    return sum(span.length for span in s.spans)


def intersect(a: SpanSet, b: SpanSet) -> SpanSet:
    """Set-theoretic intersection of the covered points, renormalized."""
    out: list[TimeSpan] = []
    i = j = 0
    sa, sb = a.spans, b.spans
    while i < len(sa) and j < len(sb):
        lo = max(sa[i].start, sb[j].start)
        hi = min(sa[i].end, sb[j].end)
        if lo <= hi:
            out.append(TimeSpan(lo, hi))
        if sa[i].end < sb[j].end:
            i += 1
        else:
            j += 1
    return normalize(out)


def union(a: SpanSet, b: SpanSet) -> SpanSet:
    """Set-theoretic union of the covered points, renormalized."""
    return normalize([*a.spans, *b.spans])
