"""Corpus statistics over triplet files: evidence duration, hop count, and
question/answer word counts, each with a histogram and mean."""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ValidationFailure
from .genfilter import strip_markers
from .spans import SpanSet

DURATION_BIN_SECONDS = 5.0


def _evidence(record: dict) -> SpanSet:
    if record.get("span_map"):
        pairs = [pair for spans in record["span_map"].values() for pair in spans]
        return SpanSet.from_pairs(pairs)
    return SpanSet.from_pairs(record.get("evidence", []))


def _int_histogram(values: list[int]) -> dict[str, int]:
    out: dict[str, int] = {}
    for v in sorted(values):
        out[str(v)] = out.get(str(v), 0) + 1
    return out


def _duration_histogram(durations: list[float]) -> dict:
    if not durations:
        return {"bin_seconds": DURATION_BIN_SECONDS, "counts": []}
    n_bins = int(max(durations) // DURATION_BIN_SECONDS) + 1
    counts = [0] * n_bins
    for d in durations:
        counts[min(int(d // DURATION_BIN_SECONDS), n_bins - 1)] += 1
    return {"bin_seconds": DURATION_BIN_SECONDS, "counts": counts}


def compute_stats(records: list[dict]) -> dict:
    """Means, maxima, and histograms for the four benchmark distributions.

    Hops are counted on the normalized union of each record's spans;
    word counts use whitespace tokenization with grounding markers
    stripped from answers.
    """
    if not records:
        raise ValidationFailure("no records to compute statistics over")
    durations: list[float] = []
    hops: list[int] = []
    question_words: list[int] = []
    answer_words: list[int] = []
    for record in records:
        evidence = _evidence(record)
        hops.append(len(evidence))
        durations.extend(span.length for span in evidence)
        if record.get("question"):
            question_words.append(len(record["question"].split()))
        if record.get("answer"):
            answer_words.append(len(strip_markers(record["answer"]).split()))

    def mean(values):
        return round(sum(values) / len(values), 4) if values else None

    return {
        "samples": len(records),
        "evidence": {
            "count": len(durations),
            "mean_duration_s": mean(durations),
            "histogram": _duration_histogram(durations),
        },
        "hops": {
            "mean": mean(hops),
            "max": max(hops) if hops else 0,
            "histogram": _int_histogram(hops),
        },
        "question_words": {"mean": mean(question_words), "histogram": _int_histogram(question_words)},
        "answer_words": {"mean": mean(answer_words), "histogram": _int_histogram(answer_words)},
    }


def read_triplet_records(path: str | Path) -> list[dict]:
    records = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ValidationFailure(f"{path}:{line_no}: invalid JSON ({exc})")
    return records
