"""Grounding metrics over span sets, plus pluggable QA scoring.

Per-sample IoU/IoP/IoG are measure ratios between normalized span sets;
the corpus report averages them (as percentages) and adds threshold rates.
Answer quality is scored by an external judge endpoint or by sentence
embeddings, both reached through narrow client interfaces.
"""

from __future__ import annotations

import csv
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError, ValidationFailure
from .lenient import lenient_dict
from .llm import ChatClient, DecodingParams, EmbeddingClient
from .spans import EMPTY, SpanSet, TimeSpan, intersect, normalize, total_length, union

DEFAULT_IOU_THRESHOLDS = (0.3,)
DEFAULT_PRECISION_THRESHOLDS = (0.5,)

# report-level percentages carry millipercent resolution (2/3 -> 66.667)
_PCT_DIGITS = 3


@dataclass
class SampleEval:
    sample_id: str
    prediction: SpanSet
    ground_truth: SpanSet
    predicted_answer: str | None = None
    reference_answer: str | None = None
    question: str | None = None
    time_question: bool = False


@dataclass
class MetricReport:
    per_sample: dict[str, dict[str, float]]
    miou: float
    miop: float
    miog: float
    iou_at: dict[float, float]
    p_at: dict[float, float]
    qa_score_mean: float | None = None
    qa_similarity_mean: float | None = None
    sample_count: int = 0

    def to_json_dict(self) -> dict:
        return {
            "sample_count": self.sample_count,
            "mIoU": self.miou,
            "mIoP": self.miop,
            "mIoG": self.miog,
            "iou_at": {f"{t:g}": v for t, v in self.iou_at.items()},
            "p_at": {f"{t:g}": v for t, v in self.p_at.items()},
            "qa_score_mean": self.qa_score_mean,
            "qa_similarity_mean": self.qa_similarity_mean,
            "per_sample": self.per_sample,
        }

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_id", "iou", "iop", "iog"])
            for sample_id, row in self.per_sample.items():
                writer.writerow([sample_id, row["iou"], row["iop"], row["iog"]])


def iou(pred: SpanSet, gt: SpanSet) -> float:
    """Measure of intersection over measure of union between two span sets.

    Both sets empty counts as a correct "no evidence" prediction (1.0);
    exactly one empty is a total miss (0.0).
    """
    if not pred and not gt:
        return 1.0
    if not pred or not gt:
        return 0.0
    denom = total_length(union(pred, gt))
    if denom == 0:
        return 0.0
    return total_length(intersect(pred, gt)) / denom


def iop(pred: SpanSet, gt: SpanSet) -> float:
    denom = total_length(pred)
    if denom == 0:
        return 0.0
    return total_length(intersect(pred, gt)) / denom


def iog(pred: SpanSet, gt: SpanSet) -> float:
    denom = total_length(gt)
    if denom == 0:
        return 0.0
    return total_length(intersect(pred, gt)) / denom


def aggregate(
    samples: Sequence[SampleEval],
    iou_thresholds: Iterable[float] = DEFAULT_IOU_THRESHOLDS,
    precision_thresholds: Iterable[float] = DEFAULT_PRECISION_THRESHOLDS,
    qa_scores: dict[str, int] | None = None,
    qa_similarities: dict[str, float] | None = None,
) -> MetricReport:
    """Corpus-level means (x100) and strict ">" threshold rates.

    qa_scores / qa_similarities are optional per-sample maps produced by
    judge_samples / answer_similarities; samples flagged time_question are
    excluded from their means.
    """
    if not samples:
        raise ValidationFailure("cannot aggregate an empty sample list")
    per_sample: dict[str, dict[str, float]] = {}
    for sample in samples:
        if sample.sample_id in per_sample:
            raise ValidationFailure(f"duplicate sample_id {sample.sample_id!r}")
        per_sample[sample.sample_id] = {
            "iou": iou(sample.prediction, sample.ground_truth),
            "iop": iop(sample.prediction, sample.ground_truth),
            "iog": iog(sample.prediction, sample.ground_truth),
        }
    ious = np.array([row["iou"] for row in per_sample.values()])

    def pct(x: float) -> float:
        return round(100.0 * x, _PCT_DIGITS)

    answer_eligible = {s.sample_id for s in samples if not s.time_question}

    def qa_mean(values: dict[str, float] | None) -> float | None:
        if not values:
            return None
        kept = [v for k, v in values.items() if k in answer_eligible]
        return round(float(np.mean(kept)), _PCT_DIGITS) if kept else None

    return MetricReport(
        per_sample=per_sample,
        miou=pct(float(np.mean(ious))),
        miop=pct(float(np.mean([r["iop"] for r in per_sample.values()]))),
        miog=pct(float(np.mean([r["iog"] for r in per_sample.values()]))),
        iou_at={t: pct(float(np.mean(ious > t))) for t in iou_thresholds},
        p_at={t: pct(float(np.mean(ious > t))) for t in precision_thresholds},
        qa_score_mean=qa_mean(qa_scores),
        qa_similarity_mean=qa_mean(qa_similarities),
        sample_count=len(samples),
    )


# --- answer scoring -------------------------------------------------------


@dataclass(frozen=True)
class JudgeVerdict:
    score: int
    rationale: str


def parse_judge_verdict(raw: str) -> JudgeVerdict:
    data = lenient_dict(raw)
    if data is None:
        match = re.search(r"['\"]?score['\"]?\s*[:=]\s*(\d+)", raw, re.IGNORECASE)
        if not match:
            raise FormatError("judge output is not a score/rationale dict", raw_text=raw)
        data = {"score": int(match.group(1)), "rationale": ""}
    lowered = {str(k).lower(): v for k, v in data.items()}
    if "score" not in lowered:
        raise FormatError("judge output lacks a 'score' key", raw_text=raw)
    score_value = lowered["score"]
    try:
        score = int(score_value)
    except (TypeError, ValueError):
        raise FormatError(f"judge score {score_value!r} is not an integer", raw_text=raw)
    if isinstance(score_value, float) and score_value != score:
        raise FormatError(f"judge score {score_value!r} is not an integer", raw_text=raw)
    if not 1 <= score <= 10:
        raise FormatError(f"judge score {score} outside [1, 10]", raw_text=raw)
    return JudgeVerdict(score=score, rationale=str(lowered.get("rationale", "")))


def judge_qa(sample: SampleEval, judge: ChatClient, params: DecodingParams = DecodingParams()) -> JudgeVerdict:
    """Grade one predicted answer against its reference with the judge prompt."""
    if not (sample.question and sample.predicted_answer is not None and sample.reference_answer):
        raise ValidationFailure(
            f"sample {sample.sample_id!r} lacks question/predicted/reference answer"
        )
    from .prompts import load_template

    system, user = load_template("judge").render(
        question=sample.question,
        reference=sample.reference_answer,
        prediction=sample.predicted_answer,
    )
    return parse_judge_verdict(judge.send(system, user, params))


def judge_samples(
    samples: Sequence[SampleEval],
    judge: ChatClient,
    parallelism: int = 4,
    params: DecodingParams = DecodingParams(),
) -> dict[str, JudgeVerdict]:
    """Judge every answer-eligible sample, concurrently up to parallelism."""
    eligible = [
        s
        for s in samples
        if not s.time_question and s.question and s.predicted_answer is not None and s.reference_answer
    ]
    if not eligible:
        return {}
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        verdicts = list(pool.map(lambda s: judge_qa(s, judge, params), eligible))
    return {s.sample_id: v for s, v in zip(eligible, verdicts)}


def answer_similarities(samples: Sequence[SampleEval], client: EmbeddingClient) -> dict[str, float]:
    """Cosine similarity (x100) between predicted and reference answer embeddings."""
    eligible = [
        s for s in samples if not s.time_question and s.predicted_answer and s.reference_answer
    ]
    if not eligible:
        return {}
    texts = [s.predicted_answer for s in eligible] + [s.reference_answer for s in eligible]
    vectors = np.asarray(client.embed(texts), dtype=float)
    pred, ref = vectors[: len(eligible)], vectors[len(eligible) :]
    norms_p = np.linalg.norm(pred, axis=1)
    norms_r = np.linalg.norm(ref, axis=1)
    cos = (pred * ref).sum(axis=1) / np.maximum(norms_p * norms_r, 1e-12)
    return {s.sample_id: float(100.0 * c) for s, c in zip(eligible, cos)}


# --- model-response parsing ------------------------------------------------


@dataclass
class ParsedResponse:
    answer: str
    evidence: SpanSet
    found_answer_section: bool = False
    found_evidence: bool = False
    repaired: bool = False


_HEADING_RE = re.compile(r"#{1,6}\s*(Answer|Evidence|Rationale|Question)\s*:?\s*", re.IGNORECASE)
_PAIR_RE = re.compile(r"\[\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*\]")


def parse_model_response(text: str) -> ParsedResponse:
    """Extract the Answer section and every [s, e] interval from free-form output.

    Lenient by design: reversed intervals are swapped, negative endpoints
    clamped to zero, and both events flagged rather than dropped. Missing
    evidence yields an empty span set with the answer still returned.
    """
    parts = _HEADING_RE.split(text)
    answer = None
    for name, body in zip(parts[1::2], parts[2::2]):
        if name.lower() == "answer":
            answer = body.strip()
            break
    found_answer = answer is not None
    if answer is None:
        answer = text.strip()

    repaired = False
    spans: list[TimeSpan] = []
    for m in _PAIR_RE.finditer(text):
        s, e = float(m.group(1)), float(m.group(2))
        if s > e:
            s, e = e, s
            repaired = True
        if s < 0 or e < 0:
            s, e = max(s, 0.0), max(e, 0.0)
            repaired = True
        spans.append(TimeSpan(s, e))
    return ParsedResponse(
        answer=answer,
        evidence=normalize(spans),
        found_answer_section=found_answer,
        found_evidence=bool(spans),
        repaired=repaired,
    )


# --- JSON Lines IO ----------------------------------------------------------


def _spanset_from_field(record: dict, *candidates: str) -> SpanSet:
    for name in candidates:
        if name in record and record[name] is not None:
            return SpanSet.from_pairs(record[name])
    return EMPTY


def read_sample_evals(path: str | Path) -> list[SampleEval]:
    """Combined JSONL form: one SampleEval per line."""
    samples = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationFailure(f"{path}:{line_no}: invalid JSON ({exc})")
        if "sample_id" not in record:
            raise ValidationFailure(f"{path}:{line_no}: missing sample_id")
        samples.append(
            SampleEval(
                sample_id=str(record["sample_id"]),
                prediction=_spanset_from_field(record, "prediction"),
                ground_truth=_spanset_from_field(record, "ground_truth"),
                predicted_answer=record.get("predicted_answer"),
                reference_answer=record.get("reference_answer"),
                question=record.get("question"),
                time_question=bool(record.get("time_question", False)),
            )
        )
    return samples


def _read_jsonl(path: str | Path) -> dict[str, dict]:
    records: dict[str, dict] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationFailure(f"{path}:{line_no}: invalid JSON ({exc})")
        sample_id = record.get("sample_id")
        if sample_id is None:
            raise ValidationFailure(f"{path}:{line_no}: missing sample_id")
        records[str(sample_id)] = record
    return records


def join_pred_gt(
    pred_path: str | Path, gt_path: str | Path, parse_responses: bool = False
) -> list[SampleEval]:
    """Join prediction and ground-truth JSONL files on sample_id.

    Ground truth defines the sample set; a missing prediction counts as an
    empty one. Predictions without a matching ground truth are an error.
    With parse_responses, each prediction line carries a raw "response"
    field run through parse_model_response.
    """
    preds = _read_jsonl(pred_path)
    gts = _read_jsonl(gt_path)
    orphans = set(preds) - set(gts)
    if orphans:
        raise ValidationFailure(f"predictions without ground truth: {sorted(orphans)[:5]}")
    samples = []
    for sample_id, gt in gts.items():
        pred = preds.get(sample_id, {})
        if parse_responses and "response" in pred:
            parsed = parse_model_response(pred["response"])
            prediction, answer = parsed.evidence, parsed.answer
        else:
            prediction = _spanset_from_field(pred, "prediction", "evidence")
            answer = pred.get("predicted_answer", pred.get("answer"))
        samples.append(
            SampleEval(
                sample_id=sample_id,
                prediction=prediction,
                ground_truth=_spanset_from_field(gt, "ground_truth", "evidence"),
                predicted_answer=answer,
                reference_answer=gt.get("reference_answer", gt.get("answer")),
                question=gt.get("question"),
                time_question=bool(gt.get("time_question", False)),
            )
        )
    return samples
