"""Triplet generation and LLM-based filtration.

Renders attribute-specific generation prompts for mining candidates,
parses grounding-token responses into Triplets, validates the marker
grammar (paired <Tk>…</Tk> markers in bijection with the span map), and
runs the reasonableness filter. Structural failures become recorded
rejections, never exceptions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import FormatError, ValidationFailure
from .lenient import lenient_dict
from .llm import ChatClient, DecodingParams
from .miner import MiningCandidate
from .narrations import CLIP_SECONDS
from .prompts import load_template

MARKER_RE = re.compile(r"<(/?)T(\d+)>")

GENERATED = "generated"
LLM_FILTERED = "llm_filtered"
ACCEPTED = "accepted"
REJECTED = "rejected"
STATUSES = (GENERATED, LLM_FILTERED, ACCEPTED, REJECTED)
CATEGORIES = ("A", "B", "C", "D", "E", "F", "U")

SpanMap = dict[str, list[list[float]]]


@dataclass
class Triplet:
    triplet_id: str
    clip_id: str
    question: str
    answer: str
    span_map: SpanMap
    status: str = GENERATED
    category: str | None = None
    provenance: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    filter_rationale: str | None = None

    def to_record(self) -> dict:
        return {
            "triplet_id": self.triplet_id,
            "clip_id": self.clip_id,
            "question": self.question,
            "answer": self.answer,
            "span_map": self.span_map,
            "status": self.status,
            "category": self.category,
            "provenance": self.provenance,
            "flags": self.flags,
            "filter_rationale": self.filter_rationale,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Triplet":
        return cls(
            triplet_id=record["triplet_id"],
            clip_id=record["clip_id"],
            question=record["question"],
            answer=record["answer"],
            span_map=record["span_map"],
            status=record.get("status", GENERATED),
            category=record.get("category"),
            provenance=record.get("provenance", {}),
            flags=record.get("flags", {}),
            filter_rationale=record.get("filter_rationale"),
        )


# --- marker grammar ---------------------------------------------------------


def markers_in_answer(answer: str) -> list[str]:
    """Marker keys ('<T1>', …) in order of first appearance."""
    seen: list[str] = []
    for match in MARKER_RE.finditer(answer):
        key = f"<T{match.group(2)}>"
        if key not in seen:
            seen.append(key)
    return seen


def strip_markers(answer: str) -> str:
    return " ".join(MARKER_RE.sub(" ", answer).split())


def repair_markers(answer: str) -> tuple[str, bool]:
    """Drop stray duplicate opening/closing markers when one pairing survives.

    With one closer and several openers for the same id, the opener closest
    before the closer wins (minimal enclosure); symmetrically for closers.
    Anything still unbalanced is left for validation to reject.
    """
    tokens = [(m.start(), m.end(), m.group(1) == "/", m.group(2)) for m in MARKER_RE.finditer(answer)]
    drop: set[int] = set()
    ids = {t[3] for t in tokens}
    for marker_id in ids:
        opens = [t for t in tokens if t[3] == marker_id and not t[2]]
        closes = [t for t in tokens if t[3] == marker_id and t[2]]
        if len(opens) > 1 and len(closes) == 1:
            close_pos = closes[0][0]
            before = [t for t in opens if t[0] < close_pos]
            if before:
                keep = before[-1]
                drop.update(t[0] for t in opens if t is not keep)
        elif len(closes) > 1 and len(opens) == 1:
            open_pos = opens[0][0]
            after = [t for t in closes if t[0] > open_pos]
            if after:
                keep = after[0]
                drop.update(t[0] for t in closes if t is not keep)
    if not drop:
        return answer, False
    out = []
    cursor = 0
    for start, end, _, _ in tokens:
        if start in drop:
            out.append(answer[cursor:start])
            cursor = end
    out.append(answer[cursor:])
    return " ".join("".join(out).split()), True


def validate_markup(answer: str, span_map: SpanMap, clip_seconds: float = CLIP_SECONDS) -> list[str]:
    """Problems with the marker grammar and span bounds; empty means valid."""
    problems: list[str] = []
    tokens = [(m.group(1) == "/", m.group(2)) for m in MARKER_RE.finditer(answer)]
    ids = {t[1] for t in tokens}
    if not tokens:
        problems.append("no_markers: answer carries no grounding tokens")
    for marker_id in sorted(ids, key=int):
        opens = [i for i, t in enumerate(tokens) if t[1] == marker_id and not t[0]]
        closes = [i for i, t in enumerate(tokens) if t[1] == marker_id and t[0]]
        if len(opens) != 1 or len(closes) != 1 or opens[0] > closes[0]:
            problems.append(f"unbalanced_markers: <T{marker_id}> opens {len(opens)}x closes {len(closes)}x")
    answer_keys = set(markers_in_answer(answer))
    map_keys = set(span_map)
    if answer_keys != map_keys:
        problems.append(
            "marker_mismatch: answer has "
            f"{sorted(answer_keys)} but span map has {sorted(map_keys)}"
        )
    for key, spans in span_map.items():
        if not isinstance(spans, list) or not spans:
            problems.append(f"empty_spans: {key} has no intervals")
            continue
        for pair in spans:
            if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
                problems.append(f"out_of_range: {key} interval {pair!r} is not an [s, e] pair")
                continue
            s, e = pair
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in (s, e)):
                problems.append(f"out_of_range: {key} interval {pair!r} is not numeric")
                continue
            if s > e:
                problems.append(f"reversed_span: {key} interval [{s}, {e}]")
            elif s < 0 or e > clip_seconds:
                problems.append(f"out_of_range: {key} interval [{s}, {e}] outside [0, {clip_seconds:g}]")
    return problems


# --- generation -------------------------------------------------------------


def _format_seconds(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else f"{value:g}"


@dataclass(frozen=True)
class RenderedPrompt:
    template_id: str
    system: str
    user: str


def render_prompt(candidate: MiningCandidate) -> RenderedPrompt:
    """Attribute-specific generation prompt with one row per selected narration."""
    if candidate.attribute not in ("verb", "dobj", "pobj"):
        raise ValidationFailure(f"candidate has unknown attribute {candidate.attribute!r}")
    rows = []
    for n in candidate.narrations:
        if n.end is None:
            raise ValidationFailure(f"candidate narration at {n.start} has no derived end")
        rows.append(f"{_format_seconds(n.start)}, {_format_seconds(n.end)}, {n.text}")
    template = load_template(candidate.attribute)
    system, user = template.render(rows="\n".join(rows))
    return RenderedPrompt(template_id=candidate.attribute, system=system, user=user)


@dataclass
class GenerationParse:
    ok: bool
    question: str | None = None
    answer: str | None = None
    span_map: SpanMap | None = None
    repaired: bool = False
    reason: str | None = None
    detail: str | None = None

    @property
    def reason_code(self) -> str | None:
        return self.reason


def _normalize_marker_key(key: str) -> str | None:
    match = re.fullmatch(r"<?/?T(\d+)>?", str(key).strip())
    return f"<T{match.group(1)}>" if match else None


def _coerce_span_map(raw_map: dict) -> SpanMap | None:
    span_map: SpanMap = {}
    for key, value in raw_map.items():
        norm = _normalize_marker_key(key)
        if norm is None:
            return None
        if isinstance(value, (list, tuple)) and len(value) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            intervals = [list(value)]
        elif isinstance(value, (list, tuple)):
            intervals = [list(v) if isinstance(v, (list, tuple)) else v for v in value]
        else:
            return None
        span_map[norm] = intervals
    return span_map


def parse_generation(raw: str, clip_seconds: float = CLIP_SECONDS) -> GenerationParse:
    """Parse a generation response into (question, answer, span map).

    Single intervals and lists of intervals are both accepted and
    normalized to lists. Failures return a structured rejection carrying a
    reason code; nothing is thrown away.
    """
    data = lenient_dict(raw)
    if data is None:
        return GenerationParse(ok=False, reason="unparseable", detail="no dict found in output")
    fields = {re.sub(r"[^a-z]", "", str(k).lower()): v for k, v in data.items()}
    question = fields.get("question")
    answer = fields.get("answer")
    raw_map = fields.get("timespan", fields.get("timespans"))
    if not isinstance(question, str) or not isinstance(answer, str) or not isinstance(raw_map, dict):
        return GenerationParse(
            ok=False, reason="missing_fields",
            detail="output lacks Question/Answer/Time span fields",
        )
    span_map = _coerce_span_map(raw_map)
    if span_map is None:
        return GenerationParse(ok=False, reason="unparseable", detail="time-span map is malformed")
    answer, repaired = repair_markers(answer)
    problems = validate_markup(answer, span_map, clip_seconds)
    if problems:
        reason = problems[0].split(":", 1)[0]
        return GenerationParse(
            ok=False, reason=reason, detail="; ".join(problems), repaired=repaired
        )
    return GenerationParse(ok=True, question=question, answer=answer, span_map=span_map, repaired=repaired)


# --- filtration -------------------------------------------------------------


@dataclass(frozen=True)
class FilterVerdict:
    keep: bool
    rationale: str
    raw: str


def render_filter_prompt(triplet: Triplet) -> RenderedPrompt:
    qa = repr({"Q": triplet.question, "A": strip_markers(triplet.answer)})
    system, user = load_template("filter").render(qa=qa)
    return RenderedPrompt(template_id="filter", system=system, user=user)


def llm_filter(
    triplet: Triplet, client: ChatClient, params: DecodingParams = DecodingParams()
) -> FilterVerdict:
    """Judgement 0 keeps the triplet, 1 drops it; the rationale is recorded."""
    prompt = render_filter_prompt(triplet)
    raw = client.send(prompt.system, prompt.user, params)
    data = lenient_dict(raw)
    if data is None:
        raise FormatError("filter verdict is not a Judgement/Rationale dict", raw_text=raw)
    lowered = {str(k).lower(): v for k, v in data.items()}
    judgement = lowered.get("judgement", lowered.get("judgment"))
    try:
        judgement = int(judgement)
    except (TypeError, ValueError):
        raise FormatError(f"filter judgement {judgement!r} is not 0/1", raw_text=raw)
    if judgement not in (0, 1):
        raise FormatError(f"filter judgement {judgement} is not 0/1", raw_text=raw)
    return FilterVerdict(keep=judgement == 0, rationale=str(lowered.get("rationale", "")), raw=raw)
