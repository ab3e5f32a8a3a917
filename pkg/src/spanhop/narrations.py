"""Timestamped narration ingestion and syntactic node extraction.

Narrations arrive as (video_id, start, text) rows; end times are derived
from the next narration's start. Videos are cut into fixed three-minute
clips with clip-local times. Node extraction works off dependency tokens,
either read from CoNLL-U sidecar files or produced by a small pattern
parser for camera-wearer ("C ...") narrations.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ValidationFailure
from .spans import TimeSpan

CLIP_SECONDS = 180.0

DOBJ_RELS = {"dobj", "obj"}
POBJ_RELS = {"pobj", "obl"}
MODIFIER_RELS = {"amod", "compound", "nummod", "flat"}


class NarrationError(ValidationFailure):
    pass


@dataclass(frozen=True)
class TokenAnnotation:
    form: str
    lemma: str
    upos: str
    head: int  # 1-based index of the governor, 0 = root
    deprel: str

    def __post_init__(self) -> None:
        if not self.deprel:
            raise NarrationError(f"token {self.form!r} has an empty deprel")
        if self.head < 0:
            raise NarrationError(f"token {self.form!r} has negative head {self.head}")


@dataclass
class Narration:
    video_id: str
    start: float
    text: str
    end: float | None = None
    narration_id: str | None = None
    tokens: list[TokenAnnotation] | None = None
    parse_source: str | None = None  # "conllu" | "heuristic"

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise NarrationError(f"empty narration text at {self.video_id}@{self.start}")
        if self.end is not None and self.end < self.start:
            raise NarrationError(
                f"narration {self.narration_id or self.text!r} has end {self.end} < start {self.start}"
            )

    def span(self) -> TimeSpan:
        if self.end is None:
            raise NarrationError(f"narration {self.narration_id or self.text!r} has no derived end")
        return TimeSpan(self.start, self.end)

    def to_record(self) -> dict:
        record = {
            "narration_id": self.narration_id,
            "video_id": self.video_id,
            "start": self.start,
            "end": self.end,
            "text": self.text,
        }
        if self.tokens is not None:
            record["tokens"] = [
                [t.form, t.lemma, t.upos, t.head, t.deprel] for t in self.tokens
            ]
            record["parse_source"] = self.parse_source
        return record

    @classmethod
    def from_record(cls, record: dict) -> "Narration":
        tokens = None
        if "tokens" in record and record["tokens"] is not None:
            tokens = [
                TokenAnnotation(form=t[0], lemma=t[1], upos=t[2], head=int(t[3]), deprel=t[4])
                for t in record["tokens"]
            ]
        return cls(
            video_id=record["video_id"],
            start=float(record["start"]),
            end=float(record["end"]) if record.get("end") is not None else None,
            text=record["text"],
            narration_id=record.get("narration_id"),
            tokens=tokens,
            parse_source=record.get("parse_source"),
        )


@dataclass(frozen=True)
class ActionNode:
    attribute: str  # verb | dobj | pobj
    lemma_key: str
    surface: str
    narration_index: int

    def __post_init__(self) -> None:
        if self.attribute not in ("verb", "dobj", "pobj"):
            raise NarrationError(f"unknown node attribute {self.attribute!r}")


@dataclass
class Clip:
    clip_id: str
    video_id: str
    window: TimeSpan  # global seconds, exactly CLIP_SECONDS long
    narrations: list[Narration] = field(default_factory=list)  # clip-local times

    def to_record(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "video_id": self.video_id,
            "window": self.window.as_pair(),
            "narrations": [n.to_record() for n in self.narrations],
        }

    @classmethod
    def from_record(cls, record: dict) -> "Clip":
        return cls(
            clip_id=record["clip_id"],
            video_id=record["video_id"],
            window=TimeSpan(record["window"][0], record["window"][1]),
            narrations=[Narration.from_record(n) for n in record["narrations"]],
        )


# --- readers ----------------------------------------------------------------


def read_narrations_csv(path: str | Path) -> list[Narration]:
    """CSV with header video_id,start,text; narration ids default to <video>:<i>."""
    narrations = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"video_id", "start", "text"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise NarrationError(f"{path}: narration CSV must have columns {sorted(required)}")
        for i, row in enumerate(reader):
            narrations.append(
                Narration(
                    video_id=row["video_id"],
                    start=float(row["start"]),
                    text=row["text"],
                    narration_id=row.get("narration_id") or None,
                )
            )
    return _assign_default_ids(narrations)


def read_narrations_jsonl(path: str | Path) -> list[Narration]:
    narrations = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise NarrationError(f"{path}:{line_no}: invalid JSON ({exc})")
        narrations.append(
            Narration(
                video_id=record["video_id"],
                start=float(record["start"]),
                text=record["text"],
                narration_id=record.get("narration_id"),
            )
        )
    return _assign_default_ids(narrations)


def _assign_default_ids(narrations: list[Narration]) -> list[Narration]:
    counters: dict[str, int] = {}
    for n in narrations:
        index = counters.get(n.video_id, 0)
        counters[n.video_id] = index + 1
        if n.narration_id is None:
            n.narration_id = f"{n.video_id}:{index:04d}"
    return narrations


def read_conllu(path: str | Path) -> dict[str, list[TokenAnnotation]]:
    """Standard 10-column CoNLL-U; sentences keyed by '# narration_id = …' comments."""
    parses: dict[str, list[TokenAnnotation]] = {}
    current_id: str | None = None
    tokens: list[TokenAnnotation] = []

    def flush():
        nonlocal current_id, tokens
        if tokens:
            if current_id is None:
                raise NarrationError(f"{path}: sentence without a narration_id comment")
            parses[current_id] = tokens
        current_id, tokens = None, []

    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.rstrip("\n")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            match = re.match(r"#\s*narration_id\s*=\s*(\S+)", line)
            if match:
                current_id = match.group(1)
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise NarrationError(f"{path}:{line_no}: expected 10 tab-separated columns")
        token_id = cols[0]
        if "-" in token_id or "." in token_id:
            continue  # multiword ranges and empty nodes carry no tree edges
        tokens.append(
            TokenAnnotation(
                form=cols[1], lemma=cols[2], upos=cols[3], head=int(cols[6]), deprel=cols[7]
            )
        )
    flush()
    return parses


def attach_parses(
    narrations: list[Narration],
    parses: dict[str, list[TokenAnnotation]] | None = None,
    heuristic_fallback: bool = True,
) -> list[Narration]:
    """Attach sidecar parses by narration id, falling back to the pattern parser."""
    parses = parses or {}
    for n in narrations:
        if n.narration_id in parses:
            n.tokens = parses[n.narration_id]
            n.parse_source = "conllu"
        elif heuristic_fallback:
            n.tokens = heuristic_parse(n.text)
            n.parse_source = "heuristic"
    return narrations


# --- clip segmentation ------------------------------------------------------


def derive_end_times(narrations: list[Narration], horizon: float) -> list[Narration]:
    """end = next narration's start; the last narration is clamped to horizon."""
    for prev, cur in zip(narrations, narrations[1:]):
        if cur.start < prev.start:
            raise NarrationError(
                f"narrations not sorted by start: {cur.start} after {prev.start}"
            )
    out = []
    for i, n in enumerate(narrations):
        end = narrations[i + 1].start if i + 1 < len(narrations) else float(horizon)
        if end < n.start:
            raise NarrationError(
                f"narration at {n.start} extends past horizon {horizon}"
            )
        out.append(replace(n, end=end))
    return out


def segment_clips(
    video_id: str,
    duration: float,
    narrations: list[Narration],
    clip_seconds: float = CLIP_SECONDS,
) -> list[Clip]:
    """Cut [0, duration) into whole clip_seconds windows; the remainder is dropped.

    Narrations are assigned by start time, re-based to clip-local seconds,
    and get their end times derived against the clip horizon.
    """
    if duration <= 0:
        raise NarrationError(f"duration must be positive, got {duration}")
    ordered = sorted(narrations, key=lambda n: n.start)
    clips = []
    for k in range(int(duration // clip_seconds)):
        lo, hi = k * clip_seconds, (k + 1) * clip_seconds
        local = [
            replace(n, start=n.start - lo, end=None)
            for n in ordered
            if lo <= n.start < hi
        ]
        clips.append(
            Clip(
                clip_id=f"{video_id}_{int(lo)}_{int(hi)}",
                video_id=video_id,
                window=TimeSpan(lo, hi),
                narrations=derive_end_times(local, clip_seconds),
            )
        )
    return clips


# --- node extraction --------------------------------------------------------


def _phrase(tokens: list[TokenAnnotation], head_index: int) -> tuple[str, str]:
    """(surface, lemma_key) for a noun head plus its adjacent modifiers."""
    indices = [head_index]
    for j, tok in enumerate(tokens):
        if tok.head == head_index + 1 and tok.deprel in MODIFIER_RELS:
            indices.append(j)
    indices.sort()
    surface = " ".join(tokens[j].form for j in indices)
    key_parts = [
        tokens[j].lemma if j == head_index else tokens[j].form for j in indices
    ]
    lemma_key = " ".join(key_parts).lower()
    return " ".join(surface.split()), " ".join(lemma_key.split())


def extract_nodes(narration: Narration, narration_index: int = 0) -> list[ActionNode]:
    """Verb, direct-object, and prepositional-object nodes from a parsed narration.

    One verb node per main verb (root plus conjoined verbs); object nodes
    keep their adjectival/compound modifiers in the surface and key.
    """
    tokens = narration.tokens
    if tokens is None:
        raise NarrationError(
            f"narration {narration.narration_id or narration.text!r} carries no tokens"
        )
    nodes: list[tuple[int, ActionNode]] = []

    main_verbs: set[int] = set()
    for i, tok in enumerate(tokens):
        if tok.upos == "VERB" and (tok.head == 0 or tok.deprel.lower() == "root"):
            main_verbs.add(i)
    grew = True
    while grew:
        grew = False
        for i, tok in enumerate(tokens):
            if (
                i not in main_verbs
                and tok.upos == "VERB"
                and tok.deprel == "conj"
                and tok.head - 1 in main_verbs
            ):
                main_verbs.add(i)
                grew = True

    for i in sorted(main_verbs):
        nodes.append(
            (i, ActionNode("verb", tokens[i].lemma.lower(), tokens[i].form, narration_index))
        )
    for i, tok in enumerate(tokens):
        if tok.deprel in DOBJ_RELS:
            surface, key = _phrase(tokens, i)
            nodes.append((i, ActionNode("dobj", key, surface, narration_index)))
        elif tok.deprel in POBJ_RELS:
            surface, key = _phrase(tokens, i)
            nodes.append((i, ActionNode("pobj", key, surface, narration_index)))
    nodes.sort(key=lambda pair: pair[0])
    return [node for _, node in nodes]


# --- heuristic pattern parser ----------------------------------------------

_DETERMINERS = {"a", "an", "the", "his", "her", "their", "its", "this", "that", "some", "another"}
_PREPOSITIONS = {
    "on", "in", "at", "with", "from", "to", "into", "onto", "under", "over",
    "near", "beside", "behind", "around", "through", "across", "inside",
    "outside", "toward", "towards", "upon", "against", "between", "along", "of",
}
_PARTICLES = {"out", "up", "down", "off", "away", "back"}

_IRREGULAR_VERBS = {
    "is": "be", "has": "have", "does": "do", "goes": "go", "says": "say",
    "leaves": "leave", "gives": "give", "takes": "take", "makes": "make",
    "moves": "move", "drives": "drive", "wipes": "wipe", "places": "place",
    "closes": "close", "rinses": "rinse", "uses": "use", "slices": "slice",
    "removes": "remove", "arranges": "arrange", "shakes": "shake",
}


def _verb_lemma(form: str) -> str:
    word = form.lower()
    if word in _IRREGULAR_VERBS:
        return _IRREGULAR_VERBS[word]
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    for suffix in ("sses", "shes", "ches", "xes", "zes", "oes"):
        if word.endswith(suffix):
            return word[:-2]
    if word.endswith("s") and not word.endswith("ss"):
        return word[:-1]
    return word


def heuristic_parse(text: str) -> list[TokenAnnotation]:
    """Deterministic POS/deprel assignment for camera-wearer narrations.

    Handles the fixed "C <verb> [particle] [the] <noun phrase> (<prep> [the]
    <noun phrase>)*" grammar; anything else yields an empty token list so
    extraction degrades to fewer nodes rather than guessing.
    """
    words = text.strip().rstrip(".").split()
    if words and words[0] == "#C":
        words = words[1:]
    if not words or words[0] != "C" or len(words) < 2:
        return []

    # roles: (form, upos, deprel, head resolved later)
    entries: list[dict] = [{"form": "C", "upos": "PRON", "deprel": "nsubj", "head": "verb0"}]
    verb_ids: list[int] = []

    i = 1
    state_prep_entry: int | None = None  # entry index of the governing preposition
    np_buffer: list[int] = []

    def flush_np():
        nonlocal np_buffer, state_prep_entry
        if not np_buffer:
            return
        head_entry = np_buffer[-1]
        for e in np_buffer[:-1]:
            entries[e]["deprel"] = "compound"
            entries[e]["head"] = head_entry
        if state_prep_entry is not None:
            entries[head_entry]["deprel"] = "pobj"
            entries[head_entry]["head"] = state_prep_entry
        else:
            entries[head_entry]["deprel"] = "dobj"
            entries[head_entry]["head"] = f"verb{len(verb_ids) - 1}"
        np_buffer = []

    def push(form, upos, deprel, head) -> int:
        entries.append({"form": form, "upos": upos, "deprel": deprel, "head": head})
        return len(entries) - 1

    # first verb
    verb_ids.append(push(words[1], "VERB", "ROOT", 0))
    i = 2
    while i < len(words):
        word = words[i]
        lowered = word.lower()
        if lowered in _PARTICLES and entries[-1]["upos"] == "VERB":
            push(word, "ADP", "prt", f"verb{len(verb_ids) - 1}")
        elif lowered in _PREPOSITIONS:
            flush_np()
            state_prep_entry = push(word, "ADP", "prep", f"verb{len(verb_ids) - 1}")
        elif lowered in _DETERMINERS:
            push(word, "DET", "det", "np_head")
        elif lowered == "and":
            next_word = words[i + 1] if i + 1 < len(words) else None
            after = words[i + 2] if i + 2 < len(words) else None
            starts_clause = (
                next_word is not None
                and next_word.lower().endswith("s")
                and (after is None or after.lower() in _DETERMINERS | _PREPOSITIONS)
            )
            flush_np()
            push(word, "CCONJ", "cc", f"verb{len(verb_ids) - 1}")
            if starts_clause:
                state_prep_entry = None
                verb_ids.append(push(words[i + 1], "VERB", "conj", "verb0"))
                i += 1
        else:
            upos = "PROPN" if word[:1].isupper() else "NOUN"
            np_buffer.append(push(word, upos, "dep", None))
        i += 1
    flush_np()

    # resolve symbolic heads to 1-based token indices
    det_target: int | None = None
    resolved: list[TokenAnnotation] = []
    for idx, entry in enumerate(entries):
        head = entry["head"]
        if head == "np_head":
            target = next(
                (
                    j
                    for j in range(idx + 1, len(entries))
                    if entries[j]["deprel"] in ("dobj", "pobj")
                ),
                None,
            )
            head = target + 1 if target is not None else 0
        elif isinstance(head, str) and head.startswith("verb"):
            head = verb_ids[min(int(head[4:]), len(verb_ids) - 1)] + 1
        elif isinstance(head, int) and entry["deprel"] in ("compound", "pobj"):
            head = head + 1
        elif head is None or head == 0:
            head = 0
        elif isinstance(head, int):
            head = head + 1
        resolved.append(
            TokenAnnotation(
                form=entry["form"],
                lemma=_verb_lemma(entry["form"]) if entry["upos"] == "VERB" else entry["form"].lower(),
                upos=entry["upos"],
                head=head,
                deprel=entry["deprel"],
            )
        )
    return resolved
