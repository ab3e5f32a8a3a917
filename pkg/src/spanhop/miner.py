"""Per-clip action scene graphs and scattered-recurrence candidate mining.

A scene graph is the flat list of (node, time span) occurrences extracted
from a clip's narrations, indexed by node key and attribute. Candidates
are nodes that recur a bounded number of times with enough temporal
spread; every threshold comparison is strict.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .narrations import ActionNode, Clip, Narration, extract_nodes
from .spans import TimeSpan

MIN_NARRATIONS = 30
MAX_NARRATIONS = 60
MIN_CLIP_EXTENT = 150.0
T_MIN = 2
T_MAX = 5
MIN_CANDIDATE_EXTENT = 10.0


@dataclass(frozen=True)
class FilterDecision:
    accepted: bool
    reason: str | None = None  # "count" | "extent"


def filter_clip(
    clip: Clip,
    min_narrations: int = MIN_NARRATIONS,
    max_narrations: int = MAX_NARRATIONS,
    min_extent: float = MIN_CLIP_EXTENT,
) -> FilterDecision:
    """Reject clips with too few/many narrations or too little temporal spread."""
    count = len(clip.narrations)
    if count > max_narrations or count < min_narrations:
        return FilterDecision(False, "count")
    extent = clip.narrations[-1].start - clip.narrations[0].start
    if extent < min_extent:
        return FilterDecision(False, "extent")
    return FilterDecision(True)


@dataclass(frozen=True)
class Occurrence:
    node: ActionNode
    span: TimeSpan


@dataclass
class SceneGraph:
    clip_id: str
    occurrences: list[Occurrence] = field(default_factory=list)
    # lemma_key -> attribute -> occurrence ids
    index: dict[str, dict[str, list[int]]] = field(default_factory=dict)
    narrations: list[Narration] = field(default_factory=list)


def build_graph(clip: Clip) -> SceneGraph:
    """One occurrence per (node, narration), spanning the narration's interval."""
    graph = SceneGraph(clip_id=clip.clip_id, narrations=list(clip.narrations))
    for i, narration in enumerate(clip.narrations):
        for node in extract_nodes(narration, i):
            occ_id = len(graph.occurrences)
            graph.occurrences.append(Occurrence(node=node, span=narration.span()))
            graph.index.setdefault(node.lemma_key, {}).setdefault(node.attribute, []).append(occ_id)
    return graph


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")


@dataclass
class MiningCandidate:
    candidate_id: str
    clip_id: str
    lemma_key: str
    attribute: str
    narrations: list[Narration]
    recurrence_count: int
    span_extent: float

    def to_record(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "clip_id": self.clip_id,
            "lemma_key": self.lemma_key,
            "attribute": self.attribute,
            "narrations": [n.to_record() for n in self.narrations],
            "recurrence_count": self.recurrence_count,
            "span_extent": self.span_extent,
        }

    @classmethod
    def from_record(cls, record: dict) -> "MiningCandidate":
        return cls(
            candidate_id=record["candidate_id"],
            clip_id=record["clip_id"],
            lemma_key=record["lemma_key"],
            attribute=record["attribute"],
            narrations=[Narration.from_record(n) for n in record["narrations"]],
            recurrence_count=int(record["recurrence_count"]),
            span_extent=float(record["span_extent"]),
        )


def find_candidates(
    graph: SceneGraph,
    t_min: int = T_MIN,
    t_max: int = T_MAX,
    min_extent: float = MIN_CANDIDATE_EXTENT,
) -> list[MiningCandidate]:
    """Nodes recurring strictly between t_min and t_max times over > min_extent seconds.

    The extent runs from the first occurrence's start to the last
    occurrence's end. Output is canonically ordered by (lemma_key,
    attribute) so candidate ids are stable.
    """
    candidates = []
    for lemma_key in sorted(graph.index):
        for attribute in sorted(graph.index[lemma_key]):
            occ_ids = graph.index[lemma_key][attribute]
            count = len(occ_ids)
            if not t_min < count < t_max:
                continue
            first = graph.occurrences[occ_ids[0]]
            last = graph.occurrences[occ_ids[-1]]
            extent = last.span.end - first.span.start
            if not extent > min_extent:
                continue
            seen: set[int] = set()
            selected = []
            for occ_id in occ_ids:
                idx = graph.occurrences[occ_id].node.narration_index
                if idx not in seen:
                    seen.add(idx)
                    selected.append(graph.narrations[idx])
            candidates.append(
                MiningCandidate(
                    # dotted ids stay safe as URL path segments and store keys
                    candidate_id=f"{graph.clip_id}.{attribute}.{_slug(lemma_key)}",
                    clip_id=graph.clip_id,
                    lemma_key=lemma_key,
                    attribute=attribute,
                    narrations=selected,
                    recurrence_count=count,
                    span_extent=extent,
                )
            )
    return candidates
