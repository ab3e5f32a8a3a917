from __future__ import annotations

import pytest

from spanhop.miner import (
    FilterDecision,
    MiningCandidate,
    build_graph,
    filter_clip,
    find_candidates,
)
from spanhop.narrations import Clip, Narration, attach_parses, derive_end_times, segment_clips
from spanhop.spans import TimeSpan


def make_clip(texts_starts, clip_id="v1_0_180"):
    narrations = [
        Narration(video_id="v1", start=s, text=t) for s, t in texts_starts
    ]
    narrations = derive_end_times(narrations, horizon=180)
    attach_parses(narrations)
    return Clip(clip_id=clip_id, video_id="v1", window=TimeSpan(0, 180), narrations=narrations)


def filler_clip(count, first=0.0, last=160.0):
    starts = [first + (last - first) * i / max(count - 1, 1) for i in range(count)]
    return make_clip([(s, f"C wipes the table") for s in starts])


class TestFilterClip:
    def test_too_few(self):
        assert filter_clip(filler_clip(25)) == FilterDecision(False, "count")

    def test_lower_boundary(self):
        assert filter_clip(filler_clip(29)).accepted is False
        assert filter_clip(filler_clip(30)).accepted is True

    def test_upper_boundary(self):
        assert filter_clip(filler_clip(60)).accepted is True
        assert filter_clip(filler_clip(61)) == FilterDecision(False, "count")

    def test_extent_boundary(self):
        assert filter_clip(filler_clip(45, 0, 149)) == FilterDecision(False, "extent")
        assert filter_clip(filler_clip(45, 0, 150)).accepted is True

    def test_accept_inside_bounds(self):
        assert filter_clip(filler_clip(45, 0, 160)).accepted is True

    def test_extent_uses_starts(self):
        clip = filler_clip(30, 10, 155)
        assert filter_clip(clip).accepted is False  # 145 < 150


class TestBuildGraph:
    def test_occurrences_per_node(self):
        clip = make_clip(
            [(10, "C opens the fridge"), (50, "C closes the fridge"), (120, "C opens the fridge")]
        )
        graph = build_graph(clip)
        assert len(graph.index["fridge"]["dobj"]) == 3
        assert len(graph.index["open"]["verb"]) == 2
        assert len(graph.index["close"]["verb"]) == 1

    def test_empty_clip(self):
        clip = Clip(clip_id="c", video_id="v", window=TimeSpan(0, 180), narrations=[])
        graph = build_graph(clip)
        assert graph.occurrences == [] and graph.index == {}

    def test_occurrence_spans_equal_narration_spans(self):
        clip = make_clip([(10, "C opens the fridge"), (40, "C opens the fridge")])
        graph = build_graph(clip)
        for occ in graph.occurrences:
            narration = clip.narrations[occ.node.narration_index]
            assert occ.span == narration.span()


class TestFindCandidates:
    def spaced_clip(self, starts, text="C opens the fridge"):
        rows = [(s, text) for s in starts]
        rows += [(170 + i * 0.1, "C looks around") for i in range(2)]
        return make_clip(sorted(rows))

    def test_three_spread_occurrences(self):
        clip = make_clip(
            [(12, "C opens the fridge"), (80, "C opens the fridge"), (150, "C opens the fridge"),
             (158, "C walks")]
        )
        graph = build_graph(clip)
        (candidate,) = [c for c in find_candidates(graph) if c.lemma_key == "fridge"]
        assert candidate.recurrence_count == 3
        assert candidate.span_extent == 146  # 158 - 12, last end meets next start
        assert [n.start for n in candidate.narrations] == [12, 80, 150]

    def test_count_boundaries(self):
        for count, expected in [(2, 0), (3, 1), (4, 1), (5, 0)]:
            starts = [10 + i * 30 for i in range(count)]
            clip = self.spaced_clip(starts)
            graph = build_graph(clip)
            found = [c for c in find_candidates(graph) if c.lemma_key == "fridge"]
            assert len(found) == expected, f"count={count}"

    def test_recurrences_bunched_within_8s_rejected(self):
        rows = [(s, "C opens the fridge") for s in (10, 13, 16)]
        rows.append((18, "C walks"))  # caps the last occurrence's end at 18
        rows += [(170 + i * 0.1, "C looks around") for i in range(2)]
        graph = build_graph(make_clip(sorted(rows)))
        assert [c for c in find_candidates(graph) if c.lemma_key == "fridge"] == []

    def test_strict_extent_inequality(self):
        narrations = [
            Narration(video_id="v", start=0, end=4, text="C opens the fridge"),
            Narration(video_id="v", start=5, end=8, text="C opens the fridge"),
            Narration(video_id="v", start=9, end=10, text="C opens the fridge"),
        ]
        attach_parses(narrations)
        clip = Clip(clip_id="c", video_id="v", window=TimeSpan(0, 180), narrations=narrations)
        graph = build_graph(clip)
        # extent exactly 10.0 -> excluded; 10.1 -> included
        assert [c for c in find_candidates(graph, min_extent=10.0) if c.attribute == "dobj"] == []
        narrations2 = [
            Narration(video_id="v", start=0, end=4, text="C opens the fridge"),
            Narration(video_id="v", start=5, end=8, text="C opens the fridge"),
            Narration(video_id="v", start=9, end=10.1, text="C opens the fridge"),
        ]
        attach_parses(narrations2)
        clip2 = Clip(clip_id="c", video_id="v", window=TimeSpan(0, 180), narrations=narrations2)
        found = [c for c in find_candidates(build_graph(clip2)) if c.attribute == "dobj"]
        assert len(found) == 1
        assert found[0].span_extent == pytest.approx(10.1)

    def test_attribute_keying(self):
        # "open fridge" and "close fridge" share the dobj node but not verb nodes
        clip = make_clip(
            [(10, "C opens the fridge"), (80, "C closes the fridge"), (150, "C opens the fridge"),
             (170, "C walks")]
        )
        graph = build_graph(clip)
        candidates = find_candidates(graph)
        keys = {(c.lemma_key, c.attribute) for c in candidates}
        assert ("fridge", "dobj") in keys
        assert ("open", "verb") not in keys  # only 2 verb occurrences

    def test_canonical_order_and_stability(self):
        clip = make_clip(
            [(5, "C grabs the towel"), (20, "C opens the fridge"), (60, "C grabs the towel"),
             (100, "C opens the fridge"), (140, "C grabs the towel"), (160, "C opens the fridge")]
        )
        graph = build_graph(clip)
        first = find_candidates(graph)
        second = find_candidates(build_graph(clip))
        assert [c.candidate_id for c in first] == [c.candidate_id for c in second]
        ordered = [(c.lemma_key, c.attribute) for c in first]
        assert ordered == sorted(ordered)

    def test_record_round_trip(self):
        clip = make_clip(
            [(12, "C opens the fridge"), (80, "C opens the fridge"), (150, "C opens the fridge"),
             (170, "C walks")]
        )
        candidate = find_candidates(build_graph(clip))[0]
        back = MiningCandidate.from_record(candidate.to_record())
        assert back.candidate_id == candidate.candidate_id
        assert [n.text for n in back.narrations] == [n.text for n in candidate.narrations]


def test_filter_decisions_match_bruteforce_over_synthetic_corpus():
    narrations = []
    for i in range(200):
        narrations.append(Narration(video_id="vx", start=i * 4.4, text="C wipes the table"))
    clips = segment_clips("vx", 880, narrations)
    for clip in clips:
        decision = filter_clip(clip)
        count = len(clip.narrations)
        expected = (
            30 <= count <= 60
            and (clip.narrations[-1].start - clip.narrations[0].start) >= 150
        )
        assert decision.accepted == expected
