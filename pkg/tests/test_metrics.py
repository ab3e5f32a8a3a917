from __future__ import annotations

import json

import numpy as np
import pytest

from spanhop.errors import FormatError, ValidationFailure
from spanhop.llm import DecodingParams, RecordingChatClient, ReplayChatClient
from spanhop.metrics import (
    JudgeVerdict,
    SampleEval,
    aggregate,
    answer_similarities,
    iog,
    iop,
    iou,
    join_pred_gt,
    judge_qa,
    judge_samples,
    parse_judge_verdict,
    parse_model_response,
    read_sample_evals,
)
from spanhop.spans import EMPTY, SpanSet

from helpers import grid_iou_iop_iog, random_pairs


def ss(*pairs):
    return SpanSet.from_pairs(pairs)


def sample(i, pred, gt, **kw):
    return SampleEval(sample_id=f"s{i}", prediction=pred, ground_truth=gt, **kw)


class TestRatios:
    def test_identity(self):
        assert iou(ss([5, 15]), ss([5, 15])) == 1.0

    def test_partial_overlap(self):
        assert iou(ss([0, 10]), ss([5, 15])) == pytest.approx(0.33333, abs=1e-5)

    def test_split_prediction(self):
        assert iou(ss([0, 5], [10, 15]), ss([3, 12])) == pytest.approx(0.26667, abs=1e-5)

    def test_iop_iog_halves(self):
        assert iop(ss([0, 10]), ss([5, 15])) == pytest.approx(0.5)
        assert iog(ss([0, 10]), ss([5, 15])) == pytest.approx(0.5)

    def test_identity_iop_iog(self):
        s = ss([2, 9], [20, 31])
        assert iop(s, s) == 1.0
        assert iog(s, s) == 1.0

    def test_empty_prediction(self):
        assert iop(EMPTY, ss([0, 10])) == 0.0
        assert iog(EMPTY, ss([0, 10])) == 0.0
        assert iou(EMPTY, ss([0, 10])) == 0.0

    def test_both_empty(self):
        assert iou(EMPTY, EMPTY) == 1.0

    def test_symmetry_and_duality(self):
        rng = np.random.default_rng(41)
        for _ in range(200):
            a = SpanSet.from_pairs(random_pairs(rng))
            b = SpanSet.from_pairs(random_pairs(rng))
            assert iou(a, b) == pytest.approx(iou(b, a), abs=1e-12)
            assert iop(a, b) == pytest.approx(iog(b, a), abs=1e-12)

    def test_iou_bounded_by_iop_iog(self):
        rng = np.random.default_rng(43)
        for _ in range(200):
            a = SpanSet.from_pairs(random_pairs(rng, allow_empty=False))
            b = SpanSet.from_pairs(random_pairs(rng, allow_empty=False))
            assert iou(a, b) <= min(iop(a, b), iog(a, b)) + 1e-12

    def test_matches_grid_oracle(self):
        rng = np.random.default_rng(47)
        for _ in range(300):
            pa, pb = random_pairs(rng), random_pairs(rng)
            a, b = SpanSet.from_pairs(pa), SpanSet.from_pairs(pb)
            o_iou, o_iop, o_iog = grid_iou_iop_iog(pa, pb)
            assert iou(a, b) == pytest.approx(o_iou, abs=1e-3)
            assert iop(a, b) == pytest.approx(o_iop, abs=1e-3)
            assert iog(a, b) == pytest.approx(o_iog, abs=1e-3)


class TestAggregate:
    def test_threshold_rate(self):
        samples = [
            sample(0, ss([0, 2]), ss([0, 10])),      # iou 0.2
            sample(1, ss([0, 3.5]), ss([0, 10])),    # iou 0.35
            sample(2, ss([0, 5]), ss([0, 10])),      # iou 0.5
        ]
        report = aggregate(samples, iou_thresholds=[0.3])
        assert report.iou_at[0.3] == pytest.approx(66.667, abs=1e-5)

    def test_strict_inequality_at_threshold(self):
        report = aggregate([sample(0, ss([0, 3]), ss([0, 10]))], iou_thresholds=[0.3])
        assert report.iou_at[0.3] == 0.0

    def test_perfect_predictor(self):
        gt = ss([4, 9], [30, 48])
        report = aggregate([sample(i, gt, gt) for i in range(5)])
        assert report.miou == report.miop == report.miog == 100.0
        assert report.iou_at[0.3] == 100.0
        assert report.p_at[0.5] == 100.0

    def test_single_sample_mean(self):
        report = aggregate([sample(0, ss([0, 0.333]), ss([0, 1]))])
        assert report.miou == pytest.approx(33.3, abs=1e-9)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(53)
        samples = [
            sample(i, SpanSet.from_pairs(random_pairs(rng)), SpanSet.from_pairs(random_pairs(rng)))
            for i in range(20)
        ]
        fwd = aggregate(samples)
        rev = aggregate(list(reversed(samples)))
        assert fwd.miou == rev.miou
        assert fwd.iou_at == rev.iou_at
        assert fwd.per_sample == rev.per_sample

    def test_empty_rejected(self):
        with pytest.raises(ValidationFailure):
            aggregate([])

    def test_time_questions_excluded_from_qa_means(self):
        samples = [
            sample(0, ss([0, 1]), ss([0, 1])),
            sample(1, ss([0, 1]), ss([0, 1]), time_question=True),
        ]
        report = aggregate(samples, qa_scores={"s0": 8, "s1": 2})
        assert report.qa_score_mean == 8.0


class FakeJudge:
    name = "fake"

    def __init__(self, reply):
        self.reply = reply
        self.calls = []

    def send(self, system, user, params=DecodingParams()):
        self.calls.append((system, user))
        return self.reply


class TestJudge:
    def make_sample(self):
        return SampleEval(
            sample_id="q1",
            prediction=ss([0, 1]),
            ground_truth=ss([0, 1]),
            predicted_answer="You opened the tap twice.",
            reference_answer="You opened the tap two times.",
            question="How many times did I open the tap?",
        )

    def test_verdict_parsed(self):
        judge = FakeJudge("{'score': 5, 'rationale': 'partially correct'}")
        verdict = judge_qa(self.make_sample(), judge)
        assert verdict == JudgeVerdict(score=5, rationale="partially correct")
        system, user = judge.calls[0]
        assert "output JSON" in system
        assert "###Question" in user
        assert "How many times did I open the tap?" in user

    def test_out_of_range_score(self):
        with pytest.raises(FormatError):
            judge_qa(self.make_sample(), FakeJudge('{"score": 11, "rationale": "x"}'))

    def test_unparseable_keeps_raw(self):
        with pytest.raises(FormatError) as err:
            judge_qa(self.make_sample(), FakeJudge("the student did well"))
        assert err.value.raw_text == "the student did well"

    def test_missing_fields_rejected(self):
        broken = self.make_sample()
        broken.question = None
        with pytest.raises(ValidationFailure):
            judge_qa(broken, FakeJudge("{'score': 5, 'rationale': ''}"))

    def test_replay_round_trip(self, tmp_path):
        path = tmp_path / "judge_replay.json"
        recorder = RecordingChatClient(FakeJudge("{'score': 7, 'rationale': 'good'}"), path)
        first = judge_qa(self.make_sample(), recorder)
        recorder.save()
        replay = ReplayChatClient(path)
        assert judge_qa(self.make_sample(), replay) == first
        assert judge_qa(self.make_sample(), replay) == first

    def test_judge_samples_skips_time_questions(self):
        good = self.make_sample()
        timeq = self.make_sample()
        timeq.sample_id = "q2"
        timeq.time_question = True
        verdicts = judge_samples([good, timeq], FakeJudge("{'score': 9, 'rationale': ''}"), parallelism=2)
        assert set(verdicts) == {"q1"}

    def test_verdict_variants(self):
        assert parse_judge_verdict('{"score": 3, "rationale": "ok"}').score == 3
        assert parse_judge_verdict("```json\n{'score': 10, 'rationale': 'x'}\n```").score == 10
        with pytest.raises(FormatError):
            parse_judge_verdict('{"rationale": "no score"}')


class TestAnswerSimilarity:
    def test_cosine_percent(self):
        class FakeEmbed:
            name = "fake"

            def embed(self, texts):
                table = {
                    "a": [1.0, 0.0],
                    "b": [1.0, 0.0],
                    "c": [0.0, 1.0],
                    "d": [1.0, 0.0],
                }
                return [table[t] for t in texts]

        samples = [
            SampleEval("s0", EMPTY, EMPTY, predicted_answer="a", reference_answer="b"),
            SampleEval("s1", EMPTY, EMPTY, predicted_answer="c", reference_answer="d"),
        ]
        sims = answer_similarities(samples, FakeEmbed())
        assert sims["s0"] == pytest.approx(100.0)
        assert sims["s1"] == pytest.approx(0.0, abs=1e-9)


class TestParseModelResponse:
    def test_reference_format(self):
        text = (
            "### Answer\nYou opened the tap twice.\n"
            "### Evidence\n[[9, 15], [120, 135]]\n"
            "### Rationale\nAccording to the frames sampled from 9s to 15s…"
        )
        parsed = parse_model_response(text)
        assert parsed.answer == "You opened the tap twice."
        assert parsed.evidence.to_pairs() == [[9, 15], [120, 135]]
        assert parsed.found_answer_section and parsed.found_evidence
        assert not parsed.repaired

    def test_no_intervals(self):
        parsed = parse_model_response("I could not find any relevant moment.")
        assert parsed.answer == "I could not find any relevant moment."
        assert parsed.evidence == EMPTY
        assert not parsed.found_evidence

    def test_reversed_interval_swapped_and_flagged(self):
        parsed = parse_model_response("###Answer\nOnce.\n###Evidence\n[[15, 9]]")
        assert parsed.evidence.to_pairs() == [[9, 15]]
        assert parsed.repaired

    def test_heading_without_space(self):
        parsed = parse_model_response("###Answer\nTwice.\n###Evidence\n[[1, 2]]\n###Rationale\nBecause.")
        assert parsed.answer == "Twice."

    def test_negative_clamped(self):
        parsed = parse_model_response("### Evidence\n[[-3, 10]]")
        assert parsed.evidence.to_pairs() == [[0, 10]]
        assert parsed.repaired


class TestJsonlIO:
    def test_combined_round_trip(self, tmp_path):
        path = tmp_path / "samples.jsonl"
        rows = [
            {"sample_id": "a", "prediction": [[0, 5]], "ground_truth": [[0, 10]],
             "question": "?", "predicted_answer": "x", "reference_answer": "y"},
            {"sample_id": "b", "prediction": [], "ground_truth": [[3, 4]], "time_question": True},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows))
        samples = read_sample_evals(path)
        assert [s.sample_id for s in samples] == ["a", "b"]
        assert samples[0].prediction.to_pairs() == [[0, 5]]
        assert samples[1].time_question

    def test_join_pred_gt(self, tmp_path):
        pred = tmp_path / "pred.jsonl"
        gt = tmp_path / "gt.jsonl"
        pred.write_text(json.dumps({"sample_id": "a", "evidence": [[0, 5]], "answer": "pa"}))
        gt.write_text(
            "\n".join(
                json.dumps(r)
                for r in [
                    {"sample_id": "a", "evidence": [[0, 10]], "answer": "ga", "question": "?"},
                    {"sample_id": "b", "evidence": [[2, 4]], "answer": "gb", "question": "??"},
                ]
            )
        )
        samples = {s.sample_id: s for s in join_pred_gt(pred, gt)}
        assert samples["a"].prediction.to_pairs() == [[0, 5]]
        assert samples["a"].reference_answer == "ga"
        assert samples["b"].prediction == EMPTY

    def test_join_rejects_orphan_predictions(self, tmp_path):
        pred = tmp_path / "pred.jsonl"
        gt = tmp_path / "gt.jsonl"
        pred.write_text(json.dumps({"sample_id": "zzz", "evidence": []}))
        gt.write_text(json.dumps({"sample_id": "a", "evidence": [[0, 1]]}))
        with pytest.raises(ValidationFailure):
            join_pred_gt(pred, gt)

    def test_join_parses_raw_responses(self, tmp_path):
        pred = tmp_path / "pred.jsonl"
        gt = tmp_path / "gt.jsonl"
        pred.write_text(
            json.dumps({"sample_id": "a", "response": "### Answer\nOnce.\n### Evidence\n[[5, 9]]"})
        )
        gt.write_text(json.dumps({"sample_id": "a", "evidence": [[5, 9]], "answer": "Once."}))
        (s,) = join_pred_gt(pred, gt, parse_responses=True)
        assert s.prediction.to_pairs() == [[5, 9]]
        assert s.predicted_answer == "Once."

    def test_report_csv(self, tmp_path):
        report = aggregate([sample(0, ss([0, 5]), ss([0, 10]))])
        out = tmp_path / "per_sample.csv"
        report.write_csv(out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "sample_id,iou,iop,iog"
        assert lines[1].startswith("s0,0.5,")
