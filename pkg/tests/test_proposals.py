from __future__ import annotations

import numpy as np
import pytest

from spanhop.proposals import (
    FrameAxis,
    ProposalError,
    per_row_spans,
    saliency_to_spans,
    similarity_to_spans,
    smooth_rows,
)
from spanhop.spans import normalize


class TestSaliencyToSpans:
    def test_reference_fixture(self):
        spans = saliency_to_spans(np.array([0.1, 0.8, 0.9, 0.85, 0.2]), coef=0.7,
                                  axis=FrameAxis(5, frames_per_second=1.0))
        assert spans.to_pairs() == [[1, 4]]

    def test_all_equal_scores_cover_clip(self):
        spans = saliency_to_spans(np.full(6, 0.4), coef=0.7, axis=FrameAxis(6, 2.0))
        assert spans.to_pairs() == [[0, 3]]

    def test_single_frame_run(self):
        scores = np.zeros(8)
        scores[5] = 1.0
        spans = saliency_to_spans(scores, coef=0.7, axis=FrameAxis(8, 1.0))
        assert spans.to_pairs() == [[5, 6]]

    def test_two_runs_with_offset(self):
        scores = np.array([0.9, 0.95, 0.1, 0.1, 0.8, 0.9])
        spans = saliency_to_spans(scores, coef=0.7, axis=FrameAxis(6, 1.0, clip_offset=180.0))
        assert spans.to_pairs() == [[180, 182], [184, 186]]

    def test_empty_vector_rejected(self):
        with pytest.raises(ProposalError):
            saliency_to_spans(np.array([]), coef=0.7)

    def test_positive_rescaling_invariance(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            scores = rng.uniform(0.0, 1.0, size=int(rng.integers(1, 32)))
            axis = FrameAxis(scores.size, frames_per_second=8.0)
            base = saliency_to_spans(scores, coef=0.7, axis=axis)
            scaled = saliency_to_spans(scores * rng.uniform(0.1, 50.0), coef=0.7, axis=axis)
            assert base == scaled

    def test_output_within_axis_bounds(self):
        rng = np.random.default_rng(18)
        for _ in range(50):
            n = int(rng.integers(1, 40))
            axis = FrameAxis(n, frames_per_second=8.0, clip_offset=360.0)
            spans = saliency_to_spans(rng.uniform(size=n), coef=0.5, axis=axis)
            for s in spans:
                assert 360.0 <= s.start <= s.end <= 360.0 + n / 8.0

    def test_lower_coef_never_shrinks_coverage(self):
        rng = np.random.default_rng(19)
        for _ in range(50):
            scores = rng.uniform(size=20)
            axis = FrameAxis(20, 1.0)
            wide = saliency_to_spans(scores, coef=0.3, axis=axis).total_length()
            narrow = saliency_to_spans(scores, coef=0.8, axis=axis).total_length()
            assert wide >= narrow


class TestSmoothRows:
    def test_impulse(self):
        out = smooth_rows(np.array([[0.0, 1.0, 0.0]]))
        np.testing.assert_allclose(out, [[1 / 3, 1 / 3, 1 / 3]])

    def test_constant_row_unchanged(self):
        row = np.full((1, 7), 0.42)
        np.testing.assert_allclose(smooth_rows(row), row)

    def test_length_one_row(self):
        np.testing.assert_allclose(smooth_rows(np.array([[0.9]])), [[0.9]])

    def test_hand_convolution(self):
        out = smooth_rows(np.array([[1.0, 2.0, 3.0, 4.0]]))
        np.testing.assert_allclose(out, [[4 / 3, 2.0, 3.0, 11 / 3]])


class TestSimilarityToSpans:
    def test_sharp_peak_selects_single_frame(self):
        row = np.full(8, -1.0)
        row[3] = 1.0
        row[2] = row[4] = 0.2
        spans = similarity_to_spans(row[None, :], tau=0.05, coef=0.10, axis=FrameAxis(8, 1.0))
        assert spans.to_pairs() == [[3, 4]]

    def test_disjoint_peaks_union(self):
        m = np.full((2, 12), -1.0)
        m[0, 1] = m[0, 2] = 1.0
        m[1, 8] = m[1, 9] = 1.0
        axis = FrameAxis(12, 1.0)
        combined = similarity_to_spans(m, tau=0.05, coef=0.10, axis=axis)
        rows = per_row_spans(m, tau=0.05, coef=0.10, axis=axis)
        assert len(rows) == 2
        assert combined == rows[0].union(rows[1])
        assert combined.total_length() >= rows[0].total_length()

    def test_duplicate_rows_idempotent(self):
        rng = np.random.default_rng(23)
        row = rng.uniform(-1, 1, size=16)
        single = similarity_to_spans(row[None, :], tau=0.07, coef=0.10)
        double = similarity_to_spans(np.vstack([row, row]), tau=0.07, coef=0.10)
        assert single == double

    def test_union_equals_per_row_union_exactly(self):
        rng = np.random.default_rng(29)
        for _ in range(50):
            k, l = int(rng.integers(1, 5)), int(rng.integers(2, 24))
            m = rng.uniform(-1, 1, size=(k, l))
            axis = FrameAxis(l, frames_per_second=8.0)
            rows = per_row_spans(m, tau=0.07, coef=0.10, axis=axis)
            merged = normalize([s for row in rows for s in row.spans])
            assert merged == similarity_to_spans(m, tau=0.07, coef=0.10, axis=axis)

    def test_single_row_matches_combined(self):
        rng = np.random.default_rng(31)
        m = rng.uniform(-1, 1, size=(1, 10))
        assert per_row_spans(m)[0] == similarity_to_spans(m)

    def test_empty_matrix_rejected(self):
        with pytest.raises(ProposalError):
            similarity_to_spans(np.empty((0, 0)))
