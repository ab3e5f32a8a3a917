/** Pure review-state logic: answer markup parsing, span drafts, validation,
 * and decision-request construction. Everything the server needs to
 * reproduce a decision lives in the request body this module builds. */

import type { DecisionRequest, SpanMap, SpanPair, TripletRecord } from "./api.js";

export const CLIP_SECONDS = 180;
export const CATEGORIES = ["A", "B", "C", "D", "E", "F"] as const;

const MARKER_RE = /<(\/?)T(\d+)>/g;

export interface AnswerSegment {
  text: string;
  marker: string | null; // "<T1>" when the text sits inside that marker pair
}

/** Split a marker-annotated answer into renderable segments. */
export function parseAnswerSegments(answer: string): AnswerSegment[] {
  const segments: AnswerSegment[] = [];
  let cursor = 0;
  let open: string | null = null;
  for (const match of answer.matchAll(MARKER_RE)) {
    const index = match.index ?? 0;
    if (index > cursor) {
      segments.push({ text: answer.slice(cursor, index), marker: open });
    }
    open = match[1] === "/" ? null : `<T${match[2]}>`;
    cursor = index + match[0].length;
  }
  if (cursor < answer.length) {
    segments.push({ text: answer.slice(cursor), marker: open });
  }
  return segments.filter((s) => s.text.trim().length > 0);
}

export function markersInAnswer(answer: string): string[] {
  const seen: string[] = [];
  for (const match of answer.matchAll(MARKER_RE)) {
    const key = `<T${match[2]}>`;
    if (!seen.includes(key)) seen.push(key);
  }
  return seen;
}

export interface ReviewDraft {
  tripletId: string;
  decisionId: string;
  answer: string;
  original: SpanMap;
  spans: SpanMap;
  category: string | null;
}

function cloneSpans(spans: SpanMap): SpanMap {
  const out: SpanMap = {};
  for (const [key, pairs] of Object.entries(spans)) {
    out[key] = pairs.map((p) => [p[0], p[1]] as SpanPair);
  }
  return out;
}

/** A fresh draft carries its idempotency id; resubmits reuse it. */
export function startDraft(triplet: TripletRecord, decisionId: string): ReviewDraft {
  return {
    tripletId: triplet.triplet_id,
    decisionId,
    answer: triplet.answer,
    original: cloneSpans(triplet.span_map),
    spans: cloneSpans(triplet.span_map),
    category: null,
  };
}

export function editSpan(draft: ReviewDraft, marker: string, index: number, span: SpanPair): ReviewDraft {
  const spans = cloneSpans(draft.spans);
  if (!(marker in spans) || index < 0 || index >= spans[marker].length) {
    throw new Error(`no interval ${index} for marker ${marker}`);
  }
  spans[marker][index] = [span[0], span[1]];
  return { ...draft, spans };
}

export function addSpan(draft: ReviewDraft, marker: string, span: SpanPair): ReviewDraft {
  const spans = cloneSpans(draft.spans);
  if (!(marker in spans)) throw new Error(`unknown marker ${marker}`);
  spans[marker].push([span[0], span[1]]);
  return { ...draft, spans };
}

export function removeSpan(draft: ReviewDraft, marker: string, index: number): ReviewDraft {
  const spans = cloneSpans(draft.spans);
  if (!(marker in spans) || spans[marker].length <= 1) {
    throw new Error(`marker ${marker} needs at least one interval`);
  }
  spans[marker].splice(index, 1);
  return { ...draft, spans };
}

export function clampSpan(span: SpanPair, clipSeconds: number = CLIP_SECONDS): SpanPair {
  const clamp = (v: number) => Math.min(Math.max(v, 0), clipSeconds);
  return [clamp(span[0]), clamp(span[1])];
}

export function isDirty(draft: ReviewDraft): boolean {
  return JSON.stringify(draft.spans) !== JSON.stringify(draft.original);
}

/** Client-side validation mirroring the server's markup rules. */
export function validateDraft(draft: ReviewDraft, clipSeconds: number = CLIP_SECONDS): string[] {
  const problems: string[] = [];
  const markers = markersInAnswer(draft.answer);
  const keys = Object.keys(draft.spans);
  const missing = markers.filter((m) => !keys.includes(m));
  const extra = keys.filter((k) => !markers.includes(k));
  if (missing.length) problems.push(`markers without intervals: ${missing.join(", ")}`);
  if (extra.length) problems.push(`intervals without markers: ${extra.join(", ")}`);
  for (const [marker, pairs] of Object.entries(draft.spans)) {
    if (!pairs.length) problems.push(`${marker} has no intervals`);
    for (const [s, e] of pairs) {
      if (!Number.isFinite(s) || !Number.isFinite(e)) {
        problems.push(`${marker} has a non-numeric endpoint`);
      } else if (s > e) {
        problems.push(`${marker} interval [${s}, ${e}] has start after end`);
      } else if (s < 0 || e > clipSeconds) {
        problems.push(`${marker} interval [${s}, ${e}] outside [0, ${clipSeconds}]`);
      }
    }
  }
  return problems;
}

/** Build the decision body. Reject always files category U; an edited
 * draft upgrades accept to adjust so the edits are persisted. */
export function buildDecision(
  draft: ReviewDraft,
  action: "accept" | "reject",
  reviewerId: string,
): DecisionRequest {
  if (action === "reject") {
    return {
      decision_id: draft.decisionId,
      reviewer_id: reviewerId,
      action: "reject",
      category: "U",
    };
  }
  if (!draft.category) throw new Error("accept needs a category A-F");
  if (isDirty(draft)) {
    return {
      decision_id: draft.decisionId,
      reviewer_id: reviewerId,
      action: "adjust",
      category: draft.category,
      adjusted_answer: draft.answer,
      adjusted_span_map: cloneSpans(draft.spans),
    };
  }
  return {
    decision_id: draft.decisionId,
    reviewer_id: reviewerId,
    action: "accept",
    category: draft.category,
  };
}

export interface Progress {
  reviewed: number;
  remaining: number;
}

export function progressAfter(progress: Progress): Progress {
  return { reviewed: progress.reviewed + 1, remaining: Math.max(0, progress.remaining - 1) };
}
