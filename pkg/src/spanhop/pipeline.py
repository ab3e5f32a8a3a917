"""Pipeline stages wiring ingestion, mining, generation, and filtration
through the store.

Every stage is idempotent: record ids are deterministic and existing keys
are skipped, so a rerun (after a crash or endpoint exhaustion) resumes
where it stopped and converges to the same store contents.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from .config import RunConfig
from .errors import FormatError, TransportError, ValidationFailure
from .genfilter import (
    GENERATED,
    LLM_FILTERED,
    REJECTED,
    Triplet,
    llm_filter,
    parse_generation,
    render_prompt,
)
from .llm import ChatClient, DecodingParams
from .miner import MiningCandidate, build_graph, filter_clip, find_candidates
from .narrations import (
    Clip,
    attach_parses,
    read_conllu,
    read_narrations_csv,
    read_narrations_jsonl,
    segment_clips,
)
from .store import Store

log = logging.getLogger(__name__)


@dataclass
class PipelineReport:
    counts: dict[str, int] = field(default_factory=dict)

    def bump(self, key: str, amount: int = 1) -> None:
        self.counts[key] = self.counts.get(key, 0) + amount

    def to_json_dict(self) -> dict:
        return {"counts": dict(sorted(self.counts.items()))}


def _read_videos(path: Path) -> list[dict]:
    import json

    videos = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        record = json.loads(line)
        if "video_id" not in record or "duration" not in record:
            raise ValidationFailure(f"{path}:{line_no}: videos need video_id and duration")
        videos.append(record)
    return videos


def ingest_corpus(
    store: Store,
    narrations_path: str | Path,
    videos_path: str | Path,
    conllu_dir: str | Path | None = None,
    report: PipelineReport | None = None,
) -> PipelineReport:
    """Read narrations + durations, attach parses, persist one record per video."""
    report = report or PipelineReport()
    narrations_path = Path(narrations_path)
    if narrations_path.suffix == ".csv":
        narrations = read_narrations_csv(narrations_path)
    else:
        narrations = read_narrations_jsonl(narrations_path)
    parses = {}
    if conllu_dir is not None:
        for conllu_file in sorted(Path(conllu_dir).glob("*.conllu")):
            parses.update(read_conllu(conllu_file))
    attach_parses(narrations, parses)
    by_video: dict[str, list] = {}
    for n in narrations:
        by_video.setdefault(n.video_id, []).append(n)
    for video in _read_videos(Path(videos_path)):
        video_id = video["video_id"]
        rows = sorted(by_video.get(video_id, []), key=lambda n: n.start)
        store.put(
            "videos",
            video_id,
            {
                "video_id": video_id,
                "duration": float(video["duration"]),
                "narrations": [n.to_record() for n in rows],
            },
        )
        report.bump("videos")
        report.bump("narrations", len(rows))
    return report


def segment_stage(store: Store, config: RunConfig, report: PipelineReport | None = None) -> PipelineReport:
    """Cut every ingested video into clips and record the rule-filter decision."""
    from .narrations import Narration

    report = report or PipelineReport()
    for video in store.list("videos"):
        narrations = [Narration.from_record(r) for r in video["narrations"]]
        clips = segment_clips(video["video_id"], video["duration"], narrations, config.clip_seconds)
        for clip in clips:
            decision = filter_clip(
                clip,
                min_narrations=config.mine.min_narrations,
                max_narrations=config.mine.max_narrations,
                min_extent=config.mine.min_clip_extent,
            )
            record = clip.to_record()
            record["filter"] = {"accepted": decision.accepted, "reason": decision.reason}
            store.put("clips", clip.clip_id, record)
            report.bump("clips")
            report.bump("clips_accepted" if decision.accepted else "clips_rejected")
    return report


def mine_stage(store: Store, config: RunConfig, report: PipelineReport | None = None) -> PipelineReport:
    """Scattered-recurrence search over the accepted clips."""
    report = report or PipelineReport()
    for record in store.list("clips"):
        if not record.get("filter", {}).get("accepted"):
            continue
        clip = Clip.from_record(record)
        graph = build_graph(clip)
        for candidate in find_candidates(
            graph,
            t_min=config.mine.t_min,
            t_max=config.mine.t_max,
            min_extent=config.mine.min_candidate_extent,
        ):
            store.put("candidates", candidate.candidate_id, candidate.to_record())
            report.bump("candidates")
    return report


def _send_with_retries(client: ChatClient, system: str, user: str, params: DecodingParams, retries: int) -> str:
    attempt = 0
    while True:
        try:
            return client.send(system, user, params)
        except TransportError as exc:
            if not getattr(exc, "retryable", False) or attempt >= retries:
                raise
            attempt += 1
            log.warning("retrying after transport error (%d/%d): %s", attempt, retries, exc)


def generate_stage(
    store: Store, client: ChatClient, config: RunConfig, report: PipelineReport | None = None
) -> PipelineReport:
    """Generate one QA triplet per candidate; structural failures become rejections."""
    report = report or PipelineReport()
    params = DecodingParams(
        temperature=config.generation.temperature, json_mode=config.generation.json_mode
    )
    for record in store.list("candidates"):
        candidate = MiningCandidate.from_record(record)
        triplet_id = f"{candidate.candidate_id}.qa0"
        if store.get("triplets", triplet_id) is not None or store.get("rejections", triplet_id) is not None:
            report.bump("generation_skipped")
            continue
        prompt = render_prompt(candidate)
        raw = _send_with_retries(client, prompt.system, prompt.user, params, config.generation.retries)
        parsed = parse_generation(raw, clip_seconds=config.clip_seconds)
        if not parsed.ok:
            store.put(
                "rejections",
                triplet_id,
                {
                    "rejection_id": triplet_id,
                    "candidate_id": candidate.candidate_id,
                    "clip_id": candidate.clip_id,
                    "stage": "generation",
                    "reason": parsed.reason,
                    "detail": parsed.detail,
                    "raw": raw,
                },
                expect_new=True,
            )
            report.bump("generation_rejected")
            continue
        triplet = Triplet(
            triplet_id=triplet_id,
            clip_id=candidate.clip_id,
            question=parsed.question,
            answer=parsed.answer,
            span_map=parsed.span_map,
            status=GENERATED,
            provenance={
                "candidate_id": candidate.candidate_id,
                "template_id": prompt.template_id,
                "model": client.name,
            },
            flags={"repaired": parsed.repaired},
        )
        store.put("triplets", triplet.triplet_id, triplet.to_record(), expect_new=True)
        report.bump("generated")
    return report


def filter_stage(
    store: Store, client: ChatClient, config: RunConfig, report: PipelineReport | None = None
) -> PipelineReport:
    """LLM reasonableness filter over freshly generated triplets."""
    report = report or PipelineReport()
    params = DecodingParams(
        temperature=config.generation.temperature, json_mode=config.generation.json_mode
    )
    for record in store.list("triplets", status=GENERATED):
        triplet = Triplet.from_record(record)
        try:
            verdict = llm_filter(triplet, client, params)
        except FormatError as exc:
            triplet.flags = {**triplet.flags, "filter_error": str(exc)}
            store.put("triplets", triplet.triplet_id, triplet.to_record())
            report.bump("filter_errors")
            continue
        triplet.status = LLM_FILTERED if verdict.keep else REJECTED
        triplet.filter_rationale = verdict.rationale
        store.put("triplets", triplet.triplet_id, triplet.to_record())
        report.bump("filter_kept" if verdict.keep else "filter_dropped")
    return report


@dataclass(frozen=True)
class CorpusPaths:
    narrations: Path
    videos: Path
    conllu_dir: Path | None = None

    @classmethod
    def discover(cls, corpus_dir: str | Path) -> "CorpusPaths":
        root = Path(corpus_dir)
        narrations = next(
            (p for p in (root / "narrations.csv", root / "narrations.jsonl") if p.exists()), None
        )
        videos = root / "videos.jsonl"
        if narrations is None or not videos.exists():
            raise ValidationFailure(
                f"corpus dir {root} needs narrations.csv|narrations.jsonl and videos.jsonl"
            )
        conllu = root / "parses"
        return cls(narrations=narrations, videos=videos, conllu_dir=conllu if conllu.exists() else None)


def run_pipeline(corpus: CorpusPaths | str | Path, store: Store, client: ChatClient, config: RunConfig) -> PipelineReport:
    """Full curation pass: ingest, segment, filter clips, mine, generate, filter.

    Deterministic given a fixed corpus, config, and a replay client; stage
    counts are returned and written to progress.json beside the store.
    """
    if not isinstance(corpus, CorpusPaths):
        corpus = CorpusPaths.discover(corpus)
    report = PipelineReport()
    ingest_corpus(store, corpus.narrations, corpus.videos, corpus.conllu_dir, report)
    segment_stage(store, config, report)
    mine_stage(store, config, report)
    generate_stage(store, client, config, report)
    filter_stage(store, client, config, report)
    if report.counts.get("clips_accepted", 0) == 0:
        log.warning("no clips survived rule filtering; the triplet store is empty")
    store.compact()
    import json

    (store.root / "progress.json").write_text(
        json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return report
