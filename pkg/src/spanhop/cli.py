"""Command-line entry points for every pipeline and evaluation stage.

Thin shell over the library modules: each subcommand reads/writes the
store or files under a RunConfig and prints a machine-readable JSON
summary when asked. Exit codes: 0 ok, 2 validation, 3 transport,
4 integrity.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import RunConfig, load_config
from .errors import ToolkitError, ValidationFailure
from .grounding import GroundingInstance
from .llm import ChatClient, HttpChatClient, HttpEmbeddingClient, ReplayChatClient, ReplayEmbeddingClient
from .metrics import aggregate, answer_similarities, join_pred_gt, judge_samples, read_sample_evals
from .pipeline import (
    filter_stage,
    generate_stage,
    ingest_corpus,
    mine_stage,
    segment_stage,
)
from .proposals import FrameAxis, saliency_to_spans, similarity_to_spans
from .stats import compute_stats, read_triplet_records
from .store import Store, export_accepted

log = logging.getLogger("spanhop")


def _emit(args, payload: dict) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for key, value in sorted(payload.items()):
            if isinstance(value, (str, int, float, bool)) or value is None:
                print(f"{key}: {value}")
            else:
                print(f"{key}: {json.dumps(value, sort_keys=True)}")


def _store(args) -> Store:
    return Store(args.store)


def _chat_client(args, config: RunConfig) -> ChatClient:
    replay = getattr(args, "replay", None) or config.endpoints.replay_path
    if replay:
        return ReplayChatClient(replay)
    url = getattr(args, "llm_url", None) or config.endpoints.llm_url
    if not url:
        raise ValidationFailure("no LLM endpoint configured; pass --replay or --llm-url")
    model = getattr(args, "llm_model", None) or config.endpoints.llm_model
    return HttpChatClient(url, model, auth_env=config.endpoints.llm_auth_env)


def _overrides_from_flags(args) -> dict:
    mapping = {
        "min_narrations": ("mine", "min_narrations"),
        "max_narrations": ("mine", "max_narrations"),
        "min_clip_extent": ("mine", "min_clip_extent"),
        "t_min": ("mine", "t_min"),
        "t_max": ("mine", "t_max"),
        "min_candidate_extent": ("mine", "min_candidate_extent"),
        "saliency_coef": ("proposals", "saliency_coef"),
        "similarity_coef": ("proposals", "similarity_coef"),
        "tau": ("proposals", "tau"),
        "fps": ("proposals", "fps"),
        "clip_offset": ("proposals", "clip_offset"),
    }
    overrides: dict = {}
    for flag, (section, key) in mapping.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides.setdefault(section, {})[key] = value
    return overrides


def _config(args) -> RunConfig:
    return load_config(getattr(args, "config", None), overrides=_overrides_from_flags(args))


# --- subcommand handlers ----------------------------------------------------


def cmd_ingest(args) -> dict:
    report = ingest_corpus(_store(args), args.narrations, args.videos, args.conllu_dir)
    return report.to_json_dict()


def cmd_segment(args) -> dict:
    return segment_stage(_store(args), _config(args)).to_json_dict()


def cmd_mine(args) -> dict:
    return mine_stage(_store(args), _config(args)).to_json_dict()


def cmd_generate(args) -> dict:
    config = _config(args)
    return generate_stage(_store(args), _chat_client(args, config), config).to_json_dict()


def cmd_filter(args) -> dict:
    config = _config(args)
    return filter_stage(_store(args), _chat_client(args, config), config).to_json_dict()


def cmd_review_serve(args) -> dict:
    import os

    import uvicorn

    from .service import create_app

    token = os.environ.get(args.token_env) if args.token_env else None
    app = create_app(_store(args), static_dir=args.static_dir, token=token)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return {"status": "stopped"}


def cmd_eval(args) -> dict:
    config = _config(args)
    if args.samples:
        samples = read_sample_evals(args.samples)
    elif args.pred and args.gt:
        samples = join_pred_gt(args.pred, args.gt, parse_responses=args.parse_responses)
    else:
        raise ValidationFailure("eval needs --samples or both --pred and --gt")
    qa_scores = None
    qa_sims = None
    if args.judge_replay or args.judge_url:
        judge = (
            ReplayChatClient(args.judge_replay)
            if args.judge_replay
            else HttpChatClient(args.judge_url, config.endpoints.judge_model,
                                auth_env=config.endpoints.judge_auth_env)
        )
        verdicts = judge_samples(samples, judge, parallelism=config.endpoints.parallelism)
        qa_scores = {k: v.score for k, v in verdicts.items()}
    if args.embed_replay or args.embed_url:
        embedder = (
            ReplayEmbeddingClient(args.embed_replay)
            if args.embed_replay
            else HttpEmbeddingClient(args.embed_url, config.endpoints.embed_model,
                                     auth_env=config.endpoints.embed_auth_env)
        )
        qa_sims = answer_similarities(samples, embedder)
    report = aggregate(
        samples,
        iou_thresholds=[float(t) for t in args.iou_thresholds.split(",")],
        precision_thresholds=[float(t) for t in args.p_thresholds.split(",")],
        qa_scores=qa_scores,
        qa_similarities=qa_sims,
    )
    payload = report.to_json_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if args.csv:
        report.write_csv(args.csv)
    if args.run_id:
        if not args.store:
            raise ValidationFailure("--run-id needs --store to persist the report")
        _store(args).put("runs", args.run_id, {"run_id": args.run_id, **payload})
    return payload


def cmd_proposals(args) -> dict:
    config = _config(args)
    if not args.saliency and not args.similarity:
        raise ValidationFailure("proposals needs --saliency and/or --similarity fixture paths")
    out: dict = {}

    def axis_for(instance: GroundingInstance, num_frames: int) -> FrameAxis:
        fps = args.fps if args.fps is not None else (instance.fps or config.proposals.fps)
        offset = args.clip_offset if args.clip_offset is not None else (
            instance.clip_offset if instance.fps is not None else config.proposals.clip_offset
        )
        return FrameAxis(num_frames=num_frames, frames_per_second=fps, clip_offset=offset)

    if args.saliency:
        instance = GroundingInstance.load(args.saliency)
        scores = instance.resolved_saliency_scores()
        spans = saliency_to_spans(
            scores,
            coef=args.saliency_coef if args.saliency_coef is not None else config.proposals.saliency_coef,
            axis=axis_for(instance, scores.shape[0]),
        )
        out["saliency"] = spans.to_pairs()
    if args.similarity:
        instance = GroundingInstance.load(args.similarity)
        sim = instance.resolved_similarity()
        spans = similarity_to_spans(
            sim,
            tau=args.tau if args.tau is not None else instance.tau,
            coef=args.similarity_coef if args.similarity_coef is not None else config.proposals.similarity_coef,
            axis=axis_for(instance, sim.shape[1]),
        )
        out["similarity"] = spans.to_pairs()
    if len(out) == 1:
        (pairs,) = out.values()
        print(json.dumps(pairs))
    else:
        print(json.dumps(out, sort_keys=True))
    return out


def cmd_stats(args) -> dict:
    summary = compute_stats(read_triplet_records(args.triplets))
    if args.out:
        Path(args.out).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary


def cmd_export(args) -> dict:
    count = export_accepted(_store(args), args.out)
    return {"accepted": count, "out": str(args.out)}


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spanhop", description=__doc__)
    parser.add_argument("--version", action="version", version=f"spanhop {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(handler=handler)
        p.add_argument("--config", help="YAML or JSON RunConfig file")
        p.add_argument("--json", action="store_true", help="print a JSON summary to stdout")
        return p

    p = add("ingest", cmd_ingest, help="load narrations + durations into the store")
    p.add_argument("--narrations", required=True, help="narrations .csv or .jsonl")
    p.add_argument("--videos", required=True, help="videos.jsonl with video_id and duration")
    p.add_argument("--conllu-dir", help="directory of CoNLL-U sidecar parses")
    p.add_argument("--store", required=True)

    p = add("segment", cmd_segment, help="cut videos into clips and apply the rule filter")
    p.add_argument("--store", required=True)
    p.add_argument("--min-narrations", type=int)
    p.add_argument("--max-narrations", type=int)
    p.add_argument("--min-clip-extent", type=float)

    p = add("mine", cmd_mine, help="build scene graphs and mine recurrence candidates")
    p.add_argument("--store", required=True)
    p.add_argument("--t-min", type=int)
    p.add_argument("--t-max", type=int)
    p.add_argument("--min-candidate-extent", type=float)

    for name, handler, help_text in (
        ("generate", cmd_generate, "generate QA triplets for mined candidates"),
        ("filter", cmd_filter, "LLM reasonableness filter over generated triplets"),
    ):
        p = add(name, handler, help=help_text)
        p.add_argument("--store", required=True)
        p.add_argument("--replay", help="replay fixture file (no network)")
        p.add_argument("--llm-url")
        p.add_argument("--llm-model")

    p = add("review-serve", cmd_review_serve, help="serve the review HTTP API and UI")
    p.add_argument("--store", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--static-dir", help="built review UI assets to serve at /ui")
    p.add_argument("--token-env", default="SPANHOP_API_TOKEN",
                   help="environment variable holding the bearer token (unset disables auth)")

    p = add("eval", cmd_eval, help="grounding metrics (and optional QA scoring)")
    p.add_argument("--samples", help="combined SampleEval JSONL")
    p.add_argument("--pred", help="prediction JSONL keyed by sample_id")
    p.add_argument("--gt", help="ground-truth JSONL keyed by sample_id")
    p.add_argument("--parse-responses", action="store_true",
                   help="prediction lines carry a raw 'response' field to parse")
    p.add_argument("--iou-thresholds", default="0.3")
    p.add_argument("--p-thresholds", default="0.5")
    p.add_argument("--judge-replay")
    p.add_argument("--judge-url")
    p.add_argument("--embed-replay")
    p.add_argument("--embed-url")
    p.add_argument("--out", help="write the report JSON here")
    p.add_argument("--csv", help="write the per-sample CSV here")
    p.add_argument("--run-id", help="persist the report under this id in the store")
    p.add_argument("--store")

    p = add("proposals", cmd_proposals, help="thresholded spans from score fixtures")
    p.add_argument("--saliency", help="GroundingInstance JSON with saliency scores/logits")
    p.add_argument("--similarity", help="GroundingInstance JSON with a similarity matrix")
    p.add_argument("--saliency-coef", type=float)
    p.add_argument("--similarity-coef", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--fps", type=float)
    p.add_argument("--clip-offset", type=float)

    p = add("stats", cmd_stats, help="benchmark statistics over a triplet JSONL")
    p.add_argument("--triplets", required=True)
    p.add_argument("--out")

    p = add("export", cmd_export, help="benchmark-style JSONL of accepted triplets")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload = args.handler(args)
    except ToolkitError as exc:
        error = {"error": {"code": exc.code, "message": str(exc)}}
        fields = getattr(exc, "fields", None)
        if fields:
            error["error"]["fields"] = fields
        print(json.dumps(error, sort_keys=True), file=sys.stderr)
        return exc.exit_code
    if args.command != "proposals":  # proposals already printed its span JSON
        _emit(args, payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
