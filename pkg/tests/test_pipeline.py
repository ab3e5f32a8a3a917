from __future__ import annotations

import json
from pathlib import Path

import pytest

from spanhop.config import load_config
from spanhop.genfilter import validate_markup
from spanhop.llm import ReplayChatClient
from spanhop.pipeline import (
    CorpusPaths,
    filter_stage,
    generate_stage,
    ingest_corpus,
    mine_stage,
    run_pipeline,
    segment_stage,
)
from spanhop.store import Store

FIXTURES = Path(__file__).parent / "data" / "pipeline"


@pytest.fixture()
def replay_client():
    return ReplayChatClient(FIXTURES / "replay.json")


@pytest.fixture()
def config():
    return load_config()


def store_bytes(root: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(root.iterdir()) if p.is_file()}


def test_run_matches_frozen_expectations(tmp_path, replay_client, config):
    store = Store(tmp_path / "store")
    report = run_pipeline(FIXTURES, store, replay_client, config)
    expected = json.loads((FIXTURES / "expected.json").read_text())
    assert report.counts == expected["counts"]
    statuses = sorted([t["triplet_id"], t["status"]] for t in store.list("triplets"))
    assert statuses == expected["triplet_statuses"]
    rejections = sorted([r["rejection_id"], r["reason"]] for r in store.list("rejections"))
    assert rejections == expected["rejections"]


def test_byte_identical_across_runs(tmp_path, config):
    roots = []
    for name in ("a", "b"):
        store = Store(tmp_path / name)
        client = ReplayChatClient(FIXTURES / "replay.json")
        run_pipeline(FIXTURES, store, client, config)
        roots.append(tmp_path / name)
    assert store_bytes(roots[0]) == store_bytes(roots[1])


def test_all_persisted_triplets_pass_marker_grammar(tmp_path, replay_client, config):
    store = Store(tmp_path / "store")
    run_pipeline(FIXTURES, store, replay_client, config)
    triplets = store.list("triplets")
    assert triplets
    for record in triplets:
        assert validate_markup(record["answer"], record["span_map"]) == [], record["triplet_id"]
        for spans in record["span_map"].values():
            for s, e in spans:
                assert 0 <= s <= e <= 180


def test_no_triplet_references_rejected_clip(tmp_path, replay_client, config):
    store = Store(tmp_path / "store")
    run_pipeline(FIXTURES, store, replay_client, config)
    accepted_clips = {
        c["clip_id"] for c in store.list("clips") if c["filter"]["accepted"]
    }
    for record in store.list("triplets"):
        assert record["clip_id"] in accepted_clips
    for record in store.list("rejections"):
        assert record["clip_id"] in accepted_clips


def test_rerun_resumes_idempotently(tmp_path, config):
    store = Store(tmp_path / "store")
    client = ReplayChatClient(FIXTURES / "replay.json")
    first = run_pipeline(FIXTURES, store, client, config)
    before = {t["triplet_id"]: t for t in store.list("triplets")}
    second = run_pipeline(FIXTURES, store, client, config)
    after = {t["triplet_id"]: t for t in store.list("triplets")}
    assert before == after
    assert second.counts["generation_skipped"] == first.counts["generated"] + first.counts[
        "generation_rejected"
    ]
    assert "generated" not in second.counts


def test_stagewise_equals_run_pipeline(tmp_path, config):
    staged = Store(tmp_path / "staged")
    client = ReplayChatClient(FIXTURES / "replay.json")
    corpus = CorpusPaths.discover(FIXTURES)
    ingest_corpus(staged, corpus.narrations, corpus.videos, corpus.conllu_dir)
    segment_stage(staged, config)
    mine_stage(staged, config)
    generate_stage(staged, client, config)
    filter_stage(staged, client, config)

    composed = Store(tmp_path / "composed")
    run_pipeline(FIXTURES, composed, ReplayChatClient(FIXTURES / "replay.json"), config)
    assert staged.list("triplets") == composed.list("triplets")
    assert staged.list("candidates") == composed.list("candidates")


def test_zero_accepted_clips_yields_empty_store(tmp_path, replay_client, config, caplog):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    (corpus / "narrations.csv").write_text(
        "video_id,start,text\n" + "\n".join(f"v1,{i * 30},C waits" for i in range(5)) + "\n"
    )
    (corpus / "videos.jsonl").write_text('{"video_id": "v1", "duration": 200}\n')
    store = Store(tmp_path / "store")
    with caplog.at_level("WARNING"):
        report = run_pipeline(corpus, store, replay_client, config)
    assert report.counts.get("clips_accepted", 0) == 0
    assert store.list("triplets") == []
    assert any("no clips survived" in message for message in caplog.messages)


def test_provenance_recorded(tmp_path, replay_client, config):
    store = Store(tmp_path / "store")
    run_pipeline(FIXTURES, store, replay_client, config)
    record = store.get("triplets", "v_kitchen_0_180.dobj.fridge.qa0")
    assert record["provenance"]["template_id"] == "dobj"
    assert record["provenance"]["candidate_id"] == "v_kitchen_0_180.dobj.fridge"
    assert record["provenance"]["model"].startswith("replay:")


def test_repaired_flag_set_for_duplicate_marker_fixture(tmp_path, replay_client, config):
    store = Store(tmp_path / "store")
    run_pipeline(FIXTURES, store, replay_client, config)
    record = store.get("triplets", "v_kitchen_0_180.verb.wave.qa0")
    assert record["flags"]["repaired"] is True
    assert validate_markup(record["answer"], record["span_map"]) == []
