"""File-backed store: one append-only JSONL log per collection plus a
compacted snapshot.

Every write appends a full record line; the latest line per key wins, so
the log doubles as the mutation history. Snapshots are rewritten
atomically (temp file + rename) and only accelerate loading. A trailing
line without a newline is an in-flight write and stays invisible to
readers; a newline-terminated line that fails to parse is corruption.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConflictError, IntegrityError, NotFoundError, ValidationFailure
from .genfilter import CATEGORIES, LLM_FILTERED, ACCEPTED, REJECTED, Triplet, validate_markup

COLLECTIONS = ("videos", "clips", "candidates", "triplets", "rejections", "decisions", "runs")


@dataclass
class ReviewDecision:
    decision_id: str
    triplet_id: str
    reviewer_id: str
    action: str  # accept | adjust | reject
    category: str | None = None
    adjusted_answer: str | None = None
    adjusted_span_map: dict | None = None
    timestamp: str | None = None

    def validate(self) -> None:
        if self.action not in ("accept", "adjust", "reject"):
            raise ValidationFailure(
                f"unknown review action {self.action!r}", fields={"action": "must be accept|adjust|reject"}
            )
        if not self.decision_id or not self.triplet_id:
            raise ValidationFailure(
                "decision_id and triplet_id are required",
                fields={"decision_id": "required", "triplet_id": "required"},
            )
        if self.action == "reject":
            if self.category not in (None, "U"):
                raise ValidationFailure(
                    "reject always files the triplet as category U",
                    fields={"category": "must be U or omitted for reject"},
                )
        else:
            if self.category not in CATEGORIES[:-1]:
                raise ValidationFailure(
                    f"{self.action} requires a category A-F, got {self.category!r}",
                    fields={"category": "must be one of A-F"},
                )
        if self.action == "adjust":
            if self.adjusted_answer is None or self.adjusted_span_map is None:
                raise ValidationFailure(
                    "adjust requires adjusted_answer and adjusted_span_map",
                    fields={"adjusted_answer": "required", "adjusted_span_map": "required"},
                )
            problems = validate_markup(self.adjusted_answer, self.adjusted_span_map)
            if problems:
                raise ValidationFailure(
                    f"adjusted markup invalid: {'; '.join(problems)}",
                    fields={"adjusted_answer": problems[0]},
                )

    def to_record(self) -> dict:
        return {
            "decision_id": self.decision_id,
            "triplet_id": self.triplet_id,
            "reviewer_id": self.reviewer_id,
            "action": self.action,
            "category": self.category,
            "adjusted_answer": self.adjusted_answer,
            "adjusted_span_map": self.adjusted_span_map,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_record(cls, record: dict) -> "ReviewDecision":
        return cls(
            decision_id=record["decision_id"],
            triplet_id=record["triplet_id"],
            reviewer_id=record.get("reviewer_id", ""),
            action=record["action"],
            category=record.get("category"),
            adjusted_answer=record.get("adjusted_answer"),
            adjusted_span_map=record.get("adjusted_span_map"),
            timestamp=record.get("timestamp"),
        )


@dataclass
class _Collection:
    records: dict[str, dict] = field(default_factory=dict)
    seq: int = 0


class Store:
    """Single-writer, multi-reader persistence rooted at a directory."""

    def __init__(self, root: str | Path, fsync: bool = True):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._fsync = fsync
        self._lock = threading.RLock()
        self._collections: dict[str, _Collection] = {}
        for name in COLLECTIONS:
            self._collections[name] = self._load(name)

    # --- persistence ---------------------------------------------------

    def _log_path(self, collection: str) -> Path:
        return self.root / f"{collection}.log"

    def _snapshot_path(self, collection: str) -> Path:
        return self.root / f"{collection}.snapshot.json"

    def _load(self, collection: str) -> _Collection:
        col = _Collection()
        snap_path = self._snapshot_path(collection)
        if snap_path.exists():
            try:
                snap = json.loads(snap_path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise IntegrityError(f"{snap_path}: corrupt snapshot ({exc})")
            col.records = dict(snap["records"])
            col.seq = int(snap["seq"])
        log_path = self._log_path(collection)
        if log_path.exists():
            data = log_path.read_bytes()
            offset = 0
            while offset < len(data):
                newline = data.find(b"\n", offset)
                if newline == -1:
                    break  # in-flight trailing write; not yet visible
                line = data[offset:newline]
                try:
                    entry = json.loads(line.decode("utf-8"))
                    seq, key, record = entry["seq"], entry["key"], entry["record"]
                except (json.JSONDecodeError, UnicodeDecodeError, KeyError, TypeError) as exc:
                    raise IntegrityError(
                        f"{log_path}: corrupt log line at byte {offset} ({exc})", offset=offset
                    )
                if seq > col.seq:
                    col.records[key] = record
                    col.seq = seq
                offset = newline + 1
        return col

    def _append(self, collection: str, key: str, record: dict) -> None:
        col = self._collections[collection]
        col.seq += 1
        entry = {"seq": col.seq, "key": key, "record": record}
        line = json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n"
        with self._log_path(collection).open("a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            if self._fsync:
                os.fsync(fh.fileno())
        col.records[key] = record

    def compact(self) -> None:
        """Snapshot every collection atomically; the logs keep full history."""
        with self._lock:
            for name, col in self._collections.items():
                snapshot = {
                    "seq": col.seq,
                    "records": {k: col.records[k] for k in sorted(col.records)},
                }
                path = self._snapshot_path(name)
                tmp = path.with_suffix(".json.tmp")
                tmp.write_text(
                    json.dumps(snapshot, ensure_ascii=False, sort_keys=True), encoding="utf-8"
                )
                os.replace(tmp, path)

    # --- generic record API ---------------------------------------------

    def _check_collection(self, collection: str) -> None:
        if collection not in self._collections:
            raise ValidationFailure(f"unknown collection {collection!r}")

    def put(self, collection: str, key: str, record: dict, expect_new: bool = False) -> None:
        self._check_collection(collection)
        with self._lock:
            if expect_new and key in self._collections[collection].records:
                raise ConflictError(f"{collection}/{key} already exists")
            self._append(collection, key, record)

    def get(self, collection: str, key: str) -> dict | None:
        self._check_collection(collection)
        with self._lock:
            record = self._collections[collection].records.get(key)
            return json.loads(json.dumps(record)) if record is not None else None

    def list(self, collection: str, **filters: Any) -> list[dict]:
        """Records sorted by key, filtered by field equality."""
        self._check_collection(collection)
        with self._lock:
            out = []
            for key in sorted(self._collections[collection].records):
                record = self._collections[collection].records[key]
                if all(record.get(f) == v for f, v in filters.items()):
                    out.append(json.loads(json.dumps(record)))
            return out

    def keys(self, collection: str) -> list[str]:
        self._check_collection(collection)
        with self._lock:
            return sorted(self._collections[collection].records)

    # --- review workflow -------------------------------------------------

    def decision_history(self, triplet_id: str) -> list[dict]:
        return self.list("decisions", triplet_id=triplet_id)

    def apply_review(self, decision: ReviewDecision) -> dict:
        """Apply a reviewer decision to an llm_filtered triplet.

        Idempotent per decision_id: the identical decision is a no-op,
        a different record under the same id is a conflict.
        """
        decision.validate()
        with self._lock:
            existing = self.get("decisions", decision.decision_id)
            if existing is not None:
                replayed = dict(existing)
                incoming = decision.to_record()
                if replayed != incoming:
                    raise ConflictError(
                        f"decision {decision.decision_id} already applied with different content"
                    )
                return self.get("triplets", decision.triplet_id)
            record = self.get("triplets", decision.triplet_id)
            if record is None:
                raise NotFoundError(f"triplet {decision.triplet_id} not found")
            triplet = Triplet.from_record(record)
            if triplet.status != LLM_FILTERED:
                raise ValidationFailure(
                    f"triplet {triplet.triplet_id} has status {triplet.status!r}; only "
                    f"{LLM_FILTERED!r} triplets are reviewable",
                    fields={"status": triplet.status},
                )
            if decision.action == "accept":
                triplet.status = ACCEPTED
                triplet.category = decision.category
            elif decision.action == "adjust":
                triplet.answer = decision.adjusted_answer
                triplet.span_map = decision.adjusted_span_map
                triplet.status = ACCEPTED
                triplet.category = decision.category
                triplet.flags = {**triplet.flags, "adjusted": True}
            else:  # reject
                triplet.status = REJECTED
                triplet.category = "U"
            self._append("decisions", decision.decision_id, decision.to_record())
            self._append("triplets", triplet.triplet_id, triplet.to_record())
            return triplet.to_record()

    def replay_decisions(self, decisions: list[dict]) -> None:
        """Reapply a decision history (e.g. onto a fresh copy of the triplets)."""
        for record in decisions:
            self.apply_review(ReviewDecision.from_record(record))


def export_accepted(store: Store, path: str | Path) -> int:
    """Benchmark-style JSON Lines of accepted triplets; returns the count."""
    from .spans import SpanSet

    rows = []
    for record in store.list("triplets", status=ACCEPTED):
        evidence = SpanSet.from_pairs(
            [pair for spans in record["span_map"].values() for pair in spans]
        )
        rows.append(
            {
                "sample_id": record["triplet_id"],
                "clip_id": record["clip_id"],
                "question": record["question"],
                "answer": record["answer"],
                "span_map": record["span_map"],
                "evidence": evidence.to_pairs(),
                "category": record["category"],
            }
        )
    Path(path).write_text(
        "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8"
    )
    return len(rows)
