"""Numeric core of the evidence-grounding objectives.

Operates on plain arrays supplied by the caller (saliency logits, frame and
query embeddings, binary labels); no neural network is involved. Includes
hand-derived gradients for the two trainable losses plus a central
finite-difference checker.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal

import numpy as np
from scipy.special import expit

from .errors import ValidationFailure

SCHEMA_ID = "grounding_instance/v1"
PROB_CLAMP = 1e-7
DEFAULT_TAU = 0.07


class GroundingMathError(ValidationFailure):
    pass


@dataclass
class GroundingInstance:
    """Frame-level numeric state for one sample.

    Arrays: saliency_logits (L,), frame_embed (L,C), query_embed (K,C),
    saliency_labels (L,) in {0,1}, similarity_labels (K,L) in {0,1}.
    saliency_scores / similarity may be supplied directly instead of being
    derived from logits / embeddings. fps and clip_offset carry the frame
    axis for proposal post-processing fixtures.
    """

    saliency_labels: np.ndarray
    similarity_labels: np.ndarray
    saliency_logits: np.ndarray | None = None
    frame_embed: np.ndarray | None = None
    query_embed: np.ndarray | None = None
    saliency_scores: np.ndarray | None = None
    similarity: np.ndarray | None = None
    tau: float = DEFAULT_TAU
    lambda_bce: float = 1.0
    lambda_nce: float = 1.0
    fps: float | None = None
    clip_offset: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def num_frames(self) -> int:
        return int(np.asarray(self.saliency_labels).shape[0])

    @property
    def num_queries(self) -> int:
        return int(np.asarray(self.similarity_labels).shape[0])

    def validate(self) -> None:
        y = np.asarray(self.saliency_labels)
        s = np.asarray(self.similarity_labels)
        if y.ndim != 1 or s.ndim != 2:
            raise GroundingMathError("labels must be a vector (saliency) and a matrix (similarity)")
        length = y.shape[0]
        if s.shape[1] != length:
            raise GroundingMathError(
                f"similarity labels have {s.shape[1]} frames but saliency labels have {length}"
            )
        for name, arr in (("saliency_labels", y), ("similarity_labels", s)):
            if not np.isin(arr, (0, 1)).all():
                raise GroundingMathError(f"{name} must be strictly 0/1")
        if self.tau <= 0:
            raise GroundingMathError(f"tau must be positive, got {self.tau}")
        if self.lambda_bce < 0 or self.lambda_nce < 0:
            raise GroundingMathError("loss weights must be non-negative")
        if self.saliency_logits is not None and np.asarray(self.saliency_logits).shape != (length,):
            raise GroundingMathError("saliency_logits length does not match labels")
        if self.frame_embed is not None and self.query_embed is not None:
            fe, qe = np.asarray(self.frame_embed), np.asarray(self.query_embed)
            if fe.ndim != 2 or qe.ndim != 2 or fe.shape[1] != qe.shape[1]:
                raise GroundingMathError("frame/query embeddings must share the channel dimension")
            if fe.shape[0] != length or qe.shape[0] != s.shape[0]:
                raise GroundingMathError("embedding row counts do not match label shapes")

    def resolved_saliency_scores(self) -> np.ndarray:
        if self.saliency_scores is not None:
            return np.asarray(self.saliency_scores, dtype=float)
        if self.saliency_logits is None:
            raise GroundingMathError("instance carries neither saliency_scores nor saliency_logits")
        return saliency_scores(self.saliency_logits)

    def resolved_similarity(self) -> np.ndarray:
        if self.similarity is not None:
            return np.asarray(self.similarity, dtype=float)
        if self.frame_embed is None or self.query_embed is None:
            raise GroundingMathError("instance carries neither similarity nor embeddings")
        return similarity_matrix(self.query_embed, self.frame_embed)

    def to_json_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        out = {
            "schema": SCHEMA_ID,
            "saliency_labels": arr(self.saliency_labels),
            "similarity_labels": arr(self.similarity_labels),
            "tau": self.tau,
            "lambda_bce": self.lambda_bce,
            "lambda_nce": self.lambda_nce,
        }
        for key in ("saliency_logits", "frame_embed", "query_embed", "saliency_scores", "similarity"):
            value = arr(getattr(self, key))
            if value is not None:
                out[key] = value
        if self.fps is not None:
            out["fps"] = self.fps
            out["clip_offset"] = self.clip_offset
        if self.extra:
            out["extra"] = self.extra
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "GroundingInstance":
        schema = data.get("schema", SCHEMA_ID)
        if schema != SCHEMA_ID:
            raise GroundingMathError(f"unsupported fixture schema {schema!r}")

        def arr(key):
            return np.asarray(data[key], dtype=float) if key in data else None

        inst = cls(
            saliency_labels=np.asarray(data["saliency_labels"], dtype=float),
            similarity_labels=np.asarray(data["similarity_labels"], dtype=float),
            saliency_logits=arr("saliency_logits"),
            frame_embed=arr("frame_embed"),
            query_embed=arr("query_embed"),
            saliency_scores=arr("saliency_scores"),
            similarity=arr("similarity"),
            tau=float(data.get("tau", DEFAULT_TAU)),
            lambda_bce=float(data.get("lambda_bce", 1.0)),
            lambda_nce=float(data.get("lambda_nce", 1.0)),
            fps=float(data["fps"]) if "fps" in data else None,
            clip_offset=float(data.get("clip_offset", 0.0)),
            extra=data.get("extra", {}),
        )
        inst.validate()
        return inst

    @classmethod
    def load(cls, path: str | Path) -> "GroundingInstance":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def saliency_scores(logits: np.ndarray) -> np.ndarray:
    """Elementwise sigmoid of the saliency-head outputs."""
    logits = np.asarray(logits, dtype=float)
    if logits.size and not np.isfinite(logits).all():
        raise GroundingMathError("saliency logits must be finite")
    return expit(logits)


def similarity_matrix(zg: np.ndarray, zv: np.ndarray) -> np.ndarray:
    """Cosine similarity between each query row of zg and each frame row of zv."""
    zg = np.asarray(zg, dtype=float)
    zv = np.asarray(zv, dtype=float)
    gn = np.linalg.norm(zg, axis=1)
    vn = np.linalg.norm(zv, axis=1)
    for name, norms in (("query", gn), ("frame", vn)):
        zero = np.flatnonzero(norms == 0)
        if zero.size:
            raise GroundingMathError(f"{name} row {int(zero[0])} has zero norm")
    sim = (zg / gn[:, None]) @ (zv / vn[:, None]).T
    return np.clip(sim, -1.0, 1.0)


def _check_score_label_pair(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if scores.shape != labels.shape:
        raise GroundingMathError(
            f"scores shape {scores.shape} does not match labels shape {labels.shape}"
        )
    return scores, labels


def bce_loss(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross entropy; scores clamped to [1e-7, 1-1e-7]."""
    scores, labels = _check_score_label_pair(scores, labels)
    p = np.clip(scores, PROB_CLAMP, 1.0 - PROB_CLAMP)
    terms = -labels * np.log(p) - (1.0 - labels) * np.log(1.0 - p)
    return float(terms.mean())


def bce_grad(scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d bce_loss / d scores; zero where the clamp is active."""
    scores, labels = _check_score_label_pair(scores, labels)
    p = np.clip(scores, PROB_CLAMP, 1.0 - PROB_CLAMP)
    grad = (-labels / p + (1.0 - labels) / (1.0 - p)) / scores.size
    inside = (scores > PROB_CLAMP) & (scores < 1.0 - PROB_CLAMP)
    return np.where(inside, grad, 0.0)


def _check_milnce_inputs(sim: np.ndarray, labels: np.ndarray, tau: float):
    sim, labels = _check_score_label_pair(sim, labels)
    if sim.ndim != 2:
        raise GroundingMathError("similarity matrix must be 2-D (queries x frames)")
    if tau <= 0:
        raise GroundingMathError(f"tau must be positive, got {tau}")
    if not np.isin(labels, (0, 1)).all():
        raise GroundingMathError("similarity labels must be strictly 0/1")
    empty = np.flatnonzero(labels.sum(axis=1) == 0)
    if empty.size:
        raise GroundingMathError(f"similarity label row {int(empty[0])} has no positive frame")
    return sim, labels


def milnce_loss(sim: np.ndarray, labels: np.ndarray, tau: float) -> float:
    """Multiple-instance NCE over a K x L similarity matrix.

    Per query row: -log of the softmax mass (temperature tau) that falls on
    the positive frames; averaged over rows. Zero exactly when every row's
    positives absorb all the mass.
    """
    sim, labels = _check_milnce_inputs(sim, labels, tau)
    a = sim / tau
    # shared max-shift keeps numerator <= denominator exactly in floating point
    m = a.max(axis=1, keepdims=True)
    e = np.exp(a - m)
    denom = e.sum(axis=1)
    numer = (e * labels).sum(axis=1)
    rows = np.log(denom) - np.log(numer)
    return float(rows.mean())


def milnce_grad(sim: np.ndarray, labels: np.ndarray, tau: float) -> np.ndarray:
    """d milnce_loss / d sim. Each row sums to zero (softmax shift invariance)."""
    sim, labels = _check_milnce_inputs(sim, labels, tau)
    k = sim.shape[0]
    a = sim / tau
    a -= a.max(axis=1, keepdims=True)
    e = np.exp(a)
    p = e / e.sum(axis=1, keepdims=True)
    pos_mass = (p * labels).sum(axis=1, keepdims=True)
    return p * (1.0 - labels / pos_mass) / (k * tau)


def total_loss(ce: float, bce: float, nce: float, lambda_bce: float = 1.0, lambda_nce: float = 1.0) -> float:
    """Weighted sum of the answer CE (precomputed) and the two grounding losses."""
    return float(ce + lambda_bce * bce + lambda_nce * nce)


@dataclass(frozen=True)
class GradCheckReport:
    loss_name: str
    passed: bool
    max_rel_err: float
    worst_index: tuple[int, ...]
    analytic_at_worst: float
    numeric_at_worst: float

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"grad-check[{self.loss_name}] {status}: max rel err {self.max_rel_err:.3e} "
            f"at {self.worst_index} (analytic {self.analytic_at_worst:.6e}, "
            f"numeric {self.numeric_at_worst:.6e})"
        )


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + step
        hi = f(x)
        x[idx] = orig - step
        lo = f(x)
        x[idx] = orig
        grad[idx] = (hi - lo) / (2.0 * step)
    return grad


def grad_check(
    loss_name: Literal["bce", "milnce"],
    instance: GroundingInstance,
    rel_tol: float = 1e-4,
    step: float = 1e-5,
    abs_floor: float = 1e-5,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    Per-coordinate error is |analytic - numeric| / max(|analytic|,
    |numeric|, abs_floor). The floor keeps coordinates below what central
    differences can resolve (cancellation noise ~ eps*|loss|/step) from
    dominating; every coordinate larger than abs_floor is held to the full
    relative tolerance.
    """
    if loss_name == "bce":
        x = instance.resolved_saliency_scores().copy()
        labels = np.asarray(instance.saliency_labels, dtype=float)
        analytic = bce_grad(x, labels)
        numeric = central_difference(lambda v: bce_loss(v, labels), x, step)
    elif loss_name == "milnce":
        x = instance.resolved_similarity().copy()
        labels = np.asarray(instance.similarity_labels, dtype=float)
        analytic = milnce_grad(x, labels, instance.tau)
        numeric = central_difference(lambda v: milnce_loss(v, labels, instance.tau), x, step)
    else:
        raise GroundingMathError(f"unknown loss {loss_name!r}")

    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), abs_floor)
    rel = np.abs(analytic - numeric) / scale
    worst = np.unravel_index(int(np.argmax(rel)), rel.shape)
    max_rel = float(rel[worst])
    return GradCheckReport(
        loss_name=loss_name,
        passed=bool(max_rel <= rel_tol),
        max_rel_err=max_rel,
        worst_index=tuple(int(i) for i in worst),
        analytic_at_worst=float(analytic[worst]),
        numeric_at_worst=float(numeric[worst]),
    )
