"""Shared test utilities: discretization oracle and random span generators.

The oracle rasterizes span sets onto a 10 ms grid over [0, horizon] and
computes measures by cell counting. It is deliberately independent of the
interval-sweep implementation under test. Generators quantize endpoints to
the grid so the rasterization is exact.
"""

from __future__ import annotations

import numpy as np

DT = 0.01
HORIZON = 180.0


def rasterize(pairs, horizon: float = HORIZON, dt: float = DT) -> np.ndarray:
    n = int(round(horizon / dt))
    mask = np.zeros(n, dtype=bool)
    for s, e in pairs:
        i0 = max(int(np.floor(s / dt + 1e-9)), 0)
        i1 = min(int(np.ceil(e / dt - 1e-9)), n)
        if i1 > i0:
            mask[i0:i1] = True
    return mask


def grid_measures(pred_pairs, gt_pairs, horizon: float = HORIZON, dt: float = DT):
    """(intersection, union, |pred|, |gt|) measures by cell counting."""
    a = rasterize(pred_pairs, horizon, dt)
    b = rasterize(gt_pairs, horizon, dt)
    return (
        float((a & b).sum()) * dt,
        float((a | b).sum()) * dt,
        float(a.sum()) * dt,
        float(b.sum()) * dt,
    )


def grid_iou_iop_iog(pred_pairs, gt_pairs, horizon: float = HORIZON, dt: float = DT):
    inter, uni, p, g = grid_measures(pred_pairs, gt_pairs, horizon, dt)
    iou = inter / uni if uni > 0 else (1.0 if not pred_pairs and not gt_pairs else 0.0)
    iop = inter / p if p > 0 else 0.0
    iog = inter / g if g > 0 else 0.0
    return iou, iop, iog


def random_pairs(rng: np.random.Generator, max_spans: int = 4, horizon: float = HORIZON,
                 allow_empty: bool = True) -> list[list[float]]:
    """Random raw [start, end] pairs with endpoints on the 10 ms grid."""
    low = 0 if allow_empty else 1
    n = int(rng.integers(low, max_spans + 1))
    pairs = []
    cells = int(round(horizon / DT))
    for _ in range(n):
        a, b = sorted(rng.integers(0, cells + 1, size=2))
        pairs.append([a * DT, b * DT])
    return pairs
