"""Explanation quality: minimality, interpretability, cost, fairness and utility."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Collection, Sequence

import numpy as np

from .dataset import Group, RatingsDataset
from .metrics import item_recognition, public_recognition

PERFECT_FAIRNESS = math.inf


@dataclass(frozen=True)
class ExplanationReport:
    minimality: float
    interpretability: float
    cost: int
    fairness: float
    utility: float | None = None


def minimality(explanation_size: int, union_size: int) -> float:
    if explanation_size <= 0:
        raise ValueError("empty explanation")
    if explanation_size > union_size:
        raise ValueError("explanation larger than the group's item set")
    return 1.0 - explanation_size / union_size


def interpretability(ds: RatingsDataset, items: Collection, group: Group) -> float:
    """Mean of group and public recognition over the explanation's items."""
    if not items:
        raise ValueError("empty explanation")
    inside = sum(item_recognition(ds, i, group.members) for i in items)
    outside = sum(public_recognition(ds, i, group) for i in items)
    return (inside + outside) / (2 * len(items))


def fairness_from_counts(counts: Sequence[int]) -> float:
    sigma = float(np.std(np.asarray(counts, dtype=np.float64)))
    if sigma == 0.0:
        return PERFECT_FAIRNESS
    return 1.0 / sigma


def fairness(items: Collection, group: Group) -> float:
    """Reciprocal population std of per-member contribution counts; inf when all equal."""
    if not items:
        raise ValueError("empty explanation")
    contrib = group.contributions(items)
    return fairness_from_counts([contrib[u] for u in group.members])


def evaluate(ds: RatingsDataset, items: Collection, group: Group, search_calls: int,
             metric_calls: int = 0, count_metric_calls: bool = False) -> ExplanationReport:
    return ExplanationReport(
        minimality=minimality(len(items), len(group.union_interactions)),
        interpretability=interpretability(ds, items, group),
        cost=search_calls + (metric_calls if count_metric_calls else 0),
        fairness=fairness(items, group),
    )


def _minmax(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.full(len(values), 0.5)
    return (values - lo) / (hi - lo)


def utility_batch(reports: Sequence[ExplanationReport], weight_min: float = 0.5) -> list[ExplanationReport]:
    """Fill ``utility`` as a weighted sum of batch min-max normalized minimality and
    interpretability. A dimension constant across the batch normalizes to 0.5."""
    if not reports:
        raise ValueError("empty batch")
    if not 0.0 <= weight_min <= 1.0:
        raise ValueError("weight_min must lie in [0, 1]")
    mins = _minmax(np.array([r.minimality for r in reports]))
    ints = _minmax(np.array([r.interpretability for r in reports]))
    util = weight_min * mins + (1.0 - weight_min) * ints
    return [replace(r, utility=float(u)) for r, u in zip(reports, util)]
