"""Black-box group recommender: user-based CF with average aggregation.

Everything outside this module talks to the recommender only through
:meth:`GroupRecommender.recommend` and :meth:`GroupRecommender.rec_score`,
and every such invocation is charged to a :class:`CallMeter`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .dataset import ItemId, RatingsDataset, UserId


class BudgetExhausted(Exception):
    """Raised when a metered call would exceed the budget."""

    def __init__(self, calls_used: int, budget: int):
        self.calls_used = calls_used
        self.budget = budget
        super().__init__(f"recommender budget exhausted ({calls_used}/{budget} calls)")


class CallMeter:
    """Counts recommender invocations (unit cost each) against an optional budget."""

    def __init__(self, budget: int | None = None):
        if budget is not None and budget < 0:
            raise ValueError("budget must be non-negative")
        self.budget = budget
        self.calls_used = 0

    @property
    def remaining(self) -> int | None:
        return None if self.budget is None else self.budget - self.calls_used

    def charge(self) -> None:
        if self.budget is not None and self.calls_used >= self.budget:
            raise BudgetExhausted(self.calls_used, self.budget)
        self.calls_used += 1

    def __repr__(self) -> str:
        return f"CallMeter(calls_used={self.calls_used}, budget={self.budget})"


@dataclass(frozen=True)
class RecommendationList:
    entries: tuple  # ((item, score), ...) best first
    m: int

    @property
    def items(self) -> tuple:
        return tuple(i for i, _ in self.entries)

    def __contains__(self, item) -> bool:
        return any(i == item for i, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def rank(self, item) -> int | None:
        """1-based rank of ``item``, or None when it is not listed."""
        for k, (i, _) in enumerate(self.entries, start=1):
            if i == item:
                return k
        return None

    def score(self, item) -> float | None:
        for i, s in self.entries:
            if i == item:
                return s
        return None


class GroupRecommender:
    """User-based collaborative filtering, aggregated over members by the mean.

    A member's predicted score for an item is the similarity-weighted mean of
    the item's ratings over the member's ``k_neighbors`` most cosine-similar
    users (a neighbor who never rated the item contributes 0). Group members
    are never used as neighbors, so a member's stored row cannot leak
    interactions the counterfactual removed.
    """

    def __init__(self, ds: RatingsDataset, m: int = 10, k_neighbors: int = 50):
        if m < 1 or k_neighbors < 1:
            raise ValueError("m and k_neighbors must be positive")
        self.ds = ds
        self.m = m
        self.k_neighbors = k_neighbors

    # -- CF internals ----------------------------------------------------
    def _user_rows(self, users: Iterable[UserId]) -> np.ndarray:
        pos = self.ds.user_pos
        return np.fromiter((pos[u] for u in users if u in pos), dtype=np.int64)

    def _score_vector(self, cols: np.ndarray, vals: np.ndarray,
                      exclude_rows: np.ndarray) -> np.ndarray | None:
        """Dense per-item scores for a pseudo-user rating ``vals`` at ``cols``."""
        if len(cols) == 0:
            return None
        ds = self.ds
        dense = ds.dense
        dots = (dense[:, cols] if dense is not None else ds.csc[:, cols]) @ vals
        qnorm = float(np.sqrt(vals @ vals))
        sims = np.zeros(ds.n_users)
        ok = (ds.row_norms > 0) & (dots > 0)
        sims[ok] = dots[ok] / (ds.row_norms[ok] * qnorm)
        if len(exclude_rows):
            sims[exclude_rows] = 0.0
        cand = np.flatnonzero(sims > 0)
        if len(cand) == 0:
            return None
        if len(cand) > self.k_neighbors:
            cand = cand[np.lexsort((cand, -sims[cand]))[: self.k_neighbors]]
        w = sims[cand]
        if dense is not None:
            scores = w @ dense[cand] / w.sum()
        else:
            scores = ds.csr[cand].T @ w / w.sum()
        scores[cols] = 0.0
        return np.asarray(scores).ravel()

    def _history_arrays(self, history: Mapping[ItemId, float]):
        pos = self.ds.item_pos
        pairs = sorted((pos[i], float(r)) for i, r in history.items() if i in pos)
        cols = np.fromiter((c for c, _ in pairs), dtype=np.int64, count=len(pairs))
        vals = np.fromiter((r for _, r in pairs), dtype=np.float64, count=len(pairs))
        return cols, vals

    def predict_user_scores(self, history: Mapping[ItemId, float],
                            exclude_users: Iterable[UserId] = ()) -> dict:
        """Scores in (0, 1] for every item some neighbor rated, minus ``history``."""
        cols, vals = self._history_arrays(history)
        vec = self._score_vector(cols, vals, self._user_rows(exclude_users))
        if vec is None:
            return {}
        ids = self.ds.item_ids
        return {ids[k]: float(vec[k]) for k in np.flatnonzero(vec > 0)}

    def neighbors(self, history: Mapping[ItemId, float],
                  exclude_users: Iterable[UserId] = ()) -> list:
        """(user, cosine) pairs of the top-k neighbors, best first. Diagnostics only."""
        cols, vals = self._history_arrays(history)
        if len(cols) == 0:
            return []
        dots = self.ds.csc[:, cols] @ vals
        qnorm = float(np.sqrt(vals @ vals))
        excl = set(self._user_rows(exclude_users).tolist())
        out = [(k, dots[k] / (self.ds.row_norms[k] * qnorm)) for k in np.flatnonzero(dots > 0)
               if k not in excl]
        out.sort(key=lambda p: (-p[1], p[0]))
        return [(self.ds.user_ids[k], float(s)) for k, s in out[: self.k_neighbors]]

    # -- metered interface ----------------------------------------------
    def recommend(self, interactions: Mapping[UserId, Iterable[ItemId]],
                  meter: CallMeter) -> RecommendationList:
        """Top-m group list for members whose histories are ``interactions``.

        Each member keeps their stored ratings on the items listed for them;
        listing an item the member never rated is an error.
        """
        meter.charge()
        ds = self.ds
        members = list(interactions)
        exclude = self._user_rows(members)
        total = np.zeros(ds.n_items)
        seen = np.zeros(ds.n_items, dtype=bool)
        for u in members:
            row = ds.user_pos[u]
            lo, hi = ds.csr.indptr[row], ds.csr.indptr[row + 1]
            row_cols = ds.csr.indices[lo:hi]
            row_vals = ds.csr.data[lo:hi]
            keep_idx = np.fromiter((ds.item_pos[i] for i in interactions[u]), dtype=np.int64)
            keep = np.isin(row_cols, keep_idx)
            if keep.sum() != len(set(keep_idx.tolist())):
                raise ValueError(f"interactions for user {u!r} include unrated items")
            cols, vals = row_cols[keep], row_vals[keep]
            seen[cols] = True
            vec = self._score_vector(cols, vals, exclude)
            if vec is not None:
                total += vec
        group = total / len(members) if members else total
        cand = np.flatnonzero((group > 0) & ~seen)
        if len(cand) == 0:
            return RecommendationList((), self.m)
        top = cand[np.lexsort((cand, -group[cand]))[: self.m]]
        return RecommendationList(tuple((ds.item_ids[k], float(group[k])) for k in top), self.m)

    def recommend_for_group(self, group, meter: CallMeter, removed: Iterable[ItemId] = ()) -> RecommendationList:
        """``recommend`` on the group's histories with ``removed`` deleted from every member."""
        removed = frozenset(removed)
        return self.recommend({u: group.member_interactions[u] - removed for u in group.members}, meter)

    def rec_score(self, t: ItemId, history: Mapping[ItemId, float], meter: CallMeter,
                  exclude_users: Iterable[UserId] = ()) -> float:
        """Predicted score of ``t`` for a pseudo-user with exactly ``history``; 0 when cold."""
        if t in history:
            raise ValueError(f"target {t!r} is part of the history")
        meter.charge()
        cols, vals = self._history_arrays(history)
        vec = self._score_vector(cols, vals, self._user_rows(exclude_users))
        k = self.ds.item_pos.get(t)
        if vec is None or k is None:
            return 0.0
        return float(vec[k])
