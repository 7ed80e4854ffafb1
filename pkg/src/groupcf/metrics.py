"""Item-level metrics and the five-dimensional item metric vectors."""

from __future__ import annotations

import csv
from dataclasses import dataclass, astuple
from typing import Collection, Iterable

from .dataset import Group, ItemId, RatingsDataset
from .recommender import CallMeter, GroupRecommender, RecommendationList

METRIC_NAMES = ("rc_group", "rc_public", "rt_group", "rt_public", "influence")


@dataclass(frozen=True)
class ItemMetricVector:
    item: ItemId
    rc_group: float
    rc_public: float
    rt_group: float
    rt_public: float
    influence: float

    @property
    def coords(self) -> tuple:
        return (self.rc_group, self.rc_public, self.rt_group, self.rt_public, self.influence)

    @property
    def total_score(self) -> float:
        return self.rc_group + self.rc_public + self.rt_group + self.rt_public + self.influence


def item_recognition(ds: RatingsDataset, item: ItemId, users: Collection) -> float:
    """Fraction of ``users`` who interacted with ``item``."""
    if not users:
        raise ValueError("item_recognition over an empty user set")
    return sum(1 for u in users if ds.interacted(u, item)) / len(users)


def item_rating(ds: RatingsDataset, item: ItemId, users: Collection) -> float:
    """Mean rating of ``item`` over ``users``; a missing rating counts as 0."""
    if not users:
        raise ValueError("item_rating over an empty user set")
    return sum(ds.rating(u, item) for u in users) / len(users)


def public_recognition(ds: RatingsDataset, item: ItemId, group: Group) -> float:
    """Recognition over every dataset user outside ``group``, via the item index."""
    n_public = ds.n_users - len(group)
    if n_public <= 0:
        return 0.0
    inside = sum(1 for u in group.members if item in group.member_interactions[u])
    return (ds.item_count(item) - inside) / n_public


def public_rating(ds: RatingsDataset, item: ItemId, group: Group) -> float:
    n_public = ds.n_users - len(group)
    if n_public <= 0:
        return 0.0
    inside = sum(ds.rating(u, item) for u in group.members)
    return max(ds.item_rating_sum(item) - inside, 0.0) / n_public


class MemberScoreCache:
    """rec_score(t, I_u) per group member; it does not depend on the item being scored."""

    def __init__(self, recommender: GroupRecommender, group: Group, target: ItemId,
                 meter: CallMeter):
        self.recommender = recommender
        self.group = group
        self.target = target
        self.meter = meter
        self._scores: dict = {}

    def __call__(self, user) -> float:
        if user not in self._scores:
            ds = self.recommender.ds
            history = {i: ds.rating(user, i) for i in self.group.member_interactions[user]}
            self._scores[user] = self.recommender.rec_score(
                self.target, history, self.meter, exclude_users=self.group.members)
        return self._scores[user]


def item_influence(recommender: GroupRecommender, item: ItemId, target: ItemId, group: Group,
                   meter: CallMeter, cache: MemberScoreCache | None = None) -> float:
    """Mean rec_score of ``target`` over the members who interacted with ``item``."""
    touched = [u for u in group.members if item in group.member_interactions[u]]
    if not touched:
        return 0.0
    if cache is None:
        cache = MemberScoreCache(recommender, group, target, meter)
    return sum(cache(u) for u in touched) / len(touched)


def explanatory_power(rec_list: RecommendationList, target: ItemId, m: int | None = None) -> float:
    """Normalized rank of ``target`` in ``rec_list``: 0 at rank 1, 1 when absent."""
    m = rec_list.m if m is None else m
    rank = rec_list.rank(target)
    if rank is None:
        return 1.0
    return min((rank - 1) / m, 1.0)


def build_metric_vectors(recommender: GroupRecommender, group: Group, target: ItemId,
                         meter: CallMeter) -> list[ItemMetricVector]:
    """One vector per item of I_G, in ascending item order; costs at most |G| calls."""
    ds = recommender.ds
    cache = MemberScoreCache(recommender, group, target, meter)
    members = group.members
    out = []
    for item in sorted(group.union_interactions):
        out.append(ItemMetricVector(
            item=item,
            rc_group=item_recognition(ds, item, members),
            rc_public=public_recognition(ds, item, group),
            rt_group=item_rating(ds, item, members),
            rt_public=public_rating(ds, item, group),
            influence=item_influence(recommender, item, target, group, meter, cache),
        ))
    return out


def write_vectors_csv(vectors: Iterable[ItemMetricVector], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["item", "rc_g", "rc_p", "rt_g", "rt_p", "infl", "total"])
        for v in vectors:
            w.writerow([*astuple(v), v.total_score])
