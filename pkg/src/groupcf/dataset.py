"""Rating stores, file loaders and group sampling."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np
from scipy import sparse

log = logging.getLogger(__name__)

DENSE_CELL_LIMIT = 4_000_000

UserId = Hashable
ItemId = Hashable


class ParseError(ValueError):
    """A rating file line could not be parsed."""

    def __init__(self, path, lineno: int, line: str, reason: str):
        self.path = path
        self.lineno = lineno
        self.line = line
        super().__init__(f"{path}:{lineno}: {reason}: {line!r}")


class ValidationError(ValueError):
    """A parsed rating violates the normalization contract."""


class ConfigurationError(ValueError):
    pass


class RatingsDataset:
    """Immutable sparse user x item rating store.

    Ratings are normalized to (0, 1]; a missing pair reads back as 0.
    User and item identifiers are kept as given by the source file and
    mapped onto dense internal indices in ascending identifier order, so
    index order doubles as the deterministic tie-break order.
    """

    def __init__(self, user_ids: Sequence, item_ids: Sequence, matrix: sparse.spmatrix,
                 source: str | None = None):
        self.user_ids = list(user_ids)
        self.item_ids = list(item_ids)
        self.user_pos = {u: k for k, u in enumerate(self.user_ids)}
        self.item_pos = {i: k for k, i in enumerate(self.item_ids)}
        self.csr = sparse.csr_matrix(matrix, dtype=np.float64)
        self.csr.sort_indices()
        self.csc = self.csr.tocsc()
        self.csc.sort_indices()
        self.row_norms = np.sqrt(np.asarray(self.csr.multiply(self.csr).sum(axis=1)).ravel())
        # small matrices are also kept dense: numpy beats sparse indexing overhead there
        cells = self.csr.shape[0] * self.csr.shape[1]
        self.dense = self.csr.toarray() if cells <= DENSE_CELL_LIMIT else None
        self.source = source
        self._user_items: dict[int, frozenset] = {}
        self._item_users: dict[int, frozenset] = {}

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[UserId, ItemId, float]],
                     source: str | None = None) -> "RatingsDataset":
        """Build from already-normalized (user, item, rating) triples; last duplicate wins."""
        cells: dict[tuple, float] = {}
        for u, i, r in triples:
            cells[(u, i)] = float(r)
        users = sorted({u for u, _ in cells})
        items = sorted({i for _, i in cells})
        upos = {u: k for k, u in enumerate(users)}
        ipos = {i: k for k, i in enumerate(items)}
        rows = np.fromiter((upos[u] for u, _ in cells), dtype=np.int64, count=len(cells))
        cols = np.fromiter((ipos[i] for _, i in cells), dtype=np.int64, count=len(cells))
        vals = np.fromiter(cells.values(), dtype=np.float64, count=len(cells))
        m = sparse.csr_matrix((vals, (rows, cols)), shape=(len(users), len(items)))
        return cls(users, items, m, source=source)

    # -- sizes -----------------------------------------------------------
    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_ratings(self) -> int:
        return int(self.csr.nnz)

    @property
    def users(self) -> frozenset:
        return frozenset(self.user_ids)

    @property
    def items(self) -> frozenset:
        return frozenset(self.item_ids)

    def stats_line(self) -> str:
        return f"users={self.n_users} items={self.n_items} ratings={self.n_ratings}"

    # -- lookups ---------------------------------------------------------
    def items_of(self, user: UserId) -> frozenset:
        """I_u: every item the user rated."""
        k = self.user_pos[user]
        if k not in self._user_items:
            cols = self.csr.indices[self.csr.indptr[k]:self.csr.indptr[k + 1]]
            self._user_items[k] = frozenset(self.item_ids[c] for c in cols)
        return self._user_items[k]

    def users_of(self, item: ItemId) -> frozenset:
        k = self.item_pos[item]
        if k not in self._item_users:
            rows = self.csc.indices[self.csc.indptr[k]:self.csc.indptr[k + 1]]
            self._item_users[k] = frozenset(self.user_ids[r] for r in rows)
        return self._item_users[k]

    def item_count(self, item: ItemId) -> int:
        k = self.item_pos.get(item)
        if k is None:
            return 0
        return int(self.csc.indptr[k + 1] - self.csc.indptr[k])

    def item_rating_sum(self, item: ItemId) -> float:
        k = self.item_pos.get(item)
        if k is None:
            return 0.0
        return float(self.csc.data[self.csc.indptr[k]:self.csc.indptr[k + 1]].sum())

    def rating(self, user: UserId, item: ItemId) -> float:
        u = self.user_pos.get(user)
        i = self.item_pos.get(item)
        if u is None or i is None:
            return 0.0
        if self.dense is not None:
            return float(self.dense[u, i])
        lo, hi = self.csr.indptr[u], self.csr.indptr[u + 1]
        k = lo + np.searchsorted(self.csr.indices[lo:hi], i)
        return float(self.csr.data[k]) if k < hi and self.csr.indices[k] == i else 0.0

    def interacted(self, user: UserId, item: ItemId) -> bool:
        """Whether ``user`` interacted with ``item``."""
        return user in self.user_pos and item in self.items_of(user)

    def user_ratings(self, user: UserId) -> dict:
        k = self.user_pos[user]
        lo, hi = self.csr.indptr[k], self.csr.indptr[k + 1]
        return {self.item_ids[c]: float(v)
                for c, v in zip(self.csr.indices[lo:hi], self.csr.data[lo:hi])}

    def triples(self):
        coo = self.csr.tocoo()
        for r, c, v in zip(coo.row, coo.col, coo.data):
            yield self.user_ids[r], self.item_ids[c], float(v)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RatingsDataset):
            return NotImplemented
        return (self.user_ids == other.user_ids and self.item_ids == other.item_ids
                and self.csr.shape == other.csr.shape
                and (self.csr != other.csr).nnz == 0)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Group:
    members: tuple
    member_interactions: dict = field(compare=False)
    union_interactions: frozenset = field(compare=False)

    @classmethod
    def from_members(cls, ds: RatingsDataset, members: Iterable[UserId]) -> "Group":
        members = tuple(members)
        if len(set(members)) != len(members):
            raise ConfigurationError(f"duplicate group members: {members}")
        missing = [u for u in members if u not in ds.user_pos]
        if missing:
            raise ConfigurationError(f"unknown users: {missing}")
        per = {u: ds.items_of(u) for u in members}
        union = frozenset().union(*per.values()) if per else frozenset()
        return cls(members, per, union)

    def __len__(self) -> int:
        return len(self.members)

    def contributions(self, items: Iterable[ItemId]) -> dict:
        """Per member, how many of ``items`` the member interacted with."""
        items = list(items)
        return {u: sum(1 for i in items if i in self.member_interactions[u]) for u in self.members}


# -- loaders -------------------------------------------------------------

def _load(path, rating_scale_max: float, split: Callable[[str], list],
          convert_id: Callable[[str], Hashable]) -> RatingsDataset:
    if rating_scale_max <= 0:
        raise ValidationError(f"rating_scale_max must be positive, got {rating_scale_max}")
    path = Path(path)
    user_key: dict = {}
    item_key: dict = {}
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            parts = split(line)
            if len(parts) != 4:
                raise ParseError(path, lineno, line, f"expected 4 fields, got {len(parts)}")
            try:
                u = convert_id(parts[0].strip())
                i = convert_id(parts[1].strip())
                r = float(parts[2])
            except ValueError as exc:
                raise ParseError(path, lineno, line, str(exc)) from None
            if not (0.0 < r <= rating_scale_max):
                raise ValidationError(
                    f"{path}:{lineno}: rating {r} outside (0, {rating_scale_max}]")
            rows.append(user_key.setdefault(u, len(user_key)))
            cols.append(item_key.setdefault(i, len(item_key)))
            vals.append(r / rating_scale_max)

    users = sorted(user_key)
    items = sorted(item_key)
    # remap first-seen codes onto sorted-id positions
    umap = np.empty(len(users), dtype=np.int64)
    for k, u in enumerate(users):
        umap[user_key[u]] = k
    imap = np.empty(len(items), dtype=np.int64)
    for k, i in enumerate(items):
        imap[item_key[i]] = k
    r_arr = umap[np.asarray(rows, dtype=np.int64)] if rows else np.zeros(0, np.int64)
    c_arr = imap[np.asarray(cols, dtype=np.int64)] if cols else np.zeros(0, np.int64)
    v_arr = np.asarray(vals, dtype=np.float64)

    # last occurrence of a duplicated (user, item) wins
    if len(r_arr):
        order = np.lexsort((np.arange(len(r_arr)), c_arr, r_arr))
        r_s, c_s = r_arr[order], c_arr[order]
        last = np.ones(len(order), dtype=bool)
        last[:-1] = (r_s[1:] != r_s[:-1]) | (c_s[1:] != c_s[:-1])
        keep = order[last]
        r_arr, c_arr, v_arr = r_arr[keep], c_arr[keep], v_arr[keep]

    m = sparse.csr_matrix((v_arr, (r_arr, c_arr)), shape=(len(users), len(items)))
    ds = RatingsDataset(users, items, m, source=str(path))
    log.info(ds.stats_line())
    return ds


def _int_or_str(token: str):
    try:
        return int(token)
    except ValueError:
        return token


def load_movielens(path, rating_scale_max: float = 5.0) -> RatingsDataset:
    """Load ``UserID::MovieID::Rating::Timestamp`` lines."""
    return _load(path, rating_scale_max, lambda s: s.split("::"), int)


def load_amazon(path, rating_scale_max: float = 5.0) -> RatingsDataset:
    """Load comma-separated ``user,item,rating,timestamp`` lines.

    Identifiers are opaque strings in the public dump; purely numeric ones
    are read as integers so a file never mixes the two types.
    """
    ids_numeric = True
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            parts = raw.strip().split(",")
            if len(parts) >= 2 and not (parts[0].strip().lstrip("-").isdigit()
                                        and parts[1].strip().lstrip("-").isdigit()):
                ids_numeric = False
                break
    return _load(path, rating_scale_max, lambda s: s.split(","), int if ids_numeric else str)


# -- users and groups ----------------------------------------------------

def filter_eligible_users(ds: RatingsDataset, min_ratings: int) -> set:
    if min_ratings < 1:
        raise ConfigurationError("min_ratings must be >= 1")
    counts = np.diff(ds.csr.indptr)
    return {ds.user_ids[k] for k in np.flatnonzero(counts >= min_ratings)}


def sample_groups(ds: RatingsDataset, eligible, group_size: int, count: int,
                  seed: int) -> list[Group]:
    """Draw ``count`` groups of distinct eligible users, uniformly, under ``seed``."""
    if group_size < 1 or count < 1:
        raise ConfigurationError("group_size and count must be positive")
    pool = sorted(eligible)
    if len(pool) < group_size:
        raise ConfigurationError(
            f"need {group_size} eligible users, only {len(pool)} available")
    rng = random.Random(seed)
    return [Group.from_members(ds, rng.sample(pool, group_size)) for _ in range(count)]
