"""Random rating matrices for desk-scale experiments."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import sparse

from .dataset import ConfigurationError, RatingsDataset

RATING_GRID = np.round(np.arange(1, 11) / 10.0, 1)


def generate_synthetic(users: int, items: int, density: float, seed: int) -> RatingsDataset:
    """Rate each (user, item) pair independently with probability ``density``.

    Ratings are uniform on {0.1, 0.2, ..., 1.0}. A user whose row comes out
    empty receives one uniformly chosen item so every user has a history.
    User and item ids are ``0..users-1`` and ``0..items-1``.
    """
    if users < 1 or items < 1:
        raise ConfigurationError("users and items must be positive")
    if not 0.0 < density <= 1.0:
        raise ConfigurationError(f"density must lie in (0, 1], got {density}")
    if density * users * items < users:
        raise ConfigurationError("density * users * items must be >= users")
    rng = np.random.default_rng(seed)
    mask = rng.random((users, items)) < density
    empty = np.flatnonzero(~mask.any(axis=1))
    mask[empty, rng.integers(0, items, size=len(empty))] = True
    values = RATING_GRID[rng.integers(0, len(RATING_GRID), size=(users, items))]
    m = sparse.csr_matrix(np.where(mask, values, 0.0))
    return RatingsDataset(list(range(users)), list(range(items)), m,
                          source=f"synthetic(users={users},items={items},density={density},seed={seed})")


def write_movielens(ds: RatingsDataset, path, rating_scale_max: float = 5.0) -> None:
    """Write ``ds`` in ``::`` format, de-normalizing ratings by ``rating_scale_max``."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for u, i, r in ds.triples():
            fh.write(f"{u}::{i}::{round(r * rating_scale_max, 6)!r}::0\n")
