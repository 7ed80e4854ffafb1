import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from groupcf.dataset import Group, RatingsDataset  # noqa: E402
from groupcf.recommender import CallMeter, RecommendationList  # noqa: E402

# 4 users x 12 items; values are exact binary fractions
HAND_ROWS = {
    1: {1: 1.0, 2: 0.5, 3: 0.75, 4: 0.25, 5: 1.0},
    2: {1: 0.5, 3: 0.25, 6: 1.0, 7: 0.75},
    3: {1: 1.0, 2: 0.25, 6: 0.5, 8: 1.0, 9: 0.75, 10: 0.5},
    4: {1: 0.75, 8: 0.25, 9: 1.0, 11: 1.0, 12: 0.5},
}

ACCEPTANCE_LINES: list[str] = []


def rows_to_dataset(rows: dict) -> RatingsDataset:
    return RatingsDataset.from_triples((u, i, r) for u, items in rows.items() for i, r in items.items())


@pytest.fixture
def hand_rows():
    return {u: dict(r) for u, r in HAND_ROWS.items()}


@pytest.fixture
def hand_ds():
    return rows_to_dataset(HAND_ROWS)


@pytest.fixture
def hand_group(hand_ds):
    return Group.from_members(hand_ds, [1, 2])


class RuleRecommender:
    """Stub black box: the target is listed unless ``evicts(removed)`` holds.

    ``rank_of`` optionally maps a removal set to the target's rank while it
    stays listed. Fillers pad the list to ``m`` entries.
    """

    def __init__(self, target, evicts, m=10, rank_of=None):
        self.target = target
        self.evicts = evicts
        self.m = m
        self.rank_of = rank_of or (lambda removed: 1)
        self.calls = 0

    def recommend_for_group(self, group, meter: CallMeter, removed=()):
        meter.charge()
        self.calls += 1
        removed = frozenset(removed)
        fillers = [(f"filler{k}", 0.5) for k in range(self.m)]
        if self.evicts(removed):
            return RecommendationList(tuple(fillers[: self.m]), self.m)
        rank = self.rank_of(removed)
        entries = fillers[: rank - 1] + [(self.target, 0.9)] + fillers[rank - 1: self.m - 1]
        return RecommendationList(tuple(entries), self.m)


class DummyGroup:
    members = ("u",)


@pytest.fixture
def dummy_group():
    return DummyGroup()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
