"""Counterfactual search strategies over a ranked candidate list.

Every heuristic receives a :class:`CounterfactualChecker` bound to one
(group, target, meter) and a candidate list ``H`` (items best first). The
heuristics let :class:`~groupcf.recommender.BudgetExhausted` propagate;
:func:`explain` turns it into a typed failure.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field, asdict
from typing import Iterable, Sequence

from .dataset import Group, ItemId
from .metrics import ItemMetricVector, build_metric_vectors, explanatory_power
from .pareto import MetricPoint, pareto_filtering
from .recommender import BudgetExhausted, CallMeter, GroupRecommender, RecommendationList

log = logging.getLogger(__name__)

GREEDY_GROW = "GreedyGrow"
GROW_PRUNE = "GrowPrune"
EXP_REBUILD = "ExpRebuild"
FIXED_WINDOW = "FixedWindow"
FIXED_WINDOW_GREEDY_GROW = "FixedWindowGreedyGrow"
FIXED_WINDOW_GROW_PRUNE = "FixedWindowGrowPrune"
PARETO_FILTERING = "ParetoFiltering"
EXHAUSTIVE = "Exhaustive"

METHODS = (GREEDY_GROW, GROW_PRUNE, EXP_REBUILD, FIXED_WINDOW, FIXED_WINDOW_GREEDY_GROW,
           FIXED_WINDOW_GROW_PRUNE, PARETO_FILTERING, EXHAUSTIVE)

EXHAUSTIVE_MAX_ITEMS = 20

OK = "ok"
NO_COUNTERFACTUAL = "no_counterfactual"
BUDGET_EXHAUSTED = "budget_exhausted"
NOTHING_TO_EXPLAIN = "nothing_to_explain"


@dataclass(frozen=True)
class TraceRecord:
    step: int
    method: str
    size: int
    cf_found: bool
    rank_of_t: int | None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


class CounterfactualChecker:
    """Issues metered "remove S, is the target gone?" queries for one group and target."""

    def __init__(self, recommender: GroupRecommender, group: Group, target: ItemId,
                 meter: CallMeter, method: str = "", trace: list | None = None):
        self.recommender = recommender
        self.group = group
        self.target = target
        self.meter = meter
        self.method = method
        self.trace = trace

    def _query(self, removed: Iterable[ItemId]) -> tuple[RecommendationList, int]:
        removed = frozenset(removed)
        rec_list = self.recommender.recommend_for_group(self.group, self.meter, removed)
        if self.trace is not None:
            self.trace.append(TraceRecord(len(self.trace) + 1, self.method, len(removed),
                                          self.target not in rec_list, rec_list.rank(self.target)))
        return rec_list, len(removed)

    def is_cf(self, removed: Iterable[ItemId]) -> bool:
        rec_list, _ = self._query(removed)
        return self.target not in rec_list

    def cf_and_power(self, removed: Iterable[ItemId]) -> tuple[bool, float]:
        rec_list, _ = self._query(removed)
        return self.target not in rec_list, explanatory_power(rec_list, self.target, self.recommender.m)


def is_counterfactual(recommender: GroupRecommender, group: Group, removed: Iterable[ItemId],
                      target: ItemId, meter: CallMeter) -> bool:
    return CounterfactualChecker(recommender, group, target, meter).is_cf(removed)


def check_cf_and_power(recommender: GroupRecommender, group: Group, removed: Iterable[ItemId],
                       target: ItemId, meter: CallMeter) -> tuple[bool, float]:
    return CounterfactualChecker(recommender, group, target, meter).cf_and_power(removed)


def candidate_list(vectors: Sequence[ItemMetricVector]) -> list:
    """Items ordered by total score, highest first; ties by ascending item id."""
    return [v.item for v in sorted(vectors, key=lambda v: (-v.total_score, v.item))]


# -- heuristics ----------------------------------------------------------

def greedy_grow(checker: CounterfactualChecker, H: Sequence[ItemId]) -> list | None:
    """Shortest counterfactual prefix of ``H``."""
    prefix: list = []
    for item in H:
        prefix.append(item)
        if checker.is_cf(prefix):
            return prefix
    return None


def grow_and_prune(checker: CounterfactualChecker, H: Sequence[ItemId], scores: dict) -> list | None:
    """Grow a prefix, then drop items (lowest score first) whose removal keeps validity."""
    grown = greedy_grow(checker, H)
    if grown is None:
        return None
    current = list(grown)
    for item in sorted(grown, key=lambda i: (scores[i], i)):
        reduced = [i for i in current if i != item]
        if checker.is_cf(reduced):
            current = reduced
    return current


def exp_rebuild(checker: CounterfactualChecker, H: Sequence[ItemId],
                skip_penultimate_subsets: bool = True) -> list | None:
    """Grow while attributing explanatory power, then rebuild in power order.

    Each grow step credits the newly added item with power(S) / |S|. The
    rebuild adds items by decreasing credit and returns the first
    counterfactual prefix. Prefixes contained in the grow set minus its last
    item are known non-counterfactual along the grow path and, with
    ``skip_penultimate_subsets``, are treated as such without a call.
    """
    grown: list = []
    penultimate: frozenset = frozenset()
    power: dict = {}
    found = False
    for item in H:
        penultimate = frozenset(grown)
        grown.append(item)
        found, p = checker.cf_and_power(grown)
        power[item] = p / len(grown)
        if found:
            break
    if not found:
        return None
    ranked = sorted(grown, key=lambda i: -power[i])  # stable: ties keep grow order
    rebuilt: list = []
    for item in ranked:
        rebuilt.append(item)
        if skip_penultimate_subsets and set(rebuilt) <= penultimate:
            continue
        if checker.is_cf(rebuilt):
            return rebuilt
    return grown


def _window_sizes(w: int, n: int):
    size = w
    while True:
        yield min(size, n)
        if size >= n:
            return
        size += w


def _scan_windows(checker: CounterfactualChecker, H: Sequence[ItemId], w: int, refine):
    if w < 1:
        raise ValueError("window size must be >= 1")
    H = list(H)
    n = len(H)
    if n == 0:
        return None
    for size in _window_sizes(w, n):
        for start in range(n - size + 1):
            window = H[start:start + size]
            if checker.is_cf(window):
                refined = refine(window)
                if refined:
                    return list(refined), window
    return None


def powerset_refine(checker: CounterfactualChecker, window: Sequence[ItemId]) -> list | None:
    """First counterfactual subset by increasing size, then by window position."""
    for r in range(1, len(window) + 1):
        for subset in itertools.combinations(window, r):
            if checker.is_cf(subset):
                return list(subset)
    return None


def fixed_window(checker: CounterfactualChecker, H: Sequence[ItemId], w: int = 15):
    """Slide windows of size w, 2w, ... (the last clamped to |H|) and refine the first hit.

    Returns ``(explanation, window)`` or None.
    """
    return _scan_windows(checker, H, w, lambda win: powerset_refine(checker, win))


def fixed_window_hybrid(checker: CounterfactualChecker, H: Sequence[ItemId], w: int,
                        refiner: str, scores: dict):
    """FixedWindow whose refinement is GreedyGrow or GrowPrune over the window order."""
    if refiner == GREEDY_GROW:
        refine = lambda win: greedy_grow(checker, win)  # noqa: E731
    elif refiner == GROW_PRUNE:
        refine = lambda win: grow_and_prune(checker, win, scores)  # noqa: E731
    else:
        raise ValueError(f"unsupported refiner {refiner!r}")
    return _scan_windows(checker, H, w, refine)


def exhaustive_minimal(checker: CounterfactualChecker, items: Iterable[ItemId],
                       max_items: int = EXHAUSTIVE_MAX_ITEMS) -> list | None:
    """Minimum-cardinality counterfactual, lexicographically first among equals."""
    items = sorted(items)
    if len(items) > max_items:
        raise ValueError(f"exhaustive search refused: {len(items)} items > {max_items}")
    for r in range(1, len(items) + 1):
        for subset in itertools.combinations(items, r):
            if checker.is_cf(subset):
                return list(subset)
    return None


def pareto_candidates(checker: CounterfactualChecker, vectors: Sequence[ItemMetricVector],
                      max_iters: int = 25, diagnostics: list | None = None) -> frozenset | None:
    points = [MetricPoint(v.item, v.coords) for v in vectors]
    return pareto_filtering(points, (v.item for v in vectors), checker.is_cf,
                            max_iters=max_iters, diagnostics=diagnostics)


# -- driver --------------------------------------------------------------

@dataclass
class Explanation:
    items: tuple
    method: str
    search_calls: int
    metric_calls: int
    valid: bool
    member_contributions: dict
    pareto: bool = False
    window: tuple | None = None

    def __len__(self) -> int:
        return len(self.items)


@dataclass
class SearchResult:
    status: str
    method: str
    target: ItemId | None
    pareto: bool
    search_calls: int = 0
    metric_calls: int = 0
    explanation: Explanation | None = None
    candidates: tuple | None = None
    trace: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == OK


def factual_list(recommender: GroupRecommender, group: Group) -> RecommendationList:
    """The group's list on its full history; not charged to any search."""
    return recommender.recommend_for_group(group, CallMeter())


def verify(recommender: GroupRecommender, group: Group, items: Iterable[ItemId],
           target: ItemId) -> bool:
    """Fresh, unmetered re-check that removing ``items`` evicts ``target``."""
    return target not in recommender.recommend_for_group(group, CallMeter(), items)


def prepare_vectors(recommender: GroupRecommender, group: Group, target: ItemId):
    meter = CallMeter()
    vectors = build_metric_vectors(recommender, group, target, meter)
    return vectors, meter.calls_used


def explain(recommender: GroupRecommender, group: Group, method: str, *,
            target: ItemId | None = None, budget: int | None = 1000, pareto: bool = False,
            window: int = 15, max_pareto_iters: int = 25,
            count_metric_calls_in_budget: bool = False, skip_penultimate_subsets: bool = True,
            vectors: Sequence[ItemMetricVector] | None = None,
            metric_calls: int | None = None, record_trace: bool = True) -> SearchResult:
    """Run one search method for one group and return a typed result.

    ``target`` defaults to the rank-1 item of the factual list. Precomputed
    ``vectors``/``metric_calls`` may be passed to share the metric phase
    across methods; they must come from :func:`prepare_vectors` for the same
    group and target.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    factual = factual_list(recommender, group)
    if target is None:
        if not factual.entries:
            return SearchResult(NOTHING_TO_EXPLAIN, method, None, pareto)
        target = factual.items[0]
    if target not in factual:
        return SearchResult(NOTHING_TO_EXPLAIN, method, target, pareto)

    if vectors is None:
        vectors, metric_calls = prepare_vectors(recommender, group, target)
    metric_calls = metric_calls or 0
    scores = {v.item: v.total_score for v in vectors}

    if budget is None:
        meter = CallMeter()
    elif count_metric_calls_in_budget:
        meter = CallMeter(max(budget - metric_calls, 0))
    else:
        meter = CallMeter(budget)
    trace: list | None = [] if record_trace else None
    checker = CounterfactualChecker(recommender, group, target, meter, method, trace)
    H = candidate_list(vectors)

    def result(status, items=None, candidates=None, win=None):
        expl = None
        if items is not None:
            items = tuple(sorted(items))
            expl = Explanation(
                items=items, method=method, search_calls=meter.calls_used,
                metric_calls=metric_calls, valid=verify(recommender, group, items, target),
                member_contributions=group.contributions(items), pareto=pareto,
                window=tuple(win) if win is not None else None)
        return SearchResult(status, method, target, pareto, meter.calls_used, metric_calls,
                            expl, candidates, trace if trace is not None else [])

    candidates = None
    try:
        if pareto or method == PARETO_FILTERING:
            found = pareto_candidates(checker, vectors, max_pareto_iters)
            if found is None:
                return result(NO_COUNTERFACTUAL)
            candidates = tuple(sorted(found))
            if method == PARETO_FILTERING:
                return result(OK, found, candidates)
            H = [i for i in H if i in found]

        win = None
        if method == GREEDY_GROW:
            items = greedy_grow(checker, H)
        elif method == GROW_PRUNE:
            items = grow_and_prune(checker, H, scores)
        elif method == EXP_REBUILD:
            items = exp_rebuild(checker, H, skip_penultimate_subsets)
        elif method == FIXED_WINDOW:
            out = fixed_window(checker, H, window)
            items, win = out if out is not None else (None, None)
        elif method in (FIXED_WINDOW_GREEDY_GROW, FIXED_WINDOW_GROW_PRUNE):
            refiner = GREEDY_GROW if method == FIXED_WINDOW_GREEDY_GROW else GROW_PRUNE
            out = fixed_window_hybrid(checker, H, window, refiner, scores)
            items, win = out if out is not None else (None, None)
        else:  # EXHAUSTIVE
            items = exhaustive_minimal(checker, H)
    except BudgetExhausted:
        log.debug("%s: budget exhausted after %d calls", method, meter.calls_used)
        return result(BUDGET_EXHAUSTED, candidates=candidates)
    if items is None:
        return result(NO_COUNTERFACTUAL, candidates=candidates)
    return result(OK, items, candidates, win)
