import itertools

import pytest
from hypothesis import given, settings, strategies as st

from conftest import RuleRecommender, rows_to_dataset
from oracles import minimal_counterfactual
from groupcf.dataset import Group
from groupcf.recommender import BudgetExhausted, CallMeter, GroupRecommender
from groupcf.search import (BUDGET_EXHAUSTED, EXHAUSTIVE, FIXED_WINDOW, GREEDY_GROW, GROW_PRUNE,
                            METHODS, NOTHING_TO_EXPLAIN, OK, PARETO_FILTERING,
                            CounterfactualChecker, candidate_list, check_cf_and_power,
                            exhaustive_minimal, exp_rebuild, explain, fixed_window,
                            fixed_window_hybrid, greedy_grow, grow_and_prune,
                            is_counterfactual, powerset_refine, prepare_vectors)
from groupcf.synthetic import generate_synthetic

H = list("abcdefghijklmnopqrst")


def checker_for(evicts, budget=None, rank_of=None, trace=None):
    rec = RuleRecommender("t", evicts, rank_of=rank_of)
    meter = CallMeter(budget)
    return CounterfactualChecker(rec, None, "t", meter, "test", trace), meter


def needs(*items):
    need = frozenset(items)
    return lambda s: need <= s


def test_greedy_immediate_hit():
    chk, meter = checker_for(needs("a"))
    assert greedy_grow(chk, H) == ["a"]
    assert meter.calls_used == 1


def test_greedy_exhaustion():
    chk, meter = checker_for(lambda s: False)
    assert greedy_grow(chk, H[:6]) is None
    assert meter.calls_used == 6


def test_greedy_three_prefix():
    evicts = needs("b", "c")
    chk, meter = checker_for(evicts)
    assert greedy_grow(chk, H) == ["a", "b", "c"]
    assert meter.calls_used == 3
    assert [evicts(frozenset(H[:k])) for k in range(1, 4)] == [False, False, True]


def test_prune_drops_redundant_head():
    scores = {i: 1.0 - k / 100 for k, i in enumerate(H)}
    scores["a"] = 0.0
    evicts = needs("b", "c")
    chk, _ = checker_for(evicts)
    out = grow_and_prune(chk, H, scores)
    assert sorted(out) == ["b", "c"] == minimal_counterfactual(H[:3], evicts)


def test_prune_keeps_minimal_grow():
    scores = {i: 1.0 for i in H}
    chk, _ = checker_for(needs("a", "b", "c"))
    assert grow_and_prune(chk, H, scores) == ["a", "b", "c"]


def test_rebuild_single_high_power_item():
    # rank of t stays 1 until c is removed, so only c earns credit
    chk, meter = checker_for(needs("c"))
    assert exp_rebuild(chk, H) == ["c"]
    assert meter.calls_used == 4


def test_rebuild_power_matches_order():
    # credits 0.9, 0.45, 1/3 follow grow order
    chk, _ = checker_for(needs("a", "b", "c"), rank_of=lambda s: 10 if s else 1)
    assert exp_rebuild(chk, H) == ["a", "b", "c"]


def test_rebuild_fallback_is_grow_set():
    chk, _ = checker_for(needs("a", "b", "c"))
    out = exp_rebuild(chk, H)
    assert set(out) == {"a", "b", "c"}


def test_rebuild_skip_saves_calls():
    evicts = needs("c")
    rank = lambda s: 10 if "a" in s else 1  # noqa: E731
    # rebuild order a, b, c; {a} and {a, b} already failed on the grow path
    chk, meter = checker_for(evicts, rank_of=rank)
    assert exp_rebuild(chk, H, skip_penultimate_subsets=True) == ["a", "b", "c"]
    assert meter.calls_used == 3 + 1
    chk2, meter2 = checker_for(evicts, rank_of=rank)
    assert exp_rebuild(chk2, H, skip_penultimate_subsets=False) == ["a", "b", "c"]
    assert meter2.calls_used == 3 + 3


def test_cf_and_power():
    chk, _ = checker_for(needs("x"), rank_of=lambda s: 4 if "y" in s else 1)
    assert chk.cf_and_power(["x"]) == (True, 1.0)
    assert chk.cf_and_power([]) == (False, 0.0)
    ok, p = chk.cf_and_power(["y"])
    assert not ok and p == pytest.approx(0.3)


def test_fixed_window_pair_at_three_four():
    evicts = needs(H[2], H[3])
    trace = []
    chk, meter = checker_for(evicts, trace=trace)
    items, window = fixed_window(chk, H, 15)
    assert items == [H[2], H[3]]
    assert window == H[:15]
    # window probe, 15 singletons, pairs up to (2, 3)
    assert meter.calls_used == 1 + 15 + 14 + 13 + 1
    assert [r.size for r in trace[1:16]] == [1] * 15
    assert minimal_counterfactual(window, evicts) == sorted(items)


def test_fixed_window_sizes_and_clamp():
    evicts = needs(*H[:7])  # needs a 7-item window; w=3 gives 3, 6, then the clamp at 7
    seen = []
    chk, _ = checker_for(lambda s: seen.append(len(s)) or evicts(s))
    items, window = fixed_window(chk, H[:7], 3)
    assert window == H[:7] and items == H[:7]
    assert seen[:5] == [3] * 5 and seen[5:7] == [6, 6] and seen[7] == 7


def test_powerset_refine_includes_whole_window():
    chk, _ = checker_for(needs("a", "b", "c"))
    assert powerset_refine(chk, ["a", "b", "c"]) == ["a", "b", "c"]


def test_hybrid_greedy_whole_window():
    chk, _ = checker_for(needs("a", "b", "c"))
    items, window = fixed_window_hybrid(chk, H[:5], 3, GREEDY_GROW, {})
    assert items == window == ["a", "b", "c"]


def test_hybrid_finishes_where_powerset_runs_out():
    evicts = needs(*H[:8])
    chk, _ = checker_for(evicts, budget=1000)
    with pytest.raises(BudgetExhausted):
        fixed_window(chk, H, 15)
    chk2, meter = checker_for(evicts, budget=1000)
    items, window = fixed_window_hybrid(chk2, H, 15, GREEDY_GROW, {})
    assert evicts(frozenset(items)) and set(items) <= set(window)
    assert meter.calls_used <= 1000
    chk3, _ = checker_for(evicts, budget=1000)
    items, _ = fixed_window_hybrid(chk3, H, 15, GROW_PRUNE, {i: 1.0 for i in H})
    assert sorted(items) == sorted(H[:8])
    with pytest.raises(ValueError):
        fixed_window_hybrid(chk3, H, 15, "Nope", {})


def test_exhaustive():
    chk, _ = checker_for(needs("d"))
    assert exhaustive_minimal(chk, H[:6]) == ["d"]
    chk, meter = checker_for(lambda s: False)
    assert exhaustive_minimal(chk, H[:5]) is None
    assert meter.calls_used == 2 ** 5 - 1
    with pytest.raises(ValueError):
        exhaustive_minimal(chk, range(21))


FAMILY = st.lists(st.frozensets(st.sampled_from(H[:10]), min_size=1, max_size=4),
                  min_size=1, max_size=4)


@settings(max_examples=150, deadline=None)
@given(FAMILY, st.permutations(H[:10]))
def test_heuristic_properties_on_monotone_rules(family, order):
    def evicts(s):
        return any(c <= s for c in family)

    scores = {i: float(len(order) - k) for k, i in enumerate(order)}
    s_star = len(minimal_counterfactual(order, evicts))
    gg = greedy_grow(checker_for(evicts)[0], order)
    gp = grow_and_prune(checker_for(evicts)[0], order, scores)
    er = exp_rebuild(checker_for(evicts)[0], order)
    fw_items, fw_window = fixed_window(checker_for(evicts)[0], order, 3)
    for out in (gg, gp, er, fw_items):
        assert evicts(frozenset(out)) and len(out) >= s_star
    assert len(gp) <= len(gg)
    assert set(fw_items) <= set(fw_window)
    for x in gp:  # one-minimal under a monotone rule
        assert not evicts(frozenset(gp) - {x})


def test_budget_respected_by_stub():
    chk, meter = checker_for(lambda s: False, budget=5)
    with pytest.raises(BudgetExhausted):
        greedy_grow(chk, H)
    assert meter.calls_used == 5


# -- real recommender ----------------------------------------------------

FIG_ROWS = {
    "g1": {1: 1.0, 2: 1.0, 5: 1.0},
    "g2": {3: 1.0, 4: 1.0, 8: 1.0},
    "p": {2: 1.0, 5: 1.0, 8: 1.0, 9: 1.0},
    "q": {1: 1.0, 3: 1.0, 4: 1.0, 10: 0.5, 11: 0.5},
}


def test_is_counterfactual_on_constructed_fixture():
    ds = rows_to_dataset(FIG_ROWS)
    g = Group.from_members(ds, ["g1", "g2"])
    rec = GroupRecommender(ds)
    assert 9 in rec.recommend_for_group(g, CallMeter())
    assert not is_counterfactual(rec, g, [], 9, CallMeter())
    assert not is_counterfactual(rec, g, [2, 5], 9, CallMeter())
    assert is_counterfactual(rec, g, [2, 5, 8], 9, CallMeter())
    assert 9 not in rec.recommend_for_group(g, CallMeter(), [2, 5, 8])
    assert is_counterfactual(rec, g, g.union_interactions, 9, CallMeter())
    assert check_cf_and_power(rec, g, [2, 5, 8], 9, CallMeter()) == (True, 1.0)


def test_explain_statuses(hand_ds, hand_group):
    rec = GroupRecommender(hand_ds)
    res = explain(rec, hand_group, GREEDY_GROW, target=3)
    assert res.status == NOTHING_TO_EXPLAIN and res.explanation is None
    res = explain(rec, hand_group, FIXED_WINDOW, budget=1)
    assert res.status == BUDGET_EXHAUSTED and res.explanation is None
    assert res.search_calls == 1 == len(res.trace)
    with pytest.raises(ValueError):
        explain(rec, hand_group, "Nope")


def test_explain_nothing_when_list_empty():
    ds = rows_to_dataset({"a": {1: 1.0}, "b": {1: 0.5}})
    g = Group.from_members(ds, ["a", "b"])
    res = explain(GroupRecommender(ds), g, GREEDY_GROW)
    assert res.status == NOTHING_TO_EXPLAIN and res.target is None


@pytest.mark.parametrize("method", [m for m in METHODS])
@pytest.mark.parametrize("pareto", [False, True])
def test_explain_every_method(method, pareto):
    ds = generate_synthetic(10, 14, 0.4, seed=21)
    g = Group.from_members(ds, [0, 1, 2])
    rec = GroupRecommender(ds, m=5)
    res = explain(rec, g, method, pareto=pareto, window=3)
    assert res.search_calls == len(res.trace) <= 1000
    assert res.metric_calls <= len(g)
    if res.status == OK:
        e = res.explanation
        assert e.valid
        assert list(e.items) == sorted(e.items)
        assert set(e.items) <= g.union_interactions
        assert sum(e.member_contributions.values()) >= len(e)
        if pareto or method == PARETO_FILTERING:
            assert set(e.items) <= set(res.candidates)


def test_metric_calls_can_share_budget():
    ds = generate_synthetic(10, 14, 0.4, seed=21)
    g = Group.from_members(ds, [0, 1, 2])
    rec = GroupRecommender(ds, m=5)
    full = explain(rec, g, EXHAUSTIVE)
    assert full.status == OK and full.search_calls > 1
    budget = full.metric_calls + full.search_calls - 1
    assert explain(rec, g, EXHAUSTIVE, budget=budget).status == OK
    shared = explain(rec, g, EXHAUSTIVE, budget=budget, count_metric_calls_in_budget=True)
    assert shared.status == BUDGET_EXHAUSTED
    assert shared.search_calls == budget - full.metric_calls


def test_candidate_list_order(hand_ds, hand_group):
    rec = GroupRecommender(hand_ds)
    vecs, calls = prepare_vectors(rec, hand_group, 9)
    order = candidate_list(vecs)
    totals = {v.item: v.total_score for v in vecs}
    assert calls == 2
    assert all((-totals[a], a) < (-totals[b], b) for a, b in itertools.pairwise(order))
