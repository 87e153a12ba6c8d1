import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perspectives.formula import (
    DEFAULT_VALUES,
    EnumerationConfig,
    Formula,
    FormulaSkeleton,
    closest_tuple_baseline,
    enumerate_formulas,
    enumerate_grid,
    enumerate_skeletons,
    fit_multiplier,
    make_formula,
    prune_by_proximity,
)
from perspectives.kb import KnowledgeBase, NumericTuple, build_unit_graph
from perspectives.mention import Mention
from perspectives.units import Unit, parse_unit

from oracles import brute_force_skeletons, random_kb, unit_product

MONEY = parse_unit("money")


def mention(value, unit=MONEY):
    return Mention("x", 0, 1, "x", value, unit)


def kb_of(*specs):
    return KnowledgeBase(tuple(NumericTuple(i, f"the {i}", v, parse_unit(u)) for i, v, u in specs))


def test_worked_example_skeleton_present(mini_kb):
    sks = enumerate_skeletons(build_unit_graph(mini_kb), mini_kb, MONEY)
    ids = {s.tuple_ids for s in sks}
    assert tuple(sorted(["employee-cost", "texas-pop", "lunch-time"])) in ids


def test_single_tuple_kb():
    kb = kb_of(("a", 5.0, "money"))
    assert enumerate_skeletons(build_unit_graph(kb), kb, MONEY) == {FormulaSkeleton(("a",))}


def test_unknown_target_is_empty(mini_kb):
    assert enumerate_skeletons(build_unit_graph(mini_kb), mini_kb, parse_unit("length")) == set()


def test_head_first_then_ordinal_cancellations(mini_kb):
    sks = enumerate_skeletons(build_unit_graph(mini_kb), mini_kb, MONEY)
    [sk] = [s for s in sks if set(s.tuple_ids) == {"employee-cost", "texas-pop", "lunch-time"}]
    assert sk.order == ("employee-cost", "texas-pop", "lunch-time")


def test_repeated_tuple_multiset():
    kb = kb_of(("rate", 1.0, "money/person/person"), ("p", 3.0, "person"))
    sks = enumerate_skeletons(build_unit_graph(kb), kb, MONEY)
    assert {s.tuple_ids for s in sks} == {("p", "p", "rate")}


def test_max_tuples_cap(mini_kb):
    g = build_unit_graph(mini_kb)
    assert all(len(s) <= 2 for s in enumerate_skeletons(g, mini_kb, MONEY, 2))
    with pytest.raises(ValueError):
        enumerate_skeletons(g, mini_kb, MONEY, 0)


@pytest.mark.parametrize("seed", range(20))
def test_enumeration_matches_brute_force(seed):
    rng = random.Random(seed)
    kb = random_kb(rng, 15)
    g = build_unit_graph(kb)
    targets = {MONEY} | {Unit(t.unit.numerator) for t in kb} | {t.unit for t in kb}
    for target in targets:
        got = {s.tuple_ids for s in enumerate_skeletons(g, kb, target, 3)}
        assert got == brute_force_skeletons(kb, target, 3)


def test_fit_multiplier_examples():
    kb = kb_of(("a", 1.3e8, "money"), ("b", 4e8, "money"), ("c", 1e6, "money"))
    f = fit_multiplier(FormulaSkeleton(("a",)), 1.31e8, kb)
    assert f.multiplier == pytest.approx(1.0077, abs=1e-4)
    assert f.value == pytest.approx(1.31e8, rel=1e-15)
    assert fit_multiplier(FormulaSkeleton(("b",)), 4e8, kb).multiplier == 1
    assert fit_multiplier(FormulaSkeleton(("c",)), 4e8, kb).multiplier == pytest.approx(400)
    with pytest.raises(ValueError):
        fit_multiplier(FormulaSkeleton(("a",)), 0.0, kb)


def _f(m):
    return Formula(m, ("a",), m, MONEY)


def test_prune_bounds_inclusive():
    fs = [_f(400), _f(1), _f(100), _f(0.01), _f(0.0099), _f(100.5)]
    assert [f.multiplier for f in prune_by_proximity(fs)] == [1, 100, 0.01]
    with pytest.raises(ValueError):
        prune_by_proximity(fs, 2, 1)


def test_mini_kb_worked_examples(mini_kb):
    m = mention(1.31e8)
    full = {f.skeleton: f for f in enumerate_formulas(mini_kb, m, EnumerationConfig(prune=False))}
    pruned = {f.skeleton for f in enumerate_formulas(mini_kb, m)}
    ex = [
        ("employee-cost", "texas-pop", "lunch-time"),
        ("employee-cost", "household-size", "week"),
        ("employee-cost", "google-employees", "week"),
        ("bayarea-property", "city-block"),
    ]
    for e in ex:
        assert tuple(sorted(e)) in full
    assert tuple(sorted(ex[1])) not in pruned
    for e in (ex[0], ex[2], ex[3]):
        assert tuple(sorted(e)) in pruned
    assert len(full) >= 4


def test_enumerate_formulas_sorted_and_superset(mini_kb):
    m = mention(2.5e9)
    unpruned = enumerate_formulas(mini_kb, m, EnumerationConfig(prune=False))
    pruned = enumerate_formulas(mini_kb, m)
    assert [f.skeleton for f in unpruned] == sorted(f.skeleton for f in unpruned)
    assert set(pruned) <= set(unpruned)
    assert len({f.skeleton for f in unpruned}) == len(unpruned)


def test_grid_boundaries():
    kb = kb_of(("a", 1e3, "money"))
    fs = enumerate_grid(kb, [MONEY], [1e1, 1e3, 1e5])
    assert [f.multiplier for f in fs] == [0.01, 1.0, 100.0]
    assert enumerate_grid(kb_of(), [MONEY]) == []


def test_grid_count_matches_oracle(mini_kb):
    units = sorted(mini_kb.units | {MONEY, parse_unit("volume")}, key=str)
    got = enumerate_grid(mini_kb, units)
    expected = 0
    for u in units:
        for sk in brute_force_skeletons(mini_kb, u, 4):
            prod = math.prod(mini_kb[i].value for i in sk)
            expected += sum(1 for v in DEFAULT_VALUES if 0.01 <= v / prod <= 100)
    assert len(got) == expected


def test_closest_tuple_baseline():
    kb = kb_of(("a", 7.1e4, "money"), ("b", 1e8, "money"), ("c", 1e10, "money"), ("p", 5.0, "people"))
    f = closest_tuple_baseline(kb, mention(1.31e8))
    assert f.tuple_ids == ("b",) and f.value == pytest.approx(1.31e8)
    assert closest_tuple_baseline(kb, mention(3.0, parse_unit("person"))).tuple_ids == ("p",)
    assert closest_tuple_baseline(kb, mention(3.0, parse_unit("length"))) is None


def test_closest_tuple_tie_prefers_smaller_id():
    kb = kb_of(("z", 10.0, "money"), ("y", 1000.0, "money"))
    assert closest_tuple_baseline(kb, mention(100.0)).tuple_ids == ("y",)


@settings(max_examples=200)
@given(st.integers(0, 10_000), st.floats(1e-7, 1e10))
def test_formula_invariants(seed, target):
    kb = random_kb(random.Random(seed), 10)
    t = kb.tuples[0]
    f = fit_multiplier(FormulaSkeleton((t.id,)), target, kb)
    assert f.unit == t.unit
    assert f.value == f.multiplier * t.value
    assert abs(f.value - target) <= 4 * math.ulp(target)


def test_make_formula_unit_product(mini_kb):
    f = make_formula(mini_kb, 2.0, ["employee-cost", "texas-pop", "lunch-time"])
    assert f.unit == MONEY
    assert f.unit == unit_product(mini_kb[i].unit for i in f.tuple_ids)
    assert Formula.from_record(f.to_record()) == f
