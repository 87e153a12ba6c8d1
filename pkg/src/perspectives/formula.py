"""Formula enumeration over the unit graph, multiplier fitting and pruning."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .kb import KnowledgeBase, UnitGraph, build_unit_graph
from .mention import Mention
from .units import DIMENSIONLESS, Unit, parse_unit, to_string

DEFAULT_VALUES = tuple(10.0**k for k in range(-7, 11))


@dataclass(frozen=True)
class FormulaSkeleton:
    """A formula sans multiplier, identified by its tuple multiset.

    ``order`` keeps the head tuple first followed by the cancelling tuples;
    it does not take part in equality.
    """

    tuple_ids: tuple[str, ...]
    order: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not self.tuple_ids:
            raise ValueError("empty skeleton")
        object.__setattr__(self, "tuple_ids", tuple(sorted(self.tuple_ids)))
        if not self.order:
            object.__setattr__(self, "order", self.tuple_ids)
        elif sorted(self.order) != list(self.tuple_ids):
            raise ValueError("order is not a permutation of tuple_ids")

    def __len__(self):
        return len(self.tuple_ids)


@dataclass(frozen=True)
class Formula:
    multiplier: float
    tuple_ids: tuple[str, ...]
    value: float
    unit: Unit

    def __post_init__(self):
        if not self.multiplier > 0:
            raise ValueError("multiplier must be positive")
        if not self.tuple_ids:
            raise ValueError("formula without tuples")

    @property
    def skeleton(self) -> tuple[str, ...]:
        return tuple(sorted(self.tuple_ids))

    def to_record(self) -> dict:
        return {
            "multiplier": self.multiplier,
            "tuples": list(self.tuple_ids),
            "value": self.value,
            "unit": to_string(self.unit),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Formula":
        return cls(float(rec["multiplier"]), tuple(rec["tuples"]), float(rec["value"]), parse_unit(rec["unit"]))


def make_formula(kb: KnowledgeBase, multiplier: float, tuple_ids) -> Formula:
    """Formula with value and unit derived from the KB tuples."""
    tuple_ids = tuple(tuple_ids)
    ts = [kb[i] for i in tuple_ids]
    unit = DIMENSIONLESS
    for t in ts:
        unit = unit * t.unit
    return Formula(multiplier, tuple_ids, multiplier * math.prod(t.value for t in ts), unit)


def _label_key(label: Unit):
    # ordinal cancellations come first: "cost of an employee for the population of Texas for a week"
    return (not all(a.kind == "ordinal" for a in label.numerator), to_string(label))


def enumerate_skeletons(
    graph: UnitGraph,
    kb: KnowledgeBase,
    target: Unit,
    max_tuples: int = 4,
) -> set[FormulaSkeleton]:
    """All skeletons whose path through the unit graph ends at ``target``.

    A path starts at a head tuple's unit and follows cancellation edges; each
    edge contributes one tuple.  Paths are walked with nondecreasing
    (label, tuple id) keys so each multiset is produced once.
    """
    if max_tuples < 1:
        raise ValueError("max_tuples must be >= 1")
    adj = graph.adjacency()
    found: dict[tuple, FormulaSkeleton] = {}

    def walk(vertex, head, chosen, last_key):
        if vertex == target:
            sk = FormulaSkeleton((head, *chosen), (head, *chosen))
            found.setdefault(sk.tuple_ids, sk)
        if 1 + len(chosen) >= max_tuples:
            return
        for edge in adj.get(vertex, ()):
            lk = _label_key(edge.label)
            for tid in edge.tuple_ids:
                key = (lk, tid)
                if last_key is not None and key < last_key:
                    continue
                walk(edge.target, head, chosen + [tid], key)

    for t in kb:
        walk(t.unit, t.id, [], None)
    return set(found.values())


def fit_multiplier(skeleton: FormulaSkeleton, target_value: float, kb: KnowledgeBase) -> Formula:
    if not target_value > 0:
        raise ValueError("target value must be positive")
    product = math.prod(kb[i].value for i in skeleton.order)
    return make_formula(kb, target_value / product, skeleton.order)


def prune_by_proximity(formulas, lo: float = 0.01, hi: float = 100.0) -> list[Formula]:
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    return [f for f in formulas if lo <= f.multiplier <= hi]


@dataclass(frozen=True)
class EnumerationConfig:
    max_tuples: int = 4
    prune: bool = True
    lo: float = 0.01
    hi: float = 100.0


def _sorted_skeletons(skeletons):
    return sorted(skeletons, key=lambda s: s.tuple_ids)


def enumerate_formulas(
    kb: KnowledgeBase,
    mention: Mention,
    config: EnumerationConfig = EnumerationConfig(),
    graph: UnitGraph | None = None,
) -> list[Formula]:
    graph = graph or build_unit_graph(kb)
    skeletons = enumerate_skeletons(graph, kb, mention.unit, config.max_tuples)
    formulas = [fit_multiplier(s, mention.value, kb) for s in _sorted_skeletons(skeletons)]
    if config.prune:
        formulas = prune_by_proximity(formulas, config.lo, config.hi)
    return formulas


def enumerate_grid(
    kb: KnowledgeBase,
    units,
    values=DEFAULT_VALUES,
    config: EnumerationConfig = EnumerationConfig(),
) -> list[Formula]:
    """Pruned formulas for every (unit, value) cell of the grid."""
    if any(not v > 0 for v in values):
        raise ValueError("grid values must be positive")
    graph = build_unit_graph(kb)
    out = []
    for unit in units:
        skeletons = _sorted_skeletons(enumerate_skeletons(graph, kb, unit, config.max_tuples))
        for v in values:
            fs = [fit_multiplier(s, v, kb) for s in skeletons]
            out.extend(prune_by_proximity(fs, config.lo, config.hi) if config.prune else fs)
    return out


def closest_tuple_baseline(kb: KnowledgeBase, mention: Mention) -> Formula | None:
    """Single-tuple formula from the same-unit tuple nearest in log10 value."""
    candidates = kb.with_unit(mention.unit)
    if not candidates:
        return None
    best = min(candidates, key=lambda t: (abs(math.log10(mention.value / t.value)), t.id))
    return make_formula(kb, mention.value / best.value, (best.id,))
