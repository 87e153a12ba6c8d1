"""Knowledge base of numeric tuples and the unit graph built over it."""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from .units import SurfaceTable, Unit, UnitError, load_surface_table, parse_surface_unit, to_string


class KBError(ValueError):
    pass


@dataclass(frozen=True)
class NumericTuple:
    id: str
    description: str
    value: float
    unit: Unit
    source: str | None = None

    def __post_init__(self):
        if not self.id:
            raise KBError("empty tuple id")
        if not self.description:
            raise KBError(f"{self.id}: empty description")
        if not (self.value > 0 and math.isfinite(self.value)):
            raise KBError(f"{self.id}: non-positive value {self.value!r}")

    @property
    def is_denominator_free(self) -> bool:
        return not self.unit.denominator and not self.unit.is_dimensionless

    def to_record(self) -> dict:
        rec = {"id": self.id, "description": self.description, "value": self.value, "unit": to_string(self.unit)}
        if self.source is not None:
            rec["source"] = self.source
        return rec


@dataclass(frozen=True)
class KnowledgeBase:
    tuples: tuple[NumericTuple, ...]
    by_unit: dict = field(default_factory=dict, compare=False, repr=False)
    by_id: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        index = defaultdict(list)
        for t in self.tuples:
            if t.id in self.by_id:
                raise KBError(f"duplicate id {t.id!r}")
            self.by_id[t.id] = t
            index[t.unit].append(t.id)
        self.by_unit.update({u: tuple(ids) for u, ids in index.items()})

    @classmethod
    def from_tuples(cls, tuples: Iterable[NumericTuple]) -> "KnowledgeBase":
        return cls(tuple(tuples))

    def __getitem__(self, tuple_id: str) -> NumericTuple:
        try:
            return self.by_id[tuple_id]
        except KeyError:
            raise KBError(f"unknown tuple id {tuple_id!r}") from None

    def __contains__(self, tuple_id: str) -> bool:
        return tuple_id in self.by_id

    def __len__(self):
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)

    def with_unit(self, unit: Unit) -> list[NumericTuple]:
        return [self.by_id[i] for i in self.by_unit.get(unit, ())]

    @property
    def units(self) -> set[Unit]:
        return set(self.by_unit)


def tuple_from_record(rec: dict, table: SurfaceTable | None = None) -> NumericTuple:
    """Build a tuple, converting ``value`` from the record's surface unit to base units."""
    try:
        unit, factor = parse_surface_unit(rec["unit"], table)
        value = float(rec["value"])
        if not value > 0:
            raise KBError("non-positive value")
        return NumericTuple(
            id=str(rec["id"]),
            description=rec["description"],
            value=value * factor,
            unit=unit,
            source=rec.get("source"),
        )
    except KeyError as exc:
        raise KBError(f"missing field {exc.args[0]!r}") from None


def load_kb(path: str | Path | None = None, table: SurfaceTable | None = None) -> KnowledgeBase:
    """Load a JSONL knowledge base; errors carry the offending line number.

    With no path the packaged reconstructed mini-KB is loaded.
    """
    if table is None:
        table = load_surface_table()
    if path is None:
        text = resources.files("perspectives.data").joinpath("mini_kb.jsonl").read_text()
    else:
        text = Path(path).read_text()
    tuples = []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            t = tuple_from_record(json.loads(line), table)
        except (KBError, UnitError, ValueError, TypeError) as exc:
            raise KBError(f"line {lineno}: {exc}") from exc
        if t.id in seen:
            raise KBError(f"line {lineno}: duplicate id {t.id!r}")
        seen.add(t.id)
        tuples.append(t)
    return KnowledgeBase(tuple(tuples))


def dump_kb(kb: KnowledgeBase, path: str | Path) -> None:
    """Write canonical records (base-unit values, canonical unit strings)."""
    with open(path, "w") as fh:
        for t in kb:
            fh.write(json.dumps(t.to_record()) + "\n")


@dataclass(frozen=True)
class Edge:
    source: Unit
    target: Unit
    label: Unit
    tuple_ids: tuple[str, ...]


@dataclass(frozen=True)
class UnitGraph:
    vertices: frozenset
    edges: tuple[Edge, ...]

    def out_edges(self, unit: Unit) -> list[Edge]:
        return [e for e in self.edges if e.source == unit]

    def adjacency(self) -> dict:
        adj = defaultdict(list)
        for e in self.edges:
            adj[e.source].append(e)
        return adj


def _contains(big: tuple, small: tuple) -> bool:
    return not (Counter(small) - Counter(big))


def build_unit_graph(kb: KnowledgeBase) -> UnitGraph:
    """Vertices are tuple units closed under cancellation edges.

    For a vertex ``u1/u2`` and any denominator-free KB unit ``u2`` contained in
    the vertex's denominator, an edge ``u1/u2 -> u1`` carries every tuple of
    unit ``u2``.  Each edge removes at least one denominator atom, so the
    graph is acyclic.
    """
    labels = sorted(
        (u for u in kb.units if not u.denominator and not u.is_dimensionless),
        key=to_string,
    )
    vertices = set(kb.units)
    edges = []
    todo = sorted(vertices, key=to_string)
    done = set()
    while todo:
        v = todo.pop()
        if v in done:
            continue
        done.add(v)
        if not v.denominator:
            continue
        for lab in labels:
            if _contains(v.denominator, lab.numerator):
                target = v * lab
                edges.append(Edge(v, target, lab, kb.by_unit[lab]))
                if target not in vertices:
                    vertices.add(target)
                    todo.append(target)
    edges.sort(key=lambda e: (to_string(e.source), to_string(e.label)))
    return UnitGraph(frozenset(vertices), tuple(edges))
