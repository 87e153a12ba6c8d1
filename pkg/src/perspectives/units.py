"""Unit algebra over measurable and ordinal atoms, plus surface-unit normalization.

A :class:`Unit` is a canonical fraction of atoms: ``money/person/time`` is
money divided by (person times time).  Surface units ("miles", "$",
"cubic meters") map onto a single atom with a conversion factor to the base
unit of that dimension.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

MEASURABLE = ("length", "area", "volume", "weight", "time", "money")

MAGNITUDES = {
    "hundred": 1e2,
    "thousand": 1e3,
    "million": 1e6,
    "billion": 1e9,
    "trillion": 1e12,
}

# plural spellings of ordinal atoms collapse onto one name so that
# "money/person" cancels against a "people" tuple
_ORDINAL_ALIASES = {
    "people": "person",
    "persons": "person",
    "cars": "car",
    "guns": "gun",
}

_IDENT = re.compile(r"[a-z][a-z0-9_]*\Z")


class UnitError(ValueError):
    """Raised for malformed unit strings and invalid surface-unit tables."""


@dataclass(frozen=True, order=True)
class UnitAtom:
    kind: str
    name: str

    def __post_init__(self):
        if self.kind == "measurable":
            if self.name not in MEASURABLE:
                raise UnitError(f"unknown measurable atom {self.name!r}")
        elif self.kind == "ordinal":
            if not _IDENT.match(self.name):
                raise UnitError(f"bad ordinal atom name {self.name!r}")
        else:
            raise UnitError(f"bad atom kind {self.kind!r}")

    @classmethod
    def named(cls, name: str) -> "UnitAtom":
        """Atom for ``name``; anything outside the measurable set is ordinal."""
        name = name.lower()
        if name in MEASURABLE:
            return cls("measurable", name)
        return cls("ordinal", _ORDINAL_ALIASES.get(name, name))

    def __str__(self):
        return self.name


def _cancel(num: Iterable[UnitAtom], den: Iterable[UnitAtom]):
    n, d = Counter(num), Counter(den)
    common = n & d
    n, d = n - common, d - common
    return tuple(sorted(n.elements())), tuple(sorted(d.elements()))


@dataclass(frozen=True)
class Unit:
    """Canonical fraction of atoms; construct through :meth:`of` or :func:`parse_unit`."""

    numerator: tuple[UnitAtom, ...] = ()
    denominator: tuple[UnitAtom, ...] = ()

    def __post_init__(self):
        num, den = _cancel(self.numerator, self.denominator)
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)

    @classmethod
    def of(cls, *names: str, per: Sequence[str] = ()) -> "Unit":
        return cls(
            tuple(UnitAtom.named(n) for n in names),
            tuple(UnitAtom.named(n) for n in per),
        )

    @property
    def is_dimensionless(self) -> bool:
        return not self.numerator and not self.denominator

    @property
    def atoms(self) -> tuple[UnitAtom, ...]:
        return self.numerator

    def __mul__(self, other: "Unit") -> "Unit":
        return multiply(self, other)

    def __truediv__(self, other: "Unit") -> "Unit":
        return multiply(self, invert(other))

    def __str__(self):
        return to_string(self)

    def __repr__(self):
        return f"Unit({to_string(self)!r})"


DIMENSIONLESS = Unit()


def multiply(a: Unit, b: Unit) -> Unit:
    return Unit(a.numerator + b.numerator, a.denominator + b.denominator)


def invert(u: Unit) -> Unit:
    return Unit(u.denominator, u.numerator)


def to_string(u: Unit) -> str:
    """Slash-chain form: ``money/person/time``; the dimensionless unit is ``1``."""
    head = "*".join(a.name for a in u.numerator) or "1"
    return "/".join([head, *(a.name for a in u.denominator)])


def _split_segments(text: str) -> list[list[str]]:
    if not text or not text.strip():
        raise UnitError("empty unit string")
    segments = []
    pos = 0
    for seg in text.split("/"):
        atoms = []
        for tok in seg.split("*"):
            stripped = tok.strip()
            if not stripped:
                raise UnitError(f"empty atom at position {pos} in {text!r}")
            atoms.append(stripped)
            pos += len(tok) + 1
        segments.append(atoms)
    return segments


def _assemble(segments, resolve):
    num, den = [], []
    scale = 1.0
    for i, seg in enumerate(segments):
        if seg == ["per"]:
            continue
        for tok in seg:
            if tok == "1" and len(seg) == 1:
                continue
            atom, factor = resolve(tok)
            if i == 0:
                num.append(atom)
                scale *= factor
            else:
                den.append(atom)
                scale /= factor
    return Unit(tuple(num), tuple(den)), scale


def parse_unit(text: str) -> Unit:
    """Parse ``seg ('/' seg)*`` where ``seg := atom ('*' atom)*``.

    Every segment after the first multiplies the denominator, so
    ``money/time/person`` and ``money/person*time`` are the same unit.  The
    segment ``per`` is a no-op separator.
    """
    segments = _split_segments(text)

    def resolve(tok):
        if not _IDENT.match(tok.lower()):
            raise UnitError(f"bad atom {tok!r} at position {text.find(tok)} in {text!r}")
        return UnitAtom.named(tok), 1.0

    return _assemble(segments, resolve)[0]


@dataclass(frozen=True)
class SurfaceUnitEntry:
    lexemes: tuple[str, ...]
    atom: UnitAtom
    factor: float

    def __post_init__(self):
        if not self.lexemes:
            raise UnitError("surface unit entry without lexemes")
        if not (self.factor > 0 and math.isfinite(self.factor)):
            raise UnitError(f"non-positive factor for {self.lexemes[0]!r}")

    @property
    def unit(self) -> Unit:
        return Unit((self.atom,))


@dataclass(frozen=True)
class SurfaceTable:
    """Lexeme lookup over a list of :class:`SurfaceUnitEntry`."""

    entries: tuple[SurfaceUnitEntry, ...]
    index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        for entry in self.entries:
            for lex in entry.lexemes:
                key = lex.lower()
                if key in self.index:
                    raise UnitError(f"lexeme {lex!r} maps to two entries")
                self.index[key] = entry

    def __contains__(self, lexeme: str) -> bool:
        return lexeme.lower() in self.index

    def __getitem__(self, lexeme: str) -> SurfaceUnitEntry:
        try:
            return self.index[lexeme.lower()]
        except KeyError:
            raise UnitError(f"unknown surface unit {lexeme!r}") from None

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    @property
    def lexemes(self) -> list[str]:
        return list(self.index)


def _entry_from_record(rec: dict) -> SurfaceUnitEntry:
    return SurfaceUnitEntry(
        lexemes=tuple(rec["lexemes"]),
        atom=UnitAtom(rec["kind"], rec["name"]),
        factor=float(rec["factor"]),
    )


def load_surface_table(path: str | Path | None = None) -> SurfaceTable:
    """Load a JSONL table (``lexemes``, ``kind``, ``name``, ``factor``).

    Without a path the packaged default table is returned.
    """
    if path is None:
        text = resources.files("perspectives.data").joinpath("surface_units.jsonl").read_text()
    else:
        text = Path(path).read_text()
    entries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            entries.append(_entry_from_record(json.loads(line)))
        except (KeyError, TypeError, ValueError) as exc:
            raise UnitError(f"line {lineno}: {exc}") from exc
    return SurfaceTable(tuple(entries))


def dump_surface_table(table: SurfaceTable, path: str | Path) -> None:
    with open(path, "w") as fh:
        for e in table:
            rec = {"lexemes": list(e.lexemes), "kind": e.atom.kind, "name": e.atom.name, "factor": e.factor}
            fh.write(json.dumps(rec) + "\n")


def parse_surface_unit(text: str, table: SurfaceTable | None = None) -> tuple[Unit, float]:
    """Parse a unit whose atoms may be surface lexemes ("$/person/year").

    Returns the canonical unit and the factor converting a value in the
    surface unit to base units.  Base atom names resolve with factor 1;
    lexemes resolve through ``table``; anything else is an ordinal atom.
    """
    segments = _split_segments(text)

    def resolve(tok):
        if tok.lower() in MEASURABLE:
            return UnitAtom.named(tok), 1.0
        if table is not None and tok in table:
            entry = table[tok]
            return entry.atom, entry.factor
        if not _IDENT.match(tok.lower()):
            raise UnitError(f"bad atom {tok!r} in {text!r}")
        return UnitAtom.named(tok), 1.0

    return _assemble(segments, resolve)


def normalize_quantity(
    value: float,
    magnitude_word: str | None,
    surface_unit: str,
    table: SurfaceTable,
) -> tuple[float, Unit]:
    if not value > 0:
        raise ValueError(f"non-positive value {value!r}")
    scale = 1.0
    if magnitude_word:
        try:
            scale = MAGNITUDES[magnitude_word.lower()]
        except KeyError:
            raise ValueError(f"unknown magnitude word {magnitude_word!r}") from None
    entry = table[surface_unit]
    return value * scale * entry.factor, entry.unit
