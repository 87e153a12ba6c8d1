"""Numeric mention extraction and stratified sampling."""

from __future__ import annotations

import bisect
import json
import random
import re
from collections import defaultdict
from dataclasses import dataclass

from .units import MAGNITUDES, SurfaceTable, Unit, normalize_quantity, parse_unit, to_string

DEFAULT_BINS = (1e-3, 1.0, 1e3, 1e6, 1e9, 1e12)

_NUMBER = r"(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?"
_MAGNITUDE = "|".join(MAGNITUDES)


@dataclass(frozen=True)
class Mention:
    sentence: str
    start: int
    end: int
    surface: str
    value: float
    unit: Unit

    def __post_init__(self):
        if not (0 <= self.start < self.end <= len(self.sentence)):
            raise ValueError(f"span {self.start}:{self.end} outside sentence")
        if self.sentence[self.start:self.end] != self.surface:
            raise ValueError("surface does not match sentence span")
        if not self.value > 0:
            raise ValueError("non-positive mention value")

    @property
    def span(self) -> tuple[int, int]:
        return self.start, self.end

    def to_record(self) -> dict:
        return {
            "sentence": self.sentence,
            "start": self.start,
            "end": self.end,
            "surface": self.surface,
            "value": self.value,
            "unit": to_string(self.unit),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Mention":
        return cls(
            sentence=rec["sentence"],
            start=int(rec["start"]),
            end=int(rec["end"]),
            surface=rec["surface"],
            value=float(rec["value"]),
            unit=parse_unit(rec["unit"]),
        )


def _lexeme_alt(lexemes):
    # longest first so "square feet" beats "feet"
    return "|".join(re.escape(x).replace(r"\ ", r"\s+") for x in sorted(lexemes, key=len, reverse=True))


class MentionExtractor:
    """Compiled patterns for one surface table.

    Two shapes are recognised: ``NUMBER MAGNITUDE? UNIT`` and
    ``CURRENCY NUMBER MAGNITUDE?``.  Currency symbols are lexemes that end in a
    non-alphanumeric character ("$", "US$").
    """

    def __init__(self, table: SurfaceTable):
        self.table = table
        symbols = [x for x in table.lexemes if not x[-1].isalnum()]
        words = [x for x in table.lexemes if x[-1].isalnum()]
        num = rf"(?<![\w.,])(?P<num>{_NUMBER})(?![\d,]*\d)"
        mag = rf"(?:\s+(?P<mag>{_MAGNITUDE})\b)?"
        self.suffix = re.compile(
            rf"{num}{mag}\s*-?\s*(?P<unit>{_lexeme_alt(words)})(?![A-Za-z])", re.IGNORECASE
        ) if words else None
        self.prefix = re.compile(
            rf"(?<![A-Za-z])(?P<unit>{_lexeme_alt(symbols)})\s?(?P<num>{_NUMBER})(?![\d,]*\d){mag}",
            re.IGNORECASE,
        ) if symbols else None

    def _candidates(self, text):
        for pattern in (self.suffix, self.prefix):
            if pattern is None:
                continue
            for m in pattern.finditer(text):
                yield m

    def extract(self, text: str) -> list[Mention]:
        found = []
        for m in self._candidates(text):
            value = float(m.group("num").replace(",", ""))
            if value <= 0:
                continue
            unit_text = re.sub(r"\s+", " ", m.group("unit"))
            base, unit = normalize_quantity(value, m.group("mag"), unit_text, self.table)
            found.append((m.start(), -(m.end() - m.start()), m.end(), base, unit))
        found.sort()
        mentions = []
        last_end = -1
        for start, _, end, base, unit in found:
            if start < last_end:
                continue
            mentions.append(Mention(text, start, end, text[start:end], base, unit))
            last_end = end
        return mentions


def extract_mentions(text: str, table: SurfaceTable) -> list[Mention]:
    """Left-to-right, non-overlapping mentions; leftmost-longest match wins."""
    return MentionExtractor(table).extract(text)


def outside_band(mention: Mention, lo: float = 0.1, hi: float = 20.0) -> bool:
    """Keep mentions whose value is below ``lo`` or above ``hi``."""
    return mention.value < lo or mention.value > hi


def magnitude_bin(value: float, bins=DEFAULT_BINS) -> int:
    return bisect.bisect_right(bins, value)


def stratified_sample(
    mentions: list[Mention],
    bins=DEFAULT_BINS,
    per_bin: int | float = 200,
    seed: int = 0,
) -> list[Mention]:
    """Sample up to ``per_bin`` mentions per (unit, magnitude bin) cell.

    Output keeps input order, so ``per_bin=inf`` returns the input unchanged.
    """
    bins = list(bins)
    if any(b <= a for a, b in zip(bins, bins[1:])):
        raise ValueError("bin boundaries must be strictly increasing")
    cells = defaultdict(list)
    for i, m in enumerate(mentions):
        cells[(to_string(m.unit), magnitude_bin(m.value, bins))].append(i)
    rng = random.Random(seed)
    keep = []
    for key in sorted(cells):
        idx = cells[key]
        if len(idx) <= per_bin:
            keep.extend(idx)
        else:
            keep.extend(rng.sample(idx, int(per_bin)))
    return [mentions[i] for i in sorted(keep)]


def read_mentions(path) -> list[Mention]:
    with open(path) as fh:
        return [Mention.from_record(json.loads(line)) for line in fh if line.strip()]
