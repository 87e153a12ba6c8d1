"""Rule-based perspective realization, BLEU and the skeleton-disjoint split."""

from __future__ import annotations

import json
import math
import random
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from fractions import Fraction

from .formula import Formula
from .kb import KnowledgeBase

ABOUT_TOLERANCE = 0.005


@dataclass(frozen=True)
class Perspective:
    text: str
    formula: Formula

    def __post_init__(self):
        if not self.text or not self.text.endswith("."):
            raise ValueError("perspective text must be nonempty and end with a period")


@dataclass(frozen=True)
class DescriptionPair:
    formula: Formula
    reference: str

    def __post_init__(self):
        if not self.reference.strip():
            raise ValueError("empty reference")

    def to_record(self) -> dict:
        return {"formula": self.formula.to_record(), "reference": self.reference}

    @classmethod
    def from_record(cls, rec: dict) -> "DescriptionPair":
        return cls(Formula.from_record(rec["formula"]), rec["reference"])


def read_pairs(path) -> list[DescriptionPair]:
    with open(path) as fh:
        return [DescriptionPair.from_record(json.loads(line)) for line in fh if line.strip()]


def write_pairs(pairs, path) -> None:
    with open(path, "w") as fh:
        for p in pairs:
            fh.write(json.dumps(p.to_record()) + "\n")


def ordinal_suffix(k: int) -> str:
    if k % 100 in (11, 12, 13):
        return "th"
    return {1: "st", 2: "nd", 3: "rd"}.get(k % 10, "th")


def snap_multiplier(m: float) -> tuple[Fraction, float]:
    """Nearest integer or unit fraction to ``m`` by relative error.

    Candidates are the integers and the unit fractions ``1/k``; in the
    [1/100, 100] band these are exactly the integers 1..100 and 1/2..1/100.
    """
    if not m > 0:
        raise ValueError("multiplier must be positive")
    cands = {Fraction(1)}
    if m >= 1:
        cands |= {Fraction(math.floor(m)), Fraction(math.ceil(m))}
    else:
        inv = 1 / m
        cands |= {Fraction(1, k) for k in (math.floor(inv), math.ceil(inv)) if k >= 1}
    best = min(cands, key=lambda c: (abs(m - float(c)) / float(c), c))
    return best, abs(m - float(best)) / float(best)


def render_multiplier(m: float, about_tolerance: float = ABOUT_TOLERANCE) -> str:
    """"twice", "7 times", "half", "1/5th"; "" for one; "about " when snapping is lossy."""
    c, err = snap_multiplier(m)
    if c == 1:
        word = ""
    elif c == 2:
        word = "twice"
    elif c.denominator == 1:
        word = f"{c.numerator} times"
    elif c.denominator == 2:
        word = "half"
    else:
        word = f"1/{c.denominator}{ordinal_suffix(c.denominator)}"
    if err > about_tolerance:
        return f"about {word}".rstrip()
    return word


def realize_baseline(formula: Formula, kb: KnowledgeBase) -> Perspective:
    """Join descriptions with "of" after the multiplier and "for" between tuples."""
    descs = [kb[t].description for t in formula.tuple_ids]
    phrase = render_multiplier(formula.multiplier)
    body = " for ".join(descs)
    if phrase == "about":
        text = f"about {body}"
    elif phrase:
        text = f"{phrase} of {body}"
    else:
        text = body
    return Perspective(text + ".", formula)


def split_by_skeleton(pairs, test_fraction: float = 0.2, seed: int = 0):
    """Train/test split where no tuple multiset appears on both sides."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    groups = defaultdict(list)
    for i, p in enumerate(pairs):
        groups[p.formula.skeleton].append(i)
    if len(groups) < 2:
        raise ValueError("need at least two distinct skeletons")
    keys = sorted(groups)
    random.Random(seed).shuffle(keys)
    want = test_fraction * len(pairs)
    test_idx = []
    for key in keys[:-1]:
        if test_idx and len(test_idx) >= want:
            break
        test_idx.extend(groups[key])
    test_set = set(test_idx)
    train = [p for i, p in enumerate(pairs) if i not in test_set]
    test = [p for i, p in enumerate(pairs) if i in test_set]
    return train, test


_BLEU_TOKEN = re.compile(r"\w+|[^\w\s]")


def bleu_tokenize(text: str) -> list[str]:
    return _BLEU_TOKEN.findall(text.lower())


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_stats(references, hypotheses, max_n: int = 4):
    """Clipped matches, totals, hypothesis length and effective reference length."""
    if len(references) != len(hypotheses):
        raise ValueError("references and hypotheses differ in length")
    if not hypotheses:
        raise ValueError("empty hypothesis list")
    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = ref_len = 0
    for refs, hyp in zip(references, hypotheses):
        if isinstance(refs, str):
            refs = [refs]
        if not refs:
            raise ValueError("hypothesis without references")
        h = bleu_tokenize(hyp)
        rs = [bleu_tokenize(r) for r in refs]
        hyp_len += len(h)
        ref_len += min((len(r) for r in rs), key=lambda L: (abs(L - len(h)), L))
        for n in range(1, max_n + 1):
            hc = _ngrams(h, n)
            best = Counter()
            for r in rs:
                best |= _ngrams(r, n)
            matches[n - 1] += sum(min(c, best[g]) for g, c in hc.items())
            totals[n - 1] += max(len(h) - n + 1, 0)
    return matches, totals, hyp_len, ref_len


def bleu(references, hypotheses, max_n: int = 4) -> float:
    """Corpus BLEU on a 0-100 scale with add-one smoothing for n >= 2."""
    matches, totals, c, r = bleu_stats(references, hypotheses, max_n)
    if matches[0] == 0 or totals[0] == 0:
        return 0.0
    logp = math.log(matches[0] / totals[0])
    for n in range(1, max_n):
        logp += math.log((matches[n] + 1) / (totals[n] + 1))
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return 100.0 * bp * math.exp(logp / max_n)
