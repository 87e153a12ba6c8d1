"""Planted-preference data: a synthetic KB whose usefulness labels come from a hidden linear model.

Used to exercise the ranker end to end where the crowdsourced preference data
is not available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .embed import WordVectorStore, default_stopwords
from .formula import EnumerationConfig, closest_tuple_baseline, enumerate_formulas
from .kb import KnowledgeBase, NumericTuple, build_unit_graph
from .mention import Mention
from .ranker import LabeledExample, featurize, predict, train, TrainConfig
from .units import Unit

# (unit, how many tuples, log10 value range in base units)
_LAYOUT = [
    (Unit.of("money", per=("person", "time")), 4, (-4, -2)),
    (Unit.of("money", per=("area",)), 2, (2, 4)),
    (Unit.of("money", per=("person",)), 2, (3, 5)),
    (Unit.of("money"), 5, (4, 10)),
    (Unit.of("person"), 8, (0, 9.5)),
    (Unit.of("time"), 6, (2, 9)),
    (Unit.of("area"), 3, (2, 6)),
    (Unit.of("person", per=("time",)), 2, (-3, 0)),
]

_VOCAB = [f"w{i}" for i in range(60)]


@dataclass
class PlantedData:
    kb: KnowledgeBase
    store: WordVectorStore
    mentions: list[Mention]
    examples: list[LabeledExample]
    mention_of: list[int]
    hidden: dict[str, float]
    hidden_bias: float


def planted_kb(rng: np.random.Generator) -> KnowledgeBase:
    tuples = []
    for unit, count, (lo, hi) in _LAYOUT:
        for _ in range(count):
            i = len(tuples)
            words = " ".join(rng.choice(_VOCAB, size=3, replace=False))
            value = 10 ** rng.uniform(lo, hi)
            tuples.append(NumericTuple(f"t{i:02d}", f"the {words} fact {i}", float(value), unit))
    return KnowledgeBase(tuple(tuples))


def planted_store(rng: np.random.Generator, dim: int = 8) -> WordVectorStore:
    vecs = {w: rng.normal(size=dim) / math.sqrt(dim) for w in _VOCAB}
    return WordVectorStore(dim, vecs, default_stopwords())


def hidden_weights(kb: KnowledgeBase, rng: np.random.Generator, strength: float = 2.5) -> dict[str, float]:
    """Strong familiarity/compatibility weights, weak proximity, no similarity."""
    w = {"prox:mag": -0.5, "prox:sign": 0.0, "sim": 0.0}
    ids = [t.id for t in kb]
    for tid in ids:
        w[f"fam:{tid}"] = float(rng.normal(0.0, strength))
    for a in ids:
        for b in ids:
            if a < b:
                w[f"compat:{a}|{b}"] = float(rng.normal(0.0, strength))
    return w


def planted_dataset(
    n_examples: int = 2000,
    seed: int = 0,
    per_mention: int = 8,
    strength: float = 2.5,
    bias: float = -0.5,
) -> PlantedData:
    rng = np.random.default_rng(seed)
    kb = planted_kb(rng)
    store = planted_store(rng)
    hidden = hidden_weights(kb, rng, strength)
    graph = build_unit_graph(kb)
    targets = [Unit.of("money"), Unit.of("person")]
    ranges = {Unit.of("money"): (4, 11), Unit.of("person"): (1, 9)}

    mentions, examples, mention_of = [], [], []
    while len(examples) < n_examples:
        unit = targets[int(rng.integers(len(targets)))]
        value = float(10 ** rng.uniform(*ranges[unit]))
        words = " ".join(rng.choice(_VOCAB, size=6))
        sentence = f"Reports put the {words} total at {value:.4g} units."
        start = sentence.index(f"{value:.4g}")
        surface = sentence[start : start + len(f"{value:.4g}")]
        mention = Mention(sentence, start, start + len(surface), surface, value, unit)
        cands = enumerate_formulas(kb, mention, EnumerationConfig(), graph)
        base = closest_tuple_baseline(kb, mention)
        if len(cands) < 2 or base is None:
            continue
        room = n_examples - len(examples)
        pick = rng.choice(len(cands), size=min(per_mention, len(cands), room), replace=False)
        chosen = [cands[i] for i in sorted(pick)]
        if base.tuple_ids not in {f.tuple_ids for f in chosen}:
            # the baseline's pick must be labeled too; it may replace a sampled candidate
            chosen = chosen[: room - 1] + [base]
        mi = len(mentions)
        mentions.append(mention)
        for f in chosen:
            fv = featurize(mention, f, kb, store)
            z = bias + sum(hidden.get(k, 0.0) * v for k, v in fv.items())
            useful = bool(rng.random() < 1.0 / (1.0 + math.exp(-z)))
            examples.append(LabeledExample(mention, f, useful))
            mention_of.append(mi)
    return PlantedData(kb, store, mentions, examples, mention_of, hidden, bias)


def top1_comparison(data: PlantedData, config: TrainConfig = TrainConfig(), seed: int = 0, folds: int = 2):
    """Top-1 usefulness of the trained ranker vs the closest-tuple baseline.

    Mentions are split into folds; the ranker is trained on the other folds'
    examples and picks one formula per held-out mention among its labeled
    candidates.  Returns ``(ranker_accuracy, baseline_accuracy)``.
    """
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(data.mentions))
    fold_of = {int(m): j % folds for j, m in enumerate(order)}
    feats = [featurize(ex.mention, ex.formula, data.kb, data.store) for ex in data.examples]
    by_mention: dict[int, list[int]] = {}
    for i, m in enumerate(data.mention_of):
        by_mention.setdefault(m, []).append(i)
    hits_rank = hits_base = total = 0
    for fold in range(folds):
        tr = [i for i, m in enumerate(data.mention_of) if fold_of[m] != fold]
        model = train([feats[i] for i in tr], [data.examples[i].useful for i in tr], config)
        for m, idx in by_mention.items():
            if fold_of[m] != fold:
                continue
            best = min(idx, key=lambda i: (-predict(model, feats[i]), data.examples[i].formula.tuple_ids))
            base = closest_tuple_baseline(data.kb, data.mentions[m])
            base_i = next(i for i in idx if data.examples[i].formula.tuple_ids == base.tuple_ids)
            hits_rank += data.examples[best].useful
            hits_base += data.examples[base_i].useful
            total += 1
    return hits_rank / total, hits_base / total
