"""Formula features, logistic-regression ranking, cross-validation and bootstrap tests.

Feature namespaces (one per group):

* ``P`` proximity: ``prox:sign`` and ``prox:mag`` from log10 of the multiplier
* ``F`` familiarity: ``fam:<tuple id>`` indicators
* ``C`` compatibility: ``compat:<idA>|<idB>`` indicators for unordered tuple pairs
* ``S`` similarity: ``sim``, mean dot product between sentence and description vectors
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .embed import WordVectorStore, similarity, text_vector
from .formula import Formula
from .kb import KnowledgeBase
from .mention import Mention

GROUPS = "PFCS"
_PREFIX = {"prox:": "P", "fam:": "F", "compat:": "C", "sim": "S"}

FeatureVector = dict  # feature name -> nonzero real


class RankerError(ValueError):
    pass


def group_of(name: str) -> str:
    for prefix, g in _PREFIX.items():
        if name.startswith(prefix):
            return g
    raise RankerError(f"feature {name!r} outside known namespaces")


def parse_groups(groups_spec: str) -> frozenset[str]:
    groups = frozenset(groups_spec.upper().replace("+", "").replace(",", ""))
    if not groups or not groups <= set(GROUPS):
        raise RankerError(f"bad feature groups {groups_spec!r}")
    return groups


def groups_name(groups) -> str:
    return "+".join(g for g in GROUPS if g in groups)


def restrict(fv: FeatureVector, groups) -> FeatureVector:
    return {k: v for k, v in fv.items() if group_of(k) in groups}


def featurize(
    mention: Mention,
    formula: Formula,
    kb: KnowledgeBase,
    store: WordVectorStore | None = None,
    groups=GROUPS,
) -> FeatureVector:
    fv = {}
    if "P" in groups:
        lm = math.log10(formula.multiplier)
        # an exact multiplier of 1 should not pick up a sign from rounding
        sign = 0.0 if abs(lm) < 1e-12 else math.copysign(1.0, lm)
        fv["prox:sign"] = sign
        fv["prox:mag"] = abs(lm) if sign else 0.0
    if "F" in groups:
        for tid in formula.tuple_ids:
            fv[f"fam:{tid}"] = 1.0
    if "C" in groups:
        for a, b in itertools.combinations(formula.tuple_ids, 2):
            if a != b:
                lo, hi = sorted((a, b))
                fv[f"compat:{lo}|{hi}"] = 1.0
    if "S" in groups and store is not None:
        sv = text_vector(store, mention.sentence)
        sims = [similarity(sv, text_vector(store, kb[t].description)) for t in formula.tuple_ids]
        fv["sim"] = sum(sims) / len(sims)
    return {k: v for k, v in fv.items() if v != 0.0}


@dataclass(frozen=True)
class LabeledExample:
    mention: Mention
    formula: Formula
    useful: bool

    def __post_init__(self):
        if self.formula.unit != self.mention.unit:
            raise RankerError("formula unit differs from mention unit")

    def to_record(self) -> dict:
        rec = self.mention.to_record()
        rec["formula"] = self.formula.to_record()
        rec["useful"] = bool(self.useful)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "LabeledExample":
        return cls(Mention.from_record(rec), Formula.from_record(rec["formula"]), bool(rec["useful"]))


def read_examples(path) -> list[LabeledExample]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(LabeledExample.from_record(json.loads(line)))
            except (KeyError, TypeError, ValueError) as exc:
                raise RankerError(f"line {lineno}: {exc}") from exc
    return out


def write_examples(examples, path) -> None:
    with open(path, "w") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_record()) + "\n")


@dataclass(frozen=True)
class TrainConfig:
    l2: float = 1.0
    step: float = 0.1
    epochs: int = 500
    tol: float = 1e-6
    seed: int = 0


@dataclass
class RankModel:
    weights: dict[str, float]
    bias: float
    l2: float = 1.0
    groups: frozenset = frozenset(GROUPS)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.l2 < 0:
            raise RankerError("l2 must be nonnegative")

    def score(self, fv: FeatureVector) -> float:
        return self.bias + sum(self.weights.get(k, 0.0) * v for k, v in fv.items() if group_of(k) in self.groups)

    def save(self, path) -> None:
        rec = {
            "bias": self.bias,
            "weights": self.weights,
            "l2": self.l2,
            "groups": groups_name(self.groups),
            "meta": self.meta,
        }
        Path(path).write_text(json.dumps(rec, indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "RankModel":
        rec = json.loads(Path(path).read_text())
        return cls(
            weights={k: float(v) for k, v in rec["weights"].items()},
            bias=float(rec["bias"]),
            l2=float(rec.get("l2", 0.0)),
            groups=parse_groups(rec.get("groups", GROUPS)),
            meta=rec.get("meta", {}),
        )


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def vectorize(features, names=None):
    """Dense design matrix for a list of sparse feature dicts."""
    if names is None:
        names = sorted({k for fv in features for k in fv})
    col = {n: j for j, n in enumerate(names)}
    X = np.zeros((len(features), len(names)))
    for i, fv in enumerate(features):
        for k, v in fv.items():
            j = col.get(k)
            if j is not None:
                X[i, j] = v
    return X, names


def loss_and_grad(w, b, X, y, l2):
    """Objective ``(sum of logistic NLL + l2/2 * |w|^2) / n`` and its gradient.

    The bias is not regularised.
    """
    n = len(y)
    z = X @ w + b
    # log(1 + exp(z)) - y z, computed stably
    nll = np.logaddexp(0.0, z) - y * z
    loss = (nll.sum() + 0.5 * l2 * (w @ w)) / n
    r = sigmoid(z) - y
    gw = (X.T @ r + l2 * w) / n
    gb = r.sum() / n
    return loss, gw, gb


def train(
    features: list[FeatureVector],
    labels,
    config: TrainConfig = TrainConfig(),
    groups=GROUPS,
    history: list | None = None,
) -> RankModel:
    """Full-batch gradient descent from zero weights."""
    y = np.asarray(labels, dtype=float)
    if len(y) != len(features):
        raise RankerError("features and labels differ in length")
    if y.min(initial=1) == y.max(initial=0):
        raise RankerError("training data must contain both labels")
    groups = frozenset(groups)
    X, names = vectorize([restrict(fv, groups) for fv in features])
    w = np.zeros(X.shape[1])
    b = 0.0
    for epoch in range(config.epochs):
        loss, gw, gb = loss_and_grad(w, b, X, y, config.l2)
        if history is not None:
            history.append(loss)
        gmax = max(np.abs(gw).max(initial=0.0), abs(gb))
        if gmax < config.tol:
            break
        w -= config.step * gw
        b -= config.step * gb
    weights = {n: float(v) for n, v in zip(names, w) if v != 0.0}
    return RankModel(weights, float(b), config.l2, groups, {"epochs_run": epoch + 1, "n": len(y)})


def predict(model: RankModel, fv: FeatureVector) -> float:
    return float(sigmoid(model.score(fv)))


def predict_many(model: RankModel, features) -> np.ndarray:
    return np.array([predict(model, fv) for fv in features])


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float

    def as_dict(self):
        return asdict(self)


def _prf(tp, fp, fn):
    tp, fp, fn = (np.asarray(a, dtype=float) for a in (tp, fp, fn))
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
        r = np.where(tp + fn > 0, tp / (tp + fn), 0.0)
        f = np.where(p + r > 0, 2 * p * r / (p + r), 0.0)
    return p, r, f


def precision_recall_f1(gold, pred) -> Metrics:
    """Metrics for the positive class; precision is 0 when nothing is predicted positive."""
    gold = np.asarray(gold, dtype=bool)
    pred = np.asarray(pred, dtype=bool)
    tp = np.sum(gold & pred)
    fp = np.sum(~gold & pred)
    fn = np.sum(gold & ~pred)
    p, r, f = _prf(tp, fp, fn)
    return Metrics(float(p), float(r), float(f))


def stratified_folds(labels, k: int, seed: int = 0) -> list[np.ndarray]:
    labels = np.asarray(labels, dtype=bool)
    if k < 2:
        raise RankerError("k must be >= 2")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    for cls in (True, False):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < k:
            raise RankerError(f"only {len(idx)} examples with label {cls}; cannot stratify {k} folds")
        idx = rng.permutation(idx)
        for j, i in enumerate(idx):
            folds[j % k].append(int(i))
    return [np.array(sorted(f)) for f in folds]


@dataclass
class CVResult:
    groups: frozenset
    metrics: Metrics
    predictions: np.ndarray
    probabilities: np.ndarray
    fold_metrics: list = field(default_factory=list)

    @property
    def name(self):
        return groups_name(self.groups)

    def macro(self) -> Metrics:
        arr = np.array([[m.precision, m.recall, m.f1] for m in self.fold_metrics])
        return Metrics(*map(float, arr.mean(axis=0)))


DEFAULT_ABLATIONS = ("P", "P+S", "P+F", "P+F+C", "P+F+C+S")


def cross_validate(
    features: list[FeatureVector],
    labels,
    k: int = 10,
    ablations=DEFAULT_ABLATIONS,
    config: TrainConfig = TrainConfig(),
    seed: int = 0,
) -> dict[str, CVResult]:
    """Label-stratified k-fold CV per ablation; metrics are micro-pooled over folds.

    Out-of-fold predictions are kept so ablations can be compared with
    :func:`paired_bootstrap`.
    """
    y = np.asarray(labels, dtype=bool)
    folds = stratified_folds(y, k, seed)
    results = {}
    for groups_spec in ablations:
        groups = parse_groups(groups_spec) if isinstance(groups_spec, str) else frozenset(groups_spec)
        probs = np.zeros(len(y))
        fold_metrics = []
        for test in folds:
            mask = np.ones(len(y), dtype=bool)
            mask[test] = False
            train_idx = np.flatnonzero(mask)
            model = train([features[i] for i in train_idx], y[train_idx], config, groups)
            probs[test] = predict_many(model, [features[i] for i in test])
            fold_metrics.append(precision_recall_f1(y[test], probs[test] >= 0.5))
        preds = probs >= 0.5
        res = CVResult(groups, precision_recall_f1(y, preds), preds, probs, fold_metrics)
        results[res.name] = res
    return results


def score_formulas(
    model: RankModel,
    mention: Mention,
    formulas,
    kb: KnowledgeBase,
    store: WordVectorStore | None = None,
    top: int | None = None,
) -> list[tuple[Formula, float]]:
    """Formulas with their predicted probabilities, best first (ties by tuple ids)."""
    scored = [(f, predict(model, featurize(mention, f, kb, store, model.groups))) for f in formulas]
    scored.sort(key=lambda fs: (-fs[1], fs[0].tuple_ids))
    return scored[:top] if top is not None else scored


def _metric_from_counts(name, tp, fp, fn, tn):
    p, r, f = _prf(tp, fp, fn)
    if name == "f1":
        return f
    if name == "precision":
        return p
    if name == "recall":
        return r
    if name == "accuracy":
        return (tp + tn) / (tp + fp + fn + tn)
    raise RankerError(f"unknown metric {name!r}")


def _confusion_columns(gold, pred):
    return [gold & pred, ~gold & pred, gold & ~pred, ~gold & ~pred]


def paired_bootstrap(
    gold,
    preds_a,
    preds_b,
    metric: str = "f1",
    resamples: int = 10_000,
    seed: int = 0,
    chunk: int = 20_000,
) -> float:
    """One-sided paired bootstrap p-value that system A is not better than B.

    Each resample draws the evaluation items with replacement and the p-value
    is the fraction of resamples where ``metric(A) - metric(B) <= 0``.
    """
    gold = np.asarray(gold, dtype=bool)
    a = np.asarray(preds_a, dtype=bool)
    b = np.asarray(preds_b, dtype=bool)
    n = len(gold)
    if not (len(a) == len(b) == n):
        raise RankerError("length mismatch")
    if n < 2:
        raise RankerError("need at least two items")
    ca = np.stack(_confusion_columns(gold, a), axis=1).astype(float)
    cb = np.stack(_confusion_columns(gold, b), axis=1).astype(float)
    rng = np.random.default_rng(seed)
    worse = 0
    done = 0
    while done < resamples:
        m = min(chunk, resamples - done)
        counts = rng.multinomial(n, np.full(n, 1.0 / n), size=m).astype(float)
        sa = counts @ ca
        sb = counts @ cb
        diff = _metric_from_counts(metric, *sa.T) - _metric_from_counts(metric, *sb.T)
        worse += int(np.sum(diff <= 0))
        done += m
    return worse / resamples
