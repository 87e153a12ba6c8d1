"""Command-line entry points.

Exit codes: 0 success, 2 usage error, 3 data/validation error, 4 empty result
(no mention in the sentence, or no formula for the mention's unit).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import plotting
from .embed import load_vectors
from .formula import (
    EnumerationConfig,
    Formula,
    closest_tuple_baseline,
    enumerate_formulas,
    enumerate_grid,
)
from .kb import KBError, load_kb
from .mention import Mention, extract_mentions, outside_band, read_mentions, stratified_sample
from .ranker import (
    DEFAULT_ABLATIONS,
    RankerError,
    RankModel,
    TrainConfig,
    cross_validate,
    featurize,
    paired_bootstrap,
    parse_groups,
    read_examples,
    score_formulas,
    train,
    write_examples,
)
from .textgen import bleu, read_pairs, realize_baseline, split_by_skeleton
from .units import UnitError, load_surface_table, parse_unit

log = logging.getLogger("perspectives")

EXIT_DATA = 3
EXIT_EMPTY = 4


class EmptyResult(Exception):
    pass


class DataError(Exception):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    kb_path: Path | None = None
    vectors_path: Path | None = None
    model_path: Path | None = None
    surface_table_path: Path | None = None
    max_tuples: int = 4
    prune: bool = True
    lo: float = 0.01
    hi: float = 100.0
    top_k: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.top_k < 1:
            raise DataError("--top must be >= 1")
        for p in (self.kb_path, self.vectors_path, self.model_path, self.surface_table_path):
            if p is not None and not Path(p).is_file():
                raise DataError(f"no such file: {p}")

    @classmethod
    def from_args(cls, args) -> "PipelineConfig":
        return cls(
            kb_path=getattr(args, "kb", None),
            vectors_path=getattr(args, "vectors", None),
            model_path=getattr(args, "model", None),
            surface_table_path=getattr(args, "units", None),
            max_tuples=getattr(args, "max_tuples", 4),
            prune=not getattr(args, "no_prune", False),
            lo=getattr(args, "lo", 0.01),
            hi=getattr(args, "hi", 100.0),
            top_k=getattr(args, "top", 3),
            seed=getattr(args, "seed", 0),
        )

    @property
    def enumeration(self) -> EnumerationConfig:
        return EnumerationConfig(self.max_tuples, self.prune, self.lo, self.hi)


class Resources:
    """Lazily loaded KB, surface table, vectors and model for one invocation."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.table = load_surface_table(config.surface_table_path)
        self.kb = load_kb(config.kb_path, self.table)
        self.store = load_vectors(config.vectors_path) if config.vectors_path else None
        self.model = RankModel.load(config.model_path) if config.model_path else default_model()


def default_model() -> RankModel:
    """Untrained fallback: prefer multipliers close to one."""
    return RankModel({"prox:mag": -1.0}, 0.0, 0.0, frozenset("P"), {"untrained": True})


def _pick_mention(sentence: str, res: Resources, span: str | None) -> Mention:
    mentions = extract_mentions(sentence, res.table)
    if not mentions:
        raise EmptyResult("no mention found in sentence")
    if span is None:
        return mentions[0]
    start, end = (int(x) for x in span.split(":"))
    for m in mentions:
        if m.start <= start and end <= m.end:
            return m
    raise EmptyResult(f"no mention at span {span}")


def run_perspective(sentence: str, config: PipelineConfig, span: str | None = None) -> list[dict]:
    res = Resources(config)
    mention = _pick_mention(sentence, res, span)
    formulas = enumerate_formulas(res.kb, mention, config.enumeration)
    if not formulas:
        raise EmptyResult(f"no formula for unit {mention.unit} near {mention.value:g} in the knowledge base")
    scored = score_formulas(res.model, mention, formulas, res.kb, res.store, top=config.top_k)
    return [
        {
            "mention": mention.to_record(),
            "formula": f.to_record(),
            "score": score,
            "text": realize_baseline(f, res.kb).text,
        }
        for f, score in scored
    ]


def run_baseline(sentence: str, config: PipelineConfig, span: str | None = None) -> dict:
    res = Resources(config)
    mention = _pick_mention(sentence, res, span)
    f = closest_tuple_baseline(res.kb, mention)
    if f is None:
        raise EmptyResult(f"no formula for unit {mention.unit} in the knowledge base")
    return {"mention": mention.to_record(), "formula": f.to_record(), "text": realize_baseline(f, res.kb).text}


def _train_config(args) -> TrainConfig:
    return TrainConfig(l2=args.l2, step=args.step, epochs=args.epochs, tol=args.tol, seed=args.seed)


def run_eval_selection(data_path, config: PipelineConfig, ablations, train_config: TrainConfig, folds=10,
                       resamples=10_000, report_dir=None, macro=False) -> str:
    res = Resources(config)
    try:
        examples = read_examples(data_path)
    except (RankerError, ValueError) as exc:
        raise DataError(f"{data_path}: {exc}") from exc
    feats = [featurize(ex.mention, ex.formula, res.kb, res.store) for ex in examples]
    gold = [ex.useful for ex in examples]
    results = cross_validate(feats, gold, folds, ablations, train_config, config.seed)
    names = list(results)
    lines = ["ablation\tprecision\trecall\tf1\tp_vs_first\tp_vs_prev"]
    for i, name in enumerate(names):
        r = results[name]
        m = r.macro() if macro else r.metrics
        cells = [name, f"{m.precision:.4f}", f"{m.recall:.4f}", f"{m.f1:.4f}"]
        for other in (names[0], names[i - 1] if i else None):
            if other is None or other == name:
                cells.append("-")
            else:
                p = paired_bootstrap(gold, r.predictions, results[other].predictions,
                                     resamples=resamples, seed=config.seed)
                cells.append(f"{p:.4f}")
        lines.append("\t".join(cells))
    table = "\n".join(lines) + "\n"
    if report_dir is not None:
        out = Path(report_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "selection.tsv").write_text(table)
        plotting.ablation_figure(results, out / "selection_ablation.png")
        plotting.usefulness_by_length(examples, out / "usefulness_by_length.png")
    return table


def run_eval_generation(pairs_path, config: PipelineConfig, test_fraction=0.2) -> str:
    res = Resources(config)
    try:
        pairs = read_pairs(pairs_path)
    except (KeyError, ValueError) as exc:
        raise DataError(f"{pairs_path}: {exc}") from exc
    train_pairs, test_pairs = split_by_skeleton(pairs, test_fraction, config.seed)
    # all references of a formula count, keyed on the exact formula record
    refs: dict[str, list[str]] = {}
    for p in test_pairs:
        refs.setdefault(json.dumps(p.formula.to_record(), sort_keys=True), []).append(p.reference)
    keys = sorted(refs)
    hyps = [realize_baseline(Formula.from_record(json.loads(k)), res.kb).text for k in keys]
    score = bleu([refs[k] for k in keys], hyps)
    rows = [
        ("train_pairs", len(train_pairs)),
        ("test_pairs", len(test_pairs)),
        ("test_formulas", len(keys)),
        ("bleu", f"{score:.4f}"),
    ]
    return "".join(f"{k}\t{v}\n" for k, v in rows)


def run_harvest(corpus_path, config: PipelineConfig, per_bin=200, band=False, report_dir=None) -> list[Mention]:
    table = load_surface_table(config.surface_table_path)
    try:
        lines = Path(corpus_path).read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read corpus: {exc}") from exc
    mentions = [m for line in lines for m in extract_mentions(line, table)]
    if band:
        mentions = [m for m in mentions if outside_band(m)]
    sample = stratified_sample(mentions, per_bin=per_bin, seed=config.seed)
    if report_dir is not None:
        plotting.mention_histogram(sample, Path(report_dir) / "mentions_histogram.png")
    return sample


def _emit(records, out):
    for rec in records:
        out.write(json.dumps(rec) + "\n")


def _add_common(p, kb=True, model=False):
    if kb:
        p.add_argument("--kb", type=Path, help="knowledge base JSONL (default: packaged mini-KB)")
    p.add_argument("--units", type=Path, help="surface-unit table JSONL")
    p.add_argument("--vectors", type=Path, help="word vectors in textual word2vec format")
    p.add_argument("--seed", type=int, default=0)
    if model:
        p.add_argument("--model", type=Path, help="model JSON written by `train`")


def _add_enum(p):
    p.add_argument("--max-tuples", type=int, default=4)
    p.add_argument("--no-prune", action="store_true")
    p.add_argument("--lo", type=float, default=0.01)
    p.add_argument("--hi", type=float, default=100.0)


def _add_train(p):
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-6)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perspectives", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("perspective", help="rank formulas for the first mention and realize the top ones")
    p.add_argument("sentence")
    p.add_argument("--span", help="START:END character span selecting the mention")
    p.add_argument("--top", type=int, default=3)
    p.add_argument("--baseline", action="store_true", help="use the closest-tuple baseline instead")
    _add_common(p, model=True)
    _add_enum(p)

    p = sub.add_parser("baseline", help="closest-tuple perspective")
    p.add_argument("sentence")
    p.add_argument("--span")
    _add_common(p)

    p = sub.add_parser("eval-selection", help="cross-validated ablations with bootstrap p-values (TSV)")
    p.add_argument("data", type=Path, help="labeled-example JSONL")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--ablate", default=",".join(a.replace("+", "") for a in DEFAULT_ABLATIONS),
                   help="comma-separated group sets, e.g. P,PS,PF,PFC,PFCS")
    p.add_argument("--resamples", type=int, default=10_000)
    p.add_argument("--report", type=Path, help="directory for the TSV table and figures")
    p.add_argument("--macro", action="store_true", help="average P/R/F1 over folds instead of pooling")
    _add_common(p)
    _add_train(p)

    p = sub.add_parser("eval-generation", help="BLEU of the rule-based realizer on a skeleton-disjoint split")
    p.add_argument("pairs", type=Path, help="description-pair JSONL")
    p.add_argument("--test-fraction", type=float, default=0.2)
    _add_common(p)

    p = sub.add_parser("harvest", help="extract and stratify mentions from a one-sentence-per-line corpus")
    p.add_argument("corpus", type=Path)
    p.add_argument("--per-bin", type=int, default=200)
    p.add_argument("--band-filter", action="store_true", help="keep only values < 0.1 or > 20")
    p.add_argument("--report", type=Path, help="directory for the mention histogram")
    _add_common(p, kb=False)

    p = sub.add_parser("kb", help="knowledge-base utilities")
    kb_sub = p.add_subparsers(dest="kb_command", required=True)
    q = kb_sub.add_parser("validate")
    q.add_argument("path", type=Path)
    q.add_argument("--units", type=Path)

    p = sub.add_parser("enumerate", help="formulas for a unit and value (or a value grid)")
    p.add_argument("--unit", required=True, action="append", help="target unit, e.g. money; repeatable")
    p.add_argument("--value", type=float, action="append", help="target value in base units; repeatable")
    _add_common(p)
    _add_enum(p)

    p = sub.add_parser("train", help="fit the ranking model on labeled examples")
    p.add_argument("data", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--groups", default="PFCS")
    _add_common(p)
    _add_train(p)

    p = sub.add_parser("generate", help="realize formulas from JSONL with the rule-based realizer")
    p.add_argument("formulas", type=Path)
    _add_common(p)

    p = sub.add_parser("synth", help="write a planted-preference dataset (KB, vectors, labeled examples)")
    p.add_argument("outdir", type=Path)
    p.add_argument("--examples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _dispatch(args, out) -> int:
    cmd = args.command
    if cmd == "perspective":
        config = PipelineConfig.from_args(args)
        if args.baseline:
            _emit([run_baseline(args.sentence, config, args.span)], out)
        else:
            _emit(run_perspective(args.sentence, config, args.span), out)
    elif cmd == "baseline":
        _emit([run_baseline(args.sentence, PipelineConfig.from_args(args), args.span)], out)
    elif cmd == "eval-selection":
        ablations = [parse_groups(a) for a in args.ablate.split(",")]
        out.write(run_eval_selection(args.data, PipelineConfig.from_args(args), ablations,
                                     _train_config(args), args.folds, args.resamples, args.report, args.macro))
    elif cmd == "eval-generation":
        out.write(run_eval_generation(args.pairs, PipelineConfig.from_args(args), args.test_fraction))
    elif cmd == "harvest":
        mentions = run_harvest(args.corpus, PipelineConfig.from_args(args), args.per_bin,
                               args.band_filter, args.report)
        _emit([m.to_record() for m in mentions], out)
    elif cmd == "kb":
        kb = load_kb(args.path, load_surface_table(args.units))
        out.write(f"ok\t{len(kb)} tuples\t{len(kb.units)} units\n")
    elif cmd == "enumerate":
        config = PipelineConfig.from_args(args)
        res = Resources(config)
        units = [parse_unit(u) for u in args.unit]
        kwargs = {"values": args.value} if args.value else {}
        formulas = enumerate_grid(res.kb, units, config=config.enumeration, **kwargs)
        if not formulas:
            raise EmptyResult("no formulas")
        _emit([f.to_record() for f in formulas], out)
    elif cmd == "train":
        res = Resources(PipelineConfig.from_args(args))
        examples = read_examples(args.data)
        groups = parse_groups(args.groups)
        feats = [featurize(ex.mention, ex.formula, res.kb, res.store, groups) for ex in examples]
        model = train(feats, [ex.useful for ex in examples], _train_config(args), groups)
        model.save(args.out)
        out.write(f"wrote {args.out}\t{len(model.weights)} weights\n")
    elif cmd == "generate":
        res = Resources(PipelineConfig.from_args(args))
        with open(args.formulas) as fh:
            formulas = [Formula.from_record(json.loads(line)) for line in fh if line.strip()]
        _emit([{"formula": f.to_record(), "text": realize_baseline(f, res.kb).text} for f in formulas], out)
    elif cmd == "synth":
        write_synthetic(args.outdir, args.examples, args.seed)
        out.write(f"wrote {args.outdir}\n")
    return 0


def write_synthetic(outdir, n_examples=2000, seed=0) -> None:
    from .embed import dump_vectors
    from .kb import dump_kb
    from .synth import planted_dataset

    data = planted_dataset(n_examples, seed)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    dump_kb(data.kb, outdir / "kb.jsonl")
    dump_vectors(data.store, outdir / "vectors.txt")
    write_examples(data.examples, outdir / "examples.jsonl")


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _dispatch(args, out)
    except EmptyResult as exc:
        print(f"perspectives: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (DataError, KBError, UnitError, RankerError, ValueError, KeyError, OSError) as exc:
        print(f"perspectives: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
