import csv
import io
import json

import pytest

from perspectives.cli import main
from perspectives.formula import EnumerationConfig, closest_tuple_baseline, enumerate_formulas, make_formula
from perspectives.mention import extract_mentions
from perspectives.ranker import LabeledExample, write_examples
from perspectives.textgen import DescriptionPair, realize_baseline, write_pairs

OVERVIEW = "Cristiano Ronaldo, the player who Madrid acquired for $131 million."


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def jsonl(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


@pytest.fixture
def toy_model(tmp_path, mini_kb, table):
    """Model trained on mini-KB examples where Texas-population formulas are useful."""
    examples = []
    for sentence in [OVERVIEW, "The deal was worth $2 billion.", "A fine of $40 million was paid.",
                     "Budgets reached $900 million."]:
        [m] = extract_mentions(sentence, table)
        for f in enumerate_formulas(mini_kb, m, EnumerationConfig(prune=False)):
            examples.append(LabeledExample(m, f, "texas-pop" in f.tuple_ids))
    data = tmp_path / "train.jsonl"
    write_examples(examples, data)
    model = tmp_path / "model.json"
    code, out = run("train", data, "--out", model, "--groups", "PFC")
    assert code == 0 and "wrote" in out
    return model


def test_perspective_overview(toy_model):
    code, out = run("perspective", OVERVIEW, "--model", toy_model, "--top", 50)
    assert code == 0
    recs = jsonl(out)
    assert recs[0]["score"] >= recs[-1]["score"]
    assert any(set(r["formula"]["tuples"]) == {"employee-cost", "lunch-time", "texas-pop"} for r in recs)
    top = recs[0]
    assert "texas-pop" in top["formula"]["tuples"]
    assert top["text"].endswith(".")


def test_perspective_default_model_and_top():
    code, out = run("perspective", OVERVIEW, "--top", 2)
    assert code == 0 and len(jsonl(out)) == 2


def test_perspective_no_mention():
    assert run("perspective", "nothing to see")[0] == 4


def test_perspective_no_formula():
    assert run("perspective", "She walked 3 miles.")[0] == 4


def test_perspective_span_selects_mention():
    s = "He paid $5 million for 40 million cars."
    code, out = run("perspective", s, "--span", f"{s.index('40')}:{s.index('40') + 2}", "--top", 1)
    assert code == 0
    assert jsonl(out)[0]["mention"]["surface"] == "40 million cars"


def test_missing_file_is_data_error(tmp_path):
    assert run("perspective", OVERVIEW, "--kb", tmp_path / "nope.jsonl")[0] == 3


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as err:
        main(["perspective"])
    assert err.value.code == 2


def _write_kb(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path


def test_baseline_single_tuple(tmp_path):
    kb = _write_kb(tmp_path / "kb.jsonl", [{"id": "gdp", "description": "the GDP of Iceland", "value": 2e10, "unit": "money"}])
    code, out = run("baseline", OVERVIEW, "--kb", kb)
    assert code == 0
    [rec] = jsonl(out)
    assert rec["formula"]["tuples"] == ["gdp"]
    assert rec["text"] == "1/153rd of the GDP of Iceland."


def test_baseline_matches_library(mini_kb, table):
    code, out = run("baseline", "The payroll hit $3 million.")
    [m] = extract_mentions("The payroll hit $3 million.", table)
    assert code == 0
    f = closest_tuple_baseline(mini_kb, m)
    assert jsonl(out)[0]["text"] == realize_baseline(f, mini_kb).text
    assert run("perspective", "The payroll hit $3 million.", "--baseline")[1] == out


def test_baseline_differs_from_ranker_on_crafted_kb(tmp_path):
    # the numerically closest tuple is an obscure fact the model dislikes
    kb = _write_kb(tmp_path / "kb.jsonl", [
        {"id": "obscure", "description": "the budget of a forgotten agency", "value": 1.3e8, "unit": "money"},
        {"id": "salary", "description": "the median income", "value": 50000, "unit": "money/person/year"},
        {"id": "texas", "description": "the population of Texas", "value": 2.7e7, "unit": "people"},
        {"id": "lunch", "description": "the time taken for lunch", "value": 30, "unit": "minute"},
    ])
    model = tmp_path / "m.json"
    model.write_text(json.dumps({"bias": 0, "weights": {"fam:obscure": -3.0, "fam:texas": 2.0},
                                 "l2": 0, "groups": "PF", "meta": {}}))
    _, base = run("baseline", OVERVIEW, "--kb", kb)
    _, full = run("perspective", OVERVIEW, "--kb", kb, "--model", model, "--top", 1)
    assert jsonl(base)[0]["formula"]["tuples"] == ["obscure"]
    assert jsonl(full)[0]["formula"]["tuples"] != ["obscure"]


def _perfect_examples(mini_kb, table, path):
    examples = []
    for sentence in [OVERVIEW, "Revenue hit $2 billion.", "A fine of $40 million.", "Spent $900 million.",
                     "Costs of $7 billion.", "A $60 million grant."]:
        [m] = extract_mentions(sentence, table)
        for f in enumerate_formulas(mini_kb, m, EnumerationConfig(prune=False)):
            examples.append(LabeledExample(m, f, "week" in f.tuple_ids))
    write_examples(examples, path)
    return path


def test_eval_selection_perfect_data(tmp_path, mini_kb, table):
    data = _perfect_examples(mini_kb, table, tmp_path / "ex.jsonl")
    code, out = run("eval-selection", data, "--ablate", "F,PF", "--folds", 5, "--resamples", 500,
                    "--l2", 0.01, "--step", 1.0, "--report", tmp_path / "rep")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out), delimiter="\t"))
    assert [r["ablation"] for r in rows] == ["F", "P+F"]
    assert all(float(r["f1"]) == 1.0 for r in rows)
    assert (tmp_path / "rep" / "selection_ablation.png").stat().st_size > 0
    assert (tmp_path / "rep" / "usefulness_by_length.png").exists()
    assert (tmp_path / "rep" / "selection.tsv").read_text() == out


def test_eval_selection_planted(tmp_path):
    assert run("synth", tmp_path, "--examples", 600, "--seed", 1)[0] == 0
    code, out = run("eval-selection", tmp_path / "examples.jsonl", "--kb", tmp_path / "kb.jsonl",
                    "--vectors", tmp_path / "vectors.txt", "--ablate", "P,PFC", "--resamples", 1000)
    assert code == 0
    rows = {r["ablation"]: r for r in csv.DictReader(io.StringIO(out), delimiter="\t")}
    assert float(rows["P+F+C"]["f1"]) - float(rows["P"]["f1"]) >= 0.1
    assert float(rows["P+F+C"]["p_vs_first"]) < 0.05


def test_eval_selection_macro(tmp_path):
    assert run("synth", tmp_path, "--examples", 300, "--seed", 2)[0] == 0
    args = ("eval-selection", tmp_path / "examples.jsonl", "--kb", tmp_path / "kb.jsonl",
            "--vectors", tmp_path / "vectors.txt", "--ablate", "PFC", "--folds", 5, "--resamples", 100)
    pooled = next(csv.DictReader(io.StringIO(run(*args)[1]), delimiter="\t"))
    code, out = run(*args, "--macro")
    macro = next(csv.DictReader(io.StringIO(out), delimiter="\t"))
    assert code == 0 and pooled["ablation"] == macro["ablation"] == "P+F+C"
    assert 0 <= float(macro["f1"]) <= 1
    assert macro["f1"] != pooled["f1"]


def test_eval_selection_malformed(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"sentence": "x"}\n')
    assert run("eval-selection", bad)[0] == 3


def _pairs(mini_kb, path, refs_fn):
    ids = [["employee-cost", "texas-pop", "lunch-time"], ["week"], ["day"], ["bayarea-property", "city-block"],
           ["median-income", "us-pop", "month"], ["lifetime"]]
    pairs = []
    for tids in ids:
        for m in (0.5, 3.0):
            f = make_formula(mini_kb, m, tids)
            pairs.append(DescriptionPair(f, refs_fn(f)))
    write_pairs(pairs, path)
    return pairs


def test_eval_generation_self_references(tmp_path, mini_kb):
    path = tmp_path / "pairs.jsonl"
    _pairs(mini_kb, path, lambda f: realize_baseline(f, mini_kb).text)
    code, out = run("eval-generation", path, "--test-fraction", 0.5)
    assert code == 0
    stats = dict(line.split("\t") for line in out.splitlines())
    assert float(stats["bleu"]) == 100.0
    assert run("eval-generation", path, "--test-fraction", 0.5)[1] == out


def test_eval_generation_shuffled_references(tmp_path, mini_kb):
    path = tmp_path / "pairs.jsonl"
    texts = iter(["a week for a person.", "the whole thing.", "something else entirely."] * 10)
    _pairs(mini_kb, path, lambda f: next(texts))
    code, out = run("eval-generation", path, "--test-fraction", 0.5, "--seed", 3)
    stats = dict(line.split("\t") for line in out.splitlines())
    assert code == 0 and float(stats["bleu"]) < 100.0


def test_harvest(tmp_path):
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("".join(f"The club paid ${i + 1},000,000 in fees.\n" for i in range(1000)))
    code, out = run("harvest", corpus, "--seed", 4, "--report", tmp_path / "rep")
    assert code == 0
    recs = jsonl(out)
    assert len(recs) == 200
    assert run("harvest", corpus, "--seed", 4)[1] == out
    assert (tmp_path / "rep" / "mentions_histogram.png").exists()
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    assert run("harvest", empty) == (0, "")
    assert run("harvest", tmp_path / "missing.txt")[0] == 3


def test_kb_validate(tmp_path):
    code, out = run("kb", "validate", _write_kb(tmp_path / "kb.jsonl", [
        {"id": "a", "description": "x", "value": 1, "unit": "money"}]))
    assert code == 0 and out.startswith("ok")
    bad = _write_kb(tmp_path / "bad.jsonl", [{"id": "a", "description": "x", "value": -1, "unit": "money"}])
    assert run("kb", "validate", bad)[0] == 3


def test_enumerate_and_generate(tmp_path):
    code, out = run("enumerate", "--unit", "money", "--value", 1.31e8)
    assert code == 0
    recs = jsonl(out)
    assert all(0.01 <= r["multiplier"] <= 100 for r in recs)
    path = tmp_path / "f.jsonl"
    path.write_text(out)
    code, gen = run("generate", path)
    assert code == 0
    assert [g["formula"] for g in jsonl(gen)] == recs
    assert all(g["text"].endswith(".") for g in jsonl(gen))
    assert run("enumerate", "--unit", "length", "--value", 5)[0] == 4


def test_enumerate_unpruned_superset():
    _, pruned = run("enumerate", "--unit", "money", "--value", 1.31e8)
    _, full = run("enumerate", "--unit", "money", "--value", 1.31e8, "--no-prune")
    assert len(jsonl(full)) > len(jsonl(pruned))
