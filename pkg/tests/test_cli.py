import io
import json
import sys

import pytest

from foleq.cli import run_cli
from foleq.corpus import EvalPair, corpus_le


def run(capsys, *argv):
    code = run_cli(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# --- parse subcommand ------------------------------------------------------------

def test_parse_prints_tree_and_canonical_form(capsys):
    code, out, err = run(capsys, "parse", "forall x (P(x) -> Q(x))")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("Quantified('forall', 'x', Binary('implies'")
    assert lines[1] == "∀v1 (P(v1) → Q(v1))"


def test_parse_fully_parenthesized_mode(capsys):
    code, out, _ = run(capsys, "parse", "((A & B) | C)", "--input-mode", "fully-parenthesized")
    assert code == 0
    code, _, err = run(capsys, "parse", "(A & B | C)", "--input-mode", "fully-parenthesized")
    assert code == 2
    assert "parse error" in err


def test_parse_error_exits_2(capsys):
    code, out, err = run(capsys, "parse", "((")
    assert code == 2
    assert "parse error" in err
    assert not out


# --- usage errors -----------------------------------------------------------------

def test_unknown_flag_exits_1(capsys):
    code, _, _ = run(capsys, "score", "A", "A", "--frobnicate")
    assert code == 1


def test_missing_subcommand_exits_1(capsys):
    code, _, _ = run(capsys)
    assert code == 1


def test_unknown_subcommand_exits_1(capsys):
    code, _, _ = run(capsys, "transmogrify")
    assert code == 1


def test_help_exits_0(capsys):
    code, out, _ = run(capsys, "--help")
    assert code == 0
    assert "score" in out


def test_score_without_inputs_exits_1(capsys):
    code, _, err = run(capsys, "score")
    assert code == 1
    assert "pred-file" in err


def test_score_rejects_mixed_positional_and_file(tmp_path, capsys):
    pred = tmp_path / "p.txt"
    pred.write_text("A\n", encoding="utf-8")
    code, _, _ = run(capsys, "score", "A", "B", "--pred-file", str(pred))
    assert code == 1


# --- single-pair scoring -------------------------------------------------------------

def test_score_pair(capsys):
    code, out, _ = run(capsys, "score", "A -> B", "~A | B")
    assert code == 0
    data = json.loads(out)
    assert data["score"] == 1.0
    assert data["mode"] == "optimized"


def test_score_pair_original_mode(capsys):
    code, out, _ = run(capsys, "score", "P(a)", "Q(b)", "--mode", "original")
    assert code == 0
    assert json.loads(out)["score"] == 1.0


def test_score_unparseable_prediction_warns_and_scores_zero(capsys):
    code, out, err = run(capsys, "score", "((", "A")
    assert code == 0
    assert json.loads(out)["score"] == 0.0
    assert "unparseable prediction" in err


def test_score_unparseable_reference_is_data_error(capsys):
    code, out, err = run(capsys, "score", "A", "((")
    assert code == 2
    assert "unparseable reference" in err


def test_score_threshold_flag(capsys):
    code, out, _ = run(capsys, "score", "Pred(x)", "Predicate(x)", "--threshold", "0.4")
    assert json.loads(out)["score"] == 1.0
    code, out, _ = run(capsys, "score", "Pred(x)", "Predicate(x)")
    assert json.loads(out)["score"] == 0.5


# --- corpus scoring --------------------------------------------------------------------

FIXTURE = [
    {"id": "good", "prediction": "A ∧ B", "reference": "B ∧ A"},
    {"id": "half", "prediction": "P(a)", "reference": "P(a) ∧ Q(a)"},
    {"id": "broken", "prediction": "((", "reference": "A"},
]


def test_score_jsonl_corpus_matches_library(tmp_path, capsys):
    path = tmp_path / "pairs.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in FIXTURE) + "\n", encoding="utf-8")
    code, out, _ = run(capsys, "score", "--pred-file", str(path))
    assert code == 0
    summary = json.loads(out)
    oracle = corpus_le([EvalPair(r["id"], r["prediction"], r["reference"]) for r in FIXTURE])
    assert summary["mean_le"] == pytest.approx(oracle.mean_le)
    assert summary["bleu"] == pytest.approx(oracle.bleu)
    assert summary["pairs"] == 3
    assert summary["failures"] == 1


def test_score_corpus_out_file(tmp_path, capsys):
    path = tmp_path / "pairs.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in FIXTURE) + "\n", encoding="utf-8")
    out_path = tmp_path / "per-pair.jsonl"
    code, _, _ = run(capsys, "score", "--pred-file", str(path), "--out", str(out_path))
    assert code == 0
    rows = [json.loads(line) for line in out_path.read_text(encoding="utf-8").splitlines()]
    assert [row["id"] for row in rows] == ["good", "half", "broken"]
    assert rows[0]["score"] == 1.0
    assert rows[1]["score"] == 0.75
    assert rows[2]["score"] == 0.0 and "error" in rows[2]


def test_score_tsv_corpus(tmp_path, capsys):
    path = tmp_path / "pairs.tsv"
    path.write_text("A ∧ B\tB ∧ A\nx9\t¬¬A\tA\n", encoding="utf-8")
    code, out, _ = run(capsys, "score", "--pred-file", str(path), "--format", "tsv")
    assert code == 0
    assert json.loads(out)["mean_le"] == 1.0


def test_score_aligned_files(tmp_path, capsys):
    (tmp_path / "preds.txt").write_text("A ∧ B\n¬¬C\n", encoding="utf-8")
    (tmp_path / "refs.txt").write_text("B ∧ A\nC\n", encoding="utf-8")
    code, out, _ = run(
        capsys, "score",
        "--pred-file", str(tmp_path / "preds.txt"),
        "--ref-file", str(tmp_path / "refs.txt"),
    )
    assert code == 0
    assert json.loads(out)["mean_le"] == 1.0


def test_score_aligned_files_length_mismatch(tmp_path, capsys):
    (tmp_path / "preds.txt").write_text("A\nB\n", encoding="utf-8")
    (tmp_path / "refs.txt").write_text("A\n", encoding="utf-8")
    code, _, err = run(
        capsys, "score",
        "--pred-file", str(tmp_path / "preds.txt"),
        "--ref-file", str(tmp_path / "refs.txt"),
    )
    assert code == 2
    assert "line counts differ" in err


def test_score_missing_file_is_data_error(tmp_path, capsys):
    code, _, err = run(capsys, "score", "--pred-file", str(tmp_path / "absent.jsonl"))
    assert code == 2


def test_score_corpus_with_config_file(tmp_path, capsys):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({"threshold": 0.4, "mode": "optimized"}), encoding="utf-8")
    code, out, _ = run(capsys, "score", "Pred(x)", "Predicate(x)", "--config", str(config_path))
    assert code == 0
    assert json.loads(out)["score"] == 1.0


def test_bad_config_file_is_data_error(tmp_path, capsys):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({"volume": 11}), encoding="utf-8")
    code, _, err = run(capsys, "score", "A", "A", "--config", str(config_path))
    assert code == 2
    assert "bad config" in err


# --- serve subcommand ---------------------------------------------------------------------

def test_serve_stdio(monkeypatch, capsys):
    lines = [
        json.dumps({"id": "q1", "op": "le_score", "prediction": "A ∧ B", "reference": "B ∧ A"}),
        json.dumps({"op": "shutdown"}),
    ]
    monkeypatch.setattr(sys, "stdin", io.StringIO("\n".join(lines) + "\n"))
    code = run_cli(["serve", "--stdio"])
    out = capsys.readouterr().out
    assert code == 0
    responses = [json.loads(line) for line in out.splitlines()]
    assert responses[0]["id"] == "q1"
    assert responses[0]["score"] == 1.0


def test_serve_requires_transport(capsys):
    code, _, _ = run(capsys, "serve")
    assert code == 1


# --- train-demo subcommand -------------------------------------------------------------------

def test_train_demo_writes_trace(tmp_path, capsys):
    trace_path = tmp_path / "trace.jsonl"
    code, out, _ = run(
        capsys, "train-demo", "--iterations", "3", "--learning-rate", "0.2",
        "--trace", str(trace_path),
    )
    assert code == 0
    summary = json.loads(out)
    assert summary["iterations"] == 3
    records = [json.loads(line) for line in trace_path.read_text(encoding="utf-8").splitlines()]
    assert len(records) == 3
    assert records[0]["iter"] == 0


def test_train_demo_config_file(tmp_path, capsys):
    config_path = tmp_path / "demo.json"
    config_path.write_text(json.dumps({"iterations": 2, "seed": 3}), encoding="utf-8")
    code, out, _ = run(capsys, "train-demo", "--config", str(config_path))
    assert code == 0
    assert json.loads(out)["iterations"] == 2


def test_train_demo_rejects_unknown_config_keys(tmp_path, capsys):
    config_path = tmp_path / "demo.json"
    config_path.write_text(json.dumps({"iterations": 2, "rocket": True}), encoding="utf-8")
    code, _, err = run(capsys, "train-demo", "--config", str(config_path))
    assert code == 2
    assert "unknown keys" in err
