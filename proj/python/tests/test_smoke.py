import json
from fractions import Fraction

import numpy as np
import pytest

import grapher


def path_graph():
    return np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)


def test_gcs_path_graph():
    result = grapher.rerank(path_graph(), [1.0, 0.0, 0.0], ids=["a", "b", "c"])
    scores = {id_: final for id_, final, _ in result["entries"]}
    assert result["converged"]
    assert scores["a"] == pytest.approx(1.0, abs=1e-10)
    assert scores["b"] == pytest.approx(float(Fraction(1, 6)), abs=1e-10)
    assert scores["c"] == pytest.approx(float(Fraction(1, 12)), abs=1e-10)


def test_ppr_path_graph_matches_numpy():
    a = path_graph()
    w = a / a.sum(axis=0, keepdims=True)
    s = np.array([1.0, 0.0, 0.0])
    expected = np.linalg.solve(np.eye(3) - 0.5 * w, 0.5 * s)
    result = grapher.rerank(a, list(s), algo="ppr")
    got = {int(i): f for i, f, _ in result["entries"]}
    assert [got[i] for i in range(3)] == pytest.approx(list(expected), abs=1e-10)
    assert sum(got.values()) == pytest.approx(1.0, abs=1e-12)


def test_oracle_and_errors():
    fixed = grapher.solve_oracle(path_graph(), [1.0, 0.0, 0.0], alpha=0.5)
    assert fixed == pytest.approx([7 / 12, 1 / 6, 1 / 12], abs=1e-12)
    with pytest.raises(grapher.GrapherError):
        grapher.rerank(path_graph(), [1.0, 0.0])
    with pytest.raises(grapher.GrapherError):
        grapher.rerank(path_graph(), [1.0, 0.0, 0.0], alpha=1.5)


def test_perfect_recall_and_tokenize():
    assert grapher.perfect_recall_at_k(["d1", "d3", "d2"], {"d1", "d2"}, 2) == 0
    assert grapher.perfect_recall_at_k(["d1", "d3", "d2"], {"d1", "d2"}, 3) == 1
    assert grapher.perfect_recall_at_k(["d1"], set(), 1) is None
    assert grapher.tokenize("Hello, World") == ["hello", "world"]


def test_conceptual_graph(tmp_path):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text(
        json.dumps({"id": "i", "content": "", "entities": ["A", "B", "C"]})
        + "\n"
        + json.dumps({"id": "j", "content": "", "entities": ["B", "C", "D", "E"]})
        + "\n"
    )
    a = grapher.build_graph(str(corpus), ["i", "j"], "conceptual")
    assert a[0, 1] == 0.5
    assert a[1, 0] == 2 / 3


def test_cli_pipeline(tmp_path):
    d = str(tmp_path)
    code, out, err = grapher.run_cli(
        ["gen-synthetic", "--pattern", "fk-triple", "--seed", "3", "--queries", "20", "--out-dir", d]
    )
    assert code == 0, err
    common = ["--corpus", f"{d}/corpus.jsonl"]
    code, _, err = grapher.run_cli(
        ["search", *common, "--queries", f"{d}/queries.jsonl", "--vectors", f"{d}/vectors.jsonl",
         "--out", f"{d}/base.jsonl"]
    )
    assert code == 0, err
    code, _, err = grapher.run_cli(["rerank", *common, "--run", f"{d}/base.jsonl", "--out", f"{d}/gcs.jsonl"])
    assert code == 0, err
    code, out, err = grapher.run_cli(
        ["eval", "--run", f"{d}/gcs.jsonl", "--qrels", f"{d}/qrels.tsv", "--csv"]
    )
    assert code == 0, err
    assert "PR@" in out or "all" in out
    code, _, err = grapher.run_cli(["eval", "--run", f"{d}/missing.jsonl", "--qrels", f"{d}/qrels.tsv"])
    assert code == 2
