import json
import math

import pytest

import ctxprobe


def test_tokenize_and_assemble():
    assert ctxprobe.tokenize("Paris, France.") == ["Paris", ",", "France", "."]
    q = ["The", "capital", "of", "France", "is", "[MASK]", "."]
    c = ["Paris", "is", "the", "capital", "."]
    out = ctxprobe.assemble(q, c, "two_segment")
    assert out["mask_index"] == 6
    assert out["segment_ids"] == [0] * 9 + [1] * 6
    with pytest.raises(ValueError):
        ctxprobe.assemble(["a"], [], "two_segment")


def test_index_round_trip(tmp_path):
    paragraphs = [
        ("p1", "Dante was born in Florence."),
        ("p2", "Rome is a large city."),
        ("p3", "The river flows north."),
    ]
    idx = ctxprobe.TfidfIndex.build(paragraphs)
    assert len(idx) == 3
    hits = idx.query("Where was Dante born?", 2)
    assert hits[0][0] == "p1"
    idx.save(tmp_path / "c.idx")
    assert ctxprobe.TfidfIndex.load(tmp_path / "c.idx").query("Where was Dante born?", 2) == hits


def test_mock_scoring():
    assert ctxprobe.mock_nsp("Allan Sandage works in the field of [MASK] .",
                             "Allan Sandage was an astronomer.") == pytest.approx(0.4)
    p = ctxprobe.score("[MASK] paris", "paris", ["london", "paris", "rome"])
    assert math.exp(p["candidate_logprobs"][1]) == pytest.approx(0.9 + 0.1 / 3)
    assert p["argmax"] == "paris"
    u = ctxprobe.score("x [MASK]", None, ["london", "paris", "rome"], scorer="uniform")
    assert u["nsp_prob"] is None
    assert u["candidate_logprobs"] == [pytest.approx(math.log(1 / 3))] * 3


def test_statistics():
    avg = ctxprobe.weighted_average({"GoogleRE": 10.5, "TREx": 32.3, "SQuAD": 17.4})
    assert avg == pytest.approx(30.5, abs=0.05)
    a = {f"r{i}": 1.0 for i in range(10)}
    b = {f"r{i}": 0.0 for i in range(10)}
    assert ctxprobe.sign_test(a, b)["p_value"] == pytest.approx(0.001953125, abs=1e-12)
    with pytest.raises(ValueError):
        ctxprobe.weighted_average({"TREx": 1.0})


def test_run_synthetic_probe(tmp_path):
    probe = tmp_path / "probe"
    ctxprobe.write_synthetic_probe(probe)
    out = tmp_path / "out"
    code = ctxprobe.run(probe / "run_config.json", [f"out={out}", "strategies=none,oracle"])
    assert code == 0
    assert ctxprobe.precision_at_1(out / "predictions.oracle.jsonl")["overall"] == 100.0
    expected = json.loads((probe / "expected.json").read_text())
    assert ctxprobe.precision_at_1(out / "predictions.none.jsonl")["overall"] == expected["p1"]["none"]
    assert ctxprobe.run(probe / "run_config.json", [f"out={out}", "index=missing.idx"]) == 2
