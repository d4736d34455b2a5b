import json
import os
import pathlib

import pytest

import emoreason

SOURCE = pathlib.Path(os.environ.get("EMOREASON_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))
DATA = SOURCE / "tests" / "data"


def golden(name):
    return (SOURCE / "tests" / "golden" / name).read_text().removesuffix("\n")


def test_prompts_match_goldens():
    assert emoreason.render_baseline_prompt("BaselineStandard", "text") == golden("baseline_standard.txt")
    assert emoreason.render_baseline_prompt("BaselineCoT", "text") == golden("baseline_cot.txt")
    text = "I passed my driving test on the first try."
    assert emoreason.render_context_prompt(text) == golden("context_isear.txt")


def test_parse_output():
    parsed = emoreason.parse_output("They lost the match. Therefore, the final emotion label is sad.")
    assert parsed["label"] == "sad"
    assert parsed["complete"]
    assert emoreason.parse_output("nothing here") is None


def test_bertscore_hand_case():
    p, r, f1 = emoreason.bertscore([[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0]])
    assert p == pytest.approx(0.5)
    assert r == pytest.approx(1.0)
    assert f1 == pytest.approx(2 / 3)


def test_vote_and_selection():
    vote = emoreason.vote_majority([("joy", -1.0), ("fear", -0.5), ("joy", -2.0)])
    assert vote["label"] == "joy"
    assert vote["vote_count"] == 2
    groups = emoreason.select_top_k(
        [("joy", "a", True), ("joy", "b", True), ("fear", "c", True)],
        [[1, 0.5, 0], [0.5, 1, 0], [0, 0, 1]],
        k=2,
    )
    assert [g["label"] for g in groups] == ["joy", "fear"]


def test_metrics_hand_case():
    m = emoreason.compute_metrics({"1": "a", "2": "b", "3": "b", "4": "b"},
                                  {"1": "a", "2": "a", "3": "b", "4": "b"}, ["a", "b"])
    assert m["accuracy"] == pytest.approx(0.75)
    assert m["macro_f1"] == pytest.approx(11 / 15)


def test_aggregation():
    s = emoreason.aggregate_annotations([[1, 1, 1, 1, 1]] * 3 + [[2, 3, 1, 1, 1]])
    assert s["total"] == 4


def test_errors_carry_a_code():
    with pytest.raises(emoreason.EmoreasonError) as info:
        emoreason.render_baseline_prompt("EmotionQA", "x")
    assert info.value.code == "wrong-renderer"


def test_reason_toy_corpus(tmp_path):
    config = {
        "backend": f"scripted:{DATA / 'toy_script.json'}",
        "n_contexts": "3",
        "q_samples": "5",
        "cache_dir": str(tmp_path / "cache"),
    }
    code, _, err = emoreason.reason(str(DATA / "toy.jsonl"), str(tmp_path / "out.jsonl"), config, use_env=False)
    assert code == 0, err
    records = [json.loads(line) for line in (tmp_path / "out.jsonl").read_text().splitlines()]
    assert len(records) == 5
    code, out, _ = emoreason.evaluate(str(tmp_path / "out.jsonl"), str(DATA / "toy.jsonl"))
    assert code == 0
    assert "accuracy" in out
