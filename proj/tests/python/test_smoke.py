import json
import os
import pathlib

import pytest

import cream

FIXTURES = pathlib.Path(os.environ.get("CREAM_FIXTURES", pathlib.Path(__file__).parents[1] / "fixtures"))


def test_prompt_goldens():
    inp = json.loads((FIXTURES / "prompts" / "type1_input.json").read_text())
    assert cream.render_compare_prompt(inp["t1"], inp["t2"]) == (FIXTURES / "prompts" / "type1.golden").read_text()
    assert cream.render_engaging_prompt(inp["t1"], True) == (FIXTURES / "prompts" / "type2_completion.golden").read_text()


def test_constant_baseline_metrics():
    gold = [i % 2 == 0 for i in range(100)]
    preds = [True] * 100
    assert cream.accuracy(preds, gold) == 0.5
    assert cream.f1_positive(preds, gold) == pytest.approx(2 / 3, abs=0)


def test_buckets():
    assert [cream.assign_bucket(v) for v in (9.9, 10, 141.3, 311.5)] == [0, 1, 3, 4]
    with pytest.raises(cream.CreamError) as info:
        cream.assign_bucket(5.0, [10.0, 5.0])
    assert cream.error_body(info.value)["code"] == "InvalidConfig"


def test_build_pairs_fixture():
    pairs = cream.build_pairs(FIXTURES / "tweets6.jsonl")
    assert sorted(p["pair_id"] for p in pairs) == ["a|b", "b|d"]


def test_train_and_predict(tmp_path):
    lines = []
    for i in range(40):
        long_text = " ".join(["growth"] * (12 + i % 5))
        short_text = "jobs now"
        label = i % 2 == 0
        t1, t2 = (long_text, short_text) if label else (short_text, long_text)
        lines.append(
            {
                "pair_id": f"p{i}a|p{i}b",
                "t1": {"id": f"p{i}a", "text": t1, "created_at": "2021-03-01T10:00:00Z",
                       "retweet_count": 200 if label else 100,
                       "topic": {"label": "Business & Entrepreneurs", "prob": 0.9}},
                "t2": {"id": f"p{i}b", "text": t2, "created_at": "2021-03-01T11:00:00Z",
                       "retweet_count": 100 if label else 200,
                       "topic": {"label": "Business & Entrepreneurs", "prob": 0.9}},
                "label": label,
                "topic": "Business & Entrepreneurs",
                "rel_diff_pct": 100.0,
                "max_created_at": "2021-03-01T11:00:00Z",
            }
        )
    pairs_path = tmp_path / "train.jsonl"
    pairs_path.write_text("".join(json.dumps(l) + "\n" for l in lines))
    model = tmp_path / "m.bin"
    acc = cream.train_model(str(pairs_path), str(model))
    assert acc >= 0.95
    assert cream.predict(str(model), "growth " * 15, "jobs now") > 0.5


def test_recorded_tournament():
    fx = FIXTURES / "recorded_compose"
    draft = (fx / "draft.txt").read_text().rstrip("\n")
    paraphrases = json.loads((fx / "paraphrases.json").read_text())["recordings"][0]["paraphrases"]
    candidates = [draft] + list(dict.fromkeys(paraphrases))
    result = cream.select_best_replay(candidates, fx / "scorer.json")
    assert result["winner"] == (fx / "expected_winner.txt").read_text().rstrip("\n")


def test_cli_usage():
    code, _, err = cream.run_cli(["bogus"])
    assert code != 0
    assert err
