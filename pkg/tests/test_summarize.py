import json
import random

import pytest

from litkit.summarize import (
    ChatEndpointConfig,
    ChunkPlan,
    EmptyTopic,
    EndpointError,
    EvaluationSheet,
    MockChatClient,
    cohens_kappa,
    comprehensiveness,
    comprehensiveness_wins,
    estimate_tokens,
    mean_comprehensiveness,
    plan_chunks,
    prompt_fingerprint,
    read_ratings_csv,
    render_evaluation_table,
    select_preferred_model,
    summarize_topic,
    write_descriptions_jsonl,
)

import oracles

# Table of published per-topic evaluation counts used as fixtures:
# (topic, docs, aligned_model1, aligned_model2)
PUBLISHED_COUNTS = [
    (1, 36, 24, 22), (2, 32, 20, 16), (3, 37, 30, 30), (4, 37, 20, 20),
    (5, 31, 14, 15), (6, 38, 21, 18), (7, 42, 18, 20), (8, 49, 28, 30),
    (9, 44, 19, 21), (10, 61, 30, 30), (11, 53, 26, 31), (12, 61, 34, 30),
]
PUBLISHED_COMPREHENSIVENESS = {
    "model1": [0.67, 0.62, 0.81, 0.54, 0.45, 0.55, 0.43, 0.57, 0.43, 0.49, 0.49, 0.56],
    "model2": [0.61, 0.50, 0.81, 0.54, 0.48, 0.47, 0.48, 0.61, 0.48, 0.49, 0.58, 0.49],
}


def sheet_with_counts(topic_id: int, docs: int, unanimous_yes: int) -> EvaluationSheet:
    """Sheet where exactly `unanimous_yes` abstracts are (yes, yes).

    The remaining disagreements alternate between (yes, no) and (no, no) so
    the sheet stays realistic but comprehensiveness depends only on counts.
    """
    ratings = {}
    for i in range(docs):
        if i < unanimous_yes:
            ratings[f"a{i}"] = (True, True)
        elif i % 2 == 0:
            ratings[f"a{i}"] = (True, False)
        else:
            ratings[f"a{i}"] = (False, False)
    return EvaluationSheet(topic_id=topic_id, ratings=ratings)


def published_sheets() -> dict[str, dict[int, EvaluationSheet]]:
    out = {"model1": {}, "model2": {}}
    for topic, docs, aligned1, aligned2 in PUBLISHED_COUNTS:
        out["model1"][topic] = sheet_with_counts(topic, docs, aligned1)
        out["model2"][topic] = sheet_with_counts(topic, docs, aligned2)
    return out


# --- chunk planning ---

def test_plan_chunks_packing():
    abstracts = [(f"a{i}", "x" * 1600) for i in range(3)]  # 400 tokens each
    plan = plan_chunks(abstracts, 1000)
    assert [len(c) for c in plan.chunks] == [2, 1]
    assert plan.chunks[0] == ["a0", "a1"]


def test_plan_chunks_budget_covers_everything():
    abstracts = [(f"a{i}", "word " * 50) for i in range(4)]
    plan = plan_chunks(abstracts, 10_000)
    assert len(plan.chunks) == 1


def test_plan_chunks_oversized_abstract_gets_own_chunk():
    abstracts = [("big", "y" * 20000), ("small", "z" * 100)]
    plan = plan_chunks(abstracts, 1000)
    assert plan.chunks[0] == ["big"]
    assert plan.oversized == ["big"]
    assert estimate_tokens("y" * 20000) == 5000


def test_plan_chunks_empty_topic():
    with pytest.raises(EmptyTopic):
        plan_chunks([], 1000)


# --- summarization with the mock client ---

def _mock_config():
    return ChatEndpointConfig(endpoint="mock", model="mock-model", retry_base_delay=0.0)


def test_mock_summarize_is_deterministic_composition(tmp_path):
    abstracts = {
        "a0": "Floods disrupt logistics. More detail here.",
        "a1": "Sensors detect rising water. Even more detail.",
        "a2": "Community alerts were effective. Trailing text.",
    }
    plan = plan_chunks([(k, abstracts[k]) for k in sorted(abstracts)], 30)
    desc1 = summarize_topic(plan, abstracts, _mock_config(), audit_dir=tmp_path / "audit")
    desc2 = summarize_topic(plan, abstracts, _mock_config())
    assert desc1.title and desc1.summary
    assert desc1.chunk_summaries == desc2.chunk_summaries
    assert (desc1.title, desc1.summary) == (desc2.title, desc2.summary)
    assert len(desc1.chunk_summaries) == len(plan.chunks)
    # chunk summaries are first sentences of each chunk's text
    assert desc1.chunk_summaries[0].startswith("Floods disrupt logistics")
    audit_files = sorted(p.name for p in (tmp_path / "audit").iterdir())
    assert audit_files == [f"topic000_chunk{i:03d}.json" for i in range(len(plan.chunks))] + \
        ["topic000_reduce.json"]


def test_single_chunk_topic_still_reduces(tmp_path):
    abstracts = {"a0": "One abstract only. Extra."}
    plan = plan_chunks([("a0", abstracts["a0"])], 10_000)
    assert len(plan.chunks) == 1
    desc = summarize_topic(plan, abstracts, _mock_config(), audit_dir=tmp_path)
    assert (tmp_path / "topic000_reduce.json").exists()
    assert desc.title


class _FlakyClient:
    def __init__(self, failures):
        self.failures = failures
        self.calls = 0

    def chat(self, messages, model=""):
        self.calls += 1
        if self.failures > 0:
            self.failures -= 1
            raise RuntimeError("transient")
        return MockChatClient().chat(messages, model)


def test_retry_twice_then_succeed(monkeypatch, tmp_path):
    client = _FlakyClient(failures=2)
    monkeypatch.setattr("litkit.summarize.make_client", lambda config: client)
    abstracts = {"a0": "Alpha beta gamma. Rest."}
    plan = plan_chunks([("a0", abstracts["a0"])], 10_000)
    desc = summarize_topic(plan, abstracts, _mock_config(), audit_dir=tmp_path)
    assert desc.summary
    # 2 failures + 1 success for the chunk, then 1 reduce call
    assert client.calls == 4
    chunk_audit = json.loads((tmp_path / "topic000_chunk000.json").read_text())
    assert chunk_audit["attempts"] == 3


def test_three_failures_abort_topic(monkeypatch):
    client = _FlakyClient(failures=99)
    monkeypatch.setattr("litkit.summarize.make_client", lambda config: client)
    plan = ChunkPlan(topic_id=5, chunks=[["a0"]], token_budget=10)
    with pytest.raises(EndpointError) as err:
        summarize_topic(plan, {"a0": "Text."}, _mock_config())
    assert err.value.chunk_index == 0


def test_fingerprint_tracks_template_changes():
    base = prompt_fingerprint("chunk {text}", "reduce {text}")
    assert base == prompt_fingerprint("chunk {text}", "reduce {text}")
    assert base != prompt_fingerprint("chunk {text}!", "reduce {text}")


def test_descriptions_jsonl(tmp_path):
    abstracts = {"a0": "Single. Extra."}
    plan = plan_chunks([("a0", abstracts["a0"])], 100)
    desc = summarize_topic(plan, abstracts, _mock_config())
    path = tmp_path / "desc.jsonl"
    write_descriptions_jsonl([desc], path)
    row = json.loads(path.read_text().splitlines()[0])
    assert row["topic_id"] == 0 and row["model_name"] == "mock-model"


# --- comprehensiveness / kappa ---

def test_comprehensiveness_published_row_topic3():
    sheet = sheet_with_counts(3, 37, 30)
    assert comprehensiveness(sheet) == pytest.approx(30 / 37)
    assert round(comprehensiveness(sheet), 2) == 0.81


def test_comprehensiveness_extremes():
    all_yes = EvaluationSheet(1, {f"a{i}": (True, True) for i in range(5)})
    assert comprehensiveness(all_yes) == 1.0
    one_rater_no = EvaluationSheet(1, {f"a{i}": (True, False) for i in range(5)})
    assert comprehensiveness(one_rater_no) == 0.0


def test_comprehensiveness_bounded_by_yes_rates():
    rng = random.Random(21)
    for _ in range(50):
        ratings = {f"a{i}": (rng.random() < 0.6, rng.random() < 0.5) for i in range(30)}
        sheet = EvaluationSheet(1, ratings)
        c = comprehensiveness(sheet)
        yes1 = sum(1 for r1, _ in ratings.values() if r1) / 30
        yes2 = sum(1 for _, r2 in ratings.values() if r2) / 30
        assert c <= min(yes1, yes2) + 1e-12


def test_kappa_hand_example():
    # 10 items, each rater 5 yes / 5 no, 8 agreements -> (0.8 - 0.5) / 0.5
    ratings = {}
    for i in range(4):
        ratings[f"y{i}"] = (True, True)
    for i in range(4):
        ratings[f"n{i}"] = (False, False)
    ratings["d1"] = (True, False)
    ratings["d2"] = (False, True)
    sheet = EvaluationSheet(1, ratings)
    assert cohens_kappa(sheet) == pytest.approx(0.6, abs=1e-12)
    assert cohens_kappa(sheet) == pytest.approx(oracles.kappa_oracle(list(ratings.values())), abs=1e-12)


def test_kappa_perfect_and_swap_invariance():
    ratings = {"a": (True, True), "b": (False, False), "c": (True, True)}
    assert cohens_kappa(EvaluationSheet(1, ratings)) == 1.0
    rng = random.Random(3)
    for _ in range(20):
        pairs = {f"a{i}": (rng.random() < 0.5, rng.random() < 0.5) for i in range(20)}
        swapped = {k: (b, a) for k, (a, b) in pairs.items()}
        k1 = cohens_kappa(EvaluationSheet(1, pairs))
        k2 = cohens_kappa(EvaluationSheet(1, swapped))
        assert k1 == pytest.approx(k2, abs=1e-12)


def test_kappa_independent_raters_near_zero():
    rng = random.Random(10)
    ratings = {f"a{i}": (rng.random() < 0.5, rng.random() < 0.5) for i in range(4000)}
    assert abs(cohens_kappa(EvaluationSheet(1, ratings))) < 0.1


def test_kappa_degenerate_marginals():
    all_yes = EvaluationSheet(1, {f"a{i}": (True, True) for i in range(5)})
    assert cohens_kappa(all_yes) == 1.0


# --- ratings CSV, reporting, model selection ---

def test_ratings_csv_round_trip(tmp_path):
    path = tmp_path / "ratings.csv"
    path.write_text(
        "model,topic_id,abstract_id,rater1,rater2\n"
        "m1,1,a0,yes,yes\n"
        "m1,1,a1,no,yes\n"
        "m2,1,a0,yes,no\n",
        encoding="utf-8",
    )
    by_model = read_ratings_csv(path)
    assert set(by_model) == {"m1", "m2"}
    assert by_model["m1"][1].ratings == {"a0": (True, True), "a1": (False, True)}


def test_published_counts_reproduce_reported_comprehensiveness():
    sheets = published_sheets()
    for model, column in PUBLISHED_COMPREHENSIVENESS.items():
        for (topic, docs, *_), want in zip(PUBLISHED_COUNTS, column):
            got = round(comprehensiveness(sheets[model][topic]), 2)
            assert got == pytest.approx(want), (model, topic)


def test_second_model_wins_more_topics_and_is_selected():
    sheets = published_sheets()
    wins1, wins2 = comprehensiveness_wins(sheets["model1"], sheets["model2"])
    assert (wins1, wins2) == (4, 5)
    assert select_preferred_model(sheets) == "model2"
    # the naive mean actually favors model1 on this data; the win-count rule
    # is what reproduces the published selection
    assert mean_comprehensiveness(sheets["model1"]) > mean_comprehensiveness(sheets["model2"])


def test_render_evaluation_table_contains_means():
    sheets = published_sheets()
    table = render_evaluation_table(sheets)
    assert "model1 compr" in table and "model2 kappa" in table
    assert f"{mean_comprehensiveness(sheets['model1']):.4f}" in table
