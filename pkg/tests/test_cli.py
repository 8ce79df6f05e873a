import json
import random

import pytest

from litkit.cli import main
from litkit.demo import TOPIC_POOLS
from litkit.records import BiblioRecord, write_corpus_csv


def small_corpus(n_per_pool=40):
    rng = random.Random(3)
    pools = {k: v for k, v in list(TOPIC_POOLS.items())[:2]}
    records = []
    i = 0
    for name, pool in pools.items():
        for _ in range(n_per_pool):
            i += 1
            words = ["pandemic"] + [rng.choice(pool) for _ in range(30)]
            records.append(BiblioRecord(
                record_id=f"c{i:03d}",
                title=" ".join(rng.choice(pool) for _ in range(5)),
                abstract=" ".join(words) + ".",
                year=2021,
                doi=f"10.77/c{i:03d}",
                language="en",
            ))
    return records


@pytest.fixture
def workdir(tmp_path):
    write_corpus_csv(small_corpus(), tmp_path / "corpus.csv")
    (tmp_path / "config.toml").write_text(
        """
[run]
out_dir = "out"
seed = 11

[corpus]
inputs = [{ path = "corpus.csv", format = "csv" }]

[textprep]
bigram_min_count = 3
bigram_threshold = 5.0

[embedding]
mode = "hash"
dim = 128

[topics]
strategy = "one_stage"
stage1_min_cluster = 20
stage2_min_cluster = 10

[network]
country_threshold = 0
institution_threshold = 0
author_threshold = 0

[summarize]
top_topics = 2
token_budget = 800
endpoint = "mock"
""",
        encoding="utf-8",
    )
    return tmp_path


def test_cmd_all_produces_artifacts(workdir):
    assert main(["all", "--config", str(workdir / "config.toml")]) == 0
    out = workdir / "out"
    for name in ("corpus.csv", "prisma_report.txt", "sanitized.jsonl",
                 "doc_embeddings.tsv", "word_embeddings.tsv", "topics.jsonl",
                 "assignment.csv", "model_report.json", "report_table.txt",
                 "network_country.gexf", "rankings_author.csv",
                 "descriptions.jsonl", "manifest.json"):
        assert (out / name).exists(), name
    report = json.loads((out / "model_report.json").read_text())
    assert report["n_topics"] == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["stages"]) == {"ingest", "prep", "embed", "topics",
                                       "eval", "network", "summarize"}


def test_eval_before_topics_reports_missing_upstream(workdir, capsys):
    code = main(["eval", "--config", str(workdir / "config.toml")])
    assert code == 2
    err = capsys.readouterr().err
    assert "topics" in err


def test_rerun_skips_then_force_reruns(workdir):
    config = str(workdir / "config.toml")
    assert main(["all", "--config", config]) == 0
    assert main(["all", "--config", config]) == 0
    manifest = json.loads((workdir / "out" / "manifest.json").read_text())
    assert all(entry["skipped"] for entry in manifest["stages"].values())
    assert main(["ingest", "--config", config, "--force"]) == 0
    manifest = json.loads((workdir / "out" / "manifest.json").read_text())
    assert manifest["stages"]["ingest"]["skipped"] is False


def test_verify_detects_tampering(workdir):
    config = str(workdir / "config.toml")
    assert main(["all", "--config", config]) == 0
    assert main(["verify", "--config", config]) == 0
    target = workdir / "out" / "topics.jsonl"
    target.write_text(target.read_text() + "\n", encoding="utf-8")
    assert main(["verify", "--config", config]) == 1


def test_config_validation_errors(tmp_path, capsys):
    (tmp_path / "bad.toml").write_text(
        '[corpus]\ninputs = [{ path = "missing.csv", format = "csv" }]\n', encoding="utf-8")
    assert main(["ingest", "--config", str(tmp_path / "bad.toml")]) == 2
    assert "does not exist" in capsys.readouterr().err
