import numpy as np
import pytest

from litkit.embeddings import EmbeddingMatrix, hash_embed
from litkit.topicmodel import (
    TopicModelConfig,
    assign_topics,
    fit,
    read_assignment_csv,
    write_assignment_csv,
    write_topics_jsonl,
)

from conftest import gaussian_blobs


def _emb(x, prefix="d"):
    return EmbeddingMatrix([f"{prefix}{i}" for i in range(len(x))], x)


def _tokens_for(labels, pools):
    rng = np.random.default_rng(5)
    out = {}
    for i, lab in enumerate(labels):
        pool = pools[lab % len(pools)]
        out[f"d{i}"] = [pool[j % len(pool)] for j in rng.integers(0, len(pool), 25)]
    return out


POOLS = [
    [f"a{i}" for i in range(15)],
    [f"b{i}" for i in range(15)],
    [f"c{i}" for i in range(15)],
]


def test_one_stage_three_blobs(rng):
    x, truth = gaussian_blobs(rng, [40, 40, 40])
    emb = _emb(x)
    cfg = TopicModelConfig(strategy="one_stage")
    assignment, topics = fit(emb, None, _tokens_for(truth, POOLS), cfg)
    assert len(topics) == 3
    assert sorted(t.size for t in topics) == [40, 40, 40]


def test_two_stage_nested_blobs(rng):
    sub1 = rng.normal(0, 0.05, size=(20, 5))
    sub2 = rng.normal(0, 0.05, size=(15, 5))
    sub2[:, 0] += 1.0
    emb = _emb(np.vstack([sub1, sub2]))
    cfg = TopicModelConfig(stage1_min_cluster=30, stage2_min_cluster=15, strategy="two_stage")
    assignment = assign_topics(emb, cfg)
    labels = [assignment.labels[f"d{i}"] for i in range(35)]
    assert sorted(set(labels)) == [0, 1]
    assert {labels.count(0), labels.count(1)} == {20, 15}
    # both final topics trace back to the single stage-1 cluster
    assert {assignment.stage_path[f"d{i}"][0] for i in range(35)} == {0}


def test_small_blob_is_all_noise(rng):
    emb = _emb(rng.normal(0, 0.05, size=(29, 5)))
    cfg = TopicModelConfig(stage1_min_cluster=30, strategy="one_stage")
    assignment, topics = fit(emb, None, {f"d{i}": ["tok"] for i in range(29)}, cfg)
    assert topics == []
    assert set(assignment.labels.values()) == {-1}


def test_partition_sanity_and_two_stage_refinement(rng):
    x, truth = gaussian_blobs(rng, [40, 40, 40], dim=6)
    emb = _emb(x)
    cfg = TopicModelConfig(stage1_min_cluster=30, stage2_min_cluster=15,
                           strategy="two_stage")
    assignment = assign_topics(emb, cfg)
    labels = assignment.labels
    assert set(labels) == {f"d{i}" for i in range(120)}  # every record labeled once
    n_noise = sum(1 for v in labels.values() if v == -1)
    sizes = {}
    for v in labels.values():
        if v >= 0:
            sizes[v] = sizes.get(v, 0) + 1
    assert sum(sizes.values()) + n_noise == 120
    assert sorted(sizes) == list(range(len(sizes)))  # contiguous ids from 0
    for size in sizes.values():
        assert size >= cfg.stage2_min_cluster
    # every final topic is a subset of exactly one stage-1 cluster
    stage1_of_topic = {}
    for rid, final in labels.items():
        if final >= 0:
            s1 = assignment.stage_path[rid][0]
            stage1_of_topic.setdefault(final, set()).add(s1)
    for s1_set in stage1_of_topic.values():
        assert len(s1_set) == 1


def test_determinism(rng):
    x, truth = gaussian_blobs(rng, [35, 45])
    emb = _emb(x)
    sanitized = _tokens_for(truth, POOLS)
    word_emb = EmbeddingMatrix(
        [t for pool in POOLS for t in pool],
        np.random.default_rng(9).normal(size=(sum(len(p) for p in POOLS), x.shape[1])),
        kind="word",
    )
    cfg = TopicModelConfig(strategy="one_stage", seed=3)
    a1, t1 = fit(emb, word_emb, sanitized, cfg)
    a2, t2 = fit(emb, word_emb, sanitized, cfg)
    assert a1.labels == a2.labels
    assert [(t.topic_id, t.keywords) for t in t1] == [(t.topic_id, t.keywords) for t in t2]
    assert all(np.array_equal(u.centroid, v.centroid) for u, v in zip(t1, t2))


def test_raising_min_cluster_never_adds_topics(rng):
    x, _ = gaussian_blobs(rng, [30, 40, 50], dim=4)
    emb = _emb(x)
    previous = None
    for mc in (15, 25, 35, 45):
        cfg = TopicModelConfig(stage1_min_cluster=mc, stage2_min_cluster=min(mc, 15),
                               strategy="one_stage")
        assignment = assign_topics(emb, cfg)
        n = len(assignment.topic_ids())
        if previous is not None:
            assert n <= previous
        previous = n


def test_topic_invariants_and_artifacts(tmp_path, rng):
    x, truth = gaussian_blobs(rng, [40, 40])
    emb = _emb(x)
    sanitized = _tokens_for(truth, POOLS)
    cfg = TopicModelConfig(strategy="one_stage", top_k_keywords=5)
    assignment, topics = fit(emb, None, sanitized, cfg)
    for t in topics:
        assert sum(t.term_dist.values()) == pytest.approx(1.0, abs=1e-9)
        assert len({k for k, _ in t.keywords}) == len(t.keywords)
        assert abs(np.linalg.norm(t.centroid) - 1.0) < 1e-9
    write_topics_jsonl(topics, tmp_path / "topics.jsonl")
    write_assignment_csv(assignment, tmp_path / "assignment.csv")
    back = read_assignment_csv(tmp_path / "assignment.csv")
    assert back.labels == assignment.labels


def test_mismatched_keys_rejected(rng):
    emb = _emb(rng.normal(size=(30, 4)))
    with pytest.raises(KeyError):
        fit(emb, None, {"other": ["x"]}, TopicModelConfig(stage1_min_cluster=15,
                                                          stage2_min_cluster=15))


def test_config_validation():
    with pytest.raises(ValueError):
        TopicModelConfig(stage1_min_cluster=10, stage2_min_cluster=20)
    with pytest.raises(ValueError):
        TopicModelConfig(reduced_dim=1)
    with pytest.raises(ValueError):
        TopicModelConfig(strategy="three_stage")


def test_word_embedding_dim_mismatch_falls_back(rng):
    x, truth = gaussian_blobs(rng, [40, 40])
    emb = _emb(x)
    sanitized = _tokens_for(truth, POOLS)
    word_emb = hash_embed([(t, t) for pool in POOLS for t in pool], dim=64, kind="word")
    cfg = TopicModelConfig(strategy="one_stage", top_k_keywords=5)
    _, with_mismatch = fit(emb, word_emb, sanitized, cfg)
    _, without = fit(emb, None, sanitized, cfg)
    assert [t.keywords for t in with_mismatch] == [t.keywords for t in without]
