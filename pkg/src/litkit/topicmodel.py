"""One- and two-stage topic extraction.

One stage: reduce dimensions, density-cluster with min cluster size n, then
c-TF-IDF term scores and blended keywords per cluster. Two stage: cluster
coarsely with n, then re-reduce and re-cluster each coarse cluster with m;
the stage-2 clusters are the final topics and stage-1 noise stays noise. A
stage-1 cluster whose re-clustering yields nothing keeps itself whole as one
topic when its size reaches m.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .ctfidf import ctfidf_scores, term_distribution
from .density import TooFewPoints, cluster_density
from .embeddings import EmbeddingMatrix
from .keywords import extract_keywords
from .reduction import project_principal

log = logging.getLogger(__name__)

STRATEGIES = ("one_stage", "two_stage")


@dataclass
class TopicModelConfig:
    stage1_min_cluster: int = 30
    stage2_min_cluster: int = 15
    reduced_dim: int = 5
    min_samples: int | None = None  # per stage: defaults to that stage's min cluster
    top_k_keywords: int = 10
    strategy: str = "one_stage"
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if not (self.stage1_min_cluster >= self.stage2_min_cluster >= 2):
            raise ValueError("need stage1_min_cluster >= stage2_min_cluster >= 2")
        if self.reduced_dim < 2:
            raise ValueError("reduced_dim must be >= 2")
        if self.top_k_keywords < 1:
            raise ValueError("top_k_keywords must be >= 1")


@dataclass
class TopicAssignment:
    """record_id -> topic id (-1 is noise); two-stage runs also keep the
    (stage-1 cluster, stage-2 cluster) path per record."""

    labels: dict[str, int]
    stage_path: dict[str, tuple[int, int]] = field(default_factory=dict)

    def topic_ids(self) -> list[int]:
        return sorted({t for t in self.labels.values() if t >= 0})

    def doc_ids(self, topic_id: int) -> list[str]:
        return [rid for rid, t in self.labels.items() if t == topic_id]


@dataclass
class Topic:
    topic_id: int
    doc_ids: list[str]
    term_dist: dict[str, float]
    keywords: list[tuple[str, float]]
    centroid: np.ndarray

    @property
    def size(self) -> int:
        return len(self.doc_ids)


def _reduce_for_clustering(vectors: np.ndarray, target_dim: int) -> np.ndarray:
    """Project when the data is wider than target_dim; otherwise keep as is."""
    n, d = vectors.shape
    if d <= target_dim or n <= target_dim:
        return vectors
    return project_principal(vectors, target_dim)


def _cluster_or_noise(vectors: np.ndarray, min_cluster: int, min_samples: int | None) -> np.ndarray:
    if vectors.shape[0] < min_cluster:
        return np.full(vectors.shape[0], -1, dtype=np.int64)
    return cluster_density(vectors, min_cluster, min_samples)


def assign_topics(doc_emb: EmbeddingMatrix, config: TopicModelConfig) -> TopicAssignment:
    """Run the clustering stage(s) and label every document."""
    ids = list(doc_emb.ids)
    reduced = _reduce_for_clustering(doc_emb.vectors, config.reduced_dim)
    n = config.stage1_min_cluster
    m = config.stage2_min_cluster

    stage1 = _cluster_or_noise(reduced, n, config.min_samples or n)
    if config.strategy == "one_stage":
        labels = {rid: int(lab) for rid, lab in zip(ids, stage1)}
        return TopicAssignment(labels=labels)

    labels: dict[str, int] = {rid: -1 for rid in ids}
    stage_path: dict[str, tuple[int, int]] = {}
    next_topic = 0
    for s1 in sorted(set(int(x) for x in stage1 if x >= 0)):
        rows = np.where(stage1 == s1)[0]
        sub_ids = [ids[i] for i in rows]
        sub_vectors = _reduce_for_clustering(doc_emb.vectors[rows], config.reduced_dim)
        try:
            sub_labels = _cluster_or_noise(sub_vectors, m, config.min_samples or m)
        except TooFewPoints:
            sub_labels = np.full(len(rows), -1, dtype=np.int64)
        found = sorted(set(int(x) for x in sub_labels if x >= 0))
        if not found:
            # nothing re-clustered: keep the coarse cluster whole if big enough
            if len(rows) >= m:
                for rid in sub_ids:
                    labels[rid] = next_topic
                    stage_path[rid] = (s1, 0)
                next_topic += 1
            else:
                for rid in sub_ids:
                    stage_path[rid] = (s1, -1)
            continue
        remap = {s2: next_topic + k for k, s2 in enumerate(found)}
        next_topic += len(found)
        for rid, s2 in zip(sub_ids, sub_labels):
            s2 = int(s2)
            stage_path[rid] = (s1, s2)
            if s2 >= 0:
                labels[rid] = remap[s2]
    return TopicAssignment(labels=labels, stage_path=stage_path)


def build_topics(
    assignment: TopicAssignment,
    doc_emb: EmbeddingMatrix,
    word_emb: EmbeddingMatrix | None,
    sanitized: dict[str, list[str]],
    top_k: int = 10,
) -> list[Topic]:
    """Compute term distributions, keywords, and centroids for each topic."""
    topic_ids = assignment.topic_ids()
    if not topic_ids:
        return []
    classes = {t: [sanitized[rid] for rid in assignment.doc_ids(t)] for t in topic_ids}
    scores = ctfidf_scores(classes)
    topics = []
    for t in topic_ids:
        doc_ids = assignment.doc_ids(t)
        rows = np.stack([doc_emb.row(rid) for rid in doc_ids])
        centroid = rows.mean(axis=0)
        norm = float(np.linalg.norm(centroid))
        if norm > 0.0:
            centroid = centroid / norm
        else:
            log.warning("topic %d centroid is zero; keyword blend falls back to c-TF-IDF", t)
        dist = term_distribution(scores[t])
        kw = extract_keywords(scores[t], centroid if norm > 0 else None, word_emb, top_k)
        if len(kw) < top_k:
            log.warning("topic %d has only %d distinct terms for %d keywords", t, len(kw), top_k)
        topics.append(Topic(topic_id=t, doc_ids=doc_ids, term_dist=dist, keywords=kw,
                            centroid=centroid))
    return topics


def fit(
    doc_emb: EmbeddingMatrix,
    word_emb: EmbeddingMatrix | None,
    sanitized: dict[str, list[str]],
    config: TopicModelConfig,
) -> tuple[TopicAssignment, list[Topic]]:
    """Full topic extraction over documents keyed by record_id."""
    missing = [rid for rid in doc_emb.ids if rid not in sanitized]
    if missing:
        raise KeyError(f"sanitized corpus missing {len(missing)} record ids: {missing[:3]}")
    assignment = assign_topics(doc_emb, config)
    topics = build_topics(assignment, doc_emb, word_emb, sanitized, config.top_k_keywords)
    return assignment, topics


def write_topics_jsonl(topics: list[Topic], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in topics:
            fh.write(json.dumps({
                "topic_id": t.topic_id,
                "size": t.size,
                "keywords": [{"token": k, "score": round(s, 9)} for k, s in t.keywords],
                "doc_ids": t.doc_ids,
            }, ensure_ascii=False) + "\n")


def write_assignment_csv(assignment: TopicAssignment, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id", "topic_id"])
        for rid, label in assignment.labels.items():
            writer.writerow([rid, label])


def read_assignment_csv(path) -> TopicAssignment:
    labels = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for row in reader:
            if row:
                labels[row[0]] = int(row[1])
    return TopicAssignment(labels=labels)
