"""Topic model evaluation: coherence, perplexity, diversity, centroid
similarity, and significance, plus the cross-model comparison table.

Conventions shared by implementation and tests:
  - Coherence is mean document-level NPMI over all pairs of a topic's top
    keywords. A pair scores -1 when either word never occurs or the pair
    never co-occurs, and +1 when both words appear in every document.
  - Perplexity is exp(-(1/N) * sum over tokens of log P(token | topic of its
    document)), P taken from the topic's term distribution with epsilon
    smoothing renormalized over the corpus vocabulary. Noise documents are
    excluded.
  - Significance is KL(term distribution || uniform over vocabulary), natural
    log, zero-extended over the corpus vocabulary.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .embeddings import cosine
from .topicmodel import Topic, TopicAssignment

log = logging.getLogger(__name__)

EPS = 1e-12


class NoScorableDocs(Exception):
    """Perplexity needs at least one non-noise document with tokens."""


class TopicWithFewerThanTenKeywords(Exception):
    """Diversity is defined over exactly ten keywords per topic."""


class NotEnoughTopics(Exception):
    """Asked for more top topics than exist."""


def coherence(keywords: list[str], docs: list[list[str]]) -> float:
    """Mean pairwise NPMI of keywords over document-level co-occurrence."""
    if len(keywords) < 2:
        raise ValueError("coherence needs at least 2 keywords")
    if not docs:
        raise ValueError("coherence needs a non-empty corpus")
    n_docs = len(docs)
    doc_sets = [set(d) for d in docs]
    occur = {w: sum(1 for s in doc_sets if w in s) for w in set(keywords)}
    values = []
    for wi, wj in combinations(keywords, 2):
        if occur[wi] == 0 or occur[wj] == 0:
            values.append(-1.0)
            continue
        co = sum(1 for s in doc_sets if wi in s and wj in s)
        if co == 0:
            values.append(-1.0)
            continue
        p_i = occur[wi] / n_docs
        p_j = occur[wj] / n_docs
        p_ij = co / n_docs
        if p_ij >= 1.0:
            values.append(1.0)
            continue
        p_ij = max(p_ij, EPS)
        values.append(math.log(p_ij / (p_i * p_j)) / (-math.log(p_ij)))
    return sum(values) / len(values)


def perplexity(
    assignment: TopicAssignment, topics: list[Topic], sanitized: dict[str, list[str]]
) -> float:
    term_dists = {t.topic_id: t.term_dist for t in topics}
    vocab = set()
    for tokens in sanitized.values():
        vocab.update(tokens)
    v = len(vocab)
    if v == 0:
        raise NoScorableDocs("empty vocabulary")
    total_log = 0.0
    n_tokens = 0
    for rid, label in assignment.labels.items():
        if label < 0 or label not in term_dists:
            continue
        tokens = sanitized.get(rid, [])
        if not tokens:
            continue
        dist = term_dists[label]
        denom = 1.0 + EPS * v
        for token in tokens:
            p = (dist.get(token, 0.0) + EPS) / denom
            total_log += math.log(p)
            n_tokens += 1
    if n_tokens == 0:
        raise NoScorableDocs("no assigned documents with tokens")
    return math.exp(-total_log / n_tokens)


def diversity(keyword_lists: list[list[str]], k: int = 10) -> float:
    """Fraction of distinct words among all topics' top-k keywords."""
    if not keyword_lists:
        raise ValueError("diversity needs at least one topic")
    for i, kws in enumerate(keyword_lists):
        if len(kws) != k:
            raise TopicWithFewerThanTenKeywords(
                f"topic #{i} has {len(kws)} keywords, need exactly {k}"
            )
    distinct = set()
    for kws in keyword_lists:
        distinct.update(kws)
    return len(distinct) / (k * len(keyword_lists))


def embedding_similarity(centroids: list[np.ndarray]) -> float:
    """Mean cosine over all unordered centroid pairs."""
    if len(centroids) < 2:
        raise ValueError("embedding similarity needs at least 2 topics")
    values = [cosine(a, b) for a, b in combinations(centroids, 2)]
    return sum(values) / len(values)


def topic_significance(term_dist: dict[str, float], vocab_size: int) -> float:
    """KL divergence from the uniform distribution over the vocabulary."""
    if vocab_size < 1:
        raise ValueError("vocab_size must be >= 1")
    total = 0.0
    for p in term_dist.values():
        if p > 0.0:
            total += p * math.log(p * vocab_size)
    return total


@dataclass
class ModelReport:
    model_name: str
    n_topics: int
    avg_coherence: float
    perplexity: float
    diversity: float
    avg_embedding_similarity: float | None
    avg_significance: float
    per_topic_significance: dict[int, float]

    def as_dict(self) -> dict:
        return {
            "model_name": self.model_name,
            "n_topics": self.n_topics,
            "avg_coherence": self.avg_coherence,
            "perplexity": self.perplexity,
            "diversity": self.diversity,
            "avg_embedding_similarity": self.avg_embedding_similarity,
            "avg_significance": self.avg_significance,
            "per_topic_significance": {str(k): v for k, v in self.per_topic_significance.items()},
        }

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def evaluate_model(
    name: str,
    assignment: TopicAssignment,
    topics: list[Topic],
    sanitized: dict[str, list[str]],
    coherence_top: int = 10,
) -> ModelReport:
    """Assemble the full metric bundle; averages are unweighted over topics."""
    if not topics:
        raise ValueError("cannot evaluate a model with zero topics")
    docs = list(sanitized.values())
    vocab = set()
    for tokens in docs:
        vocab.update(tokens)

    coherences = [
        coherence([k for k, _ in t.keywords[:coherence_top]], docs) for t in topics
    ]
    sig = {t.topic_id: topic_significance(t.term_dist, len(vocab)) for t in topics}
    if len(topics) >= 2:
        emb_sim = embedding_similarity([t.centroid for t in topics])
    else:
        emb_sim = None
        log.warning("model %s has one topic; embedding similarity undefined", name)
    return ModelReport(
        model_name=name,
        n_topics=len(topics),
        avg_coherence=sum(coherences) / len(coherences),
        perplexity=perplexity(assignment, topics, sanitized),
        diversity=diversity([[k for k, _ in t.keywords[:10]] for t in topics]),
        avg_embedding_similarity=emb_sim,
        avg_significance=sum(sig.values()) / len(sig),
        per_topic_significance=sig,
    )


def select_top_significant(per_topic_significance: dict[int, float], k: int = 12) -> list[int]:
    """Top-k topic ids by significance, ties to the smaller id."""
    if k > len(per_topic_significance):
        raise NotEnoughTopics(f"asked for {k} topics, have {len(per_topic_significance)}")
    ranked = sorted(per_topic_significance.items(), key=lambda kv: (-kv[1], kv[0]))
    return [tid for tid, _ in ranked[:k]]


# metric -> (label, higher_is_better)
_TABLE_ROWS = [
    ("n_topics", "Number of Topics", None),
    ("avg_coherence", "Avg. Coherence (^)", True),
    ("perplexity", "Perplexity (v)", False),
    ("diversity", "Diversity (^)", True),
    ("avg_embedding_similarity", "Avg. Topic Embedding Similarity (v)", False),
    ("avg_significance", "Avg. Topic Significance (^)", True),
]


def render_comparison_table(reports: list[ModelReport]) -> str:
    """Metric rows x model columns; the best value per row is starred."""
    if not reports:
        raise ValueError("no reports to render")
    names = [r.model_name for r in reports]
    lines = []
    header = ["Metric"] + names
    rows = []
    for key, label, higher in _TABLE_ROWS:
        values = [getattr(r, key) for r in reports]
        best = None
        if higher is not None:
            usable = [v for v in values if v is not None]
            if usable:
                best = max(usable) if higher else min(usable)
        cells = []
        for v in values:
            if v is None:
                cells.append("n/a")
            elif isinstance(v, int):
                cells.append(str(v))
            else:
                cells.append(f"{v:.4f}*" if best is not None and v == best else f"{v:.4f}")
        rows.append([label] + cells)
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines.append(fmt.format(*header))
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append(fmt.format(*row))
    return "\n".join(lines) + "\n"
