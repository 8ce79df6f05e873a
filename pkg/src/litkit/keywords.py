"""Keyword extraction blending c-TF-IDF rank with centroid similarity.

Candidates are the 3*top_k best terms by c-TF-IDF. Each candidate's final
score is 0.5 * (c-TF-IDF / candidate max) + 0.5 * cosine(term vector, topic
centroid); candidates without a word vector (or whose vectors live in a
different space than the centroid) keep only the first half. Ties break
lexicographically.
"""
from __future__ import annotations

import logging

import numpy as np

from .embeddings import EmbeddingMatrix, cosine

log = logging.getLogger(__name__)


def extract_keywords(
    term_scores: dict[str, float],
    centroid: np.ndarray | None,
    word_emb: EmbeddingMatrix | None,
    top_k: int = 10,
) -> list[tuple[str, float]]:
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    if not term_scores:
        return []
    candidates = sorted(term_scores.items(), key=lambda kv: (-kv[1], kv[0]))[: 3 * top_k]
    max_score = candidates[0][1]
    centroid_usable = (
        centroid is not None
        and word_emb is not None
        and float(np.linalg.norm(centroid)) > 0.0
    )
    if centroid_usable and word_emb.dim != len(centroid):
        log.warning(
            "word vectors are %d-d but the topic centroid is %d-d; "
            "keywords fall back to c-TF-IDF only", word_emb.dim, len(centroid),
        )
        centroid_usable = False
    scored = []
    for term, raw in candidates:
        base = 0.5 * (raw / max_score if max_score > 0 else 0.0)
        if centroid_usable and term in word_emb:
            vec = word_emb.row(term)
            if float(np.linalg.norm(vec)) > 0.0:
                base += 0.5 * cosine(vec, centroid)
        scored.append((term, base))
    scored.sort(key=lambda kv: (-kv[1], kv[0]))
    return scored[:top_k]
