"""Class-based TF-IDF over topic document groups.

All documents of a class are concatenated into one pseudo-document and each
term t scores W(t, c) = tf(t, c) * log(1 + A / tf(t)), where tf(t, c) is the
term count inside the class, tf(t) the count across all classes, and A the
mean token count per class. Normalizing W over a class gives its term
distribution.
"""
from __future__ import annotations

import math
from collections import Counter


class EmptyVocabulary(Exception):
    """A class (or the whole corpus) contributes no tokens."""


def class_term_counts(classes: dict[int, list[list[str]]]) -> dict[int, Counter]:
    return {c: Counter(t for doc in docs for t in doc) for c, docs in classes.items()}


def ctfidf_scores(classes: dict[int, list[list[str]]]) -> dict[int, dict[str, float]]:
    """Score terms per class; classes maps class id -> list of token lists."""
    if not classes:
        raise EmptyVocabulary("no classes")
    counts = class_term_counts(classes)
    for c, counter in counts.items():
        if not counter:
            raise EmptyVocabulary(f"class {c} has no tokens")
    total = Counter()
    for counter in counts.values():
        total.update(counter)
    mean_class_tokens = sum(total.values()) / len(classes)
    scores: dict[int, dict[str, float]] = {}
    for c, counter in counts.items():
        scores[c] = {
            t: tf_tc * math.log(1.0 + mean_class_tokens / total[t])
            for t, tf_tc in counter.items()
        }
    return scores


def term_distribution(scores: dict[str, float]) -> dict[str, float]:
    """Normalize non-negative term scores to a probability distribution."""
    total = sum(scores.values())
    if total <= 0.0:
        raise EmptyVocabulary("all term scores are zero")
    return {t: s / total for t, s in scores.items()}
