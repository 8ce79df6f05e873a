import random

import numpy as np
import pytest

from litkit.records import AuthorRef, BiblioRecord


def make_record(rid="r1", title="Flood response", abstract="Disaster relief and flood response.",
                year=2021, doi=None, language="en", retracted=False, authors=None,
                source_db="other", month=None):
    return BiblioRecord(
        record_id=rid, source_db=source_db, title=title, abstract=abstract,
        year=year, month=month, doi=doi, language=language, retracted=retracted,
        authors=authors or [],
    )


def author(last="Chen", first="Wei", affs=None):
    return AuthorRef(last, first, affs or [("Lakeside University", "United States")])


def gaussian_blobs(rng: np.random.Generator, counts, dim=5, sigma=0.1, separation=20.0):
    """Well-separated blobs; returns (points, true labels)."""
    points, labels = [], []
    for k, n in enumerate(counts):
        center = np.zeros(dim)
        center[k % dim] = separation * (1 + k // dim)
        points.append(rng.normal(0.0, sigma, size=(n, dim)) + center)
        labels.extend([k] * n)
    return np.vstack(points), np.array(labels)


def random_records(rng: random.Random, n: int) -> list[BiblioRecord]:
    """Random ingest fixture with duplicates and every removal reason."""
    records = []
    for i in range(n):
        has_doi = rng.random() < 0.6
        doi = f"10.1000/x{rng.randint(1, max(2, n // 2))}" if has_doi else None
        relevant = rng.random() < 0.8
        abstract = ""
        if rng.random() < 0.85:
            abstract = ("the pandemic response study" if relevant
                        else "completely unrelated botany text")
        records.append(BiblioRecord(
            record_id=f"r{i}",
            title=f"title {rng.randint(1, max(2, n // 2))}",
            abstract=abstract,
            year=rng.choice([2020, 2021]),
            doi=doi,
            language=rng.choice(["en", "en", "en", "fr", None]),
            retracted=rng.random() < 0.1,
        ))
    return records


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
