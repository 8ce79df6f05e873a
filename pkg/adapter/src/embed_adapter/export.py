"""Batch export of document and word vectors in the interchange file format.

The format (shared contract with the consuming toolkit): header line
``#dim=<D>\\tkind=<document|word>``, then ``id<TAB>v1<TAB>...<TAB>vD`` rows
with floats at 9 significant digits.
"""
from __future__ import annotations

import csv
import logging

import numpy as np

from .models import load_model

log = logging.getLogger(__name__)

CORPUS_HEADER = [
    "record_id", "source_db", "title", "abstract", "year", "month", "doi",
    "language", "retracted", "authors_json",
]


def read_corpus_texts(path) -> list[tuple[str, str]]:
    """(record_id, title + ' ' + abstract) per row of a canonical corpus CSV."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CORPUS_HEADER:
            raise ValueError(f"{path}: not a canonical corpus CSV")
        out = []
        for row in reader:
            if not row:
                continue
            rid, title, abstract = row[0], row[2], row[3]
            title, abstract = title.strip(), abstract.strip()
            text = f"{title} {abstract}" if title and abstract else (title or abstract)
            out.append((rid, text))
    return out


def read_vocabulary(path) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip() and not line.startswith("#")]


def write_interchange(path, ids: list[str], vectors: np.ndarray, kind: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#dim={vectors.shape[1]}\tkind={kind}\n")
        for id_, vec in zip(ids, vectors):
            fh.write(id_ + "\t" + "\t".join(f"{v:.9g}" for v in vec) + "\n")


def export_doc_embeddings(model_id: str, corpus_csv, output_path, batch_size: int = 64) -> int:
    """One vector per record, input order preserved. Returns the row count."""
    model = load_model(model_id)
    texts = read_corpus_texts(corpus_csv)
    if not texts:
        log.warning("empty corpus %s; writing a header-only file", corpus_csv)
        write_interchange(output_path, [], np.zeros((0, model.dim)), "document")
        return 0
    rows = []
    for i in range(0, len(texts), max(1, batch_size)):
        batch = texts[i : i + max(1, batch_size)]
        rows.append(model.encode([t for _, t in batch]))
    vectors = np.vstack(rows)
    write_interchange(output_path, [rid for rid, _ in texts], vectors, "document")
    return len(texts)


def word_vector_for(model, token: str) -> np.ndarray | None:
    """Vector for one vocabulary token, composing bigram parts when needed.

    Open-vocabulary models (hash, sentence-transformers) encode the token
    text directly with "_" read as a space. Fixed-vocabulary models look the
    token up; a token like "plastic_waste" whose parts are both in vocabulary
    gets the mean of the part vectors, and anything else returns None (listed
    in the out-of-vocabulary sidecar).
    """
    if not hasattr(model, "word_vector"):
        return model.encode([token.replace("_", " ")])[0]
    if model.has_word(token):
        return model.word_vector(token)
    if "_" in token:
        parts = [p for p in token.split("_") if p]
        if parts and all(model.has_word(p) for p in parts):
            return np.mean([model.word_vector(p) for p in parts], axis=0)
    return None


def export_word_embeddings(
    model_id: str, vocab_path, output_path, oov_sidecar_path=None
) -> tuple[int, int]:
    """One vector per in-vocabulary token; OOV tokens listed in the sidecar.

    Returns (exported, oov) counts.
    """
    model = load_model(model_id)
    vocabulary = read_vocabulary(vocab_path)
    if not vocabulary:
        raise ValueError(f"{vocab_path}: empty vocabulary")
    ids, rows, oov = [], [], []
    for token in vocabulary:
        vec = word_vector_for(model, token)
        if vec is None:
            oov.append(token)
        else:
            ids.append(token)
            rows.append(vec)
    vectors = np.vstack(rows) if rows else np.zeros((0, model.dim))
    write_interchange(output_path, ids, vectors, "word")
    if oov_sidecar_path is not None:
        with open(oov_sidecar_path, "w", encoding="utf-8") as fh:
            for token in oov:
                fh.write(token + "\n")
    if oov:
        log.warning("%d vocabulary tokens had no vector", len(oov))
    return len(ids), len(oov)
