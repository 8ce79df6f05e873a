"""Embedding interchange format, providers, and vector helpers.

File format: first line ``#dim=<D>\tkind=<document|word>``, then one row per
vector: ``id<TAB>v1<TAB>...<TAB>vD``. Floats are written with 9 significant
digits, so save(load(f)) reproduces a file byte for byte.

Providers: load from file, fetch over HTTP (POST ``<endpoint>/embed``), or the
deterministic hash embedder used for tests and offline runs.
"""
from __future__ import annotations

import hashlib
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import requests

from .textprep import tokenize

KINDS = ("document", "word")


class FormatError(Exception):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class DimensionMismatch(Exception):
    def __init__(self, expected: int, got: int, line: int):
        super().__init__(f"line {line}: expected {expected} values, got {got}")
        self.expected, self.got, self.line = expected, got, line


class NonFiniteValue(Exception):
    def __init__(self, line: int):
        super().__init__(f"line {line}: non-finite value")
        self.line = line


class DuplicateId(Exception):
    def __init__(self, id_: str):
        super().__init__(f"duplicate id {id_!r}")
        self.id = id_


class ZeroVector(Exception):
    """Cosine similarity is undefined for zero-norm vectors."""


class Unreachable(Exception):
    """The embedding endpoint could not be reached after retries."""


class BadResponse(Exception):
    def __init__(self, status: int, body: str):
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status


class PartialResponse(Exception):
    def __init__(self, missing: list[str]):
        super().__init__(f"service omitted {len(missing)} ids: {missing[:5]}")
        self.missing = missing


@dataclass
class EmbeddingMatrix:
    """Dense id-keyed vectors; ids unique, all components finite, one dim."""

    ids: list[str]
    vectors: np.ndarray
    kind: str = "document"

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ValueError("vectors must be a 2-D matrix")
        if len(self.ids) != self.vectors.shape[0]:
            raise ValueError("ids and vector rows differ in length")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        seen = set()
        for id_ in self.ids:
            if id_ in seen:
                raise DuplicateId(id_)
            seen.add(id_)
        if self.vectors.size and not np.isfinite(self.vectors).all():
            raise ValueError("vectors contain non-finite values")
        self._index = {id_: i for i, id_ in enumerate(self.ids)}

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, id_: str) -> bool:
        return id_ in self._index

    def row(self, id_: str) -> np.ndarray:
        return self.vectors[self._index[id_]]

    def subset(self, ids: list[str]) -> "EmbeddingMatrix":
        rows = [self._index[i] for i in ids]
        return EmbeddingMatrix(list(ids), self.vectors[rows], self.kind)


def _format_float(x: float) -> str:
    return f"{x:.9g}"


def save_embeddings(matrix: EmbeddingMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#dim={matrix.dim}\tkind={matrix.kind}\n")
        for id_, vec in zip(matrix.ids, matrix.vectors):
            fh.write(id_ + "\t" + "\t".join(_format_float(v) for v in vec) + "\n")


def load_embeddings(path) -> EmbeddingMatrix:
    """Load an interchange file; any bad row rejects the whole file."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith("#"):
            raise FormatError(1, "missing #dim header")
        fields = dict(
            part.split("=", 1) for part in header[1:].split("\t") if "=" in part
        )
        try:
            dim = int(fields["dim"])
        except (KeyError, ValueError):
            raise FormatError(1, "bad or missing dim") from None
        kind = fields.get("kind", "document")
        if kind not in KINDS or dim < 1:
            raise FormatError(1, f"bad header fields dim={dim} kind={kind}")
        ids: list[str] = []
        seen: set[str] = set()
        rows: list[list[float]] = []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) - 1 != dim:
                raise DimensionMismatch(dim, len(parts) - 1, lineno)
            id_ = parts[0]
            if not id_:
                raise FormatError(lineno, "empty id")
            if id_ in seen:
                raise DuplicateId(id_)
            seen.add(id_)
            try:
                values = [float(p) for p in parts[1:]]
            except ValueError:
                raise FormatError(lineno, "unparseable float") from None
            if not all(math.isfinite(v) for v in values):
                raise NonFiniteValue(lineno)
            ids.append(id_)
            rows.append(values)
    vectors = np.array(rows, dtype=np.float64) if rows else np.zeros((0, dim))
    return EmbeddingMatrix(ids, vectors.reshape(len(ids), dim), kind)


def cosine(a, b) -> float:
    """a.b / (|a||b|); raises ZeroVector on a zero-norm input."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine undefined for zero vectors")
    return float(np.dot(a, b) / (na * nb))


def _hash64(data: str, salt: bytes) -> int:
    digest = hashlib.blake2b(data.encode("utf-8"), digest_size=8, key=salt).digest()
    return int.from_bytes(digest, "big")


def hash_embed(texts: list[tuple[str, str]], dim: int, kind: str = "document") -> EmbeddingMatrix:
    """Deterministic signed-bucket token hashing, identical on every platform.

    Tokens hash into one of ``dim`` buckets with a +/-1 sign from a second
    hash; the signed counts are L2-normalized. A text with no tokens (or whose
    signs cancel exactly) maps to the first unit basis vector.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    vectors = np.zeros((len(texts), dim), dtype=np.float64)
    for i, (_, text) in enumerate(texts):
        for token in tokenize(text):
            bucket = _hash64(token, b"bucket") % dim
            sign = 1.0 if _hash64(token, b"sign") & 1 else -1.0
            vectors[i, bucket] += sign
        norm = np.linalg.norm(vectors[i])
        if norm == 0.0:
            vectors[i, 0] = 1.0
        else:
            vectors[i] /= norm
    return EmbeddingMatrix([id_ for id_, _ in texts], vectors, kind)


@dataclass
class EmbeddingProviderConfig:
    mode: str = "hash"  # file | http | hash
    endpoint: str | None = None
    batch_size: int = 32
    timeout: float = 30.0
    auth_token_env: str = ""
    dim: int = 256  # hash mode only
    max_concurrency: int = 4
    retry_base_delay: float = 0.5

    def __post_init__(self):
        if self.mode not in ("file", "http", "hash"):
            raise ValueError(f"unknown provider mode {self.mode!r}")
        if self.mode == "http" and not self.endpoint:
            raise ValueError("endpoint required when mode=http")


def fetch_embeddings(
    texts: list[tuple[str, str]], config: EmbeddingProviderConfig, kind: str = "document"
) -> EmbeddingMatrix:
    """Fetch vectors from an ``/embed`` service in batches.

    Batches run on up to ``max_concurrency`` threads; each batch is retried up
    to 3 times with exponential backoff. Rows are assembled in input order and
    any failure aborts the whole fetch (no partial matrix).
    """
    if config.mode != "http":
        raise ValueError("fetch_embeddings requires mode=http")
    url = config.endpoint.rstrip("/")
    if not url.endswith("/embed"):
        url += "/embed"
    headers = {"Content-Type": "application/json"}
    token = os.environ.get(config.auth_token_env) if config.auth_token_env else None
    if token:
        headers["Authorization"] = f"Bearer {token}"

    batches = [
        texts[i : i + config.batch_size] for i in range(0, len(texts), config.batch_size)
    ]

    def fetch_batch(batch):
        payload = {"inputs": [{"id": id_, "text": text} for id_, text in batch]}
        last_exc: Exception | None = None
        for attempt in range(3):
            if attempt:
                time.sleep(config.retry_base_delay * (2 ** (attempt - 1)))
            try:
                resp = requests.post(url, json=payload, headers=headers, timeout=config.timeout)
            except requests.RequestException as exc:
                last_exc = Unreachable(str(exc))
                continue
            if resp.status_code != 200:
                last_exc = BadResponse(resp.status_code, resp.text)
                if 400 <= resp.status_code < 500:
                    break  # client errors will not heal on retry
                continue
            try:
                body = resp.json()
                dim = int(body["dim"])
                by_id = {row["id"]: row["v"] for row in body["vectors"]}
            except (ValueError, KeyError, TypeError):
                last_exc = BadResponse(resp.status_code, resp.text)
                continue
            missing = [id_ for id_, _ in batch if id_ not in by_id]
            if missing:
                raise PartialResponse(missing)
            rows = []
            for id_, _ in batch:
                vec = [float(v) for v in by_id[id_]]
                if len(vec) != dim:
                    raise BadResponse(resp.status_code, f"row {id_} has {len(vec)} values, dim={dim}")
                rows.append(vec)
            return dim, rows
        raise last_exc if last_exc else Unreachable("no attempt made")

    if not batches:
        raise ValueError("no texts to embed")
    with ThreadPoolExecutor(max_workers=max(1, config.max_concurrency)) as pool:
        results = list(pool.map(fetch_batch, batches))

    dims = {dim for dim, _ in results}
    if len(dims) != 1:
        raise BadResponse(200, f"inconsistent dims across batches: {sorted(dims)}")
    vectors = np.array([row for _, rows in results for row in rows], dtype=np.float64)
    if not np.isfinite(vectors).all():
        raise BadResponse(200, "non-finite vector components")
    return EmbeddingMatrix([id_ for id_, _ in texts], vectors, kind)
