"""Embedding model registry behind one tiny interface.

Model identifiers are config strings:

  builtin:hash:<dim>   deterministic token-hash vectors; no model runtime,
                       identical output on every platform
  st:<name>            a sentence-transformers model available locally
  wordvec:<path>       GloVe-format text vectors ("token v1 v2 ..." lines);
                       document vectors are the mean of in-vocabulary tokens

Every model exposes encode(texts) -> (n, dim) float64 array and a vocabulary
test used by word export. Inference access is serialized by the callers that
need it (the HTTP server); the models themselves are stateless after load.
"""
from __future__ import annotations

import hashlib
import re

import numpy as np


class ModelLoadError(Exception):
    """The model identifier could not be resolved or loaded."""


_TOKEN_RE = re.compile(r"[0-9a-z]+(?:-[0-9a-z]+)*")


def _tokens(text: str) -> list[str]:
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= 2]


class HashModel:
    """Signed-bucket token hashing; the offline-deterministic baseline."""

    def __init__(self, dim: int):
        if dim < 2:
            raise ModelLoadError(f"builtin:hash dim must be >= 2, got {dim}")
        self.dim = dim

    def _hash(self, token: str, salt: bytes) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=salt).digest()
        return int.from_bytes(digest, "big")

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            for token in _tokens(text):
                bucket = self._hash(token, b"adapter-bucket") % self.dim
                sign = 1.0 if self._hash(token, b"adapter-sign") & 1 else -1.0
                out[i, bucket] += sign
            norm = np.linalg.norm(out[i])
            if norm == 0.0:
                out[i, 0] = 1.0
            else:
                out[i] /= norm
        return out

    def has_word(self, token: str) -> bool:
        return True  # any token hashes somewhere


class SentenceTransformerModel:
    def __init__(self, name: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise ModelLoadError(f"sentence-transformers not installed: {exc}") from exc
        try:
            self._model = SentenceTransformer(name)
        except Exception as exc:
            raise ModelLoadError(f"cannot load model {name!r}: {exc}") from exc
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, texts: list[str]) -> np.ndarray:
        vectors = self._model.encode(texts, convert_to_numpy=True, show_progress_bar=False)
        return np.asarray(vectors, dtype=np.float64).reshape(len(texts), self.dim)

    def has_word(self, token: str) -> bool:
        return True


class WordVectorModel:
    """GloVe-format text file: one ``token v1 v2 ... vD`` line per token."""

    def __init__(self, path: str):
        self.vectors: dict[str, np.ndarray] = {}
        dim = None
        try:
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    parts = line.rstrip("\n").split(" ")
                    if len(parts) < 3:
                        continue
                    vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
                    if dim is None:
                        dim = len(vec)
                    elif len(vec) != dim:
                        raise ModelLoadError(f"{path}: inconsistent dims {len(vec)} vs {dim}")
                    self.vectors[parts[0]] = vec
        except OSError as exc:
            raise ModelLoadError(f"cannot read word vectors {path!r}: {exc}") from exc
        except ValueError as exc:
            raise ModelLoadError(f"{path}: bad float: {exc}") from exc
        if not self.vectors:
            raise ModelLoadError(f"{path}: no vectors found")
        self.dim = int(dim)

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            hits = [self.vectors[t] for t in _tokens(text) if t in self.vectors]
            if hits:
                out[i] = np.mean(hits, axis=0)
            else:
                out[i, 0] = 1.0
        return out

    def has_word(self, token: str) -> bool:
        return token in self.vectors

    def word_vector(self, token: str) -> np.ndarray | None:
        return self.vectors.get(token)


def load_model(identifier: str):
    """Resolve a model identifier string to a loaded model."""
    if not identifier:
        raise ModelLoadError("empty model identifier")
    if identifier.startswith("builtin:hash"):
        parts = identifier.split(":")
        dim = int(parts[2]) if len(parts) > 2 else 256
        return HashModel(dim)
    if identifier.startswith("st:"):
        return SentenceTransformerModel(identifier[3:])
    if identifier.startswith("wordvec:"):
        return WordVectorModel(identifier[len("wordvec:"):])
    raise ModelLoadError(
        f"unknown model identifier {identifier!r}; expected builtin:hash[:dim], "
        "st:<name>, or wordvec:<path>"
    )
