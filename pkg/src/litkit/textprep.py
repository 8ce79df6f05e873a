"""Corpus sanitization: tokenize, drop stop words, merge bigrams, lemmatize.

The per-document pipeline is tokenize -> stop words -> bigrams -> lemmatize,
followed by a final stop-word re-filter so no sanitized token can land in the
active stop-word list via lemmatization (e.g. "using" -> "use").
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources

_TOKEN_RE = re.compile(r"[0-9a-z]+(?:-[0-9a-z]+)*")


class EmptyCorpus(Exception):
    """learn_bigrams needs at least one non-empty token list."""


def tokenize(text: str) -> list[str]:
    """Lowercase tokens split on non-alphanumerics, keeping internal hyphens.

    Tokens shorter than two characters are dropped ("covid-19" survives as one
    token, "a" does not).
    """
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= 2]


@dataclass
class StopwordList:
    words: set[str]
    provenance: str = ""

    def __contains__(self, token: str) -> bool:
        return token in self.words


def load_stopwords(path=None, extra: list[str] | None = None) -> StopwordList:
    """Load a stop-word file (one token per line, ``#`` comments).

    Without a path the bundled list (standard English plus abstract
    boilerplate like "method" and "background") is used.
    """
    if path is None:
        text = resources.files("litkit.data").joinpath("stopwords.txt").read_text("utf-8")
        provenance = "bundled english + abstract boilerplate"
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        provenance = str(path)
    words = set()
    for line in text.splitlines():
        word = line.split("#", 1)[0].strip().lower()
        if word:
            words.add(word)
    for word in extra or []:
        words.add(word.strip().lower())
    return StopwordList(words=words, provenance=provenance)


def remove_stopwords(tokens: list[str], stopwords: StopwordList) -> list[str]:
    return [t for t in tokens if t not in stopwords]


@dataclass
class BigramModel:
    """Adjacent-pair phrase model.

    pair_scores holds every pair seen at least min_count times, scored as
    (count(a,b) - min_count) * n_vocab / (count(a) * count(b)); pairs scoring
    above the threshold are merged by apply_bigrams.
    """

    pair_scores: dict[tuple[str, str], float] = field(default_factory=dict)
    min_count: int = 5
    threshold: float = 10.0

    def accepted(self, a: str, b: str) -> bool:
        return self.pair_scores.get((a, b), float("-inf")) > self.threshold

    def save(self, path) -> None:
        payload = {
            "min_count": self.min_count,
            "threshold": self.threshold,
            "pairs": [[a, b, s] for (a, b), s in sorted(self.pair_scores.items())],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, indent=0)

    @classmethod
    def load(cls, path) -> "BigramModel":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(
            pair_scores={(a, b): s for a, b, s in payload["pairs"]},
            min_count=payload["min_count"],
            threshold=payload["threshold"],
        )


def learn_bigrams(corpus: list[list[str]], min_count: int = 5, threshold: float = 10.0) -> BigramModel:
    """Score adjacent token pairs over the corpus (count-based phrase scoring)."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    unigram: dict[str, int] = {}
    pair: dict[tuple[str, str], int] = {}
    for tokens in corpus:
        for t in tokens:
            unigram[t] = unigram.get(t, 0) + 1
        for a, b in zip(tokens, tokens[1:]):
            pair[(a, b)] = pair.get((a, b), 0) + 1
    if not unigram:
        raise EmptyCorpus("no tokens in corpus")
    n_vocab = len(unigram)
    scores = {}
    for (a, b), c in pair.items():
        if c < min_count:
            continue
        scores[(a, b)] = (c - min_count) * n_vocab / (unigram[a] * unigram[b])
    return BigramModel(pair_scores=scores, min_count=min_count, threshold=threshold)


def apply_bigrams(tokens: list[str], model: BigramModel) -> list[str]:
    """Merge accepted adjacent pairs left to right in a single pass."""
    out = []
    i = 0
    n = len(tokens)
    while i < n:
        if i + 1 < n and model.accepted(tokens[i], tokens[i + 1]):
            out.append(f"{tokens[i]}_{tokens[i + 1]}")
            i += 2
        else:
            out.append(tokens[i])
            i += 1
    return out


class Lemmatizer:
    """Dictionary lookup with deterministic suffix-rule fallback.

    Rules run to a fixpoint so the mapping is idempotent. The bundled table
    carries irregular forms ("ran" -> "run") and identity entries that shield
    lexical s-enders and -ing nouns from the suffix rules.
    """

    _VOWELS = set("aeiou")

    def __init__(self, table: dict[str, str]):
        self.table = table

    @classmethod
    def bundled(cls) -> "Lemmatizer":
        text = resources.files("litkit.data").joinpath("lemmas.tsv").read_text("utf-8")
        return cls(cls.parse_table(text))

    @classmethod
    def from_file(cls, path) -> "Lemmatizer":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(cls.parse_table(fh.read()))

    @staticmethod
    def parse_table(text: str) -> dict[str, str]:
        table = {}
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            inflected, _, lemma = line.partition("\t")
            if lemma:
                table[inflected.strip()] = lemma.strip()
        return table

    def lemma(self, token: str) -> str:
        if "_" in token:
            return "_".join(self.lemma(p) for p in token.split("_") if p)
        current = token
        for _ in range(6):
            step = self._step(current)
            if step == current:
                return current
            current = step
        return current

    def _step(self, word: str) -> str:
        hit = self.table.get(word)
        if hit is not None:
            return hit
        if len(word) > 4 and word.endswith("ies"):
            return word[:-3] + "y"
        if len(word) > 4 and word.endswith("ied"):
            return word[:-3] + "y"
        if len(word) > 3 and word.endswith("es") and word[:-2].endswith(("s", "x", "z", "ch", "sh")):
            return word[:-2]
        if (
            len(word) > 3
            and word.endswith("s")
            and not word.endswith(("ss", "us", "is"))
        ):
            return word[:-1]
        if len(word) > 5 and word.endswith("ing"):
            return self._repair(word[:-3])
        if len(word) > 4 and word.endswith("ed"):
            return self._repair(word[:-2])
        return word

    def _repair(self, stem: str) -> str:
        # doubled final consonant from gemination: "runn" -> "run"
        if (
            len(stem) >= 3
            and stem[-1] == stem[-2]
            and stem[-1] not in self._VOWELS
            and stem[-1] not in "sl"
            and stem[-3] in self._VOWELS
        ):
            return stem[:-1]
        return stem


def lemmatize(tokens: list[str], lemmatizer: Lemmatizer | None = None) -> list[str]:
    lem = lemmatizer or _default_lemmatizer()
    return [lem.lemma(t) for t in tokens]


_DEFAULT_LEMMATIZER: Lemmatizer | None = None


def _default_lemmatizer() -> Lemmatizer:
    global _DEFAULT_LEMMATIZER
    if _DEFAULT_LEMMATIZER is None:
        _DEFAULT_LEMMATIZER = Lemmatizer.bundled()
    return _DEFAULT_LEMMATIZER


@dataclass
class SanitizedDoc:
    record_id: str
    tokens: list[str]


class TextPrep:
    """The full sanitization pipeline with shared stop-word/bigram/lemma state."""

    def __init__(
        self,
        stopwords: StopwordList | None = None,
        lemmatizer: Lemmatizer | None = None,
        min_count: int = 5,
        threshold: float = 10.0,
    ):
        self.stopwords = stopwords or load_stopwords()
        self.lemmatizer = lemmatizer or _default_lemmatizer()
        self.min_count = min_count
        self.threshold = threshold
        self.bigrams: BigramModel | None = None

    def fit_bigrams(self, texts: list[str]) -> BigramModel:
        filtered = [remove_stopwords(tokenize(t), self.stopwords) for t in texts]
        self.bigrams = learn_bigrams(filtered, self.min_count, self.threshold)
        return self.bigrams

    def sanitize(self, record_id: str, text: str) -> SanitizedDoc:
        tokens = remove_stopwords(tokenize(text), self.stopwords)
        if self.bigrams is not None:
            tokens = apply_bigrams(tokens, self.bigrams)
        tokens = lemmatize(tokens, self.lemmatizer)
        tokens = [t for t in remove_stopwords(tokens, self.stopwords) if t]
        return SanitizedDoc(record_id=record_id, tokens=tokens)


def write_sanitized_jsonl(docs: list[SanitizedDoc], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps({"record_id": doc.record_id, "tokens": doc.tokens},
                                ensure_ascii=False) + "\n")


def read_sanitized_jsonl(path) -> list[SanitizedDoc]:
    docs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                docs.append(SanitizedDoc(record_id=obj["record_id"], tokens=list(obj["tokens"])))
    return docs
