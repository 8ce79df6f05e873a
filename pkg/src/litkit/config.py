"""Run configuration: one TOML file drives the whole pipeline.

Sections (all optional, defaults shown in DEFAULTS): [run], [corpus],
[screen], [textprep], [embedding], [topics], [network], [summarize]. Flag
overrides from the CLI are applied after loading. Secrets (embedding/LLM
tokens) are only ever read from the environment variables the config names.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .embeddings import EmbeddingProviderConfig
from .summarize import ChatEndpointConfig
from .topicmodel import TopicModelConfig


class ConfigInvalid(Exception):
    def __init__(self, field_name: str, reason: str):
        super().__init__(f"{field_name}: {reason}")
        self.field = field_name
        self.reason = reason


DEFAULTS: dict = {
    "run": {"out_dir": "out", "seed": 42, "jobs": 4},
    "corpus": {"inputs": []},  # [{path, format}]
    "screen": {"relevance_terms": ["disaster", "crisis", "pandemic", "COVID-19"]},
    "textprep": {
        "bigram_min_count": 5,
        "bigram_threshold": 10.0,
        "stopword_file": "",
        "lemma_file": "",
        "extra_stopwords": [],
    },
    "embedding": {
        "mode": "hash",
        "endpoint": "",
        "batch_size": 32,
        "timeout": 30.0,
        "auth_token_env": "",
        "dim": 256,
        "max_concurrency": 4,
        "doc_file": "",
        "word_file": "",
    },
    "topics": {
        "strategy": "one_stage",
        "stage1_min_cluster": 30,
        "stage2_min_cluster": 15,
        "reduced_dim": 5,
        "min_samples": 0,  # 0 = default to the stage's min cluster
        "top_k_keywords": 10,
    },
    "network": {
        "country_threshold": 20,
        "institution_threshold": 10,
        "author_threshold": 4,
        "formats": ["gexf", "graphml", "edge_csv"],
        "alias_file": "",
    },
    "summarize": {
        "token_budget": 3000,
        "top_topics": 12,
        "endpoint": "mock",
        "model": "mock-model",
        "api_key_env": "",
        "max_concurrency": 4,
    },
}


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path = field(default_factory=Path)

    @property
    def out_dir(self) -> Path:
        out = Path(self.raw["run"]["out_dir"])
        return out if out.is_absolute() else self.base_dir / out

    @property
    def seed(self) -> int:
        return int(self.raw["run"]["seed"])

    @property
    def jobs(self) -> int:
        return int(self.raw["run"]["jobs"])

    def corpus_inputs(self) -> list[tuple[Path, str]]:
        inputs = []
        for item in self.raw["corpus"]["inputs"]:
            p = Path(item["path"])
            inputs.append((p if p.is_absolute() else self.base_dir / p, item["format"]))
        return inputs

    def provider_config(self) -> EmbeddingProviderConfig:
        e = self.raw["embedding"]
        return EmbeddingProviderConfig(
            mode=e["mode"],
            endpoint=e["endpoint"] or None,
            batch_size=int(e["batch_size"]),
            timeout=float(e["timeout"]),
            auth_token_env=e["auth_token_env"],
            dim=int(e["dim"]),
            max_concurrency=min(int(e["max_concurrency"]), self.jobs),
        )

    def topic_config(self) -> TopicModelConfig:
        t = self.raw["topics"]
        return TopicModelConfig(
            stage1_min_cluster=int(t["stage1_min_cluster"]),
            stage2_min_cluster=int(t["stage2_min_cluster"]),
            reduced_dim=int(t["reduced_dim"]),
            min_samples=int(t["min_samples"]) or None,
            top_k_keywords=int(t["top_k_keywords"]),
            strategy=t["strategy"],
            seed=self.seed,
        )

    def chat_config(self) -> ChatEndpointConfig:
        s = self.raw["summarize"]
        return ChatEndpointConfig(
            endpoint=s["endpoint"],
            model=s["model"],
            api_key_env=s["api_key_env"],
            max_concurrency=min(int(s["max_concurrency"]), self.jobs),
        )

    def section_hashable(self, *sections: str) -> str:
        payload = {s: self.raw[s] for s in sections}
        payload["seed"] = self.seed
        return json.dumps(payload, sort_keys=True)

    def validate(self) -> None:
        inputs = self.raw["corpus"]["inputs"]
        if not isinstance(inputs, list):
            raise ConfigInvalid("corpus.inputs", "must be a list of {path, format} tables")
        for i, item in enumerate(inputs):
            if "path" not in item or "format" not in item:
                raise ConfigInvalid(f"corpus.inputs[{i}]", "needs path and format")
            if item["format"] not in ("ris", "medline", "csv"):
                raise ConfigInvalid(f"corpus.inputs[{i}].format", f"unknown format {item['format']!r}")
            p = Path(item["path"])
            if not (p if p.is_absolute() else self.base_dir / p).exists():
                raise ConfigInvalid(f"corpus.inputs[{i}].path", f"{item['path']} does not exist")
        if not self.raw["screen"]["relevance_terms"]:
            raise ConfigInvalid("screen.relevance_terms", "must be non-empty")
        e = self.raw["embedding"]
        if e["mode"] not in ("file", "http", "hash"):
            raise ConfigInvalid("embedding.mode", f"unknown mode {e['mode']!r}")
        if e["mode"] == "http" and not e["endpoint"]:
            raise ConfigInvalid("embedding.endpoint", "required when mode=http")
        if e["mode"] == "file":
            for key in ("doc_file", "word_file"):
                if e[key] and not (self.base_dir / e[key]).exists() and not Path(e[key]).exists():
                    raise ConfigInvalid(f"embedding.{key}", f"{e[key]} does not exist")
            if not e["doc_file"]:
                raise ConfigInvalid("embedding.doc_file", "required when mode=file")
        for section, opt in (("textprep", "stopword_file"), ("textprep", "lemma_file"),
                             ("network", "alias_file")):
            value = self.raw[section][opt]
            if value and not Path(value).is_absolute():
                value = self.base_dir / value
            if value and not Path(value).exists():
                raise ConfigInvalid(f"{section}.{opt}", f"{value} does not exist")
        try:
            self.topic_config()
        except ValueError as exc:
            raise ConfigInvalid("topics", str(exc)) from exc
        for fmt in self.raw["network"]["formats"]:
            if fmt not in ("gexf", "graphml", "edge_csv"):
                raise ConfigInvalid("network.formats", f"unknown format {fmt!r}")


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Load a TOML config file merged over the defaults, then CLI overrides."""
    raw = copy.deepcopy(DEFAULTS)
    base_dir = Path.cwd()
    if path is not None:
        p = Path(path)
        try:
            with open(p, "rb") as fh:
                raw = _merge(raw, tomllib.load(fh))
        except FileNotFoundError:
            raise ConfigInvalid("config", f"{path} does not exist") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigInvalid("config", f"TOML parse error: {exc}") from None
        base_dir = p.resolve().parent
    if overrides:
        raw = _merge(raw, overrides)
    return RunConfig(raw=raw, base_dir=base_dir)
