"""Map-reduce topic descriptions through a chat endpoint, plus the
human-evaluation arithmetic (comprehensiveness and Cohen's kappa).

Chunking packs abstracts greedily in order under a token budget estimated as
ceil(characters / 4). Each chunk is summarized with the chunk prompt (map);
the concatenated chunk summaries are condensed with the reduce prompt, whose
completion's first line is the topic title and the remainder the summary. The
reduce step runs even for single-chunk topics. Every request/response pair is
written to an audit directory.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import requests

log = logging.getLogger(__name__)


class EmptyTopic(Exception):
    """No abstracts to summarize."""


class EndpointError(Exception):
    def __init__(self, chunk_index: int, reason: str):
        super().__init__(f"chunk {chunk_index}: {reason}")
        self.chunk_index = chunk_index


class MalformedCompletion(Exception):
    """The reduce completion has no title line or no summary body."""


class EmptySheet(Exception):
    """An evaluation sheet with no ratings."""


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


@dataclass
class ChunkPlan:
    topic_id: int
    chunks: list[list[str]]  # ordered abstract-id lists
    token_budget: int
    oversized: list[str] = field(default_factory=list)


def plan_chunks(abstracts: list[tuple[str, str]], token_budget: int, topic_id: int = 0) -> ChunkPlan:
    """Greedy in-order packing of (id, text) abstracts under the budget.

    An abstract whose own estimate exceeds the budget becomes its own
    over-budget chunk and is flagged.
    """
    if not abstracts:
        raise EmptyTopic(f"topic {topic_id} has no abstracts")
    if token_budget < 1:
        raise ValueError("token_budget must be >= 1")
    chunks: list[list[str]] = []
    oversized: list[str] = []
    current: list[str] = []
    current_tokens = 0
    for aid, text in abstracts:
        est = estimate_tokens(text)
        if est > token_budget:
            if current:
                chunks.append(current)
                current, current_tokens = [], 0
            chunks.append([aid])
            oversized.append(aid)
            log.warning("abstract %s alone estimates %d tokens over budget %d",
                        aid, est, token_budget)
            continue
        if current and current_tokens + est > token_budget:
            chunks.append(current)
            current, current_tokens = [], 0
        current.append(aid)
        current_tokens += est
    if current:
        chunks.append(current)
    return ChunkPlan(topic_id=topic_id, chunks=chunks, token_budget=token_budget,
                     oversized=oversized)


@dataclass
class ChatEndpointConfig:
    endpoint: str = "mock"  # "mock" or a base URL serving POST /v1/chat
    model: str = "mock-model"
    api_key_env: str = ""
    timeout: float = 60.0
    max_concurrency: int = 4
    retry_base_delay: float = 0.5


class MockChatClient:
    """Deterministic stand-in: echoes the first sentence of the payload.

    The prompt templates end with a "TEXT:"/"SUMMARIES:" section; the mock
    summarizes whatever follows that marker. For reduce prompts it also emits
    a title line built from the payload's first words.
    """

    def chat(self, messages: list[dict], model: str = "") -> str:
        content = messages[-1]["content"]
        reduce_mode = "SUMMARIES:\n" in content
        marker = "SUMMARIES:\n" if reduce_mode else "TEXT:\n"
        payload = content.split(marker, 1)[-1].strip()
        sentence = payload.split(".", 1)[0].strip()
        if reduce_mode:
            title = " ".join(payload.split()[:6])
            return f"{title}\n{sentence}."
        return f"{sentence}."


class HttpChatClient:
    def __init__(self, config: ChatEndpointConfig):
        self.config = config
        self.url = config.endpoint.rstrip("/")
        if not self.url.endswith("/v1/chat"):
            self.url += "/v1/chat"

    def chat(self, messages: list[dict], model: str = "") -> str:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env) if self.config.api_key_env else None
        if key:
            headers["Authorization"] = f"Bearer {key}"
        resp = requests.post(
            self.url,
            json={"model": model or self.config.model, "messages": messages},
            headers=headers,
            timeout=self.config.timeout,
        )
        if resp.status_code != 200:
            raise RuntimeError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        return str(resp.json()["content"])


def make_client(config: ChatEndpointConfig):
    if config.endpoint == "mock":
        return MockChatClient()
    return HttpChatClient(config)


def load_prompt_templates(
    chunk_path=None, reduce_path=None
) -> tuple[str, str]:
    if chunk_path is None:
        chunk = resources.files("litkit.data").joinpath("prompts/chunk_prompt.txt").read_text("utf-8")
    else:
        chunk = Path(chunk_path).read_text("utf-8")
    if reduce_path is None:
        reduce_ = resources.files("litkit.data").joinpath("prompts/reduce_prompt.txt").read_text("utf-8")
    else:
        reduce_ = Path(reduce_path).read_text("utf-8")
    return chunk, reduce_


def prompt_fingerprint(chunk_template: str, reduce_template: str) -> str:
    digest = hashlib.blake2b(
        chunk_template.encode("utf-8") + b"\x00" + reduce_template.encode("utf-8"),
        digest_size=8,
    )
    return digest.hexdigest()


@dataclass
class TopicDescription:
    topic_id: int
    title: str
    summary: str
    chunk_summaries: list[str]
    model_name: str
    prompt_fingerprint: str

    def as_dict(self) -> dict:
        return {
            "topic_id": self.topic_id,
            "title": self.title,
            "summary": self.summary,
            "chunk_summaries": self.chunk_summaries,
            "model_name": self.model_name,
            "prompt_fingerprint": self.prompt_fingerprint,
        }


def _complete_with_retries(client, messages, model, chunk_index, retry_base_delay):
    last = None
    for attempt in range(3):
        if attempt:
            time.sleep(retry_base_delay * (2 ** (attempt - 1)))
        try:
            return client.chat(messages, model=model), attempt + 1
        except Exception as exc:  # endpoint failures of any flavor
            last = exc
            log.warning("completion attempt %d failed: %s", attempt + 1, exc)
    raise EndpointError(chunk_index, str(last))


def summarize_topic(
    plan: ChunkPlan,
    abstracts: dict[str, str],
    config: ChatEndpointConfig,
    audit_dir=None,
    templates: tuple[str, str] | None = None,
) -> TopicDescription:
    """Run the map and reduce completions for one topic."""
    chunk_template, reduce_template = templates or load_prompt_templates()
    client = make_client(config)
    audit = Path(audit_dir) if audit_dir else None
    if audit:
        audit.mkdir(parents=True, exist_ok=True)

    def run_chunk(i_chunk):
        i, chunk = i_chunk
        text = "\n\n".join(abstracts[aid] for aid in chunk)
        messages = [{"role": "user", "content": chunk_template.format(text=text)}]
        reply, attempts = _complete_with_retries(
            client, messages, config.model, i, config.retry_base_delay
        )
        if audit:
            _write_audit(audit, f"topic{plan.topic_id:03d}_chunk{i:03d}.json",
                         messages, reply, attempts)
        return reply.strip()

    with ThreadPoolExecutor(max_workers=max(1, config.max_concurrency)) as pool:
        chunk_summaries = list(pool.map(run_chunk, enumerate(plan.chunks)))

    joined = "\n\n".join(chunk_summaries)
    messages = [{"role": "user", "content": reduce_template.format(text=joined)}]
    reply, attempts = _complete_with_retries(
        client, messages, config.model, -1, config.retry_base_delay
    )
    if audit:
        _write_audit(audit, f"topic{plan.topic_id:03d}_reduce.json", messages, reply, attempts)

    lines = [ln for ln in reply.strip().splitlines()]
    while lines and not lines[0].strip():
        lines.pop(0)
    if not lines:
        raise MalformedCompletion("empty completion")
    title = lines[0].strip()
    summary = "\n".join(lines[1:]).strip()
    if not title or not summary:
        raise MalformedCompletion("completion needs a title line and a summary body")
    return TopicDescription(
        topic_id=plan.topic_id,
        title=title,
        summary=summary,
        chunk_summaries=chunk_summaries,
        model_name=config.model,
        prompt_fingerprint=prompt_fingerprint(chunk_template, reduce_template),
    )


def _write_audit(audit: Path, name: str, messages, reply: str, attempts: int) -> None:
    with open(audit / name, "w", encoding="utf-8") as fh:
        json.dump({"request": {"messages": messages}, "response": reply,
                   "attempts": attempts}, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def write_descriptions_jsonl(descriptions: list[TopicDescription], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in descriptions:
            fh.write(json.dumps(d.as_dict(), ensure_ascii=False, sort_keys=True) + "\n")


# --- human-evaluation arithmetic ---


@dataclass
class EvaluationSheet:
    topic_id: int
    ratings: dict[str, tuple[bool, bool]]  # abstract_id -> (rater1 yes, rater2 yes)


def comprehensiveness(sheet: EvaluationSheet) -> float:
    """Fraction of abstracts both raters judged consistent (yes, yes)."""
    if not sheet.ratings:
        raise EmptySheet(f"topic {sheet.topic_id}")
    unanimous = sum(1 for r1, r2 in sheet.ratings.values() if r1 and r2)
    return unanimous / len(sheet.ratings)


def cohens_kappa(sheet: EvaluationSheet) -> float:
    """Chance-corrected two-rater agreement over yes/no judgments.

    With degenerate marginals (expected agreement 1) the convention is 1 when
    observed agreement is perfect, else 0.
    """
    n = len(sheet.ratings)
    if n < 2:
        raise ValueError("kappa needs at least 2 ratings")
    pairs = list(sheet.ratings.values())
    p_o = sum(1 for r1, r2 in pairs if r1 == r2) / n
    yes1 = sum(1 for r1, _ in pairs if r1) / n
    yes2 = sum(1 for _, r2 in pairs if r2) / n
    p_e = yes1 * yes2 + (1 - yes1) * (1 - yes2)
    if abs(1.0 - p_e) < 1e-15:
        log.warning("topic %d: degenerate marginals, conventional kappa used", sheet.topic_id)
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def read_ratings_csv(path) -> dict[str, dict[int, EvaluationSheet]]:
    """Load ``model,topic_id,abstract_id,rater1,rater2`` rows into sheets.

    A header with only ``topic_id,abstract_id,rater1,rater2`` is accepted for
    single-model files (model name "default").
    """
    by_model: dict[str, dict[int, EvaluationSheet]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptySheet(str(path))
        has_model = header[0].strip().lower() == "model"
        for row in reader:
            if not row:
                continue
            if has_model:
                model, topic_id, abstract_id, r1, r2 = row
            else:
                model = "default"
                topic_id, abstract_id, r1, r2 = row
            sheets = by_model.setdefault(model, {})
            tid = int(topic_id)
            sheet = sheets.setdefault(tid, EvaluationSheet(topic_id=tid, ratings={}))
            sheet.ratings[abstract_id] = (_yes(r1), _yes(r2))
    return by_model


def _yes(value: str) -> bool:
    v = value.strip().lower()
    if v in ("yes", "y", "1", "true"):
        return True
    if v in ("no", "n", "0", "false"):
        return False
    raise ValueError(f"rating must be yes/no, got {value!r}")


def mean_comprehensiveness(sheets: dict[int, EvaluationSheet]) -> float:
    if not sheets:
        raise EmptySheet("no topics")
    values = [comprehensiveness(s) for s in sheets.values()]
    return sum(values) / len(values)


def comprehensiveness_wins(
    a: dict[int, EvaluationSheet], b: dict[int, EvaluationSheet]
) -> tuple[int, int]:
    """Per-topic strict wins of model a vs model b over their shared topics."""
    wins_a = wins_b = 0
    for tid in sorted(set(a) & set(b)):
        ca, cb = comprehensiveness(a[tid]), comprehensiveness(b[tid])
        if ca > cb:
            wins_a += 1
        elif cb > ca:
            wins_b += 1
    return wins_a, wins_b


def select_preferred_model(by_model: dict[str, dict[int, EvaluationSheet]]) -> str:
    """Pick the model whose descriptions align better with the abstracts.

    Models are compared by the number of topics where each one's
    comprehensiveness is strictly higher (ties between models broken by mean
    comprehensiveness, then by name). Counting per-topic wins rather than
    averaging keeps one easy topic from deciding the comparison.
    """
    if not by_model:
        raise EmptySheet("no models")
    names = sorted(by_model)
    if len(names) == 1:
        return names[0]
    shared = set.intersection(*(set(by_model[n]) for n in names))
    wins = {n: 0 for n in names}
    for tid in sorted(shared):
        values = {n: comprehensiveness(by_model[n][tid]) for n in names}
        best = max(values.values())
        leaders = [n for n, v in values.items() if v == best]
        if len(leaders) == 1:
            wins[leaders[0]] += 1
    return max(names, key=lambda n: (wins[n], mean_comprehensiveness(by_model[n]), n))


def render_evaluation_table(by_model: dict[str, dict[int, EvaluationSheet]]) -> str:
    """Per-topic doc/aligned counts, comprehensiveness, and kappa per model,
    with each model's mean comprehensiveness at the bottom."""
    names = sorted(by_model)
    topics = sorted({tid for sheets in by_model.values() for tid in sheets})
    header = ["Topic", "Docs"]
    for n in names:
        header += [f"{n} aligned", f"{n} compr", f"{n} kappa"]
    rows = []
    for tid in topics:
        docs = max(len(by_model[n][tid].ratings) for n in names if tid in by_model[n])
        row = [str(tid), str(docs)]
        for n in names:
            sheet = by_model[n].get(tid)
            if sheet is None:
                row += ["-", "-", "-"]
                continue
            aligned = sum(1 for r1, r2 in sheet.ratings.values() if r1 and r2)
            row += [str(aligned), f"{comprehensiveness(sheet):.2f}", f"{cohens_kappa(sheet):.2f}"]
        rows.append(row)
    mean_row = ["mean", ""]
    for n in names:
        mean_row += ["", f"{mean_comprehensiveness(by_model[n]):.4f}", ""]
    rows.append(mean_row)
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*header), "  ".join("-" * w for w in widths)]
    lines += [fmt.format(*row) for row in rows]
    return "\n".join(lines) + "\n"
