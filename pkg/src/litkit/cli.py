"""Command-line pipeline: ingest, prep, embed, topics, eval, network,
summarize, all, verify.

Each stage reads the previous stage's artifacts from the output directory,
writes its own, and records content hashes in the run manifest. A stage whose
input hashes, config hash, and outputs are unchanged is skipped unless
--force is given.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import evalmetrics, network, screening, summarize, textprep, topicmodel
from .config import ConfigInvalid, RunConfig, load_config
from .embeddings import (
    fetch_embeddings,
    hash_embed,
    load_embeddings,
    save_embeddings,
)
from .manifest import Manifest, MissingUpstreamArtifact, text_sha256
from .parsers import parse_records
from .records import EmptyFile, FileUnreadable, read_corpus_csv, write_corpus_csv
from .screening import build_corpus_text

log = logging.getLogger("litkit")

STAGES = ["ingest", "prep", "embed", "topics", "eval", "network", "summarize"]


class _Paths:
    def __init__(self, out: Path):
        self.out = out
        self.corpus = out / "corpus.csv"
        self.prisma_txt = out / "prisma_report.txt"
        self.prisma_csv = out / "prisma_report.csv"
        self.sanitized = out / "sanitized.jsonl"
        self.bigrams = out / "bigrams.json"
        self.doc_emb = out / "doc_embeddings.tsv"
        self.word_emb = out / "word_embeddings.tsv"
        self.topics = out / "topics.jsonl"
        self.assignment = out / "assignment.csv"
        self.topic_details = out / "topic_details.json"
        self.model_report = out / "model_report.json"
        self.report_table = out / "report_table.txt"
        self.network_summary = out / "network_summary.json"
        self.descriptions = out / "descriptions.jsonl"
        self.audit = out / "audit"
        self.manifest = out / "manifest.json"


def _producer_of(paths: _Paths, missing: str) -> str | None:
    """Which stage writes the given artifact path."""
    producers = {
        str(paths.corpus): "ingest",
        str(paths.prisma_txt): "ingest",
        str(paths.prisma_csv): "ingest",
        str(paths.sanitized): "prep",
        str(paths.bigrams): "prep",
        str(paths.doc_emb): "embed",
        str(paths.word_emb): "embed",
        str(paths.topics): "topics",
        str(paths.assignment): "topics",
        str(paths.topic_details): "topics",
        str(paths.model_report): "eval",
        str(paths.report_table): "eval",
    }
    return producers.get(missing)


def _stage(name: str, config: RunConfig, manifest: Manifest, sections: tuple[str, ...],
           inputs: list[Path], force: bool, paths: _Paths):
    """Returns (input_hashes, config_hash, skip)."""
    try:
        input_hashes = manifest.require_inputs(name, inputs)
    except MissingUpstreamArtifact as exc:
        producer = _producer_of(paths, exc.path)
        if producer and producer != name:
            raise MissingUpstreamArtifact(producer, exc.path) from None
        raise
    config_hash = text_sha256(config.section_hashable(*sections))
    skip = not force and manifest.can_skip(name, input_hashes, config_hash)
    return input_hashes, config_hash, skip


def _run_stage(name, config, manifest, sections, inputs, force, fn, paths) -> bool:
    input_hashes, config_hash, skip = _stage(name, config, manifest, sections, inputs, force, paths)
    if skip:
        log.info("stage %s: inputs unchanged, skipping", name)
        manifest.record(name, input_hashes, config_hash, [], 0.0, skipped=True)
        manifest.save()
        return False
    start = time.monotonic()
    outputs = fn()
    manifest.record(name, input_hashes, config_hash, outputs, time.monotonic() - start)
    manifest.save()
    log.info("stage %s: wrote %d artifacts", name, len(outputs))
    return True


def cmd_ingest(config: RunConfig, paths: _Paths, manifest: Manifest, force: bool):
    inputs = config.corpus_inputs()
    if not inputs:
        raise ConfigInvalid("corpus.inputs", "no corpus inputs configured")

    def run():
        records = []
        for path, fmt in inputs:
            result = parse_records(path, fmt)
            for problem in result.problems:
                log.warning("%s record %d: %s", path, problem.ordinal, problem.reason)
            records.extend(result.records)
        kept, report = screening.screen(records, config.raw["screen"]["relevance_terms"])
        write_corpus_csv(kept, paths.corpus)
        screening.write_prisma_text(report, paths.prisma_txt)
        screening.write_prisma_csv(report, paths.prisma_csv)
        log.info("PRISMA: %s", report.as_dict())
        return [paths.corpus, paths.prisma_txt, paths.prisma_csv]

    return _run_stage("ingest", config, manifest, ("corpus", "screen"),
                      [p for p, _ in inputs], force, run, paths)


def cmd_prep(config: RunConfig, paths: _Paths, manifest: Manifest, force: bool):
    def run():
        records = read_corpus_csv(paths.corpus)
        tp_conf = config.raw["textprep"]
        stopwords = textprep.load_stopwords(
            tp_conf["stopword_file"] or None, tp_conf["extra_stopwords"]
        )
        lemmatizer = (
            textprep.Lemmatizer.from_file(tp_conf["lemma_file"])
            if tp_conf["lemma_file"] else None
        )
        prep = textprep.TextPrep(
            stopwords=stopwords,
            lemmatizer=lemmatizer,
            min_count=int(tp_conf["bigram_min_count"]),
            threshold=float(tp_conf["bigram_threshold"]),
        )
        texts = [build_corpus_text(r) for r in records]
        prep.fit_bigrams(texts)
        docs = [prep.sanitize(r.record_id, t) for r, t in zip(records, texts)]
        textprep.write_sanitized_jsonl(docs, paths.sanitized)
        prep.bigrams.save(paths.bigrams)
        return [paths.sanitized, paths.bigrams]

    return _run_stage("prep", config, manifest, ("textprep",), [paths.corpus], force, run, paths)


def cmd_embed(config: RunConfig, paths: _Paths, manifest: Manifest, force: bool):
    provider = config.provider_config()

    def run():
        records = read_corpus_csv(paths.corpus)
        docs = textprep.read_sanitized_jsonl(paths.sanitized)
        doc_texts = [(r.record_id, build_corpus_text(r)) for r in records]
        vocab = sorted({t for d in docs for t in d.tokens})
        if provider.mode == "hash":
            doc_matrix = hash_embed(doc_texts, provider.dim, kind="document")
            word_matrix = hash_embed([(w, w.replace("_", " ")) for w in vocab],
                                     provider.dim, kind="word")
        elif provider.mode == "http":
            doc_matrix = fetch_embeddings(doc_texts, provider, kind="document")
            word_matrix = fetch_embeddings([(w, w.replace("_", " ")) for w in vocab],
                                           provider, kind="word")
        else:
            e = config.raw["embedding"]
            doc_matrix = load_embeddings(config.base_dir / e["doc_file"])
            word_matrix = (
                load_embeddings(config.base_dir / e["word_file"]) if e["word_file"] else None
            )
        save_embeddings(doc_matrix, paths.doc_emb)
        outputs = [paths.doc_emb]
        if word_matrix is not None:
            save_embeddings(word_matrix, paths.word_emb)
            outputs.append(paths.word_emb)
        return outputs

    return _run_stage("embed", config, manifest, ("embedding",),
                      [paths.corpus, paths.sanitized], force, run, paths)


def _load_sanitized_map(paths: _Paths) -> dict[str, list[str]]:
    return {d.record_id: d.tokens for d in textprep.read_sanitized_jsonl(paths.sanitized)}


def cmd_topics(config: RunConfig, paths: _Paths, manifest: Manifest, force: bool):
    def run():
        doc_matrix = load_embeddings(paths.doc_emb)
        word_matrix = load_embeddings(paths.word_emb) if paths.word_emb.exists() else None
        sanitized = _load_sanitized_map(paths)
        assignment, topics = topicmodel.fit(
            doc_matrix, word_matrix, sanitized, config.topic_config()
        )
        topicmodel.write_topics_jsonl(topics, paths.topics)
        topicmodel.write_assignment_csv(assignment, paths.assignment)
        details = {
            str(t.topic_id): {
                "term_dist": {k: t.term_dist[k] for k in sorted(t.term_dist)},
                "centroid": [float(x) for x in t.centroid],
                "doc_ids": t.doc_ids,
                "keywords": [[k, s] for k, s in t.keywords],
            }
            for t in topics
        }
        with open(paths.topic_details, "w", encoding="utf-8") as fh:
            json.dump(details, fh, sort_keys=True)
            fh.write("\n")
        log.info("extracted %d topics (%d docs noise)", len(topics),
                 sum(1 for v in assignment.labels.values() if v < 0))
        return [paths.topics, paths.assignment, paths.topic_details]

    inputs = [paths.doc_emb, paths.sanitized]
    if paths.word_emb.exists():
        inputs.append(paths.word_emb)
    return _run_stage("topics", config, manifest, ("topics",), inputs, force, run, paths)


def _load_topics(paths: _Paths) -> list[topicmodel.Topic]:
    with open(paths.topic_details, "r", encoding="utf-8") as fh:
        details = json.load(fh)
    topics = []
    for tid_str, d in sorted(details.items(), key=lambda kv: int(kv[0])):
        topics.append(
            topicmodel.Topic(
                topic_id=int(tid_str),
                doc_ids=list(d["doc_ids"]),
                term_dist=dict(d["term_dist"]),
                keywords=[(k, float(s)) for k, s in d["keywords"]],
                centroid=np.array(d["centroid"], dtype=np.float64),
            )
        )
    return topics


def cmd_eval(config: RunConfig, paths: _Paths, manifest: Manifest, force: bool):
    def run():
        topics = _load_topics(paths)
        assignment = topicmodel.read_assignment_csv(paths.assignment)
        sanitized = _load_sanitized_map(paths)
        report = evalmetrics.evaluate_model("litkit", assignment, topics, sanitized)
        report.save_json(paths.model_report)
        with open(paths.report_table, "w", encoding="utf-8") as fh:
            fh.write(evalmetrics.render_comparison_table([report]))
        log.info("evaluated model: %d topics, diversity %.3f", report.n_topics, report.diversity)
        return [paths.model_report, paths.report_table]

    return _run_stage("eval", config, manifest, ("topics",),
                      [paths.topic_details, paths.assignment, paths.sanitized], force, run, paths)


def _top_topics_for(config: RunConfig, paths: _Paths, k: int) -> list[int]:
    with open(paths.model_report, "r", encoding="utf-8") as fh:
        report = json.load(fh)
    significance = {int(t): v for t, v in report["per_topic_significance"].items()}
    try:
        return evalmetrics.select_top_significant(significance, k)
    except evalmetrics.NotEnoughTopics:
        log.warning("only %d topics available; using all of them", len(significance))
        return evalmetrics.select_top_significant(significance, len(significance))


def cmd_network(config: RunConfig, paths: _Paths, manifest: Manifest, force: bool):
    net_conf = config.raw["network"]

    def run():
        records = read_corpus_csv(paths.corpus)
        aliases = None
        if net_conf["alias_file"]:
            aliases = network.load_alias_map(config.base_dir / net_conf["alias_file"])
        outputs = []
        summary = {}
        for kind in network.KINDS:
            threshold = int(net_conf[f"{kind}_threshold"])
            g = network.build_graph(records, kind, aliases)
            ranked_path = paths.out / f"rankings_{kind}.csv"
            network.write_rankings_csv(g.nodes, ranked_path)
            outputs.append(ranked_path)
            filtered = network.filter_graph(g, threshold)
            partition = None
            if filtered.nodes:
                partition = network.detect_communities(filtered, seed=config.seed)
                comm_path = paths.out / f"communities_{kind}.csv"
                with open(comm_path, "w", encoding="utf-8", newline="") as fh:
                    fh.write("entity,community\n")
                    for entity in sorted(partition.assignment):
                        fh.write(f"{entity},{partition.assignment[entity]}\n")
                outputs.append(comm_path)
            for fmt in net_conf["formats"]:
                suffix = {"gexf": ".gexf", "graphml": ".graphml", "edge_csv": "_edges.csv"}[fmt]
                path = paths.out / f"network_{kind}{suffix}"
                network.export_graph(filtered, partition, path, fmt)
                outputs.append(path)
            summary[kind] = {
                "nodes": len(filtered.nodes),
                "edges": len(filtered.edges),
                "threshold": threshold,
                "modularity": None if partition is None else round(partition.modularity, 9),
            }
        # per-topic entity counts over the most significant topics
        if paths.assignment.exists() and paths.model_report.exists():
            assignment = topicmodel.read_assignment_csv(paths.assignment)
            top = _top_topics_for(config, paths, int(config.raw["summarize"]["top_topics"]))
            for kind in network.KINDS:
                graphs = network.topicwise(records, assignment, top, kind, aliases)
                path = paths.out / f"topicwise_{kind}.csv"
                network.write_topicwise_counts_csv(graphs, path)
                outputs.append(path)
            summary["topicwise_topics"] = top
        with open(paths.network_summary, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs.append(paths.network_summary)
        return outputs

    inputs = [paths.corpus]
    for optional in (paths.assignment, paths.model_report):
        if optional.exists():
            inputs.append(optional)
    return _run_stage("network", config, manifest, ("network", "summarize"),
                      inputs, force, run, paths)


def cmd_summarize(config: RunConfig, paths: _Paths, manifest: Manifest, force: bool):
    def run():
        records = {r.record_id: r for r in read_corpus_csv(paths.corpus)}
        topics = _load_topics(paths)
        by_id = {t.topic_id: t for t in topics}
        s_conf = config.raw["summarize"]
        top = _top_topics_for(config, paths, int(s_conf["top_topics"]))
        chat = config.chat_config()
        descriptions = []
        for tid in top:
            topic = by_id[tid]
            abstracts = [(rid, records[rid].abstract) for rid in topic.doc_ids]
            plan = summarize.plan_chunks(abstracts, int(s_conf["token_budget"]), topic_id=tid)
            descriptions.append(
                summarize.summarize_topic(
                    plan, dict(abstracts), chat, audit_dir=paths.audit
                )
            )
        summarize.write_descriptions_jsonl(descriptions, paths.descriptions)
        return [paths.descriptions]

    return _run_stage("summarize", config, manifest, ("summarize",),
                      [paths.corpus, paths.topic_details, paths.model_report], force, run, paths)


def cmd_all(config: RunConfig, paths: _Paths, manifest: Manifest, force: bool):
    cmd_ingest(config, paths, manifest, force)
    cmd_prep(config, paths, manifest, force)
    cmd_embed(config, paths, manifest, force)
    cmd_topics(config, paths, manifest, force)
    cmd_eval(config, paths, manifest, force)
    cmd_network(config, paths, manifest, force)
    cmd_summarize(config, paths, manifest, force)


def cmd_verify(config: RunConfig, paths: _Paths, manifest: Manifest, force: bool):
    problems = manifest.verify()
    if problems:
        for p in problems:
            print(f"FAIL {p}")
        raise SystemExit(1)
    print(f"ok: {len(manifest.stages)} stages verified")


_COMMANDS = {
    "ingest": cmd_ingest,
    "prep": cmd_prep,
    "embed": cmd_embed,
    "topics": cmd_topics,
    "eval": cmd_eval,
    "network": cmd_network,
    "summarize": cmd_summarize,
    "all": cmd_all,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="litkit",
        description="Bibliometric screening, topic extraction/evaluation, "
                    "collaboration networks, and topic summaries.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="TOML config file")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, help="random seed (overrides config)")
    parser.add_argument("--jobs", type=int, help="parallelism cap (overrides config)")
    parser.add_argument("--force", action="store_true",
                        help="re-run stages even when inputs are unchanged")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    overrides: dict = {"run": {}}
    if args.out:
        overrides["run"]["out_dir"] = args.out
    if args.seed is not None:
        overrides["run"]["seed"] = args.seed
    if args.jobs is not None:
        overrides["run"]["jobs"] = args.jobs

    try:
        config = load_config(args.config, overrides)
        config.validate()
        paths = _Paths(config.out_dir)
        paths.out.mkdir(parents=True, exist_ok=True)
        manifest = Manifest(paths.manifest)
        _COMMANDS[args.command](config, paths, manifest, args.force)
    except (ConfigInvalid, MissingUpstreamArtifact) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, EmptyFile, FileUnreadable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
