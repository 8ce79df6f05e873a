"""Deduplication and relevance/completeness screening with PRISMA accounting.

Removal reasons are applied in a fixed order and each record is counted under
the first reason that applies: duplicates, missing abstract, irrelevant
(title+abstract contains none of the relevance terms), non-English, retracted.
"""
from __future__ import annotations

import csv
import re

from .records import BiblioRecord, PrismaReport

DEFAULT_RELEVANCE_TERMS = ["disaster", "crisis", "pandemic", "COVID-19"]

_PUNCT_RE = re.compile(r"[^0-9a-z]+")


def _dedup_key(record: BiblioRecord):
    if record.doi:
        return ("doi", record.doi)
    title = _PUNCT_RE.sub(" ", record.title.casefold())
    return ("title", " ".join(title.split()), record.year)


def deduplicate(records: list[BiblioRecord]) -> tuple[list[BiblioRecord], int]:
    """Collapse records sharing a dedup key to the first occurrence.

    Key is the normalized DOI when present, else (normalized title, year).
    Order of kept records matches input order.
    """
    seen = set()
    kept = []
    for record in records:
        key = _dedup_key(record)
        if key in seen:
            continue
        seen.add(key)
        kept.append(record)
    return kept, len(records) - len(kept)


def is_relevant(record: BiblioRecord, terms_lower: list[str]) -> bool:
    haystack = f"{record.title} {record.abstract}".lower()
    return any(term in haystack for term in terms_lower)


def screen(
    records: list[BiblioRecord], relevance_terms: list[str] | None = None
) -> tuple[list[BiblioRecord], PrismaReport]:
    """Screen records and produce the PRISMA accounting report.

    A record survives when it is not a duplicate, has an abstract, mentions at
    least one relevance term (case-insensitive substring over title+abstract),
    is English (missing language counts as English), and is not retracted.
    """
    terms = relevance_terms if relevance_terms is not None else DEFAULT_RELEVANCE_TERMS
    if not terms:
        raise ValueError("relevance_terms must be non-empty")
    terms_lower = [t.lower() for t in terms]

    report = PrismaReport(collected=len(records))
    deduped, report.removed_duplicates = deduplicate(records)
    kept = []
    for record in deduped:
        if not record.abstract.strip():
            report.removed_no_abstract += 1
        elif not is_relevant(record, terms_lower):
            report.removed_irrelevant += 1
        elif record.language is not None and record.language != "en":
            report.removed_non_english += 1
        elif record.retracted:
            report.removed_retracted += 1
        else:
            kept.append(record)
    report.final = len(kept)
    report.check()
    return kept, report


def build_corpus_text(record: BiblioRecord) -> str:
    """Title and abstract joined by exactly one space; empty parts drop cleanly."""
    title = record.title.strip()
    abstract = record.abstract.strip()
    if title and abstract:
        return f"{title} {abstract}"
    return title or abstract


def write_prisma_text(report: PrismaReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in report.as_dict().items():
            fh.write(f"{key}={value}\n")


def write_prisma_csv(report: PrismaReport, path) -> None:
    data = report.as_dict()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(data))
        writer.writerow(list(data.values()))


def read_prisma_text(path) -> PrismaReport:
    report = PrismaReport()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, value = line.split("=", 1)
            if hasattr(report, key):
                setattr(report, key, int(value))
    report.check()
    return report
