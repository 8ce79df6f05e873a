"""Parsers for RIS, MEDLINE/nbib, and canonical-CSV bibliographic exports.

Tag subsets actually consumed (everything else is ignored, never fabricated):

RIS (``TAG  - value`` lines, records end at ``ER``):
  TY        record start / type
  TI / T1   title
  AB / N2   abstract
  AU / A1   author "Last, First" (one tag per author)
  AD        affiliation for the most recent author, "Institution, Country"
  PY / Y1   year (Y1 may carry "YYYY/MM/DD")
  DO        DOI
  LA        language
  AN / ID   stable source identifier

MEDLINE/nbib (4-char tag padded with spaces, then "- "; continuation lines
start with six spaces; records separated by blank lines):
  PMID      record start / identifier
  TI, AB    title, abstract
  FAU / AU  author ("Last, First" in FAU)
  AD        affiliation for the most recent author
  DP        date of publication ("2021 May 12")
  LID/AID   DOI when suffixed with "[doi]"
  LA        language
  PT        publication type; "Retracted Publication" marks retraction

CSV: the canonical corpus schema (see records module).

Per-record failures are collected as MalformedRecord entries and parsing
continues; only unreadable/empty files raise.
"""
from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field

from .records import (
    AuthorRef,
    BiblioRecord,
    CORPUS_HEADER,
    EmptyFile,
    FileUnreadable,
    normalize_doi,
    normalize_language,
)

FORMATS = ("ris", "medline", "csv")

_RIS_TAG_RE = re.compile(r"^([A-Z][A-Z0-9])\s*-\s?(.*)$")
_MEDLINE_TAG_RE = re.compile(r"^([A-Z0-9]{1,4})\s*- (.*)$")

_MONTHS = {
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "may": 5, "jun": 6,
    "jul": 7, "aug": 8, "sep": 9, "oct": 10, "nov": 11, "dec": 12,
}


@dataclass
class MalformedRecord:
    """One record (or field) that could not be parsed; ordinal is 1-based."""

    ordinal: int
    reason: str


@dataclass
class ParseResult:
    records: list[BiblioRecord] = field(default_factory=list)
    problems: list[MalformedRecord] = field(default_factory=list)


def parse_records(path, format: str) -> ParseResult:
    """Parse a bibliographic export into BiblioRecords.

    Decodes as UTF-8 with lossy replacement for stray bytes. Unparseable
    fields are left empty; whole-record failures land in ``problems``.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}, expected one of {FORMATS}")
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise FileUnreadable(str(path)) from exc
    text = raw.decode("utf-8", errors="replace")
    if text.startswith("﻿"):
        text = text[1:]
    if format == "ris":
        result = _parse_ris(text)
    elif format == "medline":
        result = _parse_medline(text)
    else:
        result = _parse_csv(text)
    if not result.records and not result.problems:
        raise EmptyFile(str(path))
    _dedupe_record_ids(result.records)
    return result


def _dedupe_record_ids(records: list[BiblioRecord]) -> None:
    # record_id must be unique within a corpus; collide → suffix by occurrence
    seen: dict[str, int] = {}
    for r in records:
        n = seen.get(r.record_id, 0)
        seen[r.record_id] = n + 1
        if n:
            r.record_id = f"{r.record_id}#{n + 1}"


def _split_author_name(name: str) -> tuple[str, str]:
    if "," in name:
        last, first = name.split(",", 1)
        return last.strip(), first.strip()
    parts = name.strip().rsplit(" ", 1)
    if len(parts) == 2:
        # "First Last" order; keep the final token as the family name
        return parts[1].strip(), parts[0].strip()
    return name.strip(), ""


def _split_affiliation(text: str) -> tuple[str, str]:
    """Split "Institution, Country" on the last comma; no comma → no country."""
    if "," in text:
        inst, country = text.rsplit(",", 1)
        return inst.strip(), country.strip()
    return text.strip(), ""


def _parse_ris(text: str) -> ParseResult:
    result = ParseResult()
    fields: dict[str, list[str]] = {}
    authors: list[AuthorRef] = []
    ordinal = 0
    in_record = False
    last_tag = None

    def flush():
        nonlocal fields, authors, in_record, last_tag
        if in_record:
            result.records.append(_ris_record(fields, authors, ordinal, result))
        fields, authors, in_record, last_tag = {}, [], False, None

    for line in text.splitlines():
        if not line.strip():
            continue
        m = _RIS_TAG_RE.match(line)
        if not m:
            # continuation of the previous tag's value
            if in_record and last_tag:
                fields[last_tag][-1] += " " + line.strip()
            continue
        tag, value = m.group(1), m.group(2).strip()
        if tag == "TY":
            flush()
            ordinal += 1
            in_record = True
        if not in_record:
            # tag before any TY: treat as an implicit record start
            ordinal += 1
            in_record = True
        if tag == "ER":
            flush()
            continue
        if tag in ("AU", "A1"):
            last, first = _split_author_name(value)
            authors.append(AuthorRef(last, first))
        elif tag == "AD":
            if authors:
                authors[-1].affiliations.append(_split_affiliation(value))
            else:
                result.problems.append(
                    MalformedRecord(ordinal, "AD line before any AU; affiliation dropped")
                )
        else:
            fields.setdefault(tag, []).append(value)
        last_tag = tag
    flush()
    return result


def _ris_record(fields, authors, ordinal, result) -> BiblioRecord:
    def first(*tags):
        for t in tags:
            if fields.get(t):
                return fields[t][0]
        return ""

    year = None
    month = None
    for raw in (first("PY"), first("Y1"), first("DA")):
        if not raw:
            continue
        m = re.search(r"\d{4}", raw)
        if m and year is None:
            year = int(m.group(0))
            parts = raw.split("/")
            if len(parts) > 1 and parts[1].strip().isdigit():
                mo = int(parts[1])
                if 1 <= mo <= 12:
                    month = mo
            break
    raw_doi = first("DO")
    doi = normalize_doi(raw_doi)
    if raw_doi and doi is None:
        result.problems.append(MalformedRecord(ordinal, f"unusable DOI {raw_doi!r}"))
    record_id = first("AN", "ID") or f"ris:{ordinal:06d}"
    return BiblioRecord(
        record_id=record_id,
        source_db="other",
        title=" ".join(first("TI", "T1").split()),
        abstract=" ".join(first("AB", "N2").split()),
        year=year,
        month=month,
        doi=doi,
        language=normalize_language(first("LA")),
        retracted=False,
        authors=authors,
    )


def _parse_medline(text: str) -> ParseResult:
    result = ParseResult()
    # fold continuation lines (indented) into their tag line
    logical: list[str] = []
    for line in text.splitlines():
        if line.startswith("      ") and logical:
            logical[-1] += " " + line.strip()
        else:
            logical.append(line)

    blocks: list[list[str]] = [[]]
    for line in logical:
        if line.strip():
            blocks[-1].append(line)
        elif blocks[-1]:
            blocks.append([])
    blocks = [b for b in blocks if b]

    for ordinal, block in enumerate(blocks, start=1):
        fields: dict[str, list[str]] = {}
        authors: list[AuthorRef] = []
        # AU normally repeats the preceding FAU in short form; track which
        # authors already absorbed their AU so pure-AU records still work.
        au_pending = 0
        ok = False
        for line in block:
            m = _MEDLINE_TAG_RE.match(line)
            if not m:
                result.problems.append(
                    MalformedRecord(ordinal, f"unrecognized line {line[:40]!r}")
                )
                continue
            tag, value = m.group(1), m.group(2).strip()
            ok = True
            if tag == "FAU":
                last, firstname = _split_author_name(value)
                authors.append(AuthorRef(last, firstname))
                au_pending += 1
            elif tag == "AU":
                if au_pending > 0:
                    au_pending -= 1
                else:
                    last, firstname = _split_author_name(value)
                    authors.append(AuthorRef(last, firstname))
            elif tag == "AD":
                if authors:
                    authors[-1].affiliations.append(_split_affiliation(value))
                else:
                    result.problems.append(
                        MalformedRecord(ordinal, "AD line before any FAU; affiliation dropped")
                    )
            else:
                fields.setdefault(tag, []).append(value)
        if not ok:
            continue

        def first(*tags):
            for t in tags:
                if fields.get(t):
                    return fields[t][0]
            return ""

        year = None
        month = None
        dp = first("DP")
        if dp:
            m = re.search(r"\d{4}", dp)
            if m:
                year = int(m.group(0))
            mm = re.search(r"\b([A-Za-z]{3})\b", dp)
            if mm:
                month = _MONTHS.get(mm.group(1).lower())
        doi = None
        for tag in ("LID", "AID"):
            for value in fields.get(tag, []):
                if "[doi]" in value:
                    doi = normalize_doi(value.replace("[doi]", "").strip())
                    break
            if doi:
                break
        retracted = any("retracted publication" in v.lower() for v in fields.get("PT", []))
        record_id = first("PMID") or f"medline:{ordinal:06d}"
        result.records.append(
            BiblioRecord(
                record_id=record_id,
                source_db="pubmed",
                title=" ".join(first("TI").split()),
                abstract=" ".join(first("AB").split()),
                year=year,
                month=month,
                doi=doi,
                language=normalize_language(first("LA")),
                retracted=retracted,
                authors=authors,
            )
        )
    return result


def _parse_csv(text: str) -> ParseResult:
    result = ParseResult()
    reader = csv.reader(text.splitlines())
    header = next(reader, None)
    if header is None:
        return result
    if header != CORPUS_HEADER:
        raise FileUnreadable("not a canonical corpus CSV (bad header)")
    for ordinal, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != len(CORPUS_HEADER):
            result.problems.append(
                MalformedRecord(ordinal, f"expected {len(CORPUS_HEADER)} columns, got {len(row)}")
            )
            continue
        rid, source_db, title, abstract, year, month, doi_raw, language, retracted, authors_raw = row
        authors: list[AuthorRef] = []
        if authors_raw.strip():
            try:
                authors = [AuthorRef.from_json_obj(o) for o in json.loads(authors_raw)]
            except (json.JSONDecodeError, AttributeError, TypeError):
                result.problems.append(MalformedRecord(ordinal, "bad authors_json; authors left empty"))
        doi = normalize_doi(doi_raw)
        if doi_raw.strip() and doi is None:
            result.problems.append(MalformedRecord(ordinal, f"unusable DOI {doi_raw!r}"))
        try:
            year_val = int(year) if year.strip() else None
        except ValueError:
            year_val = None
            result.problems.append(MalformedRecord(ordinal, f"bad year {year!r}; left empty"))
        try:
            month_val = int(month) if month.strip() else None
        except ValueError:
            month_val = None
        result.records.append(
            BiblioRecord(
                record_id=rid or f"csv:{ordinal:06d}",
                source_db=source_db if source_db in ("pubmed", "scopus", "wos") else "other",
                title=title,
                abstract=abstract,
                year=year_val,
                month=month_val,
                doi=doi,
                language=normalize_language(language),
                retracted=retracted.strip().lower() in ("true", "1", "yes"),
                authors=authors,
            )
        )
    return result
