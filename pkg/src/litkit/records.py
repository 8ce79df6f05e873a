"""Unified publication record model and the canonical corpus CSV format.

The canonical CSV is the interchange format every downstream stage loads:

    record_id,source_db,title,abstract,year,month,doi,language,retracted,authors_json

`authors_json` is a JSON array of {"last", "first", "affiliations": [{"institution",
"country"}]} objects. Missing year/month are empty cells; `retracted` is
"true"/"false". Files are UTF-8.
"""
from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field

SOURCE_DBS = ("pubmed", "scopus", "wos", "other")

_DOI_RE = re.compile(r"^10\.\d+/\S+$")
_DOI_PREFIXES = (
    "https://doi.org/",
    "http://doi.org/",
    "https://dx.doi.org/",
    "http://dx.doi.org/",
    "doi.org/",
    "doi:",
)

# Common non-ISO language spellings seen in exports; anything else is passed
# through lowercased and judged against "en" at screening time.
_LANGUAGE_ALIASES = {
    "eng": "en",
    "english": "en",
    "fre": "fr",
    "french": "fr",
    "ger": "de",
    "german": "de",
    "spa": "es",
    "spanish": "es",
    "chi": "zh",
    "chinese": "zh",
    "por": "pt",
    "ita": "it",
    "jpn": "ja",
    "rus": "ru",
}


class FileUnreadable(Exception):
    """The input file does not exist or cannot be opened."""


class EmptyFile(Exception):
    """The input file contains no records at all."""


def normalize_doi(raw: str | None) -> str | None:
    """Lowercase a DOI and strip URL/scheme prefixes; None if empty or invalid."""
    if not raw:
        return None
    doi = raw.strip().lower()
    for prefix in _DOI_PREFIXES:
        if doi.startswith(prefix):
            doi = doi[len(prefix):]
            break
    doi = doi.strip()
    return doi if _DOI_RE.match(doi) else None


def normalize_language(raw: str | None) -> str | None:
    if not raw:
        return None
    lang = raw.strip().lower()
    return _LANGUAGE_ALIASES.get(lang, lang) if lang else None


def _norm_ws(text: str) -> str:
    return " ".join(text.split())


@dataclass
class AuthorRef:
    """One author with source-ordered (institution, country) affiliations."""

    last_name: str
    first_name: str
    affiliations: list[tuple[str, str]] = field(default_factory=list)

    def identity_key(self) -> tuple[str, str]:
        """Case-folded, whitespace-normalized (last, first) identity."""
        return (_norm_ws(self.last_name).casefold(), _norm_ws(self.first_name).casefold())

    def to_json_obj(self) -> dict:
        return {
            "last": self.last_name,
            "first": self.first_name,
            "affiliations": [
                {"institution": inst, "country": country}
                for inst, country in self.affiliations
            ],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "AuthorRef":
        affs = [
            (str(a.get("institution", "")), str(a.get("country", "")))
            for a in obj.get("affiliations", [])
        ]
        return cls(str(obj.get("last", "")), str(obj.get("first", "")), affs)


@dataclass
class BiblioRecord:
    """One publication as parsed from a bibliographic export."""

    record_id: str
    source_db: str = "other"
    title: str = ""
    abstract: str = ""
    year: int | None = None
    month: int | None = None
    doi: str | None = None
    language: str | None = None
    retracted: bool = False
    authors: list[AuthorRef] = field(default_factory=list)

    def authors_json(self) -> str:
        return json.dumps(
            [a.to_json_obj() for a in self.authors], ensure_ascii=False, separators=(",", ":")
        )


@dataclass
class PrismaReport:
    """Staged accounting of records collected, removed (by reason), and kept.

    Invariant: final == collected - sum(removed_*).
    """

    collected: int = 0
    removed_duplicates: int = 0
    removed_no_abstract: int = 0
    removed_irrelevant: int = 0
    removed_non_english: int = 0
    removed_retracted: int = 0
    final: int = 0

    REMOVAL_FIELDS = (
        "removed_duplicates",
        "removed_no_abstract",
        "removed_irrelevant",
        "removed_non_english",
        "removed_retracted",
    )

    def total_removed(self) -> int:
        return sum(getattr(self, f) for f in self.REMOVAL_FIELDS)

    def check(self) -> None:
        values = [self.collected, self.final] + [getattr(self, f) for f in self.REMOVAL_FIELDS]
        if any(v < 0 for v in values):
            raise ValueError("PRISMA counts must be non-negative")
        if self.final != self.collected - self.total_removed():
            raise ValueError(
                f"PRISMA accounting broken: {self.collected} collected, "
                f"{self.total_removed()} removed, {self.final} final"
            )

    def as_dict(self) -> dict:
        return {
            "collected": self.collected,
            **{f: getattr(self, f) for f in self.REMOVAL_FIELDS},
            "final": self.final,
        }


CORPUS_HEADER = [
    "record_id",
    "source_db",
    "title",
    "abstract",
    "year",
    "month",
    "doi",
    "language",
    "retracted",
    "authors_json",
]


def write_corpus_csv(records: list[BiblioRecord], path) -> None:
    """Write records in the canonical corpus CSV schema."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CORPUS_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.record_id,
                    r.source_db,
                    r.title,
                    r.abstract,
                    "" if r.year is None else r.year,
                    "" if r.month is None else r.month,
                    r.doi or "",
                    r.language or "",
                    "true" if r.retracted else "false",
                    r.authors_json(),
                ]
            )


def read_corpus_csv(path) -> list[BiblioRecord]:
    """Load a canonical corpus CSV. Strict: the header must match the schema."""
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise FileUnreadable(str(path)) from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(str(path))
        if header != CORPUS_HEADER:
            raise FileUnreadable(f"{path}: not a canonical corpus CSV (bad header)")
        records = []
        for row in reader:
            if not row:
                continue
            (rid, source_db, title, abstract, year, month, doi, language, retracted, authors) = row
            records.append(
                BiblioRecord(
                    record_id=rid,
                    source_db=source_db,
                    title=title,
                    abstract=abstract,
                    year=int(year) if year else None,
                    month=int(month) if month else None,
                    doi=doi or None,
                    language=language or None,
                    retracted=retracted.strip().lower() in ("true", "1", "yes"),
                    authors=[AuthorRef.from_json_obj(o) for o in json.loads(authors or "[]")],
                )
            )
    if not records:
        raise EmptyFile(str(path))
    return records
