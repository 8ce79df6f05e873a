"""Deterministic synthetic corpus for demos and end-to-end tests.

200 records: 184 clean documents drawn from four disjoint topic vocabularies
(46 each), plus 6 duplicates, 4 without abstracts, 4 irrelevant, 1
non-English, and 1 retracted. Regenerating with the same seed reproduces the
bundled data/synthetic_corpus.csv byte for byte.
"""
from __future__ import annotations

import random

from .records import AuthorRef, BiblioRecord, write_corpus_csv

TOPIC_POOLS = {
    "wildfire": [
        "wildfire", "evacuation", "shelter", "logistics", "firefighter", "smoke",
        "terrain", "drone", "mapping", "satellite", "alert", "forecast", "wind",
        "fuel", "containment", "perimeter", "aerial", "responder", "coordination",
        "deployment", "ignition", "vegetation", "suppression", "airtanker", "ember",
    ],
    "hospital": [
        "hospital", "telehealth", "triage", "patient", "icu", "ventilator",
        "staffing", "burnout", "nurse", "clinic", "capacity", "appointment",
        "remote", "consultation", "screening", "infection", "ward", "discharge",
        "admission", "oxygen", "vaccine", "dose", "physician", "bed", "outbreak",
    ],
    "flood": [
        "flood", "river", "rainfall", "gauge", "levee", "drainage", "inundation",
        "hydrology", "basin", "watershed", "runoff", "dam", "reservoir", "tide",
        "floodplain", "siren", "rescue", "boat", "pump", "embankment", "rainstorm",
        "overflow", "culvert", "sediment", "downstream",
    ],
    "misinformation": [
        "misinformation", "rumor", "twitter", "facebook", "verification",
        "credibility", "bot", "viral", "hashtag", "moderation", "factcheck",
        "platform", "engagement", "narrative", "sentiment", "influencer",
        "amplification", "debunk", "retweet", "follower", "falsehood", "posting",
        "algorithm", "echo", "chamber",
    ],
}

RELEVANCE = ["disaster", "crisis", "pandemic", "COVID-19"]
FILLER = ["communities", "response", "data", "system"]

_COUNTRIES = [
    "United States", "China", "Italy", "India", "United Kingdom",
    "Brazil", "Germany", "Japan",
]
_INSTITUTIONS = [
    ("Lakeside University", "United States"),
    ("Harbor Institute of Technology", "United States"),
    ("Northern Medical Center", "United Kingdom"),
    ("Riverbend University", "United Kingdom"),
    ("Meridian Polytechnic", "China"),
    ("Coastal Research Academy", "China"),
    ("Alpine Institute", "Italy"),
    ("Monsoon Science University", "India"),
    ("Plateau State University", "Brazil"),
    ("Rhine Technical University", "Germany"),
    ("Island Informatics Institute", "Japan"),
    ("Delta College of Engineering", "India"),
]
_SURNAMES = [
    "Alvarez", "Bauer", "Chen", "Das", "Endo", "Ferrari", "Garcia", "Huang",
    "Ito", "Jensen", "Kumar", "Lindberg", "Moreau", "Novak", "Okafor", "Park",
    "Quinn", "Rossi", "Singh", "Tanaka", "Umar", "Vasquez", "Weber", "Xu",
    "Yamada", "Zhao", "Armstrong", "Bianchi", "Costa", "Dubois", "Eriksen",
    "Fischer", "Gupta", "Hansen", "Ivanov", "Johansson", "Kowalski", "Lopez",
    "Mehta", "Nguyen",
]
_FORENAMES = [
    "Aiko", "Bruno", "Carla", "Deepak", "Elena", "Farid", "Greta", "Hiro",
    "Ines", "Jonas", "Kavya", "Liam", "Meera", "Nora", "Omar", "Priya",
    "Rafael", "Sofia", "Tomas", "Uma", "Viktor", "Wei", "Ximena", "Yara",
    "Zane", "Anders", "Bina", "Cyrus", "Dalia", "Emil", "Freya", "Gopal",
    "Hana", "Igor", "Jelena", "Kenji", "Leila", "Marco", "Nadia", "Otto",
]


def _make_authors(rng: random.Random) -> dict[str, list[AuthorRef]]:
    """Four author groups of ten, each aligned with one topic pool."""
    names = list(zip(_SURNAMES, _FORENAMES))
    groups: dict[str, list[AuthorRef]] = {}
    idx = 0
    for pool in TOPIC_POOLS:
        members = []
        for _ in range(10):
            last, first = names[idx]
            idx += 1
            primary = rng.choice(_INSTITUTIONS)
            affs = [primary]
            if rng.random() < 0.3:
                second = rng.choice(_INSTITUTIONS)
                if second != primary:
                    affs.append(second)
            members.append(AuthorRef(last, first, affs))
        groups[pool] = members
    return groups


def _abstract(rng: random.Random, pool: list[str]) -> str:
    words = [rng.choice(RELEVANCE[:3])]
    for _ in range(rng.randint(28, 44)):
        words.append(rng.choice(pool))
        if rng.random() < 0.12:
            words.append(rng.choice(FILLER))
    sentence_len = rng.randint(8, 12)
    sentences = []
    for i in range(0, len(words), sentence_len):
        chunk = words[i : i + sentence_len]
        sentences.append(" ".join(chunk).capitalize() + ".")
    return " ".join(sentences)


def _title(rng: random.Random, pool: list[str]) -> str:
    return " ".join(rng.choice(pool) for _ in range(rng.randint(4, 6))).capitalize()


def make_demo_corpus(seed: int = 7) -> list[BiblioRecord]:
    rng = random.Random(seed)
    groups = _make_authors(rng)
    records: list[BiblioRecord] = []
    counter = 0

    def next_id() -> str:
        nonlocal counter
        counter += 1
        return f"S{counter:04d}"

    for pool_name, pool in TOPIC_POOLS.items():
        authors = groups[pool_name]
        for _ in range(46):
            team = rng.sample(authors, rng.randint(1, 3))
            if rng.random() < 0.15:
                other_pool = rng.choice([p for p in TOPIC_POOLS if p != pool_name])
                team.append(rng.choice(groups[other_pool]))
            records.append(
                BiblioRecord(
                    record_id=next_id(),
                    source_db=rng.choice(["pubmed", "scopus", "wos"]),
                    title=_title(rng, pool),
                    abstract=_abstract(rng, pool),
                    year=rng.choice([2020, 2021, 2022]),
                    month=rng.randint(1, 12),
                    doi=f"10.5555/demo.{counter:04d}",
                    language="en",
                    retracted=False,
                    authors=list(team),
                )
            )

    # records screened out along each PRISMA path
    clean = list(records)
    for source in rng.sample(clean, 6):  # duplicates (same DOI)
        dup = BiblioRecord(
            record_id=next_id(),
            source_db="other",
            title=source.title,
            abstract=source.abstract,
            year=source.year,
            month=source.month,
            doi=source.doi,
            language="en",
            authors=list(source.authors),
        )
        records.append(dup)
    pools = list(TOPIC_POOLS.values())
    for _ in range(4):  # no abstract
        records.append(
            BiblioRecord(
                record_id=next_id(),
                title=_title(rng, rng.choice(pools)),
                abstract="",
                year=2021,
                doi=f"10.5555/demo.{counter:04d}",
                language="en",
                authors=[rng.choice(groups["wildfire"])],
            )
        )
    for _ in range(4):  # irrelevant: no relevance term anywhere
        pool = rng.choice(pools)
        words = " ".join(rng.choice(pool) for _ in range(30))
        records.append(
            BiblioRecord(
                record_id=next_id(),
                title=_title(rng, pool),
                abstract=words.capitalize() + ".",
                year=2020,
                doi=f"10.5555/demo.{counter:04d}",
                language="en",
                authors=[rng.choice(groups["flood"])],
            )
        )
    records.append(  # non-English
        BiblioRecord(
            record_id=next_id(),
            title="Inondation fluviale urbaine",
            abstract="Crise et inondation pandemic fluviale.",
            year=2022,
            doi=f"10.5555/demo.{counter:04d}",
            language="fr",
            authors=[rng.choice(groups["flood"])],
        )
    )
    records.append(  # retracted
        BiblioRecord(
            record_id=next_id(),
            title=_title(rng, pools[1]),
            abstract=_abstract(rng, pools[1]),
            year=2021,
            doi=f"10.5555/demo.{counter:04d}",
            language="en",
            retracted=True,
            authors=[rng.choice(groups["hospital"])],
        )
    )
    assert len(records) == 200
    return records


def write_demo_corpus(path, seed: int = 7) -> None:
    write_corpus_csv(make_demo_corpus(seed), path)


if __name__ == "__main__":
    import sys

    write_demo_corpus(sys.argv[1] if len(sys.argv) > 1 else "synthetic_corpus.csv")
