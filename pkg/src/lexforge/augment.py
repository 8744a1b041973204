"""Knowledge-driven positive augmentation.

For a query whose source case has extracted elements, find a *different*
case with the identical main-article set whose ancillary articles and
prison term are as close as possible, and use it as the positive instead of
the source. Pairs are then mixed so a configured fraction of the dataset
uses augmented positives.
"""

from __future__ import annotations

import math
import random
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from .corpus import MONTH_BEARING, LegalElements, PrisonTerm, TermKind
from .errors import MainArticleMismatch, NoMatch

#: Months of term difference over which similarity decays by 1/e.
TERM_DECAY_MONTHS = 24.0

#: Similarity credit for the death/life pair, the only cross-kind affinity.
LIFE_DEATH_SIMILARITY = 0.25


@dataclass(frozen=True)
class AugmentConfig:
    proportion_augmented: float = 0.7
    weight_ancillary: float = 0.5
    weight_term: float = 0.5
    seed: int = 0
    match_mode: str = "exact_main"  # or "shared_charge"

    def __post_init__(self):
        if not 0.0 <= self.proportion_augmented <= 1.0:
            raise ValueError("proportion_augmented must be in [0, 1]")
        if self.weight_ancillary < 0 or self.weight_term < 0:
            raise ValueError("weights must be non-negative")
        if self.weight_ancillary + self.weight_term <= 0:
            raise ValueError("weight sum must be positive")
        if self.match_mode not in ("exact_main", "shared_charge"):
            raise ValueError(f"unknown match mode: {self.match_mode}")


@dataclass(frozen=True)
class IndexEntry:
    case_id: str
    elements: LegalElements


class ElementIndex:
    """Cases bucketed by their canonical main-article set.

    Bucket keys are sorted tuples of article ids, so set order never
    matters. A charge-name side index backs the relaxed match mode.
    """

    def __init__(self):
        self._buckets: dict[tuple[str, ...], list[IndexEntry]] = {}
        self._by_charge: dict[str, list[IndexEntry]] = {}
        self.size = 0

    @staticmethod
    def key_for(main_articles: Iterable[str]) -> tuple[str, ...]:
        return tuple(sorted(main_articles))

    def add(self, case_id: str, elements: LegalElements) -> None:
        entry = IndexEntry(case_id, elements)
        self._buckets.setdefault(self.key_for(elements.main_articles), []).append(entry)
        for charge in elements.charges:
            self._by_charge.setdefault(charge, []).append(entry)
        self.size += 1

    def bucket(self, main_articles: Iterable[str]) -> list[IndexEntry]:
        return self._buckets.get(self.key_for(main_articles), [])

    def charge_bucket(self, charge: str) -> list[IndexEntry]:
        return self._by_charge.get(charge, [])

    def keys(self) -> list[tuple[str, ...]]:
        return sorted(self._buckets)

    def __len__(self) -> int:
        return self.size


def build_element_index(corpus: Mapping[str, LegalElements]) -> ElementIndex:
    """Index every case exactly once, in case-id order for determinism."""
    index = ElementIndex()
    for case_id in sorted(corpus):
        index.add(case_id, corpus[case_id])
    return index


def term_similarity(a: PrisonTerm, b: PrisonTerm) -> float:
    """Similarity of two decided terms in [0, 1].

    Same kind scores 1, decayed by ``exp(-|Δmonths| / 24)`` for the
    month-bearing kinds. Different kinds score 0, except death and life
    imprisonment which keep a small affinity.
    """
    if a.kind == b.kind:
        if a.kind in MONTH_BEARING:
            return math.exp(-abs(a.months - b.months) / TERM_DECAY_MONTHS)
        return 1.0
    if {a.kind, b.kind} == {TermKind.DEATH, TermKind.LIFE}:
        return LIFE_DEATH_SIMILARITY
    return 0.0


def _jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def _score(a: LegalElements, b: LegalElements, cfg: AugmentConfig) -> float:
    total = cfg.weight_ancillary + cfg.weight_term
    return (cfg.weight_ancillary * _jaccard(a.ancillary_articles, b.ancillary_articles)
            + cfg.weight_term * term_similarity(a.prison_term, b.prison_term)) / total


def element_similarity(a: LegalElements, b: LegalElements,
                       cfg: AugmentConfig = AugmentConfig()) -> float:
    """Weighted mix of ancillary-article Jaccard and term similarity, in [0, 1].

    Defined only for cases whose main-article sets already match.
    """
    if a.main_articles != b.main_articles:
        raise MainArticleMismatch(
            f"{sorted(a.main_articles)} != {sorted(b.main_articles)}")
    return _score(a, b, cfg)


def find_augmented_positive(source_case_id: str, source: LegalElements,
                            index: ElementIndex,
                            cfg: AugmentConfig = AugmentConfig()) -> str:
    """Most element-similar distinct case sharing the source's main articles.

    Ties break to the lexicographically smallest case id. Raises
    :class:`NoMatch` when the source is alone in its bucket.
    """
    if cfg.match_mode == "shared_charge":
        seen: set[str] = set()
        candidates = []
        for charge in sorted(source.charges):
            for entry in index.charge_bucket(charge):
                if entry.case_id not in seen:
                    seen.add(entry.case_id)
                    candidates.append(entry)
    else:
        candidates = index.bucket(source.main_articles)

    best_id: str | None = None
    best_score = -1.0
    for entry in candidates:
        if entry.case_id == source_case_id:
            continue
        score = _score(source, entry.elements, cfg)
        if score > best_score or (score == best_score
                                  and best_id is not None
                                  and entry.case_id < best_id):
            best_id, best_score = entry.case_id, score
    if best_id is None:
        raise NoMatch(f"no distinct case shares main articles with {source_case_id!r}")
    return best_id


PAIR_ORIGINAL = "original"
PAIR_AUGMENTED = "augmented"


@dataclass(frozen=True)
class TrainingPair:
    query_id: str
    positive_case_id: str
    kind: str
    positive_charges: frozenset[str]
    fallback: bool = False

    def to_record(self) -> dict:
        return {
            "query_id": self.query_id,
            "positive_case_id": self.positive_case_id,
            "kind": self.kind,
            "positive_charges": sorted(self.positive_charges),
            "fallback": self.fallback,
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "TrainingPair":
        return cls(
            query_id=record["query_id"],
            positive_case_id=record["positive_case_id"],
            kind=record["kind"],
            positive_charges=frozenset(record.get("positive_charges", [])),
            fallback=bool(record.get("fallback", False)),
        )


@dataclass
class MixResult:
    pairs: list[TrainingPair]
    fallbacks: list[str] = field(default_factory=list)

    @property
    def augmented_count(self) -> int:
        return sum(1 for p in self.pairs if p.kind == PAIR_AUGMENTED)


def mix_pairs(queries: Sequence, corpus: Mapping[str, LegalElements],
              index: ElementIndex, cfg: AugmentConfig = AugmentConfig(),
              ) -> MixResult:
    """Pair every query with a positive, augmenting a seed-chosen ⌊p·N⌋ subset.

    ``queries`` are objects with ``query_id`` and ``source_case_id`` (query
    records work as-is). Queries picked for augmentation whose bucket holds
    only their source fall back to the original pair and are flagged. Output
    length always equals the query count and is a pure function of
    (queries, corpus, seed).
    """
    n = len(queries)
    target = int(cfg.proportion_augmented * n)
    rng = random.Random(cfg.seed)
    chosen = set(rng.sample(range(n), target)) if target else set()

    pairs: list[TrainingPair] = []
    fallbacks: list[str] = []
    for i, query in enumerate(queries):
        source_id = query.source_case_id
        if source_id not in corpus:
            raise KeyError(f"query {query.query_id!r}: source case "
                           f"{source_id!r} has no extracted elements")
        source = corpus[source_id]
        fell_back = False
        if i in chosen:
            try:
                positive_id = find_augmented_positive(source_id, source, index, cfg)
                pairs.append(TrainingPair(
                    query_id=query.query_id,
                    positive_case_id=positive_id,
                    kind=PAIR_AUGMENTED,
                    positive_charges=corpus[positive_id].charges))
                continue
            except NoMatch:
                fell_back = True
                fallbacks.append(query.query_id)
        pairs.append(TrainingPair(
            query_id=query.query_id,
            positive_case_id=source_id,
            kind=PAIR_ORIGINAL,
            positive_charges=source.charges,
            fallback=fell_back))
    return MixResult(pairs=pairs, fallbacks=fallbacks)
