"""Turning a pool of ratings about one trustee into a reputation value.

Pipeline: eligibility (confidence or transaction value clears its threshold),
time filtering, source categorization (own / white-listed witness / known
witness / stranger, black-listed trusters dropped), participation by an
ordered partition of the four sources, then the time-weighted aggregate.

Scores are mapped through log10, so [0.1, 10] becomes [-1, 1] with 1.0 as
the neutral point.  Within a category each coefficient is averaged with the
rating timestamps as weights (newer counts more), coefficients combine by
the agent's weights, and categories combine by the social-trust weights,
renormalized over the categories actually present.  The reported sigma is
the population standard deviation of the participating scores; it never
feeds back into the value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Iterable, Sequence

from disarm.trust import COEFFICIENTS, Rating, Thresholds


class Category(Enum):
    PR = "pr"  # own experience
    WR = "wr"  # known, white-listed witnesses
    KR = "kr"  # known witnesses on neither list
    SR = "sr"  # strangers

    def __lt__(self, other):  # stable ordering for reports
        order = list(Category)
        return order.index(self) < order.index(other)


#: ordered partitions of the four sources
THEORY_PARTITIONS: dict[str, tuple[frozenset[Category], ...]] = {
    "t1": (frozenset({Category.PR, Category.WR, Category.KR, Category.SR}),),
    "t2": (frozenset({Category.PR}), frozenset({Category.WR}),
           frozenset({Category.KR}), frozenset({Category.SR})),
    "t3": (frozenset({Category.PR, Category.WR}), frozenset({Category.KR}),
           frozenset({Category.SR})),
}


@dataclass(frozen=True)
class Interval:
    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"interval start {self.start} after end {self.end}")

    def keeps(self, t: int, now: int | None) -> bool:
        return self.start <= t <= self.end


@dataclass(frozen=True)
class Since:
    start: int

    def keeps(self, t: int, now: int | None) -> bool:
        return self.start <= t


@dataclass(frozen=True)
class Window:
    width: int

    def __post_init__(self):
        if self.width < 0:
            raise ValueError(f"window width must be non-negative, got {self.width}")

    def keeps(self, t: int, now: int | None) -> bool:
        if now is None:
            raise ValueError("window filter needs the current round")
        return now - self.width <= t


TimeFilter = Interval | Since | Window


class SigmaMode(Enum):
    POOLED_NORMALIZED = "pooled_normalized"
    POOLED_RAW = "pooled_raw"
    PER_COEFFICIENT_NORMALIZED = "per_coefficient_normalized"


def default_social_weights() -> dict[Category, float]:
    return {Category.PR: 0.4, Category.WR: 0.3, Category.KR: 0.2,
            Category.SR: 0.1}


def uniform_weights() -> dict[str, float]:
    return {c: 1.0 for c in COEFFICIENTS}


def example_weight_profile() -> dict[str, float]:
    """The documented sample preference profile: response time 20%, validity
    50%, completeness/correctness/cooperation 10% each, outcome feeling 0."""
    return {
        "response_time": 0.20,
        "validity": 0.50,
        "completeness": 0.10,
        "correctness": 0.10,
        "cooperation": 0.10,
        "outcome_feeling": 0.0,
    }


@dataclass(frozen=True)
class EstimationConfig:
    weights: dict[str, float] = field(default_factory=uniform_weights)
    social_weights: dict[Category, float] = field(default_factory=default_social_weights)
    theory: str = "t2"
    time_filter: TimeFilter = Since(1)
    confidence_threshold: float = 0.7
    transaction_value_threshold: float = 0.5
    sigma_mode: SigmaMode = SigmaMode.POOLED_NORMALIZED

    def __post_init__(self):
        if set(self.weights) != set(COEFFICIENTS):
            raise ValueError("need exactly one weight per coefficient")
        if any(w < 0 for w in self.weights.values()) or sum(self.weights.values()) <= 0:
            raise ValueError("coefficient weights must be non-negative, not all zero")
        if set(self.social_weights) != set(Category):
            raise ValueError("need exactly one social weight per source category")
        if (any(w < 0 for w in self.social_weights.values())
                or sum(self.social_weights.values()) <= 0):
            raise ValueError("social weights must be non-negative, not all zero")
        if self.theory not in THEORY_PARTITIONS:
            raise ValueError(f"unknown theory {self.theory!r}")

    @property
    def partition(self) -> tuple[frozenset[Category], ...]:
        return THEORY_PARTITIONS[self.theory]


@dataclass(frozen=True)
class CategorizedPool:
    pr: frozenset[Rating] = frozenset()
    wr: frozenset[Rating] = frozenset()
    kr: frozenset[Rating] = frozenset()
    sr: frozenset[Rating] = frozenset()

    def get(self, cat: Category) -> frozenset[Rating]:
        return getattr(self, cat.value)

    def all_ratings(self) -> frozenset[Rating]:
        return self.pr | self.wr | self.kr | self.sr

    def counts(self) -> dict[Category, int]:
        return {cat: len(self.get(cat)) for cat in Category}

    def is_empty(self) -> bool:
        return not (self.pr or self.wr or self.kr or self.sr)


@dataclass(frozen=True)
class ReputationReport:
    trustee: str
    value: float
    sigma: float
    participating: CategorizedPool
    per_category: dict[Category, float]

    def export_line(self, theory: str = "", filter_id: str = "") -> str:
        counts = self.participating.counts()
        count_s = " ".join(f"{cat.value}={counts[cat]}" for cat in Category)
        return (f"{self.trustee} value={self.value:.6f} sigma={self.sigma:.6f} "
                f"{count_s} theory={theory} filter={filter_id}")


# ---------------------------------------------------------------------------
# Pipeline stages
# ---------------------------------------------------------------------------

def eligibility_justification(rating: Rating, thresholds: Thresholds) -> str | None:
    """Which eligibility rule admits the rating: both thresholds cleared,
    confidence alone, transaction value alone, or neither (None)."""
    conf_ok = rating.confidence >= thresholds.confidence
    tran_ok = rating.transaction_value >= thresholds.transaction_value
    if conf_ok and tran_ok:
        return "r26"
    if conf_ok:
        return "r27"
    if tran_ok:
        return "r28"
    return None


def eligible(pool: Iterable[Rating], thresholds: Thresholds) -> frozenset[Rating]:
    """Ratings whose confidence or transaction value clears its threshold."""
    return frozenset(r for r in pool
                     if eligibility_justification(r, thresholds) is not None)


def count_filter(pool: Iterable[Rating], time_filter: TimeFilter,
                 now: int | None = None) -> frozenset[Rating]:
    """Ratings passing the configured time filter (bounds inclusive)."""
    return frozenset(r for r in pool if time_filter.keeps(r.t, now))


def categorize(self_id: str, known: frozenset[str], whitelist: frozenset[str],
               blacklist: frozenset[str], pool: Iterable[Rating]) -> CategorizedPool:
    """Split a filtered pool by rating source.  Ratings by black-listed
    trusters land in no category."""
    pr, wr, kr, sr = set(), set(), set(), set()
    for rating in pool:
        who = rating.truster
        if who == self_id:
            pr.add(rating)
        elif who in blacklist:
            continue
        elif who in known:
            (wr if who in whitelist else kr).add(rating)
        else:
            sr.add(rating)
    return CategorizedPool(frozenset(pr), frozenset(wr), frozenset(kr),
                           frozenset(sr))


def select_participants(cat: CategorizedPool,
                        partition: Sequence[frozenset[Category]]) -> CategorizedPool:
    """The earliest partition group with any populated category participates
    in full; later groups contribute nothing."""
    seen: set[Category] = set()
    for group in partition:
        seen |= group
        if any(cat.get(c) for c in group):
            kept = {c: cat.get(c) if c in group else frozenset() for c in Category}
            return CategorizedPool(kept[Category.PR], kept[Category.WR],
                                   kept[Category.KR], kept[Category.SR])
    if seen != set(Category):
        raise ValueError("partition must cover all four source categories")
    return CategorizedPool()


def normalize(score: float) -> float:
    """log10 of a score in [0.1, 10]: -1 terrible, 0 neutral, +1 perfect."""
    if not 0.1 <= score <= 10.0:
        raise ValueError(f"score {score} outside [0.1, 10]")
    return math.log10(score)


@lru_cache(maxsize=65536)
def _normalized_scores(rating: Rating) -> tuple[float, ...]:
    return tuple(normalize(getattr(rating, c)) for c in COEFFICIENTS)


def estimate(participants: CategorizedPool, config: EstimationConfig,
             now: int) -> ReputationReport | None:
    """Aggregate the participating ratings into a reputation value in [-1, 1].

    Returns None when nothing participates (the distinguished no-data
    outcome).  The trustee field of the report is filled from the ratings.
    """
    if participants.is_empty():
        return None
    trustees = {r.trustee for r in participants.all_ratings()}
    if len(trustees) != 1:
        raise ValueError(f"participants rate several trustees: {sorted(trustees)}")
    trustee = trustees.pop()
    for r in participants.all_ratings():
        if r.t >= now:
            raise ValueError(f"rating {r.id} at t={r.t} is not before now={now}")

    w_total = sum(config.weights.values())
    w_vec = [config.weights[c] for c in COEFFICIENTS]
    per_category: dict[Category, float] = {}
    for cat in Category:
        ratings = participants.get(cat)
        if not ratings:
            continue
        t_total = sum(r.t for r in ratings)
        weighted = [0.0] * len(COEFFICIENTS)
        for r in ratings:
            logs = _normalized_scores(r)
            for i in range(len(COEFFICIENTS)):
                weighted[i] += logs[i] * r.t
        score = sum(w_vec[i] * (weighted[i] / t_total)
                    for i in range(len(COEFFICIENTS)))
        per_category[cat] = score / w_total

    pi_total = sum(config.social_weights[cat] for cat in per_category)
    value = sum(config.social_weights[cat] / pi_total * s
                for cat, s in per_category.items())
    sigma = confidence_sigma(participants, config)
    return ReputationReport(trustee, value, sigma, participants, per_category)


def confidence_sigma(participants: CategorizedPool,
                     config: EstimationConfig | None = None) -> float | None:
    """Population standard deviation of the participating scores, pooled over
    all six coefficients (normalized scores by default).  Returns None when
    nothing participates; never feeds into the reputation value."""
    ratings = participants.all_ratings()
    if not ratings:
        return None
    mode = config.sigma_mode if config is not None else SigmaMode.POOLED_NORMALIZED

    def samples(raw: bool) -> list[float]:
        return [getattr(r, c) if raw else normalize(getattr(r, c))
                for r in ratings for c in COEFFICIENTS]

    def pop_std(xs: list[float]) -> float:
        mu = sum(xs) / len(xs)
        return math.sqrt(sum((x - mu) ** 2 for x in xs) / len(xs))

    if mode is SigmaMode.POOLED_RAW:
        return pop_std(samples(raw=True))
    if mode is SigmaMode.PER_COEFFICIENT_NORMALIZED:
        stds = []
        for coeff in COEFFICIENTS:
            xs = [normalize(getattr(r, coeff)) for r in ratings]
            stds.append(pop_std(xs))
        return sum(stds) / len(stds)
    return pop_std(samples(raw=False))


def estimate_reputation(self_id: str, known: frozenset[str],
                        whitelist: frozenset[str], blacklist: frozenset[str],
                        pool: Iterable[Rating], thresholds: Thresholds,
                        config: EstimationConfig, now: int
                        ) -> ReputationReport | None:
    """Full pipeline from a raw pool to a report (None when no data)."""
    kept = eligible(pool, thresholds)
    kept = count_filter(kept, config.time_filter, now)
    cat = categorize(self_id, known, whitelist, blacklist, kept)
    participants = select_participants(cat, config.partition)
    return estimate(participants, config, now)
