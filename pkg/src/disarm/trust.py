"""Per-agent trust state: rating store, behavior classification, and
white/black list maintenance driven by the agent's strategy rules.

The engine is the decision mechanism: classification runs the behavior rules
over a single rating, list maintenance runs the strategy and list rules over
the accumulated behavior events plus the list-entry history.  Every known
partner is seeded with negated list entries at time 0 so the first add event
has something to supersede.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

from disarm import corpus, engine
from disarm.dposl import Literal, Num, SourceProgram, serialize_literal

COEFFICIENTS = ("response_time", "validity", "completeness", "correctness",
                "cooperation", "outcome_feeling")

SCORE_MIN = 0.1
SCORE_MAX = 10.0


class DuplicateRatingError(ValueError):
    """Same rating id stored twice with different payloads."""


@dataclass(frozen=True)
class Rating:
    """One evaluation of a partner after an interaction.

    The six coefficient scores live in [0.1, 10]; confidence and
    transaction_value in [0, 1].  The timestamp is the simulation round.
    The truster travels with the rating so receivers can tell who rated.
    """

    id: str
    truster: str
    trustee: str
    t: int
    response_time: float
    validity: float
    completeness: float
    correctness: float
    cooperation: float
    outcome_feeling: float
    confidence: float
    transaction_value: float

    def __post_init__(self):
        if self.truster == self.trustee:
            raise ValueError("truster and trustee must differ")
        if self.t < 1:
            raise ValueError(f"timestamp must be a positive round, got {self.t}")
        for coeff in COEFFICIENTS:
            v = getattr(self, coeff)
            if not SCORE_MIN <= v <= SCORE_MAX:
                raise ValueError(f"{coeff}={v} outside [{SCORE_MIN}, {SCORE_MAX}]")
        for name in ("confidence", "transaction_value"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def scores(self) -> dict[str, float]:
        return {c: getattr(self, c) for c in COEFFICIENTS}

    def to_literal(self) -> Literal:
        return Literal.of(
            "rating", id=self.id, truster=self.truster, trustee=self.trustee,
            t=self.t, **{c: Fraction(getattr(self, c)) for c in COEFFICIENTS},
            confidence=Fraction(self.confidence),
            transaction_value=Fraction(self.transaction_value))


@dataclass(frozen=True)
class Thresholds:
    """Lowest accepted value per coefficient, plus the eligibility cutoffs."""

    response_time: float = 5.0
    validity: float = 5.0
    completeness: float = 5.0
    correctness: float = 5.0
    cooperation: float = 5.0
    outcome_feeling: float = 5.0
    confidence: float = 0.7
    transaction_value: float = 0.5

    def __post_init__(self):
        for coeff in COEFFICIENTS:
            v = getattr(self, coeff)
            if not SCORE_MIN <= v <= SCORE_MAX:
                raise ValueError(f"{coeff} threshold {v} outside [{SCORE_MIN}, {SCORE_MAX}]")
        for name in ("confidence", "transaction_value"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} threshold {v} outside [0, 1]")

    def facts(self) -> list[Literal]:
        out = [Literal.of(f"{c}_threshold", Fraction(getattr(self, c)))
               for c in COEFFICIENTS]
        out.append(Literal.of("confidence_threshold", Fraction(self.confidence)))
        out.append(Literal.of("transaction_value_threshold",
                              Fraction(self.transaction_value)))
        return out


@dataclass(frozen=True)
class ListDecision:
    whitelist: frozenset[str]
    blacklist: frozenset[str]
    new_entries: tuple[Literal, ...] = ()


def _entry_key(lit: Literal) -> tuple[str, bool, str]:
    trustee = lit.arg("trustee")
    return (lit.pred, lit.negated, getattr(trustee, "name", str(trustee)))


class AgentTrustState:
    """One agent's ratings, behavior-event history, and list state.

    Single-owner: only the owning agent's turn mutates it.  ``event_window``
    caps how many behavior events per (trustee, polarity) are fed back into
    the engine; the list-entry history carries the long-term memory.
    """

    def __init__(self, self_id: str, thresholds: Thresholds | None = None,
                 strategy: SourceProgram | None = None,
                 behavior: SourceProgram | None = None,
                 event_window: int | None = 8):
        self.self_id = self_id
        self.thresholds = thresholds or Thresholds()
        self.strategy = strategy if strategy is not None else corpus.strategy_program()
        self.behavior = behavior if behavior is not None else corpus.behavior_program()
        self.event_window = event_window
        self.ratings: dict[str, Rating] = {}
        self._by_trustee: dict[str, list[Rating]] = {}
        self._known: set[str] = set()
        self.provenance: dict[str, tuple[str, ...]] = {}
        self.behavior_events: dict[str, list[Literal]] = {}  # trustee -> events
        self.list_events: list[tuple[int, Literal]] = []
        self._entry_set: set[Literal] = set()
        self._latest_entries: dict[tuple[str, bool, str], Literal] = {}
        self._seeded: set[str] = set()
        self.whitelist: frozenset[str] = frozenset()
        self.blacklist: frozenset[str] = frozenset()

    # -- ratings ------------------------------------------------------------

    def record_rating(self, rating: Rating, provenance: tuple[str, ...] = ()) -> bool:
        """Store a rating; duplicates of an identical payload are no-ops,
        id collisions with different payloads raise.  Returns True when the
        rating was new."""
        existing = self.ratings.get(rating.id)
        if existing is not None:
            if existing != rating:
                raise DuplicateRatingError(
                    f"rating id {rating.id} already stored with a different payload")
            return False
        self.ratings[rating.id] = rating
        self._by_trustee.setdefault(rating.trustee, []).append(rating)
        if rating.truster == self.self_id:
            self._known.add(rating.trustee)
        if provenance:
            self.provenance[rating.id] = provenance
        return True

    def own_ratings(self) -> list[Rating]:
        return [r for r in self.ratings.values() if r.truster == self.self_id]

    def ratings_about(self, trustee: str) -> list[Rating]:
        return list(self._by_trustee.get(trustee, ()))

    def known_agents(self) -> frozenset[str]:
        """Exactly the trustees of the agent's own ratings."""
        return frozenset(self._known)

    # -- behavior -----------------------------------------------------------

    def classify_behavior(self, rating: Rating) -> list[Literal]:
        """Good/bad behavior events for one of the agent's own ratings,
        derived by the behavior rules against the thresholds."""
        if rating.truster != self.self_id:
            raise ValueError("classify_behavior applies to the agent's own ratings")
        facts = [rating.to_literal(), Literal.of("self", agent=self.self_id)]
        facts.extend(self.thresholds.facts())
        conclusions = engine.run(self.behavior, facts)
        events = [l for l in conclusions.defeasible_pos
                  if l.pred in ("good_behavior", "bad_behavior") and not l.negated]
        return sorted(events, key=str)

    def note_behavior(self, events: list[Literal]) -> None:
        for event in events:
            trustee = event.arg("trustee").name
            bucket = self.behavior_events.setdefault(trustee, [])
            bucket.append(event)
        if self.event_window is not None:
            for trustee in {e.arg("trustee").name for e in events}:
                bucket = self.behavior_events[trustee]
                good = [e for e in bucket if e.pred == "good_behavior"]
                bad = [e for e in bucket if e.pred == "bad_behavior"]
                self.behavior_events[trustee] = (
                    good[-self.event_window:] + bad[-self.event_window:])

    # -- lists ----------------------------------------------------------------

    def _seed(self, trustee: str, at: int) -> None:
        if trustee in self._seeded:
            return
        self._seeded.add(trustee)
        for pred in ("whitelist", "blacklist"):
            entry = Literal.of(pred, trustee=trustee, time=0, negated=True)
            self.list_events.append((at, entry))
            self._entry_set.add(entry)
            self._latest_entries[_entry_key(entry)] = entry

    def update_lists(self, at: int, focus: str | None = None) -> ListDecision:
        """Run the strategy over behavior events and list history, absorb any
        new list entries (stamped ``at``), and report current membership.

        ``focus`` restricts the engine run to one trustee and patches the
        outcome into the previous membership; the corpus rules never couple
        different trustees, so the result matches a full run.  Custom
        strategies that do couple trustees should not pass ``focus``."""
        trustees = ([focus] if focus is not None
                    else sorted(self.behavior_events))
        for trustee in trustees:
            self._seed(trustee, at)

        facts = [Literal.of("self", agent=self.self_id)]
        if focus is not None:
            facts.extend(e for k, e in self._latest_entries.items()
                         if k[2] == focus)
        else:
            facts.extend(self._latest_entries.values())
        for trustee in trustees:
            facts.extend(self.behavior_events.get(trustee, ()))

        conclusions = engine.run(self.strategy, facts)

        new_entries = []
        for lit in sorted(conclusions.defeasible_pos, key=str):
            if lit.pred not in ("whitelist", "blacklist"):
                continue
            if lit in self._entry_set:
                continue
            key = _entry_key(lit)
            prev = self._latest_entries.get(key)
            time_term = lit.arg("time")
            prev_time = prev.arg("time") if prev is not None else None
            if prev is None or (isinstance(time_term, Num) and
                                isinstance(prev_time, Num) and
                                time_term.value >= prev_time.value):
                self._latest_entries[key] = lit
            self._entry_set.add(lit)
            self.list_events.append((at, lit))
            new_entries.append(lit)

        wl = frozenset(l.arg("trustee").name for l in conclusions.defeasible_pos
                       if l.pred == "WL" and not l.negated)
        bl = frozenset(l.arg("trustee").name for l in conclusions.defeasible_pos
                       if l.pred == "BL" and not l.negated)
        if focus is not None:
            wl = (self.whitelist - {focus}) | (wl & {focus})
            bl = (self.blacklist - {focus}) | (bl & {focus})
        self.whitelist, self.blacklist = wl, bl
        return ListDecision(wl, bl, tuple(new_entries))

    def observe_own_rating(self, rating: Rating, at: int) -> ListDecision | None:
        """Record one of the agent's own ratings, classify it, and refresh the
        lists when the outcome could change them."""
        self.record_rating(rating)
        events = self.classify_behavior(rating)
        self.note_behavior(events)
        kinds = {e.pred for e in events}
        trustee = rating.trustee
        # A good event cannot change anything for an already-whitelisted
        # partner, nor a bad one for an already-blacklisted partner.
        if kinds == {"good_behavior"} and trustee in self.whitelist:
            return None
        if kinds == {"bad_behavior"} and trustee in self.blacklist:
            return None
        return self.update_lists(at=at, focus=trustee)

    # -- export ---------------------------------------------------------------

    def export_snapshot(self) -> str:
        """Line-oriented dump of the state in fact syntax."""
        lines = [serialize_literal(Literal.of("self", agent=self.self_id)) + "."]
        for fact in self.thresholds.facts():
            lines.append(serialize_literal(fact) + ".")
        for rid in sorted(self.ratings):
            lines.append(serialize_literal(self.ratings[rid].to_literal()) + ".")
        for _, entry in self.list_events:
            lines.append(serialize_literal(entry) + ".")
        for trustee in sorted(self.whitelist):
            lines.append(serialize_literal(Literal.of("WL", trustee=trustee)) + ".")
        for trustee in sorted(self.blacklist):
            lines.append(serialize_literal(Literal.of("BL", trustee=trustee)) + ".")
        return "\n".join(lines) + "\n"
