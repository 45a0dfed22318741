"""Access to the shipped rule corpus.

Rule files are data: agents are configured by naming which files they load.
``load_corpus`` merges files into one program, so alternatives that reuse
rule ids (the three participation theories, the three time filters) cannot
be combined in a single load.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from disarm.dposl import SourceProgram, parse_program

BEHAVIOR = "behavior"
WHITELIST_SAME_REASON = "whitelist_same_reason"
WHITELIST_ANY_REASONS = "whitelist_any_reasons"
BLACKLIST_SAME_REASON = "blacklist_same_reason"
BLACKLIST_VARIED_REASONS = "blacklist_varied_reasons"
LISTS = "lists"
EXCHANGE = "exchange"
ELIGIBILITY = "eligibility"
CATEGORIZE = "categorize"

#: default strategy: repeated-reason whitelist, repeated-reason blacklist
DEFAULT_STRATEGY = (WHITELIST_SAME_REASON, BLACKLIST_SAME_REASON)

TIME_FILTERS = {
    "interval": "time_interval",
    "since": "time_since",
    "window": "time_window",
}

THEORIES = {
    "t1": "theory1",
    "t2": "theory2",
    "t3": "theory3",
}


def corpus_text(name: str) -> str:
    fname = name if name.endswith(".dpl") else name + ".dpl"
    return resources.files("disarm.rules").joinpath(fname).read_text()


@lru_cache(maxsize=64)
def load_corpus(*names: str) -> SourceProgram:
    """Parse and merge the named corpus files (``.dpl`` suffix optional)."""
    programs = [parse_program(corpus_text(n)) for n in names]
    if not programs:
        return SourceProgram()
    return programs[0].merge(*programs[1:])


def behavior_program() -> SourceProgram:
    """Behavior classification rules alone (run per fresh rating)."""
    return load_corpus(BEHAVIOR)


def strategy_program(whitelist_rule: str = WHITELIST_SAME_REASON,
                     blacklist_rule: str = BLACKLIST_SAME_REASON) -> SourceProgram:
    """The per-agent list strategy: candidacy per the chosen files, plus
    list maintenance."""
    return load_corpus(whitelist_rule, blacklist_rule, LISTS)


def estimation_program(theory: str = "t2", time_filter: str = "since") -> SourceProgram:
    """The categorization-to-participation pipeline for cross-checking the
    numeric estimator against the rule engine."""
    return load_corpus(ELIGIBILITY, TIME_FILTERS[time_filter], CATEGORIZE,
                       THEORIES[theory])
