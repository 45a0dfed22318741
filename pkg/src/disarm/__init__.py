"""Distributed agent reputation over a defeasible rule engine.

Agents rate partners after interactions, keep white/black lists derived by
defeasible rules, locate witness ratings through TTL-bounded requests along
their white-list edges, and aggregate the gathered ratings into a reputation
value in [-1, 1] with a standard-deviation confidence.  A deterministic
multi-agent testbed reproduces the evaluation design at desk scale.
"""

from disarm.dposl import (
    Literal,
    ParseError,
    Rule,
    SourceProgram,
    parse_fact,
    parse_literal,
    parse_program,
    serialize_program,
)
from disarm.engine import ConclusionSet, TheoryError, evaluate_builtin, query, run

__version__ = "0.1.0"

__all__ = [
    "ConclusionSet",
    "Literal",
    "ParseError",
    "Rule",
    "SourceProgram",
    "TheoryError",
    "evaluate_builtin",
    "parse_fact",
    "parse_literal",
    "parse_program",
    "query",
    "run",
    "serialize_program",
    "__version__",
]
