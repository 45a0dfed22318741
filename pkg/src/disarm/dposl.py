"""Rule-file syntax for defeasible theories.

The text format carries four kinds of statements, each terminated by a dot:

    fact            rating(id->1, truster->A, trustee->X, t->3, ...).
    rule            r2: bad_behavior(...) :- rating(...), ?respx <= ?resp.
    superiority     r26 > r27.
    conflict decl   conflict participate(trustee->?x, grp->?g)
                        with participate(trustee->?x, grp->?g1)
                        where ?g != ?g1.

Rule arrows select the rule kind: ``:-`` strict, ``:=`` defeasible, ``:~``
defeater.  Atoms take either named arguments (``key->term``) or positional
ones, never both.  ``?name`` is a variable, ``~`` prefixes a strongly negated
atom, ``not(lit, guards...)`` is negation as failure.  Guards are comparisons
(``< <= > >= = !=``) over arithmetic expressions (``+ - * /`` and ``now()``)
plus the binding form ``?x is <expr>``.  ``%`` starts a comment.  Numeric
literals are decimals; they parse to exact fractions.

Parsing and serialization round-trip: ``parse_program(serialize_program(p))``
equals ``p`` on the AST, with literal arguments held in canonical order.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union


RESERVED_WORDS = frozenset({"not", "is", "now", "conflict", "with", "where"})

ARROW_KINDS = {":-": "strict", ":=": "defeasible", ":~": "defeater"}
KIND_ARROWS = {v: k for k, v in ARROW_KINDS.items()}

COMPARISON_OPS = ("<=", ">=", "!=", "<", ">", "=")


class ParseError(ValueError):
    """Syntax or well-formedness error, with position and expectations."""

    def __init__(self, message: str, line: int, col: int, expected: tuple[str, ...] = ()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = tuple(expected)
        suffix = f" (expected one of: {', '.join(expected)})" if expected else ""
        super().__init__(f"{line}:{col}: {message}{suffix}")


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return "?" + self.name


@dataclass(frozen=True)
class Const:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Num:
    value: Fraction

    def __post_init__(self):
        # Fraction hashing is costly; literals hash these constantly
        object.__setattr__(self, "_hash", hash(self.value))

    def __hash__(self) -> int:
        return self._hash  # type: ignore[attr-defined]

    def __str__(self) -> str:
        return render_number(self.value)


Term = Union[Var, Const, Num]


@dataclass(frozen=True)
class NowCall:
    def __str__(self) -> str:
        return "now()"


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"

    def __str__(self) -> str:
        def wrap(e: Expr) -> str:
            return f"({e})" if isinstance(e, BinOp) else str(e)

        return f"{wrap(self.left)} {self.op} {wrap(self.right)}"


Expr = Union[Var, Const, Num, NowCall, BinOp]


@dataclass(frozen=True)
class Comparison:
    op: str  # one of COMPARISON_OPS
    left: Expr
    right: Expr

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class IsBinding:
    target: Var
    expr: Expr

    def __str__(self) -> str:
        return f"{self.target} is {self.expr}"


Guard = Union[Comparison, IsBinding]


def coerce_term(value) -> Term:
    """Build a term from a Python value: ints/floats/Fractions become numbers,
    strings become constants (or variables when prefixed with ``?``)."""
    if isinstance(value, (Var, Const, Num)):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not terms")
    if isinstance(value, (int, Fraction)):
        return Num(Fraction(value))
    if isinstance(value, float):
        return Num(Fraction(value))
    if isinstance(value, str):
        if value.startswith("?"):
            return Var(value[1:])
        return Const(value)
    raise TypeError(f"cannot make a term from {value!r}")


def _canonical_args(args: Iterable[tuple[str, Term]]) -> tuple[tuple[str, Term], ...]:
    pairs = list(args)
    keys = [k for k, _ in pairs]
    if len(set(keys)) != len(keys):
        raise ValueError(f"duplicate argument keys: {keys}")
    positional = [k.isdigit() for k in keys]
    if any(positional) and not all(positional):
        raise ValueError("cannot mix positional and named arguments in one atom")
    if all(positional) and pairs:
        pairs.sort(key=lambda kv: int(kv[0]))
    else:
        pairs.sort(key=lambda kv: kv[0])
    return tuple(pairs)


@dataclass(frozen=True)
class Literal:
    """An atom with optional strong negation.  Arguments are stored as a
    canonically ordered tuple of (key, term); positional arguments use their
    zero-based index rendered as a digit string."""

    pred: str
    args: tuple[tuple[str, Term], ...] = ()
    negated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "_hash",
                           hash((self.pred, self.args, self.negated)))

    def __hash__(self) -> int:
        return self._hash  # type: ignore[attr-defined]

    @staticmethod
    def of(pred: str, *positional, negated: bool = False, **named) -> "Literal":
        if positional and named:
            raise ValueError("cannot mix positional and named arguments in one atom")
        if positional:
            pairs = [(str(i), coerce_term(v)) for i, v in enumerate(positional)]
        else:
            pairs = [(k, coerce_term(v)) for k, v in named.items()]
        return Literal(pred, _canonical_args(pairs), negated)

    @property
    def positional(self) -> bool:
        return bool(self.args) and self.args[0][0].isdigit()

    def complement(self) -> "Literal":
        return Literal(self.pred, self.args, not self.negated)

    def arg(self, key: str) -> Term | None:
        for k, t in self.args:
            if k == key:
                return t
        return None

    def is_ground(self) -> bool:
        return not any(isinstance(t, Var) for _, t in self.args)

    def variables(self) -> set[str]:
        return {t.name for _, t in self.args if isinstance(t, Var)}

    def __str__(self) -> str:
        return serialize_literal(self)


@dataclass(frozen=True)
class NafBlock:
    literal: Literal
    guards: tuple[Guard, ...] = ()

    def __str__(self) -> str:
        inner = ", ".join([serialize_literal(self.literal)] + [str(g) for g in self.guards])
        return f"not({inner})"


BodyElement = Union[Literal, NafBlock, Comparison, IsBinding]


@dataclass(frozen=True)
class Rule:
    id: str
    kind: str  # strict | defeasible | defeater
    head: Literal
    body: tuple[BodyElement, ...] = ()

    def __str__(self) -> str:
        return serialize_rule(self)


@dataclass(frozen=True)
class ConflictDecl:
    """Declares extra members of the conflict set of literals matching
    ``scope``: every literal matching one of ``conflicts_with`` under the
    combined bindings, subject to the guards whose variables are bound."""

    scope: Literal
    conflicts_with: tuple[Literal, ...]
    guards: tuple[Comparison, ...] = ()

    def __str__(self) -> str:
        return serialize_conflict(self)


@dataclass(frozen=True)
class SourceProgram:
    rules: tuple[Rule, ...] = ()
    facts: tuple[Literal, ...] = ()
    superiorities: tuple[tuple[str, str], ...] = ()
    conflicts: tuple[ConflictDecl, ...] = ()

    def merge(self, *others: "SourceProgram") -> "SourceProgram":
        rules = list(self.rules)
        facts = list(self.facts)
        sups = list(self.superiorities)
        confs = list(self.conflicts)
        for o in others:
            rules.extend(o.rules)
            facts.extend(o.facts)
            sups.extend(o.superiorities)
            confs.extend(o.conflicts)
        seen: set[str] = set()
        for r in rules:
            if r.id in seen:
                raise ValueError(f"duplicate rule id across programs: {r.id}")
            seen.add(r.id)
        known = {r.id for r in rules}
        for a, b in sups:
            if a not in known or b not in known:
                raise ValueError(f"superiority references unknown rule: {a} > {b}")
        return SourceProgram(tuple(rules), tuple(facts), tuple(sups), tuple(confs))


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_PUNCT = (":-", ":=", ":~", "->", "<=", ">=", "!=", "<", ">", "=", "(", ")",
          ",", ".", "~", ":", "+", "-", "*", "/")


@dataclass(frozen=True)
class _Token:
    type: str  # IDENT | VAR | NUMBER | punct literal | EOF
    value: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    toks: list[_Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "?":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            if j == i + 1:
                raise ParseError("bare '?' is not a variable", line, col, ("variable name",))
            toks.append(_Token("VAR", text[i + 1:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            toks.append(_Token("NUMBER", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Token("IDENT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                toks.append(_Token(p, p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
    toks.append(_Token("EOF", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, offset: int = 0) -> _Token:
        return self.toks[min(self.i + offset, len(self.toks) - 1)]

    def take(self, *types: str) -> _Token:
        tok = self.peek()
        if types and tok.type not in types:
            raise ParseError(f"unexpected {tok.type} {tok.value!r}", tok.line, tok.col, types)
        self.i += 1
        return tok

    def at(self, *types: str) -> bool:
        return self.peek().type in types

    # -- statements --------------------------------------------------------

    def program(self) -> SourceProgram:
        rules: list[Rule] = []
        facts: list[Literal] = []
        sups: list[tuple[str, str]] = []
        confs: list[ConflictDecl] = []
        rule_pos: dict[str, _Token] = {}
        while not self.at("EOF"):
            tok = self.peek()
            if tok.type == "IDENT" and tok.value == "conflict":
                confs.append(self.conflict_decl())
            elif tok.type == "IDENT" and self.peek(1).type == ":":
                rule = self.rule()
                if rule.id in rule_pos:
                    raise ParseError(f"duplicate rule id {rule.id}", tok.line, tok.col)
                rule_pos[rule.id] = tok
                rules.append(rule)
            elif tok.type == "IDENT" and self.peek(1).type == ">":
                sups.append(self.superiority())
            else:
                facts.append(self.fact())
        known = {r.id for r in rules}
        for a, b in sups:
            if a not in known or b not in known:
                tok = self.toks[0]
                raise ParseError(f"superiority references unknown rule: {a} > {b}",
                                 tok.line, tok.col)
        return SourceProgram(tuple(rules), tuple(facts), tuple(sups), tuple(confs))

    def rule(self) -> Rule:
        rid = self.take("IDENT").value
        self.take(":")
        head = self.literal()
        arrow = self.take(":-", ":=", ":~")
        body: list[BodyElement] = [self.body_element()]
        while self.at(","):
            self.take(",")
            body.append(self.body_element())
        self.take(".")
        return Rule(rid, ARROW_KINDS[arrow.type], head, tuple(body))

    def superiority(self) -> tuple[str, str]:
        a = self.take("IDENT").value
        self.take(">")
        b = self.take("IDENT").value
        self.take(".")
        return (a, b)

    def conflict_decl(self) -> ConflictDecl:
        self.take("IDENT")  # 'conflict'
        scope = self.literal()
        w = self.take("IDENT")
        if w.value != "with":
            raise ParseError(f"unexpected {w.value!r}", w.line, w.col, ("with",))
        pats = [self.literal()]
        guards: list[Comparison] = []
        while self.at(","):
            self.take(",")
            pats.append(self.literal())
        if self.at("IDENT") and self.peek().value == "where":
            self.take("IDENT")
            g = self.guard()
            if not isinstance(g, Comparison):
                tok = self.peek()
                raise ParseError("conflict guards must be comparisons", tok.line, tok.col)
            guards.append(g)
            while self.at(","):
                self.take(",")
                g = self.guard()
                if not isinstance(g, Comparison):
                    tok = self.peek()
                    raise ParseError("conflict guards must be comparisons", tok.line, tok.col)
                guards.append(g)
        self.take(".")
        return ConflictDecl(scope, tuple(pats), tuple(guards))

    def fact(self) -> Literal:
        tok = self.peek()
        lit = self.literal()
        self.take(".")
        if not lit.is_ground():
            raise ParseError(f"variable in fact {lit.pred}", tok.line, tok.col)
        return lit

    # -- elements ----------------------------------------------------------

    def body_element(self) -> BodyElement:
        tok = self.peek()
        if tok.type == "IDENT" and tok.value == "not" and self.peek(1).type == "(":
            return self.naf_block()
        if tok.type == "~":
            return self.literal()
        if tok.type == "IDENT":
            if tok.value == "now" and self.peek(1).type == "(":
                return self.guard()
            nxt = self.peek(1)
            if nxt.type in COMPARISON_OPS or nxt.type in ("+", "-", "*", "/"):
                return self.guard()
            return self.literal()
        return self.guard()

    def naf_block(self) -> NafBlock:
        self.take("IDENT")  # 'not'
        self.take("(")
        lit = self.literal()
        guards: list[Guard] = []
        while self.at(","):
            self.take(",")
            guards.append(self.guard())
        self.take(")")
        return NafBlock(lit, tuple(guards))

    def literal(self) -> Literal:
        negated = False
        if self.at("~"):
            self.take("~")
            negated = True
        name = self.take("IDENT")
        if name.value in RESERVED_WORDS:
            raise ParseError(f"{name.value!r} is a reserved word", name.line, name.col)
        if not self.at("("):
            return Literal(name.value, (), negated)
        self.take("(")
        pairs: list[tuple[str, Term]] = []
        positional = 0
        named = False
        while True:
            if self.at("IDENT") and self.peek(1).type == "->":
                key = self.take("IDENT").value
                self.take("->")
                pairs.append((key, self.term()))
                named = True
            else:
                pairs.append((str(positional), self.term()))
                positional += 1
            if self.at(","):
                self.take(",")
                continue
            break
        self.take(")")
        if named and positional:
            raise ParseError("cannot mix positional and named arguments in one atom",
                             name.line, name.col)
        try:
            args = _canonical_args(pairs)
        except ValueError as exc:
            raise ParseError(str(exc), name.line, name.col) from None
        return Literal(name.value, args, negated)

    def term(self) -> Term:
        tok = self.peek()
        if tok.type == "VAR":
            self.take("VAR")
            return Var(tok.value)
        if tok.type == "NUMBER":
            self.take("NUMBER")
            return Num(Fraction(tok.value))
        if tok.type == "-" and self.peek(1).type == "NUMBER":
            self.take("-")
            num = self.take("NUMBER")
            return Num(-Fraction(num.value))
        if tok.type == "IDENT":
            self.take("IDENT")
            return Const(tok.value)
        raise ParseError(f"unexpected {tok.type} {tok.value!r}", tok.line, tok.col,
                         ("variable", "number", "constant"))

    # -- guards and expressions ---------------------------------------------

    def guard(self) -> Guard:
        if self.at("VAR") and self.peek(1).type == "IDENT" and self.peek(1).value == "is":
            target = Var(self.take("VAR").value)
            self.take("IDENT")  # 'is'
            return IsBinding(target, self.expr())
        left = self.expr()
        op = self.take(*COMPARISON_OPS)
        right = self.expr()
        return Comparison(op.type, left, right)

    def expr(self) -> Expr:
        node = self.expr_mul()
        while self.at("+", "-"):
            op = self.take("+", "-").type
            node = BinOp(op, node, self.expr_mul())
        return node

    def expr_mul(self) -> Expr:
        node = self.expr_atom()
        while self.at("*", "/"):
            op = self.take("*", "/").type
            node = BinOp(op, node, self.expr_atom())
        return node

    def expr_atom(self) -> Expr:
        tok = self.peek()
        if tok.type == "(":
            self.take("(")
            node = self.expr()
            self.take(")")
            return node
        if tok.type == "IDENT" and tok.value == "now":
            self.take("IDENT")
            self.take("(")
            self.take(")")
            return NowCall()
        if tok.type == "-" and self.peek(1).type == "NUMBER":
            self.take("-")
            num = self.take("NUMBER")
            return Num(-Fraction(num.value))
        if tok.type == "NUMBER":
            self.take("NUMBER")
            return Num(Fraction(tok.value))
        if tok.type == "VAR":
            self.take("VAR")
            return Var(tok.value)
        if tok.type == "IDENT":
            self.take("IDENT")
            return Const(tok.value)
        raise ParseError(f"unexpected {tok.type} {tok.value!r}", tok.line, tok.col,
                         ("expression",))


def parse_program(text: str) -> SourceProgram:
    """Parse a whole rule file."""
    return _Parser(text).program()


def parse_fact(text: str) -> Literal:
    """Parse a single ground atom terminated by a dot."""
    p = _Parser(text)
    lit = p.fact()
    p.take("EOF")
    return lit


def parse_literal(text: str) -> Literal:
    """Parse one atom, variables allowed (for query patterns)."""
    p = _Parser(text)
    lit = p.literal()
    if p.at("."):
        p.take(".")
    p.take("EOF")
    return lit


# ---------------------------------------------------------------------------
# Serializer
# ---------------------------------------------------------------------------

def render_number(v: Fraction) -> str:
    """Exact decimal rendering.  Only terminating decimals are representable
    in the source syntax; other denominators are an error."""
    num, den = v.numerator, v.denominator
    k2 = k5 = 0
    d = den
    while d % 2 == 0:
        d //= 2
        k2 += 1
    while d % 5 == 0:
        d //= 5
        k5 += 1
    if d != 1:
        raise ValueError(f"{v} has no finite decimal form")
    k = max(k2, k5)
    scaled = abs(num) * 10 ** k // den
    sign = "-" if num < 0 else ""
    if k == 0:
        return f"{sign}{scaled}"
    digits = str(scaled).rjust(k + 1, "0")
    whole, frac = digits[:-k], digits[-k:]
    frac = frac.rstrip("0")
    return f"{sign}{whole}.{frac}" if frac else f"{sign}{whole}"


def serialize_term(t: Term) -> str:
    return str(t)


def serialize_literal(lit: Literal) -> str:
    neg = "~" if lit.negated else ""
    if not lit.args:
        return f"{neg}{lit.pred}"
    if lit.positional:
        inner = ", ".join(str(t) for _, t in lit.args)
    else:
        inner = ", ".join(f"{k}->{t}" for k, t in lit.args)
    return f"{neg}{lit.pred}({inner})"


def serialize_rule(rule: Rule) -> str:
    arrow = KIND_ARROWS[rule.kind]
    body = ", ".join(str(e) if not isinstance(e, Literal) else serialize_literal(e)
                     for e in rule.body)
    return f"{rule.id}: {serialize_literal(rule.head)} {arrow} {body}."


def serialize_conflict(decl: ConflictDecl) -> str:
    parts = f"conflict {serialize_literal(decl.scope)} with "
    parts += ", ".join(serialize_literal(p) for p in decl.conflicts_with)
    if decl.guards:
        parts += " where " + ", ".join(str(g) for g in decl.guards)
    return parts + "."


def serialize_program(prog: SourceProgram) -> str:
    lines: list[str] = []
    for rule in prog.rules:
        lines.append(serialize_rule(rule))
    for fact in prog.facts:
        lines.append(serialize_literal(fact) + ".")
    for a, b in prog.superiorities:
        lines.append(f"{a} > {b}.")
    for decl in prog.conflicts:
        lines.append(serialize_conflict(decl))
    return "\n".join(lines) + ("\n" if lines else "")
