"""Defeasible inference over a ground fact base.

Evaluation is a bottom-up fixpoint over ground rule instances, stratified on
negation as failure.  Per stratum it first computes a closure (every instance
whose body atoms could match derivable literals, with builtins and NAF checks
resolved against lower strata), then labels literals with four constructive
tags:

* ``definite_pos``  -- derivable from facts and strict rules alone
* ``definite_neg``  -- provably not so derivable
* ``defeasible_pos`` -- defeasibly derivable
* ``defeasible_neg`` -- provably not defeasibly derivable

A literal q is defeasibly derivable when it is definite, or some strict or
defeasible rule instance for q fires, no conflicting literal is definite, and
that same instance's rule is superior to every firing rule instance for a
conflicting literal (ambiguity blocking, no team defeat).  Defeaters attack
but never conclude.  The conflict set of a ground literal is its strong
negation plus whatever the theory's conflict declarations add.  Literals
caught in unresolved cycles stay untagged.

Body atoms match stored literals by argument subset: a pattern mentioning a
subset of an atom's keys matches any stored literal that extends it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

from disarm.dposl import (
    BinOp,
    BodyElement,
    Comparison,
    ConflictDecl,
    Const,
    Guard,
    IsBinding,
    Literal,
    NafBlock,
    NowCall,
    Num,
    Rule,
    SourceProgram,
    Term,
    Var,
)


class EngineError(Exception):
    pass


class TheoryError(EngineError):
    """The theory fails a static check (superiority cycle, range
    restriction, NAF stratification, unbounded arithmetic recursion)."""


class BuiltinError(EngineError):
    """A guard could not be evaluated (unbound operand, bad types,
    division by zero, now() without an injected clock)."""


Subst = dict[str, Term]


# ---------------------------------------------------------------------------
# Builtins
# ---------------------------------------------------------------------------

def _eval_expr(expr, subst: Subst, now: int | None) -> Term:
    if isinstance(expr, Num):
        return expr
    if isinstance(expr, Const):
        return expr
    if isinstance(expr, Var):
        if expr.name not in subst:
            raise BuiltinError(f"unbound variable ?{expr.name} in guard")
        return subst[expr.name]
    if isinstance(expr, NowCall):
        if now is None:
            raise BuiltinError("now() used but no clock was injected")
        return Num(Fraction(now))
    if isinstance(expr, BinOp):
        left = _eval_expr(expr.left, subst, now)
        right = _eval_expr(expr.right, subst, now)
        if not isinstance(left, Num) or not isinstance(right, Num):
            raise BuiltinError(f"arithmetic on non-numeric operands: {expr}")
        if expr.op == "+":
            return Num(left.value + right.value)
        if expr.op == "-":
            return Num(left.value - right.value)
        if expr.op == "*":
            return Num(left.value * right.value)
        if expr.op == "/":
            if right.value == 0:
                raise BuiltinError(f"division by zero: {expr}")
            return Num(left.value / right.value)
    raise BuiltinError(f"cannot evaluate {expr!r}")


def evaluate_builtin(guard: Guard, substitution: Subst, now: int | None = None
                     ) -> tuple[bool, Subst]:
    """Evaluate one guard under a substitution.

    Comparisons return (holds, substitution).  ``?x is expr`` computes the
    expression and binds the target (or checks equality when already bound).
    Raises BuiltinError for unbound operands, type mismatches, or division
    by zero.
    """
    if isinstance(guard, IsBinding):
        value = _eval_expr(guard.expr, substitution, now)
        bound = substitution.get(guard.target.name)
        if bound is not None:
            return bound == value, substitution
        out = dict(substitution)
        out[guard.target.name] = value
        return True, out
    left = _eval_expr(guard.left, substitution, now)
    right = _eval_expr(guard.right, substitution, now)
    if guard.op == "=":
        return left == right, substitution
    if guard.op == "!=":
        return left != right, substitution
    if not isinstance(left, Num) or not isinstance(right, Num):
        raise BuiltinError(f"ordering comparison on non-numeric operands: {guard}")
    if guard.op == "<":
        return left.value < right.value, substitution
    if guard.op == "<=":
        return left.value <= right.value, substitution
    if guard.op == ">":
        return left.value > right.value, substitution
    if guard.op == ">=":
        return left.value >= right.value, substitution
    raise BuiltinError(f"unknown comparison {guard.op}")


def _expr_vars(expr) -> set[str]:
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, BinOp):
        return _expr_vars(expr.left) | _expr_vars(expr.right)
    return set()


def _guard_vars(guard: Guard) -> set[str]:
    if isinstance(guard, IsBinding):
        return _expr_vars(guard.expr) | {guard.target.name}
    return _expr_vars(guard.left) | _expr_vars(guard.right)


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------

def match_literal(pattern: Literal, candidate: Literal, subst: Subst) -> Subst | None:
    """Unify a pattern against a stored literal.  Every pattern key must be
    present in the candidate; the candidate may carry extra keys."""
    if pattern.pred != candidate.pred or pattern.negated != candidate.negated:
        return None
    out = subst
    copied = False
    cand = dict(candidate.args)
    for key, term in pattern.args:
        if key not in cand:
            return None
        value = cand[key]
        if isinstance(term, Var):
            bound = out.get(term.name)
            if bound is None:
                if not copied:
                    out = dict(out)
                    copied = True
                out[term.name] = value
            elif bound != value:
                return None
        elif term != value:
            return None
    return out


def substitute(lit: Literal, subst: Subst) -> Literal:
    args = tuple((k, subst.get(t.name, t) if isinstance(t, Var) else t)
                 for k, t in lit.args)
    return Literal(lit.pred, args, lit.negated)


def extends(pattern: Literal, candidate: Literal) -> bool:
    """True when the ground candidate carries at least the pattern's
    key/value pairs."""
    if pattern.pred != candidate.pred or pattern.negated != candidate.negated:
        return False
    cand = dict(candidate.args)
    return all(cand.get(k) == t for k, t in pattern.args)


# ---------------------------------------------------------------------------
# Static analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Plan:
    """Evaluation order for one rule: body atoms in source order with the
    guards interleaved as soon as their variables are bound, NAF last."""
    literals: tuple[Literal, ...]
    steps: tuple[tuple[str, object], ...]  # ("match", lit) | ("guard", g) | ("naf", n)


@dataclass
class _Analysis:
    rules: tuple[Rule, ...]
    plans: dict[str, _Plan]
    superior: frozenset[tuple[str, str]]
    strata: dict[tuple[str, bool], int]
    pred_strata: dict[str, int]
    decls_by_pred: dict[tuple[str, bool], list[ConflictDecl]]
    n_strata: int


def _head_key(rule: Rule) -> str:
    return rule.head.pred


def _check_superiority(program: SourceProgram) -> frozenset[tuple[str, str]]:
    pairs = frozenset(program.superiorities)
    graph: dict[str, set[str]] = {}
    for a, b in pairs:
        graph.setdefault(a, set()).add(b)
    state: dict[str, int] = {}

    def visit(node: str, path: list[str]) -> None:
        mark = state.get(node, 0)
        if mark == 1:
            cycle = path[path.index(node):] + [node]
            raise TheoryError("cyclic superiority: " + " > ".join(cycle))
        if mark == 2:
            return
        state[node] = 1
        for nxt in graph.get(node, ()):
            visit(nxt, path + [node])
        state[node] = 2

    for start in graph:
        visit(start, [])
    return pairs


def _build_plan(rule: Rule) -> _Plan:
    literals = [e for e in rule.body if isinstance(e, Literal)]
    guards = [e for e in rule.body if isinstance(e, (Comparison, IsBinding))]
    nafs = [e for e in rule.body if isinstance(e, NafBlock)]

    steps: list[tuple[str, object]] = []
    bound: set[str] = set()
    pending = list(guards)

    def flush_guards() -> None:
        progress = True
        while progress:
            progress = False
            for g in list(pending):
                if isinstance(g, IsBinding):
                    needed = _expr_vars(g.expr)
                else:
                    needed = _guard_vars(g)
                if needed <= bound:
                    steps.append(("guard", g))
                    if isinstance(g, IsBinding):
                        bound.add(g.target.name)
                    pending.remove(g)
                    progress = True

    for lit in literals:
        steps.append(("match", lit))
        bound |= lit.variables()
        flush_guards()
    flush_guards()
    if pending:
        g = pending[0]
        missing = sorted((_guard_vars(g) if isinstance(g, Comparison)
                          else _expr_vars(g.expr)) - bound)
        raise TheoryError(
            f"rule {rule.id} is not range-restricted: guard {g} uses unbound "
            f"?{', ?'.join(missing)}")

    head_vars = rule.head.variables()
    if not head_vars <= bound:
        missing = sorted(head_vars - bound)
        raise TheoryError(
            f"rule {rule.id} is not range-restricted: head variable "
            f"?{', ?'.join(missing)} never bound in the body")

    for naf in nafs:
        inner_ok = bound | naf.literal.variables()
        for g in naf.guards:
            if isinstance(g, IsBinding):
                raise TheoryError(f"rule {rule.id}: 'is' not allowed inside not(...)")
            if not _guard_vars(g) <= inner_ok:
                missing = sorted(_guard_vars(g) - inner_ok)
                raise TheoryError(
                    f"rule {rule.id}: not(...) guard uses unbound "
                    f"?{', ?'.join(missing)}")
        steps.append(("naf", naf))

    return _Plan(tuple(literals), tuple(steps))


def _stratify(program: SourceProgram) -> tuple[dict[str, int], int]:
    preds: set[str] = set()
    for rule in program.rules:
        preds.add(rule.head.pred)
        for e in rule.body:
            if isinstance(e, Literal):
                preds.add(e.pred)
            elif isinstance(e, NafBlock):
                preds.add(e.literal.pred)
    for f in program.facts:
        preds.add(f.pred)
    for decl in program.conflicts:
        preds.add(decl.scope.pred)
        for p in decl.conflicts_with:
            preds.add(p.pred)

    # edge (src, dst, weight): stratum(dst) >= stratum(src) + weight
    edges: list[tuple[str, str, int]] = []
    for rule in program.rules:
        head = rule.head.pred
        for e in rule.body:
            if isinstance(e, Literal):
                edges.append((e.pred, head, 0))
            elif isinstance(e, NafBlock):
                edges.append((e.literal.pred, head, 1))
    # conflicting predicates must be labelled in the same pass
    for decl in program.conflicts:
        for p in decl.conflicts_with:
            edges.append((decl.scope.pred, p.pred, 0))
            edges.append((p.pred, decl.scope.pred, 0))

    strata = {p: 0 for p in preds}
    for _ in range(len(preds) + 1):
        changed = False
        for src, dst, w in edges:
            if strata[src] + w > strata[dst]:
                strata[dst] = strata[src] + w
                changed = True
        if not changed:
            break
    else:
        raise TheoryError("NAF cycle: program is not stratified")
    if any(s > len(preds) for s in strata.values()):
        raise TheoryError("NAF cycle: program is not stratified")
    n = max(strata.values(), default=0) + 1
    return strata, n


def _check_is_recursion(program: SourceProgram) -> None:
    """Reject ``is`` arithmetic in rules that can feed their own body: new
    numbers generated each pass would never reach a fixpoint."""
    graph: dict[str, set[str]] = {}
    for rule in program.rules:
        deps = graph.setdefault(rule.head.pred, set())
        for e in rule.body:
            if isinstance(e, Literal):
                deps.add(e.pred)

    def reaches(src: str, dst: str) -> bool:
        seen = set()
        stack = [src]
        while stack:
            cur = stack.pop()
            if cur == dst:
                return True
            if cur in seen:
                continue
            seen.add(cur)
            stack.extend(graph.get(cur, ()))
        return False

    for rule in program.rules:
        if not any(isinstance(e, IsBinding) for e in rule.body):
            continue
        for e in rule.body:
            if isinstance(e, Literal) and reaches(e.pred, rule.head.pred):
                raise TheoryError(
                    f"rule {rule.id}: 'is' arithmetic in a recursive rule "
                    "cannot be evaluated to a fixpoint")


@lru_cache(maxsize=256)
def _analyze(program: SourceProgram) -> _Analysis:
    seen: set[str] = set()
    for rule in program.rules:
        if rule.id in seen:
            raise TheoryError(f"duplicate rule id {rule.id}")
        seen.add(rule.id)
    for a, b in program.superiorities:
        if a not in seen or b not in seen:
            raise TheoryError(f"superiority references unknown rule: {a} > {b}")
    superior = _check_superiority(program)
    plans = {rule.id: _build_plan(rule) for rule in program.rules}
    pred_strata, n = _stratify(program)
    _check_is_recursion(program)
    strata = {}
    for pred, s in pred_strata.items():
        strata[(pred, False)] = s
        strata[(pred, True)] = s
    decls: dict[tuple[str, bool], list[ConflictDecl]] = {}
    for decl in program.conflicts:
        decls.setdefault((decl.scope.pred, decl.scope.negated), []).append(decl)
    return _Analysis(program.rules, plans, superior, strata, pred_strata, decls, n)


def check_theory(program: SourceProgram) -> list[str]:
    """Run the static checks, returning human-readable problems (empty when
    the theory is clean)."""
    try:
        _analyze(program)
    except TheoryError as exc:
        return [str(exc)]
    return []


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass
class _Instance:
    rule: Rule
    head: Literal
    body: tuple[Literal, ...]  # ground (possibly partial-key) body atoms
    subst: Subst


class _Buckets:
    """Ground literals grouped by (pred, negated), insertion-ordered."""

    def __init__(self) -> None:
        self.by_key: dict[tuple[str, bool], dict[Literal, None]] = {}

    def add(self, lit: Literal) -> bool:
        bucket = self.by_key.setdefault((lit.pred, lit.negated), {})
        if lit in bucket:
            return False
        bucket[lit] = None
        return True

    def get(self, pred: str, negated: bool) -> Iterable[Literal]:
        return self.by_key.get((pred, negated), ())

    def __contains__(self, lit: Literal) -> bool:
        return lit in self.by_key.get((lit.pred, lit.negated), ())

    def all(self) -> Iterator[Literal]:
        for bucket in self.by_key.values():
            yield from bucket


@dataclass
class ConclusionSet:
    """The four tag sets over the derivable ground literals.  Negative tags
    are constructive refutations: a literal in neither a positive nor its
    negative set is caught in an unresolved cycle and simply not derivable."""

    definite_pos: frozenset[Literal]
    definite_neg: frozenset[Literal]
    defeasible_pos: frozenset[Literal]
    defeasible_neg: frozenset[Literal]
    trace: tuple[str, ...] = ()

    def holds(self, lit: Literal, definitely: bool = False) -> bool:
        return lit in (self.definite_pos if definitely else self.defeasible_pos)


class _Evaluation:
    def __init__(self, program: SourceProgram, facts: Iterable[Literal],
                 now: int | None, trace: bool):
        self.analysis = _analyze(program)
        self.program = program
        self.now = now
        self.tracing = trace
        self.trace: list[str] = []

        self.facts: set[Literal] = set()
        self.universe = _Buckets()
        for f in itertools.chain(program.facts, facts):
            if not f.is_ground():
                raise EngineError(f"fact is not ground: {f}")
            self.facts.add(f)
            self.universe.add(f)

        self.plus_d: set[Literal] = set()
        self.minus_d: set[Literal] = set()
        self.plus_p: set[Literal] = set()
        self.minus_p: set[Literal] = set()

        self.instances: list[_Instance] = []
        self.instances_by_head: dict[Literal, list[_Instance]] = {}
        self.conflict_cache: dict[Literal, tuple[Literal, ...]] = {}

    # -- grounding ----------------------------------------------------------

    def _match_steps(self, steps, idx: int, subst: Subst) -> Iterator[Subst]:
        if idx == len(steps):
            yield subst
            return
        kind, payload = steps[idx]
        if kind == "match":
            pattern: Literal = payload
            for cand in list(self.universe.get(pattern.pred, pattern.negated)):
                nxt = match_literal(pattern, cand, subst)
                if nxt is not None:
                    yield from self._match_steps(steps, idx + 1, nxt)
        elif kind == "guard":
            holds, nxt = evaluate_builtin(payload, subst, self.now)
            if holds:
                yield from self._match_steps(steps, idx + 1, nxt)
        elif kind == "naf":
            if self._naf_holds(payload, subst):
                yield from self._match_steps(steps, idx + 1, subst)

    def _naf_holds(self, naf: NafBlock, subst: Subst) -> bool:
        """not(L, guards): no defeasibly-provable instance of L satisfies the
        guards.  Stratification guarantees L's predicate is already settled."""
        pattern = substitute(naf.literal, {k: v for k, v in subst.items()})
        for cand in self.universe.get(pattern.pred, pattern.negated):
            if cand not in self.plus_p:
                continue
            inner = match_literal(pattern, cand, subst)
            if inner is None:
                continue
            ok = True
            for g in naf.guards:
                holds, inner = evaluate_builtin(g, inner, self.now)
                if not holds:
                    ok = False
                    break
            if ok:
                return False
        return True

    def _stratum_of(self, pred: str) -> int:
        # runtime facts may use predicates the program never mentions
        return self.analysis.pred_strata.get(pred, 0)

    def _ground_stratum(self, stratum: int) -> None:
        rules = [r for r in self.analysis.rules
                 if self._stratum_of(r.head.pred) == stratum]
        seen: set[tuple[str, Literal, tuple[Literal, ...]]] = set()
        changed = True
        while changed:
            changed = False
            for rule in rules:
                plan = self.analysis.plans[rule.id]
                for subst in self._match_steps(plan.steps, 0, {}):
                    head = substitute(rule.head, subst)
                    body = tuple(substitute(l, subst) for l in plan.literals)
                    key = (rule.id, head, body)
                    if key in seen:
                        continue
                    seen.add(key)
                    inst = _Instance(rule, head, body, subst)
                    self.instances.append(inst)
                    self.instances_by_head.setdefault(head, []).append(inst)
                    if self.universe.add(head):
                        changed = True

    # -- conflict sets -------------------------------------------------------

    def _conflicts(self, q: Literal) -> tuple[Literal, ...]:
        cached = self.conflict_cache.get(q)
        if cached is not None:
            return cached
        out: list[Literal] = []
        comp = q.complement()
        if comp in self.universe:
            out.append(comp)
        for decl in self.analysis.decls_by_pred.get((q.pred, q.negated), ()):
            base = match_literal(decl.scope, q, {})
            if base is None:
                continue
            for pattern in decl.conflicts_with:
                for cand in self.universe.get(pattern.pred, pattern.negated):
                    if cand == q:
                        continue
                    subst = match_literal(pattern, cand, base)
                    if subst is None:
                        continue
                    ok = True
                    for g in decl.guards:
                        if not _guard_vars(g) <= set(subst):
                            continue  # guard constrains other patterns
                        holds, subst = evaluate_builtin(g, subst, self.now)
                        if not holds:
                            ok = False
                            break
                    if ok and cand not in out:
                        out.append(cand)
        result = tuple(out)
        self.conflict_cache[q] = result
        return result

    # -- labelling ------------------------------------------------------------

    def _sat(self, pattern: Literal, tagged: set[Literal]) -> bool:
        if pattern in tagged:
            return True
        for cand in self.universe.get(pattern.pred, pattern.negated):
            if cand in tagged and extends(pattern, cand):
                return True
        return False

    def _failed(self, pattern: Literal, refuted: set[Literal]) -> bool:
        """Constructively failed: every candidate extending the pattern is
        refuted (vacuously so when none exists)."""
        for cand in self.universe.get(pattern.pred, pattern.negated):
            if extends(pattern, cand) and cand not in refuted:
                return False
        return True

    def _fires_d(self, inst: _Instance) -> bool:
        return all(self._sat(b, self.plus_d) for b in inst.body)

    def _fires_p(self, inst: _Instance) -> bool:
        return all(self._sat(b, self.plus_p) for b in inst.body)

    def _fails_p(self, inst: _Instance) -> bool:
        return any(self._failed(b, self.minus_p) for b in inst.body)

    def _label_stratum(self, stratum: int) -> None:
        lits = [l for l in self.universe.all()
                if self._stratum_of(l.pred) == stratum]
        sup = self.analysis.superior

        changed = True
        while changed:
            changed = False
            for q in lits:
                strict_insts = [i for i in self.instances_by_head.get(q, ())
                                if i.rule.kind == "strict"]
                support_insts = [i for i in self.instances_by_head.get(q, ())
                                 if i.rule.kind != "defeater"]

                # +D
                if q not in self.plus_d:
                    if q in self.facts or any(self._fires_d(i) for i in strict_insts):
                        self.plus_d.add(q)
                        self.plus_p.add(q)
                        changed = True

                # -D
                if q not in self.minus_d and q not in self.facts:
                    if all(any(self._failed(b, self.minus_d) for b in i.body)
                           for i in strict_insts):
                        self.minus_d.add(q)
                        changed = True

                conflicts = self._conflicts(q)
                attackers = [i for c in conflicts
                             for i in self.instances_by_head.get(c, ())]

                # +d
                if q not in self.plus_p:
                    if all(c in self.minus_d for c in conflicts):
                        for rho in support_insts:
                            if not self._fires_p(rho):
                                continue
                            beaten = all(
                                self._fails_p(sigma)
                                or (rho.rule.id, sigma.rule.id) in sup
                                for sigma in attackers)
                            if beaten:
                                self.plus_p.add(q)
                                changed = True
                                if self.tracing:
                                    self.trace.append(
                                        f"{rho.rule.id} fired: {q}")
                                break

                # -d
                if q not in self.minus_p and q in self.minus_d:
                    def rho_dead(rho: _Instance) -> bool:
                        if self._fails_p(rho):
                            return True
                        if any(c in self.plus_d for c in conflicts):
                            return True
                        return any(self._fires_p(sigma)
                                   and (rho.rule.id, sigma.rule.id) not in sup
                                   for sigma in attackers)
                    if all(rho_dead(rho) for rho in support_insts):
                        self.minus_p.add(q)
                        changed = True

    def run(self) -> ConclusionSet:
        for stratum in range(self.analysis.n_strata):
            self._ground_stratum(stratum)
            self._label_stratum(stratum)
        return ConclusionSet(
            frozenset(self.plus_d),
            frozenset(self.minus_d),
            frozenset(self.plus_p),
            frozenset(self.minus_p),
            tuple(sorted(self.trace)),
        )


def run(theory: SourceProgram, facts: Iterable[Literal] = (),
        now: int | None = None, trace: bool = False) -> ConclusionSet:
    """Evaluate a theory over extra ground facts.  ``now`` is the injected
    clock for ``now()`` guards; there is no wall-clock fallback."""
    return _Evaluation(theory, facts, now, trace).run()


_TAG_SETS = (
    ("definite", "definite_pos"),
    ("defeasible", "defeasible_pos"),
    ("not_defeasible", "defeasible_neg"),
    ("not_definite", "definite_neg"),
)


def query(theory: SourceProgram, facts: Iterable[Literal], pattern: Literal,
          now: int | None = None) -> list[tuple[Subst, str]]:
    """All ground instances of the pattern across the conclusion sets, each
    with its strongest tag, canonically sorted."""
    conclusions = run(theory, facts, now)
    out: dict[Literal, tuple[Subst, str]] = {}
    for tag, attr in _TAG_SETS:
        for lit in getattr(conclusions, attr):
            if lit in out:
                continue
            subst = match_literal(pattern, lit, {})
            if subst is not None:
                out[lit] = (subst, tag)
    return [out[lit] for lit in sorted(out, key=str)]
