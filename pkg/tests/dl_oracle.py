"""Brute-force oracle for the defeasible proof theory.

Deliberately naive and independent of the engine's evaluation strategy:
grounds every rule by enumerating all substitutions over the constant
universe (growing it when arithmetic makes new numbers), then labels
literals by iterating the four proof conditions over everything until
nothing changes.  Stratification on negation-as-failure is recomputed here
with a simple level-raising loop.

Conventions shared with the engine (the contract under test):
  * body atoms match stored literals by key-subset extension;
  * the labelled universe is the closure of facts under rule instances whose
    guards and NAF checks pass;
  * negative tags are constructive (a looping literal gets no tag);
  * ambiguity blocking without team defeat: one firing rule instance must be
    superior to every firing attacker;
  * a ground literal's conflict set is its strong negation plus declared
    conflicts, guards applying when their variables are bound.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from disarm.dposl import (
    BinOp,
    Comparison,
    Const,
    IsBinding,
    Literal,
    NafBlock,
    NowCall,
    Num,
    Rule,
    SourceProgram,
    Var,
)
from disarm.engine import ConclusionSet


def _terms_in_literal(lit):
    return [t for _, t in lit.args]


def _rule_vars(rule: Rule) -> list[str]:
    seen: dict[str, None] = {}

    def expr_vars(e):
        if isinstance(e, Var):
            seen.setdefault(e.name)
        elif isinstance(e, BinOp):
            expr_vars(e.left)
            expr_vars(e.right)

    for t in _terms_in_literal(rule.head):
        if isinstance(t, Var):
            seen.setdefault(t.name)
    for e in rule.body:
        if isinstance(e, Literal):
            for t in _terms_in_literal(e):
                if isinstance(t, Var):
                    seen.setdefault(t.name)
        elif isinstance(e, Comparison):
            expr_vars(e.left)
            expr_vars(e.right)
        elif isinstance(e, IsBinding):
            expr_vars(e.expr)
            seen.setdefault(e.target.name)
        elif isinstance(e, NafBlock):
            pass  # NAF-local variables are not enumerated
    return list(seen)


def _is_targets(rule: Rule) -> set[str]:
    return {e.target.name for e in rule.body if isinstance(e, IsBinding)}


def _strata(program: SourceProgram) -> dict[str, int]:
    preds = set()
    deps = []  # (body pred, head pred, strict?)
    for rule in program.rules:
        preds.add(rule.head.pred)
        for e in rule.body:
            if isinstance(e, Literal):
                preds.add(e.pred)
                deps.append((e.pred, rule.head.pred, 0))
            elif isinstance(e, NafBlock):
                preds.add(e.literal.pred)
                deps.append((e.literal.pred, rule.head.pred, 1))
    for f in program.facts:
        preds.add(f.pred)
    for d in program.conflicts:
        preds.add(d.scope.pred)
        for p in d.conflicts_with:
            preds.add(p.pred)
            deps.append((d.scope.pred, p.pred, 0))
            deps.append((p.pred, d.scope.pred, 0))
    level = {p: 0 for p in preds}
    for _ in range(len(preds) + 2):
        moved = False
        for src, dst, w in deps:
            if level[src] + w > level[dst]:
                level[dst] = level[src] + w
                moved = True
        if not moved:
            break
    else:
        raise ValueError("oracle: unstratified program")
    return level


def _subst_term(t, theta):
    if isinstance(t, Var):
        return theta.get(t.name, t)
    return t


def _subst_literal(lit: Literal, theta) -> Literal:
    return Literal(lit.pred,
                   tuple((k, _subst_term(t, theta)) for k, t in lit.args),
                   lit.negated)


def _eval_expr(e, theta, now):
    if isinstance(e, Num):
        return e
    if isinstance(e, Const):
        return e
    if isinstance(e, Var):
        return theta[e.name]
    if isinstance(e, NowCall):
        return Num(Fraction(now))
    left, right = _eval_expr(e.left, theta, now), _eval_expr(e.right, theta, now)
    a, b = left.value, right.value
    return Num({"+": a + b, "-": a - b, "*": a * b,
                "/": a / b if b else None}[e.op])


def _guard_ok(g: Comparison, theta, now) -> bool:
    left = _eval_expr(g.left, theta, now)
    right = _eval_expr(g.right, theta, now)
    if g.op == "=":
        return left == right
    if g.op == "!=":
        return left != right
    if not isinstance(left, Num) or not isinstance(right, Num):
        return False
    return {"<": left.value < right.value, "<=": left.value <= right.value,
            ">": left.value > right.value, ">=": left.value >= right.value}[g.op]


def _extends(pattern: Literal, candidate: Literal) -> bool:
    if (pattern.pred != candidate.pred
            or pattern.negated != candidate.negated):
        return False
    cand = dict(candidate.args)
    return all(cand.get(k) == t for k, t in pattern.args)


def _match(pattern: Literal, candidate: Literal, theta):
    """Extension match binding the pattern's variables; None on mismatch."""
    if (pattern.pred != candidate.pred
            or pattern.negated != candidate.negated):
        return None
    out = dict(theta)
    cand = dict(candidate.args)
    for k, t in pattern.args:
        if k not in cand:
            return None
        if isinstance(t, Var):
            if t.name in out and out[t.name] != cand[k]:
                return None
            out[t.name] = cand[k]
        elif t != cand[k]:
            return None
    return out


@dataclass
class _Ground:
    rule: Rule
    head: Literal
    body: tuple[Literal, ...]


def oracle_run(program: SourceProgram, facts, now=None) -> ConclusionSet:
    level = _strata(program)
    all_facts = list(program.facts) + list(facts)
    n_strata = max(level.values(), default=0) + 1

    universe: set[Literal] = set(all_facts)
    plus_d: set[Literal] = set()
    minus_d: set[Literal] = set()
    plus_p: set[Literal] = set()
    minus_p: set[Literal] = set()

    def constants() -> list:
        seen: dict = {}
        for lit in universe:
            for t in _terms_in_literal(lit):
                seen.setdefault(t)
        for rule in program.rules:
            for t in _terms_in_literal(rule.head):
                if not isinstance(t, Var):
                    seen.setdefault(t)
            for e in rule.body:
                if isinstance(e, Literal):
                    for t in _terms_in_literal(e):
                        if not isinstance(t, Var):
                            seen.setdefault(t)
        return list(seen)

    def naf_ok(naf: NafBlock, theta) -> bool:
        pattern = _subst_literal(naf.literal, theta)
        for cand in universe:
            if cand not in plus_p:
                continue
            inner = _match(pattern, cand, theta)
            if inner is None:
                continue
            if all(_guard_ok(g, inner, now) for g in naf.guards):
                return False
        return True

    def ground_instances(stratum: int) -> list[_Ground]:
        rules = [r for r in program.rules
                 if level.get(r.head.pred, 0) == stratum]
        out: list[_Ground] = []
        seen_keys = set()
        grew = True
        while grew:
            grew = False
            consts = constants()
            for rule in rules:
                enum_vars = [v for v in _rule_vars(rule)
                             if v not in _is_targets(rule)]
                for combo in itertools.product(consts, repeat=len(enum_vars)):
                    theta = dict(zip(enum_vars, combo))
                    ok = True
                    # resolve arithmetic bindings, then guards, then NAF
                    for e in rule.body:
                        if isinstance(e, IsBinding):
                            try:
                                value = _eval_expr(e.expr, theta, now)
                            except (KeyError, TypeError, AttributeError):
                                ok = False
                                break
                            if value.value is None:
                                ok = False
                                break
                            if e.target.name in theta:
                                ok = theta[e.target.name] == value
                            else:
                                theta[e.target.name] = value
                            if not ok:
                                break
                    if not ok:
                        continue
                    for e in rule.body:
                        if isinstance(e, Comparison):
                            try:
                                if not _guard_ok(e, theta, now):
                                    ok = False
                                    break
                            except (KeyError, TypeError):
                                ok = False
                                break
                    if not ok:
                        continue
                    body_pats = [_subst_literal(e, theta) for e in rule.body
                                 if isinstance(e, Literal)]
                    # every body atom must be extendable inside the universe
                    if not all(any(_extends(b, c) for c in universe)
                               for b in body_pats):
                        continue
                    if not all(naf_ok(e, theta) for e in rule.body
                               if isinstance(e, NafBlock)):
                        continue
                    head = _subst_literal(rule.head, theta)
                    key = (rule.id, head, tuple(body_pats))
                    if key in seen_keys:
                        continue
                    seen_keys.add(key)
                    out.append(_Ground(rule, head, tuple(body_pats)))
                    if head not in universe:
                        universe.add(head)
                        grew = True
        return out

    superior = set(program.superiorities)

    def conflicts_of(q: Literal, insts: list[_Ground]) -> list[Literal]:
        out = []
        comp = q.complement()
        if comp in universe:
            out.append(comp)
        for decl in program.conflicts:
            base = _match(decl.scope, q, {})
            if base is None:
                continue
            for pat in decl.conflicts_with:
                for cand in universe:
                    if cand == q or cand in out:
                        continue
                    theta = _match(pat, cand, base)
                    if theta is None:
                        continue
                    applicable = [g for g in decl.guards
                                  if all(isinstance(x, (Num, Const))
                                         or x.name in theta
                                         for x in _comparison_atoms(g))]
                    if all(_guard_ok(g, theta, now) for g in applicable):
                        out.append(cand)
        return out

    def _comparison_atoms(g: Comparison):
        def atoms(e):
            if isinstance(e, BinOp):
                return atoms(e.left) + atoms(e.right)
            return [e]
        return [x for x in atoms(g.left) + atoms(g.right)
                if isinstance(x, Var)]

    def sat(pattern: Literal, tagged: set[Literal]) -> bool:
        return any(_extends(pattern, c) for c in tagged)

    def failed(pattern: Literal, refuted: set[Literal]) -> bool:
        return all(c in refuted for c in universe if _extends(pattern, c))

    for stratum in range(n_strata):
        insts = ground_instances(stratum)
        by_head: dict[Literal, list[_Ground]] = {}
        for g in insts:
            by_head.setdefault(g.head, []).append(g)
        lits = [l for l in universe if level.get(l.pred, 0) == stratum]
        fact_set = set(all_facts)

        changed = True
        while changed:
            changed = False
            for q in lits:
                strict = [g for g in by_head.get(q, ()) if g.rule.kind == "strict"]
                support = [g for g in by_head.get(q, ())
                           if g.rule.kind != "defeater"]
                conf = conflicts_of(q, insts)
                attackers = [g for c in conf for g in by_head.get(c, ())]

                if q not in plus_d and (q in fact_set or any(
                        all(sat(b, plus_d) for b in g.body) for g in strict)):
                    plus_d.add(q)
                    plus_p.add(q)
                    changed = True
                if (q not in minus_d and q not in fact_set and all(
                        any(failed(b, minus_d) for b in g.body) for g in strict)):
                    minus_d.add(q)
                    changed = True
                if q not in plus_p and all(c in minus_d for c in conf):
                    for rho in support:
                        if not all(sat(b, plus_p) for b in rho.body):
                            continue
                        if all(any(failed(b, minus_p) for b in s.body)
                               or (rho.rule.id, s.rule.id) in superior
                               for s in attackers):
                            plus_p.add(q)
                            changed = True
                            break
                if q not in minus_p and q in minus_d:
                    def dead(rho: _Ground) -> bool:
                        if any(failed(b, minus_p) for b in rho.body):
                            return True
                        if any(c in plus_d for c in conf):
                            return True
                        return any(all(sat(b, plus_p) for b in s.body)
                                   and (rho.rule.id, s.rule.id) not in superior
                                   for s in attackers)
                    if all(dead(rho) for rho in support):
                        minus_p.add(q)
                        changed = True

    return ConclusionSet(frozenset(plus_d), frozenset(minus_d),
                         frozenset(plus_p), frozenset(minus_p))
