"""Random small-theory generator for engine/oracle equivalence.

Programs are valid by construction: range-restricted (head and guard
variables come from body atoms or an arithmetic binding), NAF-stratified
(predicates carry levels and NAF only looks strictly down), superiority
acyclic (pairs follow rule order), and arithmetic never recursive (rules
using ``is`` point strictly up the level order).  Slots are typed so
ordering comparisons only ever see numbers.
"""

from __future__ import annotations

import random
from fractions import Fraction

from disarm.dposl import (
    Comparison,
    ConflictDecl,
    IsBinding,
    Literal,
    NafBlock,
    Num,
    Rule,
    SourceProgram,
    Var,
)

SYMBOLS = ["a", "b", "c"]
NUMBERS = [1, 2, 3]


class _Pred:
    def __init__(self, name: str, slots: list[tuple[str, str]], level: int):
        self.name = name
        self.slots = slots  # (key, "sym"|"num")
        self.level = level


def _random_preds(rng: random.Random) -> list[_Pred]:
    n = rng.randint(2, 6)
    preds = []
    for i in range(n):
        arity = rng.randint(0, 2)
        slots = [(f"k{j}", rng.choice(["sym", "num"])) for j in range(arity)]
        preds.append(_Pred(f"p{i}", slots, rng.randint(0, 2)))
    return preds


def _ground_term(rng: random.Random, kind: str):
    if kind == "num":
        return Num(Fraction(rng.choice(NUMBERS)))
    return rng.choice(SYMBOLS)


def _fact(rng: random.Random, pred: _Pred) -> Literal:
    named = {k: _ground_term(rng, kind) for k, kind in pred.slots}
    return Literal.of(pred.name, negated=rng.random() < 0.25, **named)


def random_theory(seed: int) -> tuple[SourceProgram, list[Literal]]:
    rng = random.Random(seed)
    preds = _random_preds(rng)

    facts = []
    for _ in range(rng.randint(1, 8)):
        facts.append(_fact(rng, rng.choice(preds)))

    rules = []
    n_rules = rng.randint(1, 10)
    var_pool = ["v0", "v1", "v2"]
    for ri in range(n_rules):
        head_pred = rng.choice(preds)
        # body atoms draw from predicates at or below the head's level
        candidates = [p for p in preds if p.level <= head_pred.level]
        body: list = []
        bound: dict[str, str] = {}  # var -> slot kind
        for _ in range(rng.randint(0, 3)):
            p = rng.choice(candidates)
            args = {}
            for key, kind in p.slots:
                if rng.random() < 0.25:
                    continue  # partial pattern
                if rng.random() < 0.6:
                    v = rng.choice(var_pool)
                    if v in bound and bound[v] != kind:
                        continue  # keep slot types consistent per variable
                    bound[v] = kind
                    args[key] = Var(v)
                else:
                    args[key] = _ground_term(rng, kind)
            body.append(Literal.of(p.name, negated=rng.random() < 0.2, **args))

        num_vars = [v for v, kind in bound.items() if kind == "num"]
        # arithmetic binding: only in rules whose head sits strictly above
        # every body predicate level (never recursive)
        body_levels = [p.level for p in preds
                       if any(isinstance(e, Literal) and e.pred == p.name
                              for e in body)]
        if (num_vars and rng.random() < 0.25 and body_levels
                and max(body_levels) < head_pred.level):
            is_target = f"w{ri}"
            body.append(IsBinding(Var(is_target), _arith(rng, num_vars)))
            bound[is_target] = "num"
            num_vars.append(is_target)

        if num_vars and rng.random() < 0.5:
            op = rng.choice(["<", "<=", ">", ">=", "=", "!="])
            body.append(Comparison(op, Var(rng.choice(num_vars)),
                                   Var(rng.choice(num_vars))
                                   if rng.random() < 0.5
                                   else Num(Fraction(rng.choice(NUMBERS)))))
        sym_vars = [v for v, kind in bound.items() if kind == "sym"]
        if sym_vars and rng.random() < 0.3:
            body.append(Comparison(rng.choice(["=", "!="]),
                                   Var(rng.choice(sym_vars)),
                                   Var(rng.choice(sym_vars))))

        # NAF over strictly lower predicates, variables bound or local
        lower = [p for p in preds if p.level < head_pred.level]
        if lower and rng.random() < 0.3:
            p = rng.choice(lower)
            args = {}
            for key, kind in p.slots:
                roll = rng.random()
                if roll < 0.4:
                    matching = [v for v, k in bound.items() if k == kind]
                    if matching:
                        args[key] = Var(rng.choice(matching))
                elif roll < 0.7:
                    args[key] = _ground_term(rng, kind)
                # else leave the slot off (local wildcard)
            body.append(NafBlock(Literal.of(p.name, negated=rng.random() < 0.3,
                                            **args)))

        head_args = {}
        for key, kind in head_pred.slots:
            matching = [v for v, k in bound.items() if k == kind]
            if matching and rng.random() < 0.6:
                head_args[key] = Var(rng.choice(matching))
            else:
                head_args[key] = _ground_term(rng, kind)
        head = Literal.of(head_pred.name, negated=rng.random() < 0.35,
                          **head_args)
        kind = rng.choices(["strict", "defeasible", "defeater"],
                           weights=[3, 5, 2])[0]
        rules.append(Rule(f"r{ri}", kind, head, tuple(body)))

    sups = []
    for i in range(len(rules)):
        for j in range(i + 1, len(rules)):
            if rng.random() < 0.18:
                sups.append((rules[i].id, rules[j].id))

    decls = []
    if rng.random() < 0.35:
        by_level: dict[int, list[_Pred]] = {}
        for p in preds:
            by_level.setdefault(p.level, []).append(p)
        pool = rng.choice(list(by_level.values()))
        scope_p, conf_p = rng.choice(pool), rng.choice(pool)
        scope_args, guards = {}, []
        if scope_p.slots:
            key, kind = scope_p.slots[0]
            scope_args[key] = Var("s0")
            if conf_p.slots and conf_p.slots[0][1] == kind:
                pat_args = {conf_p.slots[0][0]: Var("s1")}
                guards.append(Comparison("!=", Var("s0"), Var("s1")))
            else:
                pat_args = {}
        else:
            pat_args = {}
        decls.append(ConflictDecl(
            Literal.of(scope_p.name, **scope_args),
            (Literal.of(conf_p.name, **pat_args),),
            tuple(guards)))

    program = SourceProgram(tuple(rules), (), tuple(sups), tuple(decls))
    return program, facts


def _arith(rng: random.Random, num_vars: list[str]):
    from disarm.dposl import BinOp

    left = Var(rng.choice(num_vars))
    right = Num(Fraction(rng.choice(NUMBERS)))
    return BinOp(rng.choice(["+", "-"]), left, right)
