"""Engine unit tests: proof-theory behaviors, builtins, static checks."""

import random
from fractions import Fraction

import pytest

from disarm.dposl import (
    Comparison,
    IsBinding,
    Literal,
    Num,
    Rule,
    SourceProgram,
    Var,
    parse_fact,
    parse_literal,
    parse_program,
)
from disarm.engine import (
    BuiltinError,
    TheoryError,
    check_theory,
    evaluate_builtin,
    query,
    run,
)


def lit(text: str) -> Literal:
    return parse_literal(text)


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def test_strict_chaining():
    theory = parse_program("r1: b :- a.")
    cs = run(theory, [lit("a")])
    assert lit("b") in cs.definite_pos
    assert lit("b") in cs.defeasible_pos


def test_superiority_resolves_conflict():
    theory = parse_program("r1: b := a. r2: ~b := c. r1 > r2.")
    cs = run(theory, [lit("a"), lit("c")])
    assert lit("b") in cs.defeasible_pos
    assert lit("b") not in cs.defeasible_neg
    assert lit("~b") in cs.defeasible_neg


def test_unresolved_conflict_blocks_both():
    theory = parse_program("r1: b := a. r2: ~b := c.")
    cs = run(theory, [lit("a"), lit("c")])
    assert lit("b") not in cs.defeasible_pos
    assert lit("~b") not in cs.defeasible_pos
    assert lit("b") in cs.defeasible_neg
    assert lit("~b") in cs.defeasible_neg


def test_defeater_blocks_but_never_concludes():
    theory = parse_program("r1: b := a. r2: ~b :~ c.")
    cs = run(theory, [lit("a"), lit("c")])
    assert lit("b") not in cs.defeasible_pos
    assert lit("b") not in cs.definite_pos
    assert lit("~b") not in cs.defeasible_pos


def test_superior_rule_defeats_defeater():
    theory = parse_program("r1: b := a. r2: ~b :~ c. r1 > r2.")
    cs = run(theory, [lit("a"), lit("c")])
    assert lit("b") in cs.defeasible_pos


def test_definite_conclusion_beats_defeasible_attack():
    theory = parse_program("r1: b :- a. r2: ~b := c.")
    cs = run(theory, [lit("a"), lit("c")])
    assert lit("b") in cs.definite_pos
    assert lit("b") in cs.defeasible_pos
    # the strict conclusion blocks the defeasible complement
    assert lit("~b") not in cs.defeasible_pos


def test_no_team_defeat():
    """Two supporters each beating one attacker do not rescue each other."""
    theory = parse_program(
        "r1: q := a. r2: q := b. r3: ~q := c. r4: ~q := d. "
        "r1 > r3. r2 > r4.")
    cs = run(theory, [lit("a"), lit("b"), lit("c"), lit("d")])
    assert lit("q") not in cs.defeasible_pos
    # with a single supporter beating both attackers the conclusion stands
    theory2 = parse_program(
        "r1: q := a. r2: q := b. r3: ~q := c. r4: ~q := d. "
        "r1 > r3. r1 > r4.")
    cs2 = run(theory2, [lit("a"), lit("b"), lit("c"), lit("d")])
    assert lit("q") in cs2.defeasible_pos


def test_naf_settles_against_lower_stratum():
    theory = parse_program("r1: b := a. r2: s := not(b). r3: t := not(missing).")
    cs = run(theory, [lit("a")])
    assert lit("s") not in cs.defeasible_pos
    assert lit("t") in cs.defeasible_pos


def test_naf_with_guards():
    theory = parse_program(
        "r1: newest(x->?x) := entry(x->?x, t->?t1), "
        "not(entry(x->?x, t->?t2), ?t2 > ?t1).")
    cs = run(theory, [lit("entry(x->A, t->1)"), lit("entry(x->A, t->5)"),
                      lit("entry(x->B, t->2)")])
    assert lit("newest(x->A)") in cs.defeasible_pos
    assert lit("newest(x->B)") in cs.defeasible_pos


def test_nonmonotonicity_witness():
    """Adding one fact removes a defeasible conclusion (list retraction)."""
    theory = parse_program(
        "r18: BL(trustee->?x) := blacklist(trustee->?x, time->?t1), "
        "not(~blacklist(trustee->?x, time->?t2), ?t2 > ?t1).")
    base = [lit("blacklist(trustee->X, time->5)")]
    cs = run(theory, base)
    assert lit("BL(trustee->X)") in cs.defeasible_pos
    cs2 = run(theory, base + [lit("~blacklist(trustee->X, time->9)")])
    assert lit("BL(trustee->X)") not in cs2.defeasible_pos


def test_partial_pattern_matches_wider_literal():
    theory = parse_program("r1: known(agent->?x) :- rating(truster->?a, trustee->?x).")
    cs = run(theory, [parse_fact(
        "rating(id->1, truster->A, trustee->X, t->3, validity->7).")])
    assert lit("known(agent->X)") in cs.definite_pos


def test_determinism_under_rule_reordering():
    text_a = "r1: b := a. r2: ~b := c. r3: d :- b. r1 > r2."
    text_b = "r3: d :- b. r2: ~b := c. r1: b := a. r1 > r2."
    facts = [lit("a"), lit("c")]
    ca, cb = run(parse_program(text_a), facts), run(parse_program(text_b), facts)
    assert ca.definite_pos == cb.definite_pos
    assert ca.defeasible_pos == cb.defeasible_pos
    assert ca.defeasible_neg == cb.defeasible_neg


def test_conflict_declaration_with_guard():
    theory = parse_program(
        "r1: pick(who->?x, grp->g1) := cand(who->?x, grp->g1). "
        "r2: pick(who->?x, grp->g2) := cand(who->?x, grp->g2). "
        "r1 > r2. "
        "conflict pick(who->?x, grp->?g) with pick(who->?x, grp->?g1) "
        "where ?g != ?g1.")
    cs = run(theory, [lit("cand(who->A, grp->g1)"), lit("cand(who->A, grp->g2)"),
                      lit("cand(who->B, grp->g2)")])
    assert lit("pick(who->A, grp->g1)") in cs.defeasible_pos
    assert lit("pick(who->A, grp->g2)") not in cs.defeasible_pos
    # different who: no conflict, lower-priority group fine
    assert lit("pick(who->B, grp->g2)") in cs.defeasible_pos


def test_facts_of_unknown_predicates_are_inert():
    theory = parse_program("r1: b :- a.")
    cs = run(theory, [lit("a"), lit("stray(x->1)")])
    assert lit("b") in cs.definite_pos
    assert lit("stray(x->1)") in cs.definite_pos


# ---------------------------------------------------------------------------
# static checks
# ---------------------------------------------------------------------------

def test_cyclic_superiority_rejected():
    theory = parse_program("r1: a := x. r2: ~a := y. r1 > r2. r2 > r1.")
    with pytest.raises(TheoryError, match="cyclic superiority"):
        run(theory, [])
    assert check_theory(theory)


def test_non_range_restricted_rejected():
    theory = parse_program("r1: b(x->?y) :- a.")
    with pytest.raises(TheoryError, match="range-restricted"):
        run(theory, [])


def test_unbound_guard_rejected():
    theory = parse_program("r1: b :- a, ?x > 1.")
    with pytest.raises(TheoryError, match="range-restricted"):
        run(theory, [])


def test_naf_cycle_rejected():
    theory = parse_program("r1: a := not(b). r2: b := not(a).")
    with pytest.raises(TheoryError, match="not stratified"):
        run(theory, [])


def test_recursive_arithmetic_rejected():
    theory = parse_program("r1: p(x->?y) := p(x->?x), ?y is ?x + 1.")
    with pytest.raises(TheoryError, match="recursive"):
        run(theory, [])


def test_is_binding_bound_by_literal_only_is_fine():
    theory = parse_program("r1: q(v->?y) := p(v->?x), ?y is ?x * 2.")
    cs = run(theory, [lit("p(v->3)")])
    assert lit("q(v->6)") in cs.defeasible_pos


# ---------------------------------------------------------------------------
# evaluate_builtin
# ---------------------------------------------------------------------------

def _guard(text: str):
    prog = parse_program(f"r0: h :- b, {text}.")
    return [e for e in prog.rules[0].body
            if isinstance(e, (Comparison, IsBinding))][0]


def test_builtin_is_binds_target():
    holds, subst = evaluate_builtin(_guard("?t1 is 3 - 1"), {})
    assert holds and subst["t1"] == Num(Fraction(2))


def test_builtin_boundary_comparison():
    holds, _ = evaluate_builtin(_guard("5 <= 5"), {})
    assert holds


def test_builtin_now_window():
    holds, _ = evaluate_builtin(_guard("now() - 10 <= 140"), {}, now=150)
    assert holds


def test_builtin_now_without_clock_errors():
    with pytest.raises(BuiltinError, match="clock"):
        evaluate_builtin(_guard("now() > 1"), {})


def test_builtin_unbound_operand_errors():
    with pytest.raises(BuiltinError, match="unbound"):
        evaluate_builtin(_guard("?x > 1"), {})


def test_builtin_division_by_zero_errors():
    with pytest.raises(BuiltinError, match="division by zero"):
        evaluate_builtin(_guard("?y is 1 / 0"), {})


def test_builtin_exact_fractions():
    holds, subst = evaluate_builtin(_guard("?y is 1 / 8"), {})
    assert subst["y"] == Num(Fraction(1, 8))
    holds, _ = evaluate_builtin(
        _guard("?a = ?b"),
        {"a": Num(Fraction(1, 10)), "b": Num(Fraction(1, 10))})
    assert holds


def test_builtin_ordering_on_symbols_errors():
    g = _guard("?a < ?b")
    from disarm.dposl import Const

    with pytest.raises(BuiltinError, match="non-numeric"):
        evaluate_builtin(g, {"a": Const("x"), "b": Const("y")})


# ---------------------------------------------------------------------------
# query
# ---------------------------------------------------------------------------

def test_query_returns_substitutions_with_tags():
    theory = parse_program("r1: WL(trustee->?x) := good(who->?x).")
    facts = [lit("good(who->B)"), lit("good(who->C)")]
    results = query(theory, facts, lit("WL(trustee->?x)"))
    got = {(s["x"].name, tag) for s, tag in results}
    assert got == {("B", "defeasible"), ("C", "defeasible")}


def test_query_no_match_is_empty():
    theory = parse_program("r1: WL(trustee->?x) := good(who->?x).")
    assert query(theory, [], lit("WL(trustee->?x)")) == []


def test_query_tags_strict_conclusions_definite():
    theory = parse_program("r1: b(v->?x) :- a(v->?x).")
    results = query(theory, [lit("a(v->1)")], lit("b(v->?x)"))
    assert [tag for _, tag in results] == ["definite"]


def test_query_reports_refuted_literals():
    theory = parse_program("r1: b := a. r2: ~b := a.")
    results = query(theory, [lit("a")], lit("b"))
    assert results == [({}, "not_defeasible")]


# ---------------------------------------------------------------------------
# consistency properties
# ---------------------------------------------------------------------------

def test_conclusionset_invariants_on_fuzzed_theories():
    rng = random.Random(7)
    for _ in range(40):
        n = rng.randint(1, 4)
        rules, facts = [], []
        for i in range(n):
            head = rng.choice(["p", "~p", "q", "~q"])
            body = rng.choice(["a", "b", "c"])
            arrow = rng.choice([":-", ":=", ":~"])
            rules.append(f"r{i}: {head} {arrow} {body}.")
        for c in "abc":
            if rng.random() < 0.7:
                facts.append(lit(c))
        theory = parse_program(" ".join(rules))
        cs = run(theory, facts)
        assert cs.definite_pos <= cs.defeasible_pos
        assert not (cs.defeasible_pos & cs.defeasible_neg)
        assert not (cs.definite_pos & cs.definite_neg)
