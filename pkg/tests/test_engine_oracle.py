"""Engine vs brute-force oracle on randomly generated small theories."""

import time

import pytest

from disarm.engine import run
from dl_oracle import oracle_run
from theory_gen import random_theory


def _agree(seed: int) -> None:
    program, facts = random_theory(seed)
    got = run(program, facts)
    want = oracle_run(program, facts)
    for attr in ("definite_pos", "definite_neg", "defeasible_pos",
                 "defeasible_neg"):
        g, w = getattr(got, attr), getattr(want, attr)
        assert g == w, (
            f"seed {seed}: {attr} differs\n"
            f"engine only: {sorted(map(str, g - w))}\n"
            f"oracle only: {sorted(map(str, w - g))}\n"
            f"program:\n{_dump(program, facts)}")


def _dump(program, facts):
    from disarm.dposl import serialize_program, serialize_literal

    lines = [serialize_program(program)]
    lines += [serialize_literal(f) + "." for f in facts]
    return "\n".join(lines)


@pytest.mark.parametrize("block", range(10))
def test_engine_matches_oracle_on_random_theories(block):
    for seed in range(block * 50, (block + 1) * 50):
        _agree(seed)


def test_tag_sets_stay_consistent_on_random_theories():
    for seed in range(200):
        program, facts = random_theory(seed)
        cs = run(program, facts)
        assert cs.definite_pos <= cs.defeasible_pos
        assert not (cs.defeasible_pos & cs.defeasible_neg)
        assert not (cs.definite_pos & cs.definite_neg)


def test_definite_fragment_is_monotone_without_naf():
    """Adding facts never removes definite conclusions (NAF-free theories)."""
    from disarm.dposl import Literal, NafBlock

    checked = 0
    for seed in range(400):
        if checked >= 60:
            break
        program, facts = random_theory(seed)
        if any(isinstance(e, NafBlock) for r in program.rules for e in r.body):
            continue
        checked += 1
        base = run(program, facts)
        extra = Literal.of("extra_fact", 1)
        grown = run(program, facts + [extra])
        assert base.definite_pos <= grown.definite_pos
    assert checked >= 30
