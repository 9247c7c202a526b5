import pytest

from contractsync.corpus import JUDGE_NOSEND_SEED, entries, get
from contractsync.logic import parse_formula
from contractsync.reduction import Bounds, has_agent, has_constraint, reaches, run
from contractsync.syntax import Call, parse_program, to_normal_form

EXPECTATIONS = [(e.name, exp) for e in entries().values() for exp in e.expectations]


def test_required_entries_present():
    required = {"ex1_handshake", "ex3_judge", "semaphores", "cells", "linda", "ring_to_star", "loop8"}
    required |= {f"ex2_insured_b{i}" for i in range(4)}
    assert required <= set(entries())
    assert any(n.startswith("ex4_buffet") for n in entries())
    assert any(n.startswith("pi_") for n in entries())


@pytest.mark.parametrize("name", sorted(entries()))
def test_entry_parses(name):
    prog = get(name).program()
    prog.defs.validate(prog.main)
    # the text is plain concrete syntax
    assert to_normal_form(parse_program(get(name).text).main, prog.defs).key == to_normal_form(prog.main, prog.defs).key


@pytest.mark.parametrize("name,exp", EXPECTATIONS, ids=[f"{n}-{e.target}" for n, e in EXPECTATIONS])
def test_expectation(name, exp):
    prog = get(name).program()
    pred = has_agent(exp.target) if exp.kind == "agent" else has_constraint(parse_formula(exp.target))
    assert reaches(prog.main, prog.defs, pred, Bounds()).verdict == exp.verdict


def test_unknown_entry():
    with pytest.raises(KeyError, match="ex1_handshake"):
        get("nope")


def test_handshake_run_has_six_steps():
    prog = get("ex1_handshake").program()
    trace = run(prog.main, prog.defs, seed=0)
    assert len(trace) == 6
    final = trace[-1][1]
    assert sorted(a.const for a in final.agents if isinstance(a, Call)) == ["lendA", "lendB", "lendC"]


def test_judge_seed_convicts_seller():
    prog = get("ex3_judge").program()
    trace = run(prog.main, prog.defs, seed=JUDGE_NOSEND_SEED)
    assert has_agent("jailSeller")(trace[-1][1])
