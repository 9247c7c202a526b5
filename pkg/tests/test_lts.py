import random

import pytest

from contractsync.corpus import get
from contractsync.fusion import local_minimal
from contractsync.logic import atom, name, parse_formula, var
from contractsync.lts import (
    Action,
    BoundExceeded,
    bisim_probe,
    correspondence_check,
    labelled_steps,
    random_program,
    step_key,
    top_steps,
)
from contractsync.reduction import Bounds
from contractsync.syntax import NIL, Constraint, delim, par, parse_process, prefixed, Fuse, Tell, struct_equiv, to_normal_form

x, y, z = var("x"), var("y"), var("z")
a, b = name("a"), name("b")


def kinds(steps):
    return sorted(s.action.kind for s in steps)


def test_ask_step():
    p = parse_process("ask(a). X()")
    asks = [s for s in labelled_steps(p) if s.action.kind == "ask"]
    assert len(asks) == 1
    assert asks[0].action == Action("ask", goal=atom("a"))
    assert str(asks[0].action) == "{} |- a"
    assert asks[0].successor == parse_process("X()")


def test_constraint_step():
    u = Constraint(atom("u"))
    (step,) = labelled_steps(u)
    assert step.action == Action("constraints", constraints=frozenset({atom("u")}))
    assert step.successor == u


def test_handshake_close_fuse():
    prog = get("ex1_handshake").program()
    nf = to_normal_form(prog.main, prog.defs)
    # run the three tells first
    p = nf.to_process()
    for _ in range(3):
        p = top_steps(p, prog.defs)[0]
    fused = [s for s in labelled_steps(p, prog.defs) if s.action.kind == "tau"]
    assert fused
    for s in fused:
        after = to_normal_form(s.successor, prog.defs)
        assert len(after.binders) == 1 and after.binders[0].is_name


def test_fuse_label_printer():
    p = parse_process("(x)(y)({cA(x)} || {cB(y)} || fuse(x, a(x)). 0)")
    labels = {str(s.action) for s in labelled_steps(p) if s.action.kind == "fuse"}
    assert labels == {"(x,y) {cA(x),cB(y)} |-F_x a(x)"}


LOCALITY_STORE = [parse_formula("q(y)", var), parse_formula("q(z) \\/ s -> p(y)", lambda l: name(l) if l == "s" else var(l))]


def test_local_minimal_examples():
    goal = atom("p", x)
    s = atom("s")
    assert local_minimal(LOCALITY_STORE + [s], goal, {x, y})
    assert local_minimal(LOCALITY_STORE, goal, {x, y, z})
    assert not local_minimal([], goal, {x, y})
    # with s present, {x,y,z} is still minimal for the sub-store that omits s
    assert local_minimal(LOCALITY_STORE + [s], goal, {x, y, z})


def test_top_steps_tell():
    (succ,) = top_steps(parse_process("tell(c). 0"))
    assert struct_equiv(succ, Constraint(atom("c")))


def test_top_steps_check():
    p = parse_process("(new n)({sent(n)} || check(!paid(n)). Go())")
    (succ,) = top_steps(p)
    assert struct_equiv(succ, parse_process("(new n)({sent(n)} || Go())"))
    assert top_steps(parse_process("(new n)({paid(n)} || check(!paid(n)). Go())")) == []


def test_top_steps_lonely_ask():
    assert top_steps(parse_process("ask(a). 0")) == []
    assert top_steps(NIL) == []


def test_opened_binders_are_renamed_apart():
    # both sides open a binder labelled x; the composed label keeps them apart
    p = par(delim([x], Constraint(atom("p", x))), delim([x], prefixed(Fuse(x, atom("p", x)))))
    (act,) = [s.action for s in labelled_steps(p) if s.action.kind == "fuse"]
    assert len(act.opened) == 2
    assert act.subject in act.opened and act.constraints == {atom("p", next(iter(act.opened - {act.subject})))}
    # so the fusion has to bring the two binders together
    assert top_steps(p)


def test_step_key_ignores_binder_names():
    p = parse_process("(x) {c(x)}")
    q = parse_process("(y) {c(y)}")
    assert {step_key(s) for s in labelled_steps(p)} == {step_key(s) for s in labelled_steps(q)}


# harnesses


def test_correspondence_handshake():
    prog = get("ex1_handshake").program()
    report = correspondence_check(prog.main, prog.defs)
    assert report.passed and not report.truncated and report.states_checked > 5


def test_correspondence_nil():
    assert correspondence_check(NIL).passed


def test_correspondence_judge():
    prog = get("ex3_judge").program()
    assert correspondence_check(prog.main, prog.defs, Bounds(300, 50)).passed


def test_mutated_fuse_is_caught():
    prog = get("ex1_handshake").program()
    report = correspondence_check(prog.main, prog.defs, mutate_fuse=True)
    assert not report.passed
    assert report.counterexamples[0]["reduction_only"]


def test_correspondence_strict_bound():
    prog = get("ex1_handshake").program()
    with pytest.raises(BoundExceeded):
        correspondence_check(prog.main, prog.defs, Bounds(3, 50), strict=True)


@pytest.mark.parametrize("seed", range(30))
def test_correspondence_random(seed):
    defs, p = random_program(random.Random(1000 + seed))
    assert correspondence_check(p, defs).passed


def test_bisim_par_nil():
    p = parse_process("ask(a). 0")
    assert bisim_probe(par(p, NIL), p, depth=4).matched


def test_bisim_swapped_delimitations():
    r = prefixed(Tell(atom("c", a, b)))
    assert bisim_probe(delim([a, b], r), delim([b, a], r)).matched


def test_bisim_handshake_normal_form():
    prog = get("ex1_handshake").program()
    nf = to_normal_form(prog.main, prog.defs)
    assert bisim_probe(prog.main, nf.to_process(), prog.defs, depth=6).matched


def test_bisim_detects_difference():
    report = bisim_probe(parse_process("tell(a). 0"), parse_process("tell(b). 0"))
    assert not report.matched and report.mismatch
