import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from contractsync.corpus import get
from contractsync.fusion import join_instantiations, local_minimal, local_minimal_fusions, minimal_fusions
from contractsync.logic import apply_substitution, atom, name, parse_formula, store_entails, var
from contractsync.lts import random_program
from contractsync.reduction import (
    NO,
    YES,
    Bounds,
    Redex,
    StaleRedex,
    apply,
    enabled_redexes,
    explore,
    has_agent,
    reaches,
    run,
    successor_process,
    successors,
    trace_json,
)
from contractsync.syntax import NIL, Ask, Delim, Fuse, Join, Sum, Tell, all_labels, free_identifiers, parse_process, to_normal_form

x, y, z = var("x"), var("y"), var("z")
n = name("n")
N = name("#probe")


def top_binders(p):
    bound = []
    while isinstance(p, Delim):
        bound.append(p.binder)
        p = p.body
    return bound, p


def parse(text, variables="xyzuvw"):
    return parse_formula(text, lambda label: var(label) if label[0] in variables else name(label))


def brute_minimal(store, goal, subject, candidates):
    """Every fusion of the subject with other candidates that makes the goal
    follow, such that no proper subset of the fused set does."""

    def works(vs):
        s = {v: N for v in vs}
        return store_entails([apply_substitution(f, s) for f in store], apply_substitution(goal, s))

    out = set()
    others = sorted(set(candidates) - {subject}, key=lambda v: v.label)
    for r in range(len(others) + 1):
        for extra in itertools.combinations(others, r):
            vs = frozenset((subject, *extra))
            if not works(vs):
                continue
            proper = (frozenset(c) for k in range(len(vs)) for c in itertools.combinations(sorted(vs, key=str), k))
            if not any(works(w) for w in proper):
                out.add(vs)
    return out


HANDSHAKE_STORE = [parse("b(x) /\\ c(x) ->> a(x)"), parse("a(y) /\\ c(y) ->> b(y)"), parse("a(z) /\\ b(z) ->> c(z)")]
LOCALITY = [parse("q(y)"), parse("q(z) \\/ s -> p(y)")]


def variables_of(fusions):
    return {f.variables for f in fusions}


def test_handshake_needs_all_three():
    got = variables_of(minimal_fusions(HANDSHAKE_STORE, parse("a(x)"), x, {x, y, z}))
    assert got == {frozenset({x, y, z})}
    assert got == brute_minimal(HANDSHAKE_STORE, parse("a(x)"), x, {x, y, z})


def test_semaphore_token():
    store = [atom("p", n, y)]
    assert variables_of(minimal_fusions(store, atom("p", n, x), x, {x, y})) == {frozenset({x, y})}
    # a goal that already holds needs no fusion
    assert minimal_fusions([atom("p", n, x)], atom("p", n, x), x, {x}) == set()


def test_nothing_to_fuse():
    assert minimal_fusions([], parse("a(x)"), x, {x}) == set()


def test_locality_example():
    goal = parse("p(x)")
    with_s = LOCALITY + [parse("s")]
    assert variables_of(minimal_fusions(with_s, goal, x, {x, y, z})) == {frozenset({x, y})}
    assert variables_of(local_minimal_fusions(with_s, goal, x, {x, y, z})) == {frozenset({x, y}), frozenset({x, y, z})}
    assert local_minimal(with_s, goal, {x, y})
    assert local_minimal(LOCALITY, goal, {x, y, z})
    assert not local_minimal([], goal, {x, y})


STORE_ATOMS = ["p(x)", "p(y)", "q(x,y)", "q(y,z)", "r(z)", "s"]
STORE_RULES = ["p(y) -> r(x)", "q(x,y) /\\ r(y) ->> p(z)", "r(z) \\/ s -> p(x)", "p(x) /\\ p(z) ->> q(x,z)"]


@settings(max_examples=150, deadline=None)
@given(st.lists(st.sampled_from(STORE_ATOMS + STORE_RULES), max_size=4), st.sampled_from(["p(x)", "r(x)", "q(x,x)", "p(x) /\\ r(x)"]))
def test_minimal_fusions_match_brute_force(texts, goal_text):
    store = [parse(t) for t in texts]
    goal = parse(goal_text)
    got = variables_of(minimal_fusions(store, goal, x, {x, y, z}))
    assert got == brute_minimal(store, goal, x, {x, y, z})


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(STORE_ATOMS + STORE_RULES), max_size=4), st.sampled_from(["p(x)", "r(x)", "q(x,y)"]))
def test_local_minimal_fusions_match_brute_force(texts, goal_text):
    store = [parse(t) for t in texts]
    goal = parse(goal_text)
    expected = set()
    for r in range(len(store) + 1):
        for part in itertools.combinations(store, r):
            expected |= brute_minimal(list(part), goal, x, {x, y, z})
    assert variables_of(local_minimal_fusions(store, goal, x, {x, y, z})) == expected


def test_join_instantiations():
    w, v = var("w"), name("v")
    assert join_instantiations([atom("d", w, v)], atom("d", w, y), y, {v}) == {v}
    store = [parse("pay(n)"), parse("dispute(n)"), parse("send(n)")]
    assert join_instantiations(store, parse("pay(z) /\\ dispute(z)"), z, {n}) == {n}
    assert join_instantiations([], parse("pay(z)"), z, {n}) == set()


# redexes


def handshake():
    prog = get("ex1_handshake").program()
    return prog, to_normal_form(prog.main, prog.defs)


def after_tells(prog, nf):
    while True:
        tells = [r for r in enabled_redexes(nf) if r.rule == "Tell"]
        if not tells:
            return nf
        nf = apply(nf, tells[0], prog.defs)


def test_handshake_fuse_redex():
    prog, nf = handshake()
    nf = after_tells(prog, nf)
    fuses = [r for r in enabled_redexes(nf) if r.rule == "Fuse"]
    assert fuses and all(len(r.fusion.variables) == 3 for r in fuses)
    assert {r.fusion.variables for r in fuses} == {frozenset(nf.variables)}


def test_handshake_apply_fuse():
    prog, nf = handshake()
    nf = after_tells(prog, nf)
    r = next(r for r in enabled_redexes(nf) if r.rule == "Fuse")
    succ = apply(nf, r, prog.defs)
    assert len(succ.binders) == 1 and succ.binders[0].is_name
    assert len(succ.store) == 3
    asks = [a for a in succ.agents if isinstance(a, Sum) and isinstance(a.branches[0][0], Ask)]
    assert len(asks) == 2
    assert not any(isinstance(pi, (Fuse, Join)) for a in succ.agents if isinstance(a, Sum) for pi, _ in a.branches)


def test_tell_adds_to_store():
    prog, nf = handshake()
    r = next(r for r in enabled_redexes(nf) if r.rule == "Tell")
    told = nf.agents[r.agent].branches[r.branch][0].formula
    succ = apply(nf, r, prog.defs)
    assert len(succ.store) == 1 and store_entails(succ.store, told.__class__(told.premise, told.conclusion))


def test_tau_replaces_sum():
    nf = to_normal_form(parse_process("tau. {done}"))
    (r,) = enabled_redexes(nf)
    assert apply(nf, r).store == (atom("done"),) and apply(nf, r).agents == ()


def test_nil_has_no_redexes():
    assert enabled_redexes(to_normal_form(NIL)) == []


def test_stale_redex():
    nf = to_normal_form(parse_process("tau. 0"))
    with pytest.raises(StaleRedex):
        apply(nf, Redex("Tell", 0, 0))


def test_redex_invariants():
    with pytest.raises(ValueError):
        Redex("Fuse", 0, 0)
    with pytest.raises(ValueError):
        Redex("Ask", 0, 0)


def test_buffet_prime_blocks_second_trip():
    prog = get("ex4_buffet_prime_carl").program()
    g = explore(prog.main, prog.defs)
    assert not g.truncated
    for nf in g.states.values():
        for r in enabled_redexes(nf):
            if r.rule == "Fuse":
                goal = nf.agents[r.agent].branches[r.branch][0].formula
                assert goal.pred == "pasta"


def test_check_uses_whole_store():
    nf = to_normal_form(parse_process("{paid(n)} || check(!paid(n)). {bad}"))
    assert enabled_redexes(nf) == []
    nf = to_normal_form(parse_process("{sent(n)} || check(!paid(n)). {ok}"))
    assert [r.rule for r in enabled_redexes(nf)] == ["Check"]


# exploration


def test_explore_handshake():
    prog, _ = handshake()
    g = explore(prog.main, prog.defs, Bounds(1000, 20))
    assert not g.truncated
    final = [nf for nf in g.states.values() if {a.const for a in nf.agents if hasattr(a, "const")} == {"lendA", "lendB", "lendC"}]
    assert len(final) == 1 and len(final[0].binders) == 1


def test_explore_nil():
    g = explore(NIL)
    assert len(g.states) == 1 and not g.edges


def test_explore_truncates():
    prog, _ = handshake()
    assert explore(prog.main, prog.defs, Bounds(2, 50)).truncated
    assert reaches(prog.main, prog.defs, has_agent("lendA"), Bounds(1, 50)).verdict == "unknown"


def test_reaches_judge():
    prog = get("ex3_judge").program()
    res = reaches(prog.main, prog.defs, has_agent("jailSeller"), Bounds(2000, 60))
    assert res.verdict == YES
    rules = [r.rule for r, _ in res.trace]
    assert "Fuse" in rules and "Join" in rules and rules[-1] == "Check"


def test_reaches_nil():
    assert reaches(NIL, None, has_agent("X")).verdict == NO


@pytest.mark.parametrize("seed", range(25))
def test_reduction_invariants(seed):
    defs, p = random_program(random.Random(seed))
    g = explore(p, defs, Bounds(150, 20))
    for key, nf in g.states.items():
        labels = all_labels(nf.to_process())
        for r, succ in successors(nf, defs):
            assert apply(nf, r, defs).key == succ.key
            pi = nf.agents[r.agent].branches[r.branch][0]
            if r.rule == "Ask":
                assert set(nf.store) <= set(succ.store)
            if isinstance(pi, Tell):
                assert len(succ.store) > len(nf.store)
            if r.rule == "Fuse":
                sub = {v: N for v in r.fusion.variables}
                assert store_entails([apply_substitution(f, sub) for f in r.witness], apply_substitution(pi.formula, sub))
                bound, body = top_binders(successor_process(nf, r))
                fresh = [b for b in bound if b not in nf.binders]
                assert len(fresh) == 1 and fresh[0].is_name and fresh[0].label not in labels
                assert not (r.fusion.variables & set(bound))
                assert not (r.fusion.variables & free_identifiers(body))


def test_run_is_deterministic():
    prog = get("ex3_judge").program()
    root = to_normal_form(prog.main, prog.defs)
    first = trace_json(root, run(root, prog.defs, seed=7))
    assert first == trace_json(root, run(root, prog.defs, seed=7))


def test_state_graph_outputs():
    prog = get("ex4_buffet_carl").program()
    g = explore(prog.main, prog.defs)
    assert g.to_dot().startswith("digraph")
    data = g.to_json()
    assert data["root"] == g.root and len(data["states"]) == len(g.states)
