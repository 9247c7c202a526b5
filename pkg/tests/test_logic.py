import itertools

import pytest
from hypothesis import given, settings, strategies as st

from contractsync.logic import (
    BOT,
    NOT_PROVED,
    PROVED,
    TOP,
    And,
    CImpl,
    FormulaSyntaxError,
    Impl,
    Literal,
    NonHornConstraint,
    Or,
    apply_substitution,
    atom,
    consistent,
    entails,
    fired_contracts,
    name,
    normalize_constraint,
    oracle_prove,
    parse_formula,
    parse_theory,
    render,
    store_entails,
    theory_of,
    var,
)


def T(text: str):
    return theory_of(parse_theory(text))


def F(text: str):
    return parse_formula(text)


# parsing and rendering


def test_precedence_and_associativity():
    assert F("a /\\ b \\/ c -> d ->> e") == Impl(Or(And(atom("a"), atom("b")), atom("c")), CImpl(atom("d"), atom("e")))
    assert F("a -> b -> c") == Impl(atom("a"), Impl(atom("b"), atom("c")))


def test_render_reparses():
    for text in ["p(a,b)", "b(n) /\\ c(n) ->> a(n)", "(a -> b) -> c", "top", "bot", "a \\/ (b /\\ c)"]:
        f = F(text)
        assert F(render(f)) == f


def test_syntax_error_has_position():
    with pytest.raises(FormulaSyntaxError) as err:
        F("a /\\ ")
    assert err.value.pos == 5


# normalization


def test_normalize_top_is_empty():
    assert normalize_constraint(TOP) == ()


def test_normalize_insured_seller_contract():
    clauses = normalize_constraint(F("order(x) /\\ (pay(x) \\/ insurance(x)) ->> ship(x)"))
    assert len(clauses) == 1
    assert clauses[0].contractual


def test_normalize_rejects_nested_contract():
    with pytest.raises(NonHornConstraint):
        normalize_constraint(F("(a ->> b) ->> c"))


def test_normalize_rejects_disjunctive_conclusion():
    with pytest.raises(NonHornConstraint):
        normalize_constraint(F("a -> b \\/ c"))


def test_normalize_distributes_conjunction():
    assert len(normalize_constraint(F("a /\\ (b -> c) /\\ (c ->> d)"))) == 3


# entailment


def test_circular_contracts():
    assert entails(T("b ->> a. a ->> b."), F("a /\\ b"))


def test_self_contract():
    assert entails(T("a ->> a."), F("a"))


def test_unsupported_contract_does_not_fire():
    assert not entails(T("a ->> b."), F("b"))
    assert oracle_prove(T("a ->> b."), F("b"), 8) == NOT_PROVED


def test_handshake_agreement():
    store = T("b(n) /\\ c(n) ->> a(n). a(n) /\\ c(n) ->> b(n). a(n) /\\ b(n) ->> c(n).")
    assert entails(store, F("a(n) /\\ b(n) /\\ c(n)"))


def test_two_of_three_lenders_do_not_agree():
    assert not entails(T("b(n) /\\ c(n) ->> a(n). a(n) /\\ c(n) ->> b(n)."), F("a(n)"))


def test_axiom_instances():
    assert entails(frozenset(), F("top ->> top"))
    assert entails(frozenset(), F("(p ->> p) -> p"))
    assert entails(frozenset(), F("(p2 -> p) -> (p ->> q) -> (q -> q2) -> (p2 ->> q2)"))


def test_plain_implication_needs_its_premise():
    assert not entails(T("a -> b."), F("b"))
    assert entails(T("a. a -> b."), F("b"))


def test_disjunctive_goal_and_premise():
    assert entails(T("b."), F("a \\/ b"))
    assert entails(T("b. a \\/ b -> c."), F("c"))


def test_bot_explodes():
    assert entails(T("a. a -> bot."), F("zzz"))
    assert entails(T("bot."), BOT)


def test_top_goal():
    assert entails(frozenset(), TOP)


def test_fired_contracts():
    fired = fired_contracts(T("b ->> a. a ->> b. c ->> d."))
    assert [str(c) for c in fired] == ["a ->> b", "b ->> a"]


def test_oracle_examples():
    assert oracle_prove([], F("top ->> top"), 2) == PROVED
    assert oracle_prove([], F("(p2 -> p) -> (p ->> q) -> (q -> q2) -> (p2 ->> q2)"), 6) == PROVED
    assert oracle_prove([], F("p"), 10) == NOT_PROVED


# consistency


def test_consistency_with_negative_literals():
    paid = atom("paid", name("n"))
    assert not consistent(T("paid(n)."), [Literal(paid, False)])
    assert consistent(frozenset(), [Literal(paid, False)])
    judge_store = T("send(n) ->> pay(n). pay(n) ->> send(n). paid(n). dispute(n).")
    assert entails(judge_store, F("send(n) /\\ dispute(n)"))
    assert consistent(judge_store, [Literal(atom("sent", name("n")), False)])


def test_bottom_is_inconsistent():
    assert not consistent(T("a. a -> bot."))


# substitution


def test_apply_substitution():
    x, y, n = var("x"), var("y"), name("n")
    assert apply_substitution(atom("a", x), {x: n}) == atom("a", n)
    contract = CImpl(And(atom("b", x), atom("c", x)), atom("a", x))
    assert apply_substitution(contract, {x: n}) == CImpl(And(atom("b", n), atom("c", n)), atom("a", n))
    assert apply_substitution(atom("a", y), {x: n}) == atom("a", y)


# properties over small theories

ATOMS = [atom(p) for p in "abc"]
CLAUSES = ATOMS + [Impl(p, q) for p in ATOMS for q in ATOMS] + [CImpl(p, q) for p in ATOMS for q in ATOMS]
GOALS = ATOMS + [And(p, q) for p, q in itertools.combinations(ATOMS, 2)]

theories = st.lists(st.sampled_from(CLAUSES), max_size=4).map(lambda fs: (fs, theory_of(fs)))


@settings(max_examples=200, deadline=None)
@given(theories, theories, st.sampled_from(GOALS))
def test_monotone(small, extra, goal):
    fs, t = small
    if entails(t, goal):
        assert entails(t | extra[1], goal)


@settings(max_examples=200, deadline=None)
@given(theories)
def test_reflexive_on_facts(th):
    fs, t = th
    for f in fs:
        if f in ATOMS:
            assert entails(t, f)


@settings(max_examples=200, deadline=None)
@given(theories, st.sampled_from(ATOMS), st.sampled_from(ATOMS))
def test_disjunction_property(th, a, b):
    _, t = th
    assert entails(t, Or(a, b)) == (entails(t, a) or entails(t, b))


@settings(max_examples=150, deadline=None)
@given(theories, theories, st.sampled_from(GOALS))
def test_cut(left, middle, goal):
    # if T proves every fact of T' and T' proves c, then T proves c
    _, t = left
    fs2, t2 = middle
    if all(entails(t, f) for f in fs2 if f in ATOMS) and all(f in ATOMS for f in fs2) and entails(t2, goal):
        assert entails(t, goal)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(["p(x)", "q(x,y)", "p(y) -> q(x,x)", "q(x,y) ->> p(y)"]), max_size=3))
def test_substitution_stability(texts):
    resolve = lambda label: var(label) if label in ("x", "y") else name(label)
    store = [parse_formula(t, resolve) for t in texts]
    s = {var("x"): name("n1"), var("y"): name("n2")}
    for goal in ["p(x)", "q(x,y)", "p(y) /\\ q(x,x)"]:
        g = parse_formula(goal, resolve)
        if store_entails(store, g):
            assert store_entails([apply_substitution(f, s) for f in store], apply_substitution(g, s))
