"""Acceptance criteria 1-11, one test each.  Every test records a PASS/FAIL
line that is repeated in the terminal summary."""

import itertools
import random

from contractsync.corpus import get
from contractsync.encodings.graph import compile_rules, embed, isomorphic, ring, ring_to_star, star_of, without_store
from contractsync.encodings.pi import PI_NIL, PIn, PMark, POut, PPar, PRes, output_consumed, parse_pi, pi_correspondence
from contractsync.logic import (
    NOT_PROVED,
    PROVED,
    And,
    Atom,
    CImpl,
    Impl,
    Or,
    atom,
    entails,
    name,
    oracle_prove,
    parse_formula,
    parse_theory,
    store_entails,
    theory_of,
    var,
)
from contractsync.lts import bisim_probe, correspondence_check, random_program, top_steps
from contractsync.reduction import NO, YES, Bounds, apply, enabled_redexes, explore, has_agent, reaches, run, trace_json
from contractsync.syntax import NIL, Call, Constraint, Fuse, delim, par, prefixed, substitute, to_normal_form


def test_logic_theorems(criterion):
    with criterion(1, "contract logic theorem suite"):
        axioms = ["top ->> top", "(p ->> p) -> p"]
        axioms += [
            f"({p2} -> p) -> (p ->> q) -> (q -> {q2}) -> ({p2} ->> {q2})" for p2, q2 in itertools.product("pq", repeat=2)
        ]
        for text in axioms:
            assert entails(frozenset(), parse_formula(text)), text
        assert entails(theory_of(parse_theory("b ->> a. a ->> b.")), parse_formula("a /\\ b"))
        agreement = "b(n) /\\ c(n) ->> a(n). a(n) /\\ c(n) ->> b(n). a(n) /\\ b(n) ->> c(n)."
        assert entails(theory_of(parse_theory(agreement)), parse_formula("a(n) /\\ b(n) /\\ c(n)"))
        assert not entails(theory_of(parse_theory("a ->> b.")), parse_formula("b"))


def test_oracle_equivalence(criterion):
    with criterion(2, "decision procedure agrees with the bounded oracle"):
        atoms = [atom(p) for p in "abc"]
        pairs = [And(p, q) for p, q in itertools.combinations(atoms, 2)]
        premises = atoms + pairs
        clauses = atoms + [k(p, q) for k in (Impl, CImpl) for p in premises for q in atoms]
        goals = atoms + pairs
        instances = mismatches = 0
        for size in range(4):
            for theory in itertools.combinations(clauses, size):
                decided = theory_of(list(theory))
                for g in goals:
                    instances += 1
                    expected = PROVED if entails(decided, g) else NOT_PROVED
                    if oracle_prove(list(theory), g, 8) != expected:
                        mismatches += 1
        print(f"  {instances} instances, {mismatches} mismatches")
        assert instances == 59520 and mismatches == 0


def test_handshake_trace(criterion):
    with criterion(3, "three-party handshake trace"):
        prog = get("ex1_handshake").program()
        g = explore(prog.main, prog.defs, Bounds(1000, 20))
        assert not g.truncated
        for s, r, _ in g.edges:
            if r.rule == "Fuse":
                assert len(r.fusion.variables) == 3
        shape = ["Tell"] * 3 + ["Fuse"] + ["Ask"] * 2

        def paths(key, depth):
            if depth == len(shape):
                yield []
                return
            for r, t in g.successors(key):
                if r.rule == shape[depth]:
                    for rest in paths(t, depth + 1):
                        yield [(r, t)] + rest

        found = next(paths(g.root, 0), None)
        assert found is not None
        final = g.states[found[-1][1]]
        assert sorted(a.const for a in final.agents if isinstance(a, Call)) == ["lendA", "lendB", "lendC"]


def test_judge(criterion):
    with criterion(4, "judge convicts a defaulting seller, never a fulfilling pair"):
        prog = get("ex3_judge").program()
        bounds = Bounds(2000, 60)
        assert reaches(prog.main, prog.defs, has_agent("jailSeller"), bounds).verdict == YES
        g = explore(prog.main, prog.defs, bounds)
        assert not g.truncated
        jailed = lambda nf: has_agent("jailSeller")(nf) or has_agent("jailBuyer")(nf)
        # states from which a jail agent is reachable, by backward closure
        bad = {k for k, nf in g.states.items() if jailed(nf)}
        changed = True
        while changed:
            changed = False
            for s, _, t in g.edges:
                if t in bad and s not in bad:
                    bad.add(s)
                    changed = True
        fulfilled = [
            k
            for k, nf in g.states.items()
            if not jailed(nf)
            and any(store_entails(nf.store, atom("paid", c) & atom("sent", c)) for c in nf.binders if c.is_name)
        ]
        assert fulfilled and not (set(fulfilled) & bad)


def test_buffet(criterion):
    with criterion(5, "open buffet feeds Carl, one-shot buffet never does"):
        open_ = get("ex4_buffet_carl").program()
        once = get("ex4_buffet_prime_carl").program()
        assert reaches(open_.main, open_.defs, has_agent("SatiatedC")).verdict == YES
        assert reaches(once.main, once.defs, has_agent("SatiatedC")).verdict == NO


def _fused_sets(process):
    """The variable sets fused by the top-level steps of a locality process,
    read off where the fresh name landed: q(y) and the q(z) premise."""
    out = set()
    for succ in top_steps(process):
        nf = to_normal_form(succ)
        if not any(isinstance(a, Call) and a.const == "Fed" for a in nf.agents):
            continue
        fused = {"x"}
        for f in nf.store:
            match f:
                case Atom("q", (arg,)) if arg.is_name:
                    fused.add("y")
                case Impl(Or(Atom("q", (arg,)), _), _) if arg.is_name:
                    fused.add("z")
        out.add(frozenset(fused))
    return out


def test_locality(criterion):
    with criterion(6, "local minimal fusion on the locality example"):
        x, y, z = var("x"), var("y"), var("z")
        fuse = prefixed(Fuse(x, atom("p", x)), Call("Fed", ()))
        c = par(Constraint(atom("q", y)), Constraint(parse_formula("q(z) \\/ s -> p(y)", lambda v: var(v) if v in "yz" else name(v))))
        s = Constraint(atom("s"))
        p = delim([x, y, z], par(fuse, c, s))
        q = par(delim([x, y, z], par(fuse, c)), s)
        got_p, got_q = _fused_sets(p), _fused_sets(q)
        print(f"  P fuses {sorted(map(sorted, got_p))}, Q fuses {sorted(map(sorted, got_q))}")
        assert got_q == {frozenset("xy"), frozenset("xyz")}
        # P and Q are congruent, so local minimality gives P the {x,y,z} step
        # as well; this literal requirement fails (see notes/decisions.md)
        assert got_p == {frozenset("xy")}


def test_reduction_matches_labelled(criterion):
    with criterion(7, "reduction and top-level labelled steps coincide on 500 random programs"):
        failures = []
        for seed in range(500):
            defs, p = random_program(random.Random(seed))
            report = correspondence_check(p, defs, Bounds(200, 50))
            if not report.passed:
                failures.append(seed)
        assert failures == []


def _congruent_pair(rng):
    defs, p = random_program(rng, size=5)
    _, q = random_program(rng, size=4, max_defs=0)
    _, r = random_program(rng, size=3, max_defs=0)
    a, b = name("a"), name("b")
    rule = rng.choice(["nil", "comm", "assoc", "swap", "extrude", "unfold"])
    match rule:
        case "nil":
            return defs, par(p, NIL), p
        case "comm":
            return defs, par(p, q), par(q, p)
        case "assoc":
            return defs, par(par(p, q), r), par(p, par(q, r))
        case "swap":
            return defs, delim([a, b], p), delim([b, a], p)
        case "extrude":
            q = substitute(q, {a: name("c")})
            return defs, par(delim([a], p), q), delim([a], par(p, q))
    if not defs:
        return defs, par(p, NIL), p
    const = rng.choice(sorted(defs))
    call = Call(const, tuple(rng.choice([a, b]) for _ in defs[const].params))
    return defs, par(call, q), par(defs.unfold(call), q)


def test_congruence_is_bisimulation(criterion):
    with criterion(8, "structural congruence passes the bisimulation probe on 100 pairs"):
        rng = random.Random(2024)
        failures = []
        for i in range(100):
            defs, left, right = _congruent_pair(rng)
            if not bisim_probe(left, right, defs, depth=5).matched:
                failures.append(i)
        assert failures == []


def test_pi_encoding(criterion):
    with criterion(9, "pi encoding simulates communication and blocks lonely outputs"):
        mark = PMark("done", ("k",))
        for left, right in itertools.product([PI_NIL, mark], repeat=2):
            term = PRes("m", PPar(POut("n", "m", left), PIn("n", "z", right)))
            report = pi_correspondence(term)
            assert report.successors and report.passed, report
        assert output_consumed(parse_pi("n<k>.tell sent(k)").main) == NO
        assert output_consumed(parse_pi("(nu m)n<m>.0").main) == NO


def test_graph_rewriting(criterion):
    with criterion(10, "ring-to-star rewriting and the 8-loop over-approximation"):
        rule = ring_to_star()
        system = compile_rules([rule])
        host = ring(4, ["A1", "A2", "A3", "A4"])
        (emb,) = embed(rule, host)
        session = to_normal_form(system.handshake_image(host, rule, emb), system.defs)
        hit = lambda nf: without_store(nf, system.defs).key == session.key
        g = explore(system.encode_host(host), system.defs, Bounds(3000, 40), stop=hit)
        reached = [nf for nf in g.states.values() if hit(nf)]
        assert reached
        final = run(reached[0], system.defs, seed=1, max_steps=200)[-1][1]
        assert enabled_redexes(final) == []
        assert isomorphic(system.readback(final), star_of(host))

        loop = ring(8, ["A1", "A2", "A3", "A4"])
        assert embed(rule, loop) == []
        nf = to_normal_form(system.encode_host(loop), system.defs)
        fuses = [r for r in enabled_redexes(nf) if r.rule == "Fuse"]
        assert fuses
        after = apply(nf, fuses[0], system.defs)
        assert any(isinstance(a, Call) and a.const.startswith("B_") for a in after.agents) or after.key != nf.key


def test_determinism(criterion):
    with criterion(11, "fixed seeds give byte-identical JSON traces"):
        for entry in ["ex1_handshake", "ex2_insured_b1", "ex3_judge", "ring_to_star"]:
            prog = get(entry).program()
            traces = []
            for _ in range(2):
                root = to_normal_form(prog.main, prog.defs)
                traces.append(trace_json(root, run(root, prog.defs, seed=11, max_steps=60)))
            assert traces[0] == traces[1], entry
