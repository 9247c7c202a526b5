"""Built-in example programs, each with the reachability facts it should
exhibit.  Every entry is concrete program text; the encodings are built with
the library constructors and rendered."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cache

from .encodings.graph import compile_rules, ring, ring_to_star
from .encodings.idioms import cell_get, cell_new, cell_set, linda_in, linda_out, oplus, sem_P, sem_V
from .encodings.pi import encode_pi_program, parse_pi
from .logic import atom, name, var
from .reduction import NO, YES
from .syntax import (
    Ask,
    Call,
    Constraint,
    DefinitionSet,
    Fuse,
    Program,
    Sum,
    delim,
    par,
    parse_program,
    prefixed,
    render_program,
)


@dataclass(frozen=True)
class Expectation:
    kind: str  # "agent" or "constraint"
    target: str
    verdict: str


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    description: str
    text: str
    expectations: tuple[Expectation, ...] = ()

    def program(self) -> Program:
        return parse_program(self.text)


def _reach(target: str, verdict: str = YES) -> Expectation:
    return Expectation("constraint" if "(" in target else "agent", target, verdict)


HANDSHAKE = """\
# three lenders, each lending once the other two do
Alice() := (x) tell(b(x) /\\ c(x) ->> a(x)). fuse(x, a(x)). lendA(x)
Bob() := (y) tell(a(y) /\\ c(y) ->> b(y)). fuse(y, b(y)). lendB(y)
Carl() := (z) tell(a(z) /\\ b(z) ->> c(z)). fuse(z, c(z)). lendC(z)
main Alice() || Bob() || Carl()
"""

INSURED = """\
# a recursive seller, a recursive insurer and buyer {buyer}
S() := (x) tell(order(x) /\\ (pay(x) \\/ insurance(x)) ->> ship(x)). fuse(x, ship(x)). (S() || doShip(x))
I() := (x) tell(premium(x) ->> insurance(x)). fuse(x, insurance(x)). (I() || tau. check(!pay(x)). (refundS(x) || debtCollect(x)))
B0() := (x) tell(ship(x) ->> order(x) /\\ pay(x)). receive(x)
B1() := (x) tell(ship(x) ->> order(x) /\\ premium(x)). (receive(x) || tau. tell(pay(x)). 0)
B2() := (x) tell(order(x) /\\ pay(x)). receive(x)
B3() := (x) tell(order(x) /\\ premium(x)). receive(x)
main S() || I() || {buyer}()
"""

JUDGE = """\
# buyer and seller promise each other; a judge may join a disputed session
Buyer() := (x) tell(send(x) ->> pay(x)). fuse(x, pay(x)). CheckOut(x)
CheckOut(x) := tau. NoPay(x) + tau. tell(paid(x)). (tau. tell(dispute(x)). 0 + ask(sent(x)). 0)
Seller() := (y) tell(pay(y) ->> send(y)). fuse(y, send(y)). Ship(y)
Ship(y) := tau. NoSend(y) + tau. tell(sent(y)). (tau. tell(dispute(y)). 0 + ask(paid(y)). 0)
Judge() := (z) (join(z, pay(z) /\\ dispute(z)). check(!paid(z)). jailBuyer(z) || join(z, send(z) /\\ dispute(z)). check(!sent(z)). jailSeller(z))
main Buyer() || Seller() || Judge()
"""

# A seed under which the default scheduler takes the NoSend branch and the
# judge convicts the seller.
JUDGE_NOSEND_SEED = 0

DISHES = ("pasta", "chicken", "cheese", "fruit", "cake")


def _text(defs: DefinitionSet, main, comment: str) -> str:
    return f"# {comment}\n" + render_program(Program(defs, main)) + "\n"


def _buffet(guarded: bool, customer: str) -> str:
    x = var("x")
    dishes = [atom(d, x) for d in DISHES]
    table = oplus(dishes) if guarded else par(*(Constraint(f) for f in dishes))
    defs = DefinitionSet()
    defs.define("Buffet", [], delim([x], table))
    if customer == "Carl":
        two_trips = prefixed(Fuse(x, atom("pasta", x)), prefixed(Fuse(x, atom("chicken", x)), Call("SatiatedC", ())))
        defs.define("Carl", [], delim([x], two_trips))
    else:
        one_trip = prefixed(Fuse(x, atom("pasta", x) & atom("chicken", x)), Call("SatiatedB", ()))
        defs.define("Bob", [], delim([x], one_trip))
    kind = "one-shot buffet" if guarded else "buffet"
    return _text(defs, par(Call("Buffet", ()), Call(customer, ())), f"{kind} serving {customer}")


def _oplus_consumers() -> str:
    x, y = var("x"), var("y")
    consumer = lambda v, mark: delim([v], prefixed(Fuse(v, atom("p", v)), Call(mark, ())))
    main = delim([x], par(oplus([atom("p", x)]), consumer(var("u"), "FirstFed"), consumer(y, "SecondFed")))
    return _text(DefinitionSet(), main, "one-shot constraint with two consumers")


def _semaphores() -> str:
    n = name("n")
    main = par(sem_V(n), sem_P(n, Call("EnterA", ())), sem_P(n, Call("EnterB", ())))
    return _text(DefinitionSet(), main, "one token, two contenders")


def _cells() -> str:
    n, v, w, y = name("n"), name("v"), name("w"), var("y")
    which = Sum(((Ask(atom("fresh", y)), Call("ReadNew", ())), (Ask(atom("stale", y)), Call("ReadOld", ()))))
    reader = delim([y], cell_get(n, y, which))
    labels = par(Constraint(atom("stale", v)), Constraint(atom("fresh", w)))
    main = delim([n, v, w], par(labels, cell_new(n, v, cell_set(n, w, reader))))
    return _text(DefinitionSet(), main, "create, overwrite, then read a cell")


def _linda() -> str:
    a, b, w = name("a"), name("b"), var("w")
    reader = delim([w], linda_in(w, b, prefixed(Ask(atom("first", w)), Call("GotFirst", ()))))
    main = delim([a, b], par(Constraint(atom("first", a)), linda_out(a, b), reader))
    return _text(DefinitionSet(), main, "one tuple out, one formal retrieval")


def _pi(source: str, comment: str) -> str:
    defs, main = encode_pi_program(parse_pi(source))
    return _text(defs, main, f"{comment}: {source}")


def _graph(host_size: int) -> str:
    system = compile_rules([ring_to_star()])
    host = ring(host_size, ["A1", "A2", "A3", "A4"])
    label = "4-ring rewritten into a star" if host_size == 4 else "8-loop that the encoding also rewrites"
    return _text(system.defs, system.encode_host(host), label)


@cache
def entries() -> dict[str, CorpusEntry]:
    items = [
        CorpusEntry("ex1_handshake", "greedy handshaking between three lenders", HANDSHAKE,
                    (_reach("lendA"), _reach("lendB"), _reach("lendC"))),
        CorpusEntry("ex2_insured_b0", "insured sale, buyer paying upfront", INSURED.format(buyer="B0"),
                    (_reach("doShip"), _reach("refundS", NO))),
        CorpusEntry("ex2_insured_b1", "insured sale, insured buyer paying later", INSURED.format(buyer="B1"),
                    (_reach("doShip"), _reach("refundS"))),
        CorpusEntry("ex2_insured_b2", "insured sale, incautious buyer", INSURED.format(buyer="B2"),
                    (_reach("doShip"), _reach("refundS", NO))),
        CorpusEntry("ex2_insured_b3", "insured sale, insured buyer never paying", INSURED.format(buyer="B3"),
                    (_reach("doShip"), _reach("debtCollect"))),
        CorpusEntry("ex3_judge", "buyer, seller and an automated judge", JUDGE,
                    (_reach("jailSeller"), _reach("jailBuyer"))),
        CorpusEntry("ex4_buffet_carl", "open buffet lets Carl eat twice", _buffet(False, "Carl"), (_reach("SatiatedC"),)),
        CorpusEntry("ex4_buffet_prime_carl", "one-shot buffet stops Carl", _buffet(True, "Carl"), (_reach("SatiatedC", NO),)),
        CorpusEntry("ex4_buffet_bob", "open buffet serves Bob", _buffet(False, "Bob"), (_reach("SatiatedB"),)),
        CorpusEntry("ex4_buffet_prime_bob", "one-shot buffet serves Bob", _buffet(True, "Bob"), (_reach("SatiatedB"),)),
        CorpusEntry("oplus_two_consumers", "a one-shot constraint feeds a single consumer", _oplus_consumers(),
                    (_reach("FirstFed"), _reach("SecondFed"))),
        CorpusEntry("semaphores", "a binary semaphore", _semaphores(), (_reach("EnterA"), _reach("EnterB"))),
        CorpusEntry("cells", "memory cell operations", _cells(), (_reach("ReadNew"), _reach("ReadOld", NO))),
        CorpusEntry("linda", "Linda tuple space", _linda(), (_reach("GotFirst"),)),
        CorpusEntry("pi_handshake", "encoded pi communication",
                    _pi("(nu m)(n<m>.tell sent(k) | n(z).Got(z))", "encoded pi term"),
                    (_reach("sent(k)"), _reach("Got"))),
        CorpusEntry("pi_relay", "encoded pi term passing a private name twice",
                    _pi("(nu c)(nu m)(n<m>.c<m>.0 | n(z).c(w).Done(w))", "encoded pi term"), (_reach("Done"),)),
        CorpusEntry("pi_lonely_output", "encoded output without a receiver",
                    _pi("n<k>.tell sent(k)", "encoded pi term"), (_reach("sent(k)", NO),)),
        CorpusEntry("ring_to_star", "graph rewriting of a 4-ring into a star", _graph(4),
                    (_reach("A_B1"), _reach("A_B4"))),
        CorpusEntry("loop8", "the 8-loop over-approximation", _graph(8), (_reach("A_B1"),)),
    ]
    return {e.name: e for e in items}


def get(name_: str) -> CorpusEntry:
    try:
        return entries()[name_]
    except KeyError:
        raise KeyError(f"no corpus entry {name_!r}; try one of {', '.join(entries())}") from None
