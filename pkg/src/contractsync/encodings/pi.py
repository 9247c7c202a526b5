"""Synchronous pi-calculus terms, their reduction, and their translation.

An output ``a<b>.P`` becomes a message constraint plus a fuse demanding a
matching input; an input ``a(z).Q`` advertises ``in(a, y)`` and joins ``z``
to the payload once ``y`` has been fused with some output.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..logic import Ident, atom, identifiers, name, var
from ..syntax import (
    NormalForm,
    Call,
    Constraint,
    DefinitionSet,
    Fuse,
    Join,
    Process,
    Tell,
    all_labels,
    delim,
    fresh_label,
    par,
    prefixed,
    to_normal_form,
)


class PiTerm:
    __slots__ = ()


@dataclass(frozen=True)
class PNil(PiTerm):
    pass


@dataclass(frozen=True)
class PPar(PiTerm):
    left: PiTerm
    right: PiTerm


@dataclass(frozen=True)
class PRes(PiTerm):
    name: str
    body: PiTerm


@dataclass(frozen=True)
class POut(PiTerm):
    channel: str
    payload: str
    cont: PiTerm = PNil()


@dataclass(frozen=True)
class PIn(PiTerm):
    channel: str
    binder: str
    cont: PiTerm = PNil()


@dataclass(frozen=True)
class PMark(PiTerm):
    """An observable marker; encoded as telling ``pred(args)``."""

    pred: str
    args: tuple[str, ...] = ()


@dataclass(frozen=True)
class PCall(PiTerm):
    const: str
    args: tuple[str, ...] = ()


@dataclass(frozen=True)
class PiProgram:
    defs: dict[str, tuple[tuple[str, ...], PiTerm]]
    main: PiTerm


PI_NIL = PNil()


def pi_par(*terms: PiTerm) -> PiTerm:
    terms = [t for t in terms if t != PI_NIL]
    if not terms:
        return PI_NIL
    out = terms[0]
    for t in terms[1:]:
        out = PPar(out, t)
    return out


def pi_free(t: PiTerm) -> set[str]:
    match t:
        case PNil():
            return set()
        case PPar(l, r):
            return pi_free(l) | pi_free(r)
        case PRes(n, body):
            return pi_free(body) - {n}
        case POut(a, b, cont):
            return {a, b} | pi_free(cont)
        case PIn(a, z, cont):
            return {a} | (pi_free(cont) - {z})
        case PCall(_, args) | PMark(_, args):
            return set(args)
    raise TypeError(t)


def pi_labels(t: PiTerm) -> set[str]:
    match t:
        case PNil():
            return set()
        case PPar(l, r):
            return pi_labels(l) | pi_labels(r)
        case PRes(n, body):
            return {n} | pi_labels(body)
        case POut(a, b, cont):
            return {a, b} | pi_labels(cont)
        case PIn(a, z, cont):
            return {a, z} | pi_labels(cont)
        case PCall(_, args) | PMark(_, args):
            return set(args)
    raise TypeError(t)


def pi_subst(t: PiTerm, s: dict[str, str]) -> PiTerm:
    """Capture-avoiding renaming of free names."""
    s = {k: v for k, v in s.items() if k != v}
    if not s:
        return t
    match t:
        case PNil():
            return t
        case PPar(l, r):
            return PPar(pi_subst(l, s), pi_subst(r, s))
        case PRes(n, body) | PIn(_, n, body):
            inner = {k: v for k, v in s.items() if k != n}
            if n in inner.values():
                n2 = fresh_label(n, pi_labels(body) | set(inner) | set(inner.values()))
                inner[n] = n2
                n = n2
            body = pi_subst(body, inner)
            if isinstance(t, PRes):
                return PRes(n, body)
            return PIn(s.get(t.channel, t.channel), n, body)
        case POut(a, b, cont):
            return POut(s.get(a, a), s.get(b, b), pi_subst(cont, s))
        case PCall(c, args):
            return PCall(c, tuple(s.get(a, a) for a in args))
        case PMark(pred, args):
            return PMark(pred, tuple(s.get(a, a) for a in args))
    raise TypeError(t)


def render_pi(t: PiTerm) -> str:
    def unit(t):
        return f"({go(t)})" if isinstance(t, PPar) else go(t)

    def go(t):
        match t:
            case PNil():
                return "0"
            case PPar(l, r):
                return f"{go(l)} | {go(r)}"
            case PRes(n, body):
                return f"(nu {n}) {unit(body)}"
            case POut(a, b, cont):
                return f"{a}<{b}>.{unit(cont)}"
            case PIn(a, z, cont):
                return f"{a}({z}).{unit(cont)}"
            case PCall(c, args):
                return f"{c}({','.join(args)})"
            case PMark(pred, args):
                return f"tell {pred}({','.join(args)})"
        raise TypeError(t)

    return go(t)


_PI_TOKEN = re.compile(r"\s*(?:(?P<op>:=|[()<>.|,])|(?P<id>[A-Za-z][A-Za-z0-9_']*|0))")


class _PiParser:
    def __init__(self, text: str):
        self.tokens = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _PI_TOKEN.match(text, pos)
            if not m:
                raise ValueError(f"unexpected input at {pos}: {text[pos:pos + 10]!r}")
            self.tokens.append(m.group("op") or m.group("id"))
            pos = m.end()
        self.i = 0

    def peek(self, k: int = 0):
        j = self.i + k
        return self.tokens[j] if j < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, tok: str):
        if self.peek() != tok:
            raise ValueError(f"expected {tok!r}, found {self.peek()!r}")
        self.i += 1

    def ident(self) -> str:
        tok = self.peek()
        if tok is None or not re.match(r"[A-Za-z]", tok):
            raise ValueError(f"expected identifier, found {tok!r}")
        self.i += 1
        return tok

    def idents(self) -> list[str]:
        self.expect("(")
        out = []
        while self.peek() != ")":
            out.append(self.ident())
            if self.peek() == ",":
                self.i += 1
        self.expect(")")
        return out

    def program(self) -> PiProgram:
        defs = {}
        while self.at_definition():
            c = self.ident()
            params = self.idents()
            self.expect(":=")
            defs[c] = (tuple(params), self.proc())
        if self.peek() == "main":
            self.i += 1
        main = self.proc()
        if self.peek() is not None:
            raise ValueError(f"trailing input at {self.peek()!r}")
        return PiProgram(defs, main)

    def at_definition(self) -> bool:
        if self.peek() is None or self.peek(1) != "(" or self.peek() == "main":
            return False
        j = 2
        while self.peek(j) not in (")", None):
            j += 1
        return self.peek(j + 1) == ":="

    def proc(self) -> PiTerm:
        t = self.unit()
        while self.peek() == "|":
            self.i += 1
            t = PPar(t, self.unit())
        return t

    def unit(self) -> PiTerm:
        tok = self.peek()
        if tok == "0":
            self.i += 1
            return PI_NIL
        if tok == "(":
            if self.peek(1) == "nu":
                self.i += 2
                n = self.ident()
                self.expect(")")
                return PRes(n, self.unit())
            self.i += 1
            t = self.proc()
            self.expect(")")
            return t
        if tok == "tell":
            self.i += 1
            pred = self.ident()
            return PMark(pred, tuple(self.idents()))
        a = self.ident()
        if self.peek() == "<":
            self.i += 1
            b = self.ident()
            self.expect(">")
            return POut(a, b, self.cont())
        args = self.idents()
        if self.peek() == "." and len(args) == 1:
            return PIn(a, args[0], self.cont())
        return PCall(a, tuple(args))

    def cont(self) -> PiTerm:
        if self.peek() == ".":
            self.i += 1
            return self.unit()
        return PI_NIL


def parse_pi(text: str) -> PiProgram:
    """Concrete syntax: ``a<b>.P``, ``a(z).P``, ``(nu n) P``, ``P | Q``, ``0``
    ``tell p(a)`` and ``X(a,b)``; optional definitions ``X(x) := P`` precede ``main``."""
    return _PiParser(text).program()


# ---------------------------------------------------------------------------
# Reduction


@dataclass(frozen=True)
class PiState:
    """Restricted names and the multiset of prefixed components and calls."""

    restricted: tuple[str, ...]
    components: tuple[PiTerm, ...]

    def to_term(self) -> PiTerm:
        t = pi_par(*self.components)
        for n in reversed(self.restricted):
            t = PRes(n, t)
        return t


def pi_normal(t: PiTerm, defs=None) -> PiState:
    """Hoist restrictions (renaming apart) and unfold top-level calls."""
    used = pi_labels(t)
    outer_free = pi_free(t)
    restricted: list[str] = []
    comps: list[PiTerm] = []

    def go(t: PiTerm):
        match t:
            case PNil():
                pass
            case PPar(l, r):
                go(l)
                go(r)
            case PRes(n, body):
                if n in restricted or n in outer_free:
                    n2 = fresh_label(n, used)
                    used.add(n2)
                    body = pi_subst(body, {n: n2})
                    n = n2
                restricted.append(n)
                go(body)
            case PCall(c, args) if defs and c in defs:
                params, body = defs[c]
                used.update(pi_labels(body))
                go(pi_subst(body, dict(zip(params, args))))
            case _:
                comps.append(t)

    go(t)
    return PiState(tuple(restricted), tuple(comps))


def pi_reductions(t: PiTerm, defs=None) -> list[PiTerm]:
    """Communication steps of a closed pi term."""
    st = pi_normal(t, defs)
    out = []
    comps = st.components
    for i, o in enumerate(comps):
        if not isinstance(o, POut):
            continue
        for j, inp in enumerate(comps):
            if not isinstance(inp, PIn) or inp.channel != o.channel:
                continue
            rest = [c for k, c in enumerate(comps) if k not in (i, j)]
            received = pi_subst(inp.cont, {inp.binder: o.payload})
            out.append(PiState(st.restricted, tuple(rest + [o.cont, received])).to_term())
    return out


# ---------------------------------------------------------------------------
# Translation


def encode_pi(t: PiTerm, bound_vars: frozenset[str] = frozenset()) -> Process:
    """Translate a pi term.  Free pi names become names; input binders
    become variables."""
    used = pi_labels(t)

    def ident(label: str, bound: frozenset[str]) -> Ident:
        return var(label) if label in bound else name(label)

    def fresh(base: str) -> Ident:
        label = fresh_label(base, used)
        used.add(label)
        return var(label)

    def go(t: PiTerm, bound: frozenset[str]) -> Process:
        match t:
            case PNil():
                return par()
            case PPar(l, r):
                return par(go(l, bound), go(r, bound))
            case PRes(n, body):
                return delim([name(n)], go(body, bound - {n}))
            case PCall(c, args):
                return Call(c, tuple(ident(a, bound) for a in args))
            case PMark(pred, args):
                return prefixed(Tell(atom(pred, *(ident(a, bound) for a in args))))
            case POut(a, b, cont):
                x = fresh("x")
                msg = Constraint(atom("msg", x, ident(b, bound)))
                return delim([x], par(msg, prefixed(Fuse(x, atom("in", ident(a, bound), x)), go(cont, bound))))
            case PIn(a, z, cont):
                y = fresh("y")
                zv = var(z)
                inner = bound | {z}
                waiting = delim([zv], prefixed(Join(zv, atom("msg", y, zv)), go(cont, inner)))
                return delim([y], par(Constraint(atom("in", ident(a, bound), y)), waiting))
        raise TypeError(t)

    return go(t, bound_vars)


def encode_pi_program(prog: PiProgram) -> tuple[DefinitionSet, Process]:
    defs = DefinitionSet()
    for c, (params, body) in prog.defs.items():
        defs.define(c, [var(p) for p in params], encode_pi(body, frozenset(params)))
    defs.validate()
    return defs, encode_pi(prog.main)


def without_residue(nf: NormalForm, defs: DefinitionSet | None = None) -> NormalForm:
    """Drop constraints left behind by completed handshakes: ground
    constraints mentioning a delimited name that no agent mentions any more."""
    live = set()
    for a in nf.agents:
        live |= all_labels(a)
    dead = {b for b in nf.names if b.label not in live}

    def residue(f) -> bool:
        ids = identifiers(f)
        return bool(ids & dead) and all(i.is_name for i in ids)

    store = [f for f in nf.store if not residue(f)]
    return to_normal_form(delim(nf.binders, par(*(Constraint(f) for f in store), *nf.agents)), defs)


def _matches(target: NormalForm, defs):
    return lambda nf: without_residue(nf, defs).key == target.key


@dataclass(frozen=True)
class PiCorrespondence:
    """Per pi successor, whether its encoding is reachable from the encoding
    of the source term (ignoring leftover message constraints)."""

    source: str
    successors: tuple[tuple[str, str], ...]

    @property
    def passed(self) -> bool:
        return all(v == "yes" for _, v in self.successors)


def pi_correspondence(t: PiTerm, pi_defs=None, bounds=None) -> PiCorrespondence:
    from ..reduction import Bounds, reaches

    bounds = bounds or Bounds(500, 30)
    defs, enc = encode_pi_program(PiProgram(dict(pi_defs or {}), t))
    out = []
    for succ in pi_reductions(t, pi_defs):
        target = without_residue(to_normal_form(encode_pi(succ), defs), defs)
        out.append((render_pi(succ), reaches(enc, defs, _matches(target, defs), bounds).verdict))
    return PiCorrespondence(render_pi(t), tuple(out))


def output_consumed(t: PiTerm, pi_defs=None, bounds=None) -> str:
    """Whether some run of the encoding fires the fuse of an output:
    ``yes``, ``no`` or ``unknown`` if the bounds were hit."""
    from ..reduction import Bounds, enabled_redexes, reaches

    bounds = bounds or Bounds(500, 30)
    defs, enc = encode_pi_program(PiProgram(dict(pi_defs or {}), t))
    fusing = lambda nf: any(r.rule == "Fuse" for r in enabled_redexes(nf))
    return reaches(enc, defs, fusing, bounds).verdict
