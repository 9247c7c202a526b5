"""Process terms: AST, parser, substitution and structural normal forms."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Mapping

from .logic import (
    NAME,
    VAR,
    Formula,
    FormulaParser,
    Ident,
    Literal,
    apply_substitution,
    identifiers,
    is_positive,
    name,
    render,
    render_literal,
    var,
)


class ProcessError(Exception):
    pass


class ParseError(ProcessError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        where = f"{line}:{col}: " if line else ""
        super().__init__(where + message)
        self.line = line
        self.col = col


class UnguardedRecursion(ProcessError):
    pass


class ArityMismatch(ProcessError):
    pass


# ---------------------------------------------------------------------------
# Prefixes and processes


class Prefix:
    __slots__ = ()


@dataclass(frozen=True)
class Tau(Prefix):
    pass


@dataclass(frozen=True)
class Tell(Prefix):
    formula: Formula


@dataclass(frozen=True)
class Ask(Prefix):
    formula: Formula


@dataclass(frozen=True)
class Check(Prefix):
    literals: tuple[Literal, ...]


@dataclass(frozen=True)
class Fuse(Prefix):
    subject: Ident
    formula: Formula

    def __post_init__(self):
        if not self.subject.is_var:
            raise ProcessError(f"fuse subject {self.subject} must be a variable")


@dataclass(frozen=True)
class Join(Prefix):
    subject: Ident
    formula: Formula

    def __post_init__(self):
        if not self.subject.is_var:
            raise ProcessError(f"join subject {self.subject} must be a variable")


TAU = Tau()


class Process:
    __slots__ = ()

    def __or__(self, other: "Process") -> "Process":
        return Par(self, other)

    def __str__(self):
        return render_process(self)


@dataclass(frozen=True)
class Constraint(Process):
    formula: Formula


@dataclass(frozen=True)
class Sum(Process):
    branches: tuple[tuple[Prefix, Process], ...] = ()

    def __add__(self, other: "Sum") -> "Sum":
        return Sum(self.branches + other.branches)


@dataclass(frozen=True)
class Par(Process):
    left: Process
    right: Process


@dataclass(frozen=True)
class Delim(Process):
    binder: Ident
    body: Process


@dataclass(frozen=True)
class Call(Process):
    const: str
    args: tuple[Ident, ...] = ()


NIL = Sum(())


def prefixed(prefix: Prefix, cont: Process = NIL) -> Sum:
    return Sum(((prefix, cont),))


def par(*procs: Process) -> Process:
    procs = [p for p in procs if p != NIL]
    if not procs:
        return NIL
    out = procs[0]
    for p in procs[1:]:
        out = Par(out, p)
    return out


def delim(binders: Iterable[Ident], body: Process) -> Process:
    for b in reversed(list(binders)):
        body = Delim(b, body)
    return body


def constraints(formulas: Iterable[Formula]) -> Process:
    return par(*(Constraint(f) for f in formulas))


@dataclass(frozen=True)
class Definition:
    params: tuple[Ident, ...]
    body: Process


class DefinitionSet(dict):
    """Map from constant name to :class:`Definition`.

    Constants without a definition are inert: they never move, which makes
    them usable as observable markers such as ``jailSeller(n)``.
    """

    def define(self, const: str, params: Iterable[Ident], body: Process) -> "DefinitionSet":
        params = tuple(params)
        if not all(p.is_var for p in params):
            raise ProcessError(f"parameters of {const} must be variables")
        self[const] = Definition(params, body)
        return self

    def validate(self, main: Process | None = None):
        for const, d in self.items():
            for call, guarded in _calls(d.body):
                self._check_arity(call)
                if not guarded and call.const in self:
                    raise UnguardedRecursion(f"unguarded call {call.const} in the body of {const}")
        if main is not None:
            for call, _ in _calls(main):
                self._check_arity(call)

    def _check_arity(self, call: Call):
        d = self.get(call.const)
        if d is not None and len(d.params) != len(call.args):
            raise ArityMismatch(f"{call.const} expects {len(d.params)} arguments, got {len(call.args)}")

    def unfold(self, call: Call) -> Process | None:
        d = self.get(call.const)
        if d is None:
            return None
        return substitute(d.body, dict(zip(d.params, call.args)))


def _calls(p: Process, guarded: bool = False) -> Iterator[tuple[Call, bool]]:
    match p:
        case Call():
            yield p, guarded
        case Sum(branches):
            for _, cont in branches:
                yield from _calls(cont, True)
        case Par(l, r):
            yield from _calls(l, guarded)
            yield from _calls(r, guarded)
        case Delim(_, body):
            yield from _calls(body, guarded)


@dataclass(frozen=True)
class Program:
    defs: DefinitionSet
    main: Process


# ---------------------------------------------------------------------------
# Free identifiers and substitution


def prefix_identifiers(pi: Prefix) -> set[Ident]:
    match pi:
        case Tell(f) | Ask(f):
            return identifiers(f)
        case Check(lits):
            return {a for lit in lits for a in lit.atom.args}
        case Fuse(x, f) | Join(x, f):
            return {x} | identifiers(f)
    return set()


def free_identifiers(p: Process) -> set[Ident]:
    return set(_free(p))


@lru_cache(maxsize=200000)
def _free(p: Process) -> frozenset[Ident]:
    match p:
        case Constraint(f):
            return frozenset(identifiers(f))
        case Sum(branches):
            out: set[Ident] = set()
            for pi, cont in branches:
                out |= prefix_identifiers(pi)
                out |= _free(cont)
            return frozenset(out)
        case Par(l, r):
            return _free(l) | _free(r)
        case Delim(a, body):
            return _free(body) - {a}
        case Call(_, args):
            return frozenset(args)
    raise TypeError(f"not a process: {p!r}")


def all_labels(p: Process) -> set[str]:
    """Every identifier label occurring anywhere, bound or free."""
    out: set[str] = set()

    def go(p):
        match p:
            case Constraint(f):
                out.update(a.label for a in identifiers(f))
            case Sum(branches):
                for pi, cont in branches:
                    out.update(a.label for a in prefix_identifiers(pi))
                    go(cont)
            case Par(l, r):
                go(l)
                go(r)
            case Delim(a, body):
                out.add(a.label)
                go(body)
            case Call(_, args):
                out.update(a.label for a in args)

    go(p)
    return out


def fresh_label(base: str, avoid: set[str]) -> str:
    base = base.rstrip("'0123456789_") or "v"
    for i in itertools.count(1):
        candidate = f"{base}_{i}"
        if candidate not in avoid:
            return candidate
    raise AssertionError


def substitute_prefix(pi: Prefix, s: Mapping[Ident, Ident]) -> Prefix:
    match pi:
        case Tell(f):
            return Tell(apply_substitution(f, s))
        case Ask(f):
            return Ask(apply_substitution(f, s))
        case Check(lits):
            return Check(tuple(apply_substitution(lit, s) for lit in lits))
        case Fuse(x, f) | Join(x, f):
            y = s.get(x, x)
            if y.is_name:
                # an instantiated subject leaves nothing to fuse or join
                return Ask(apply_substitution(f, s))
            return type(pi)(y, apply_substitution(f, s))
    return pi


def substitute(p: Process, s: Mapping[Ident, Ident]) -> Process:
    """Capture-avoiding substitution of identifiers for identifiers."""
    s = {k: v for k, v in s.items() if k != v}
    if not s:
        return p
    return _subst(p, tuple(sorted(s.items())))


@lru_cache(maxsize=200000)
def _subst(p: Process, items: tuple[tuple[Ident, Ident], ...]) -> Process:
    s = dict(items)
    fv = _free(p)
    live = {k: v for k, v in s.items() if k in fv}
    if not live:
        return p
    items = tuple(sorted(live.items()))
    match p:
        case Constraint(f):
            return Constraint(apply_substitution(f, live))
        case Sum(branches):
            return Sum(tuple((substitute_prefix(pi, live), _subst(cont, items)) for pi, cont in branches))
        case Par(l, r):
            return Par(_subst(l, items), _subst(r, items))
        case Delim(a, body):
            inner = {k: v for k, v in live.items() if k != a}
            if a in inner.values():
                avoid = {i.label for i in _free(body)} | {i.label for kv in inner.items() for i in kv}
                a2 = Ident(a.kind, fresh_label(a.label, avoid | {a.label}))
                inner[a] = a2
                return Delim(a2, _subst(body, tuple(sorted(inner.items()))))
            if not inner:
                return p
            return Delim(a, _subst(body, tuple(sorted(inner.items()))))
        case Call(c, args):
            return Call(c, tuple(live.get(a, a) for a in args))
    raise TypeError(f"not a process: {p!r}")


# ---------------------------------------------------------------------------
# Concrete syntax


def render_prefix(pi: Prefix, rename: Mapping[Ident, str] | None = None) -> str:
    def ident(a: Ident) -> str:
        return rename.get(a, a.label) if rename else a.label

    match pi:
        case Tau():
            return "tau"
        case Tell(f):
            return f"tell({render(f, rename)})"
        case Ask(f):
            return f"ask({render(f, rename)})"
        case Check(lits):
            return f"check({', '.join(render_literal(lit, rename) for lit in lits)})"
        case Fuse(x, f):
            return f"fuse({ident(x)}, {render(f, rename)})"
        case Join(x, f):
            return f"join({ident(x)}, {render(f, rename)})"
    raise TypeError(pi)


def render_process(p: Process) -> str:
    def unit(p: Process) -> str:
        match p:
            case Par():
                return f"({go(p)})"
            case Sum(branches) if len(branches) > 1:
                return f"({go(p)})"
        return go(p)

    def go(p: Process) -> str:
        match p:
            case Constraint(f):
                return "{" + render(f) + "}"
            case Sum(()):
                return "0"
            case Sum(branches):
                return " + ".join(f"{render_prefix(pi)}. {unit(cont)}" for pi, cont in branches)
            case Par(l, r):
                return f"{go(l)} || {go(r)}"
            case Delim(a, body):
                head = f"(new {a.label})" if a.is_name else f"({a.label})"
                return f"{head} {unit(body)}"
            case Call(c, args):
                return f"{c}({','.join(a.label for a in args)})"
        raise TypeError(p)

    return go(p)


def render_program(prog: Program) -> str:
    lines = []
    for const, d in prog.defs.items():
        params = ",".join(a.label for a in d.params)
        lines.append(f"{const}({params}) := {render_process(d.body)}")
    lines.append(f"main {render_process(prog.main)}")
    return "\n".join(lines)


_PTOKEN = re.compile(
    r"(?P<ws>\s+)|(?P<comment>#[^\n]*)"
    r"|(?P<op>:=|->>|->|/\\|\\/|\|\||[(){},.+!|])"
    r"|(?P<zero>0)"
    r"|(?P<id>[A-Za-z][A-Za-z0-9_']*)"
)

KEYWORDS = {"tau", "tell", "ask", "check", "fuse", "join", "new", "main", "top", "bot"}


def _tokenize_program(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _PTOKEN.match(text, pos)
        if not m:
            raise _error_at(text, pos, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tokens.append((kind, m.group(kind), m.start()))
        pos = m.end()
    return tokens


def _error_at(text: str, pos: int, message: str) -> ParseError:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return ParseError(message, line, col)


class _ProcessParser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize_program(text)
        self.i = 0

    # token helpers
    def peek(self, k: int = 0) -> str | None:
        j = self.i + k
        return self.tokens[j][1] if j < len(self.tokens) else None

    def kind(self, k: int = 0) -> str | None:
        j = self.i + k
        return self.tokens[j][0] if j < len(self.tokens) else None

    def error(self, message: str) -> ParseError:
        pos = self.tokens[self.i][2] if self.i < len(self.tokens) else len(self.text)
        return _error_at(self.text, pos, message)

    def expect(self, value: str):
        if self.peek() != value:
            raise self.error(f"expected {value!r}, found {self.peek()!r}")
        self.i += 1

    def ident_label(self) -> str:
        if self.kind() != "id" or self.peek() in KEYWORDS:
            raise self.error(f"expected an identifier, found {self.peek()!r}")
        label = self.peek()
        self.i += 1
        return label

    # grammar
    def program(self) -> Program:
        defs = DefinitionSet()
        while self.at_definition():
            const = self.ident_label()
            self.expect("(")
            params = self.label_list(")")
            self.expect(":=")
            scope = {p: var(p) for p in params}
            body = self.process(scope)
            if const in defs:
                raise self.error(f"{const} defined twice")
            defs.define(const, [var(p) for p in params], body)
        if self.peek() == "main":
            self.i += 1
        main = self.process({})
        if self.peek() is not None:
            raise self.error(f"unexpected {self.peek()!r}")
        defs.validate(main)
        return Program(defs, main)

    def at_definition(self) -> bool:
        if self.kind() != "id" or self.peek() in KEYWORDS or self.peek(1) != "(":
            return False
        j = 2
        while self.peek(j) not in (")", None):
            j += 1
        return self.peek(j + 1) == ":="

    def label_list(self, close: str) -> list[str]:
        labels = []
        if self.peek() != close:
            while True:
                labels.append(self.ident_label())
                if self.peek() != ",":
                    break
                self.i += 1
        self.expect(close)
        return labels

    def process(self, scope) -> Process:
        p = self.summation(scope)
        while self.peek() in ("||", "|"):
            self.i += 1
            p = Par(p, self.summation(scope))
        return p

    def summation(self, scope) -> Process:
        p = self.unit(scope)
        while self.peek() == "+":
            if not isinstance(p, Sum):
                raise self.error("only guarded processes can be summed")
            self.i += 1
            q = self.unit(scope)
            if not isinstance(q, Sum):
                raise self.error("only guarded processes can be summed")
            p = p + q
        return p

    def unit(self, scope) -> Process:
        tok, kind = self.peek(), self.kind()
        if kind == "zero":
            self.i += 1
            return NIL
        if tok == "{":
            self.i += 1
            f = self.formula(scope)
            self.expect("}")
            return Constraint(f)
        if tok == "(":
            if self.peek(1) == "new" or (self.kind(1) == "id" and self.peek(2) in (")", ",")):
                return self.delimitation(scope)
            self.i += 1
            p = self.process(scope)
            self.expect(")")
            return p
        if tok in ("tau", "tell", "ask", "check", "fuse", "join"):
            pi = self.prefix(scope)
            self.expect(".")
            return prefixed(pi, self.unit(scope))
        if kind == "id" and tok not in KEYWORDS:
            const = self.ident_label()
            self.expect("(")
            args = [self.resolve(scope, a) for a in self.label_list(")")]
            return Call(const, tuple(args))
        raise self.error(f"expected a process, found {tok!r}")

    def delimitation(self, scope) -> Process:
        self.expect("(")
        kind = VAR
        if self.peek() == "new":
            self.i += 1
            kind = NAME
        labels = self.label_list(")")
        inner = dict(scope)
        binders = []
        for label in labels:
            b = var(label) if kind == VAR else name(label)
            inner[label] = b
            binders.append(b)
        return delim(binders, self.unit(inner))

    def prefix(self, scope) -> Prefix:
        head = self.peek()
        self.i += 1
        if head == "tau":
            return TAU
        self.expect("(")
        if head in ("fuse", "join"):
            label = self.ident_label()
            x = self.resolve(scope, label)
            if not x.is_var:
                raise self.error(f"{head} subject {label} is not a variable")
            self.expect(",")
            f = self.formula(scope)
            self.expect(")")
            self._positive(f)
            return Fuse(x, f) if head == "fuse" else Join(x, f)
        if head == "check":
            lits = []
            while True:
                lits.append(self.with_formula_parser(scope, lambda fp: fp.literal()))
                if self.peek() != ",":
                    break
                self.i += 1
            self.expect(")")
            return Check(tuple(lits))
        f = self.formula(scope)
        self.expect(")")
        if head == "ask":
            self._positive(f)
            return Ask(f)
        return Tell(f)

    def _positive(self, f: Formula):
        if not is_positive(f):
            raise self.error("ask/fuse/join goals must be positive formulas")

    def resolve(self, scope, label: str) -> Ident:
        return scope.get(label) or name(label)

    def formula(self, scope) -> Formula:
        return self.with_formula_parser(scope, lambda fp: fp.formula())

    def with_formula_parser(self, scope, action):
        fp = FormulaParser(self.tokens, self.text, lambda label: self.resolve(scope, label))
        fp.i = self.i
        try:
            result = action(fp)
        except Exception as exc:
            if hasattr(exc, "pos"):
                raise _error_at(self.text, exc.pos, str(exc).split(" at column")[0]) from None
            raise
        self.i = fp.i
        return result


def parse_program(text: str) -> Program:
    """Parse ``NAME(params) := P`` definitions followed by ``main P``."""
    return _ProcessParser(text).program()


def parse_process(text: str, defs: DefinitionSet | None = None) -> Process:
    prog = _ProcessParser(text).program()
    if prog.defs:
        raise ParseError("unexpected definitions in a process")
    if defs is not None:
        defs.validate(prog.main)
    return prog.main


# ---------------------------------------------------------------------------
# Normal forms


@dataclass(frozen=True)
class NormalForm:
    """``(binders)(store | agents)`` with every active constraint in ``store``.

    Agents are non-empty sums and calls of inert constants.  Binder labels are
    canonical and ``key`` identifies the alpha/structural equivalence class.
    """

    binders: tuple[Ident, ...]
    store: tuple[Formula, ...]
    agents: tuple[Process, ...]
    key: str = field(compare=False, default="")

    def __eq__(self, other):
        return isinstance(other, NormalForm) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def to_process(self) -> Process:
        return delim(self.binders, par(*(Constraint(f) for f in self.store), *self.agents))

    def __str__(self):
        return self.key

    @property
    def names(self) -> tuple[Ident, ...]:
        return tuple(b for b in self.binders if b.is_name)

    @property
    def variables(self) -> tuple[Ident, ...]:
        return tuple(b for b in self.binders if b.is_var)


def _flatten(p: Process, defs: DefinitionSet | None, used: set[str], binders, store, agents):
    match p:
        case Constraint(f):
            store.append(f)
        case Sum(()):
            pass
        case Sum():
            agents.append(p)
        case Par(l, r):
            _flatten(l, defs, used, binders, store, agents)
            _flatten(r, defs, used, binders, store, agents)
        case Delim(a, body):
            if a.label in used:
                a2 = Ident(a.kind, fresh_label(a.label, used))
                body = substitute(body, {a: a2})
                a = a2
            used.add(a.label)
            binders.append(a)
            _flatten(body, defs, used, binders, store, agents)
        case Call():
            body = defs.unfold(p) if defs is not None else None
            if body is None:
                agents.append(p)
            else:
                used |= all_labels(body)
                _flatten(body, defs, used, binders, store, agents)
        case _:
            raise TypeError(f"not a process: {p!r}")


def _item_free(item) -> frozenset[Ident]:
    if isinstance(item, Formula):
        return frozenset(identifiers(item))
    return _free(item)


def to_normal_form(p: Process, defs: DefinitionSet | None = None) -> NormalForm:
    """Hoist delimitations, flatten parallel composition, drop ``0`` and unused
    binders, unfold top-level calls once and canonicalize binder labels."""
    binders: list[Ident] = []
    store: list[Formula] = []
    agents: list[Process] = []
    _flatten(p, defs, all_labels(p), binders, store, agents)
    return _canonical_nf(binders, store, agents, {a.label for a in free_identifiers(p)})


def _canonical_nf(binders, store, agents, free_labels: set[str]) -> NormalForm:
    items = [*store, *agents]
    occurring = set().union(*(_item_free(it) for it in items)) if items else set()
    binders = [b for b in binders if b in occurring]
    labels, ordered = canonical_order(binders, items, 0, frozenset(free_labels))
    rename = {b: Ident(b.kind, labels[b]) for b in binders}
    new_binders = tuple(sorted(rename.values(), key=lambda b: _label_index(b.label)))
    new_store = []
    new_agents = []
    for it in ordered:
        if isinstance(it, Formula):
            new_store.append(apply_substitution(it, rename))
        else:
            new_agents.append(substitute(it, rename))
    key = _level_string(new_binders, ordered, {b: labels[b] for b in binders}, 0, frozenset(free_labels))
    return NormalForm(new_binders, tuple(new_store), tuple(new_agents), key)


def _label_index(label: str) -> tuple[int, str]:
    digits = re.findall(r"\d+$", label)
    return (int(digits[0]) if digits else 0, label)


def canonical_label(kind: str, depth: int, index: int) -> str:
    base = "x" if kind == VAR else "n"
    return f"{base}{index}" if depth == 0 else f"{base}{depth}_{index}"


_BRUTE_FORCE_BINDERS = 4
_MAX_CANDIDATES = 2000


def canonical_order(binders, items, depth: int, free_labels: frozenset[str], outer=None):
    """Choose canonical labels for ``binders`` and a canonical item order.

    Items are sorted by a rendering in which this level's binders are anonymous;
    the remaining ambiguity (items that differ only in which binder they
    mention) is resolved by taking the least rendering over the admissible
    orders, or over all labelings when there are few binders.
    """
    outer = dict(outer or {})
    if not binders:
        rendered = sorted(items, key=lambda it: render_item(it, outer, depth, free_labels))
        return {}, rendered
    anon = dict(outer)
    for b in binders:
        anon[b] = "?" + b.kind
    keyed = sorted(((render_item(it, anon, depth, free_labels), i) for i, it in enumerate(items)))

    def labelings_from_orders():
        groups = [list(g) for _, g in itertools.groupby(keyed, key=lambda t: t[0])]
        perms = [list(itertools.permutations(g)) if len(g) > 1 else [tuple(g)] for g in groups]
        total = 1
        for ps in perms:
            total *= len(ps)
        choices = itertools.product(*perms) if total <= _MAX_CANDIDATES else [tuple(tuple(g) for g in groups)]
        for choice in choices:
            order = [items[i] for g in choice for _, i in g]
            yield _first_occurrence_labels(binders, order, outer, depth, free_labels)

    def all_labelings():
        by_kind = {}
        for b in binders:
            by_kind.setdefault(b.kind, []).append(b)
        per_kind = []
        for kind, bs in sorted(by_kind.items()):
            labels = _label_seq(kind, depth, len(bs), free_labels)
            per_kind.append([dict(zip(perm, labels)) for perm in itertools.permutations(bs)])
        for combo in itertools.product(*per_kind):
            merged = {}
            for d in combo:
                merged.update(d)
            yield merged

    candidates = all_labelings() if len(binders) <= _BRUTE_FORCE_BINDERS else labelings_from_orders()
    best = None
    for labels in candidates:
        env = dict(outer)
        env.update(labels)
        rendered = sorted((render_item(it, env, depth, free_labels), i) for i, it in enumerate(items))
        text = "\x1f".join(r for r, _ in rendered)
        if best is None or text < best[0]:
            best = (text, labels, [items[i] for _, i in rendered])
    return best[1], best[2]


def _label_seq(kind: str, depth: int, n: int, free_labels) -> list[str]:
    out = []
    i = 1
    while len(out) < n:
        label = canonical_label(kind, depth, i)
        if label not in free_labels:
            out.append(label)
        i += 1
    return out


def _first_occurrence_labels(binders, order, outer, depth, free_labels) -> dict[Ident, str]:
    markers = dict(outer)
    for k, b in enumerate(binders):
        markers[b] = f"\x00{k}\x01"
    seen: list[Ident] = []
    for it in order:
        for m in re.finditer(r"\x00(\d+)\x01", render_item(it, markers, depth, free_labels)):
            b = binders[int(m.group(1))]
            if b not in seen:
                seen.append(b)
    seen += [b for b in binders if b not in seen]
    counters = {}
    labels = {}
    seqs = {kind: _label_seq(kind, depth, len(binders), free_labels) for kind in (VAR, NAME)}
    for b in seen:
        i = counters.get(b.kind, 0)
        labels[b] = seqs[b.kind][i]
        counters[b.kind] = i + 1
    return labels


def _level_string(binders, ordered_items, env, depth, free_labels) -> str:
    head = "".join(f"(new {b.label})" if b.is_name else f"({b.label})" for b in binders)
    body = " || ".join(render_item(it, env, depth, free_labels) for it in ordered_items) or "0"
    if not head:
        return body
    return f"{head} ({body})" if ordered_items else head + " 0"


def render_item(item, env: Mapping[Ident, str], depth: int, free_labels: frozenset[str]) -> str:
    """Canonical text of a store formula or agent under the identifier labels ``env``."""
    if isinstance(item, Formula):
        return "{" + render(item, env) + "}"
    return _render_agent(item, tuple(sorted(env.items())), depth, free_labels)


@lru_cache(maxsize=500000)
def _render_agent(p: Process, env_items, depth: int, free_labels) -> str:
    fv = _free(p)
    env = {k: v for k, v in env_items if k in fv}
    match p:
        case Call(c, args):
            return f"{c}({','.join(env.get(a, a.label) for a in args)})"
        case Sum(branches):
            parts = sorted(
                f"{render_prefix(pi, env)}. {canonical_text(cont, depth + 1, free_labels, env)}"
                for pi, cont in branches
            )
            return parts[0] if len(parts) == 1 else "(" + " + ".join(parts) + ")"
    raise TypeError(p)


def canonical_text(p: Process, depth: int, free_labels: frozenset[str], env: Mapping[Ident, str]) -> str:
    """Canonical rendering of a guarded continuation (no call unfolding)."""
    binders: list[Ident] = []
    store: list[Formula] = []
    agents: list[Process] = []
    used = set(all_labels(p)) | {v for v in env.values()}
    _flatten(p, None, used, binders, store, agents)
    items = [*store, *agents]
    occurring = set().union(*(_item_free(it) for it in items)) if items else set()
    binders = [b for b in binders if b in occurring]
    if len(items) == 1 and not binders:
        return render_item(items[0], env, depth, free_labels)
    labels, ordered = canonical_order(binders, items, depth, free_labels, env)
    inner = dict(env)
    inner.update(labels)
    new_binders = sorted((Ident(b.kind, labels[b]) for b in binders), key=lambda b: _label_index(b.label))
    text = _level_string(new_binders, ordered, inner, depth, free_labels)
    return text if binders or len(items) <= 1 else f"({text})"


def struct_equiv(p: Process, q: Process, defs: DefinitionSet | None = None) -> bool:
    """Structural equivalence, exact up to top-level unfolding of calls."""
    return to_normal_form(p, defs).key == to_normal_form(q, defs).key
