"""Propositional contract logic over atoms with name/variable arguments.

Constraints are PCL formulas.  Entailment is decided on the Horn fragment
(facts, plain implications, contractual implications, optionally guarded by a
plain premise) with a two-level fixpoint:

* the inner closure saturates a set of atoms under facts and plain clauses;
* the outer loop is a greatest fixpoint over contractual clauses: start by
  assuming every contract fires, then repeatedly drop the contracts whose
  premise is not supported by what the remaining ones yield.

``oracle_prove`` is an unrelated bounded backward search over intuitionistic
sequent rules extended with the three contract axiom schemata.  It is only
used to cross-check ``entails``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Union


class LogicError(Exception):
    pass


class NonHornConstraint(LogicError):
    """A constraint lies outside the decidable Horn fragment."""


class FormulaSyntaxError(LogicError):
    def __init__(self, message: str, pos: int, text: str):
        super().__init__(f"{message} at column {pos + 1}: {text!r}")
        self.pos = pos
        self.text = text


# ---------------------------------------------------------------------------
# Identifiers and formulas


NAME = "name"
VAR = "var"


@dataclass(frozen=True, order=True)
class Ident:
    kind: str
    label: str

    def __post_init__(self):
        if self.kind not in (NAME, VAR):
            raise ValueError(f"bad identifier kind {self.kind!r}")
        if not self.label:
            raise ValueError("identifier labels must be non-empty")

    @property
    def is_var(self) -> bool:
        return self.kind == VAR

    @property
    def is_name(self) -> bool:
        return self.kind == NAME

    def __str__(self):
        return self.label


def name(label: str) -> Ident:
    return Ident(NAME, label)


def var(label: str) -> Ident:
    return Ident(VAR, label)


class Formula:
    """Base class of PCL formulas.  All subclasses are immutable."""

    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return And(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return Or(self, other)

    def __str__(self):
        return render(self)


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bot(Formula):
    pass


TOP = Top()
BOT = Bot()


@dataclass(frozen=True)
class Atom(Formula):
    pred: str
    args: tuple[Ident, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.args)


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Impl(Formula):
    premise: Formula
    conclusion: Formula


@dataclass(frozen=True)
class CImpl(Formula):
    """Contractual implication ``premise ->> conclusion``."""

    premise: Formula
    conclusion: Formula


@dataclass(frozen=True)
class Literal:
    """An atom or a negated atom; only ever the argument of ``check``."""

    atom: Atom
    positive: bool = True

    def __str__(self):
        return ("" if self.positive else "!") + render(self.atom)


def atom(pred: str, *args: Ident) -> Atom:
    return Atom(pred, tuple(args))


def conj(formulas: Iterable[Formula]) -> Formula:
    result: Formula | None = None
    for f in formulas:
        result = f if result is None else And(result, f)
    return TOP if result is None else result


def disj(formulas: Iterable[Formula]) -> Formula:
    result: Formula | None = None
    for f in formulas:
        result = f if result is None else Or(result, f)
    return BOT if result is None else result


def conjuncts(f: Formula) -> Iterator[Formula]:
    if isinstance(f, And):
        yield from conjuncts(f.left)
        yield from conjuncts(f.right)
    elif not isinstance(f, Top):
        yield f


def is_positive(f: Formula) -> bool:
    """True for formulas built from atoms, top, bot, conjunction, disjunction."""
    match f:
        case Top() | Bot() | Atom():
            return True
        case And(l, r) | Or(l, r):
            return is_positive(l) and is_positive(r)
    return False


def atoms_of(f: Formula) -> Iterator[Atom]:
    match f:
        case Atom():
            yield f
        case And(l, r) | Or(l, r) | Impl(l, r) | CImpl(l, r):
            yield from atoms_of(l)
            yield from atoms_of(r)


def identifiers(f: Formula) -> set[Ident]:
    return {a for at in atoms_of(f) for a in at.args}


Substitution = Mapping[Ident, Ident]


def apply_substitution(f, s: Substitution):
    """Apply an identifier map homomorphically; works on formulas and literals."""
    if not s:
        return f
    match f:
        case Atom(p, args):
            if not any(a in s for a in args):
                return f
            return Atom(p, tuple(s.get(a, a) for a in args))
        case Literal(at, pos):
            return Literal(apply_substitution(at, s), pos)
        case And(l, r):
            return And(apply_substitution(l, s), apply_substitution(r, s))
        case Or(l, r):
            return Or(apply_substitution(l, s), apply_substitution(r, s))
        case Impl(l, r):
            return Impl(apply_substitution(l, s), apply_substitution(r, s))
        case CImpl(l, r):
            return CImpl(apply_substitution(l, s), apply_substitution(r, s))
    return f


# ---------------------------------------------------------------------------
# Concrete syntax


_PREC = {CImpl: 1, Impl: 1, Or: 2, And: 3}


def render(f: Formula, rename: Mapping[Ident, str] | None = None) -> str:
    """Render in the concrete syntax.  ``rename`` overrides identifier labels."""

    def ident(a: Ident) -> str:
        return rename.get(a, a.label) if rename else a.label

    def go(f: Formula, ctx: int) -> str:
        match f:
            case Top():
                return "top"
            case Bot():
                return "bot"
            case Atom(p, args):
                if not args:
                    return p
                return f"{p}({','.join(ident(a) for a in args)})"
            case And(l, r):
                s = f"{go(l, 3)} /\\ {go(r, 4)}"
            case Or(l, r):
                s = f"{go(l, 2)} \\/ {go(r, 3)}"
            case Impl(l, r):
                s = f"{go(l, 2)} -> {go(r, 1)}"
            case CImpl(l, r):
                s = f"{go(l, 2)} ->> {go(r, 1)}"
            case _:
                raise TypeError(f"not a formula: {f!r}")
        return f"({s})" if _PREC[type(f)] < ctx else s

    return go(f, 0)


def render_literal(lit: Literal, rename: Mapping[Ident, str] | None = None) -> str:
    return ("" if lit.positive else "!") + render(lit.atom, rename)


_TOKEN = re.compile(
    r"\s*(?:(?P<op>->>|->|/\\|\\/|[(),!])|(?P<id>[A-Za-z][A-Za-z0-9_']*))"
)


def tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise FormulaSyntaxError("unexpected character", pos, text)
        kind = "op" if m.group("op") else "id"
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    return tokens


class FormulaParser:
    """Recursive-descent parser over a token list.

    ``resolve`` maps a label to an identifier; by default every argument is a
    name.  The process parser shares this class with its own resolver.
    """

    def __init__(self, tokens, text, resolve=name, offset: int = 0):
        self.tokens = tokens
        self.text = text
        self.i = 0
        self.resolve = resolve
        self.offset = offset

    def peek(self) -> str | None:
        return self.tokens[self.i][1] if self.i < len(self.tokens) else None

    def error(self, message: str):
        pos = self.tokens[self.i][2] if self.i < len(self.tokens) else len(self.text)
        raise FormulaSyntaxError(message, pos + self.offset, self.text)

    def expect(self, value: str):
        if self.peek() != value:
            self.error(f"expected {value!r}")
        self.i += 1

    def formula(self) -> Formula:
        left = self.disjunction()
        op = self.peek()
        if op == "->":
            self.i += 1
            return Impl(left, self.formula())
        if op == "->>":
            self.i += 1
            return CImpl(left, self.formula())
        return left

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.peek() == "\\/":
            self.i += 1
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.unary()
        while self.peek() == "/\\":
            self.i += 1
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        tok = self.peek()
        if tok == "(":
            self.i += 1
            f = self.formula()
            self.expect(")")
            return f
        if tok == "top":
            self.i += 1
            return TOP
        if tok == "bot":
            self.i += 1
            return BOT
        return self.atom()

    def atom(self) -> Atom:
        if self.i >= len(self.tokens) or self.tokens[self.i][0] != "id":
            self.error("expected an atom")
        pred = self.tokens[self.i][1]
        self.i += 1
        args: list[Ident] = []
        if self.peek() == "(":
            self.i += 1
            if self.peek() != ")":
                while True:
                    if self.i >= len(self.tokens) or self.tokens[self.i][0] != "id":
                        self.error("expected an identifier")
                    args.append(self.resolve(self.tokens[self.i][1]))
                    self.i += 1
                    if self.peek() != ",":
                        break
                    self.i += 1
            self.expect(")")
        return Atom(pred, tuple(args))

    def literal(self) -> Literal:
        positive = True
        if self.peek() == "!":
            self.i += 1
            positive = False
        return Literal(self.atom(), positive)


def parse_formula(text: str, resolve=name) -> Formula:
    tokens = tokenize(text)
    p = FormulaParser(tokens, text, resolve)
    f = p.formula()
    if p.i != len(tokens):
        p.error("trailing input")
    return f


def parse_theory(text: str, resolve=name) -> list[Formula]:
    """Parse a theory file: formulas terminated by ``.``; ``#`` starts a comment."""
    lines = [line.split("#", 1)[0] for line in text.splitlines()]
    body = "\n".join(lines)
    return [parse_formula(chunk, resolve) for chunk in body.split(".") if chunk.strip()]


# ---------------------------------------------------------------------------
# Horn clauses


@dataclass(frozen=True)
class HornClause:
    """``guard -> (premise ->> conclusion)`` when contractual, else ``premise -> conclusion``.

    ``conclusion`` is a tuple of atoms, or ``None`` for a clause concluding bot.
    Facts are plain clauses with premise top.
    """

    premise: Formula
    conclusion: tuple[Atom, ...] | None
    contractual: bool = False
    guard: Formula = TOP

    @property
    def is_fact(self) -> bool:
        return not self.contractual and isinstance(self.premise, Top)

    def conclusion_formula(self) -> Formula:
        return BOT if self.conclusion is None else conj(self.conclusion)

    def to_formula(self) -> Formula:
        head = self.conclusion_formula()
        if self.contractual:
            f: Formula = CImpl(self.premise, head)
            return f if isinstance(self.guard, Top) else Impl(self.guard, f)
        return head if isinstance(self.premise, Top) else Impl(self.premise, head)

    def __str__(self):
        return render(self.to_formula())


Theory = frozenset  # of HornClause


def _and(a: Formula, b: Formula) -> Formula:
    if isinstance(a, Top):
        return b
    if isinstance(b, Top):
        return a
    return And(a, b)


def _head_atoms(f: Formula) -> tuple[Atom, ...] | None:
    """Atoms of a conjunctive head, ``None`` if the head is (or contains) bot."""
    out: list[Atom] = []
    for c in conjuncts(f):
        match c:
            case Atom():
                out.append(c)
            case Bot():
                return None
            case _:
                raise NonHornConstraint(f"contract conclusion must be a conjunction of atoms: {render(f)}")
    return tuple(out)


@lru_cache(maxsize=65536)
def normalize_constraint(f: Formula) -> tuple[HornClause, ...]:
    """Split a constraint into Horn clauses, distributing top-level conjunctions."""
    match f:
        case Top():
            return ()
        case Bot():
            return (HornClause(TOP, None),)
        case Atom():
            return (HornClause(TOP, (f,)),)
        case And(l, r):
            return normalize_constraint(l) + normalize_constraint(r)
        case Or():
            raise NonHornConstraint(f"disjunction outside a premise: {render(f)}")
        case CImpl(p, c):
            if not is_positive(p):
                raise NonHornConstraint(f"nested implication in contract premise: {render(f)}")
            return (HornClause(p, _head_atoms(c), contractual=True),)
        case Impl(p, c):
            if not is_positive(p):
                raise NonHornConstraint(f"nested implication in premise: {render(f)}")
            out = []
            for cl in normalize_constraint(c):
                if cl.contractual:
                    out.append(HornClause(cl.premise, cl.conclusion, True, _and(p, cl.guard)))
                else:
                    out.append(HornClause(_and(p, cl.premise), cl.conclusion))
            return tuple(out)
    raise TypeError(f"not a formula: {f!r}")


def theory_of(formulas: Iterable[Formula]) -> frozenset[HornClause]:
    return frozenset(cl for f in formulas for cl in normalize_constraint(f))


# ---------------------------------------------------------------------------
# Entailment


class _Closure:
    """A saturated atom set; ``bottom`` means everything holds."""

    __slots__ = ("atoms", "bottom")

    def __init__(self, atoms: set[Atom], bottom: bool):
        self.atoms = atoms
        self.bottom = bottom

    def holds(self, f: Formula) -> bool:
        if self.bottom:
            return True
        match f:
            case Top():
                return True
            case Bot():
                return False
            case Atom():
                return f in self.atoms
            case And(l, r):
                return self.holds(l) and self.holds(r)
            case Or(l, r):
                return self.holds(l) or self.holds(r)
        raise NonHornConstraint(f"goal is not positive: {render(f)}")


def _saturate(seed: Iterable[tuple[Atom, ...] | None], plain: list[HornClause]) -> _Closure:
    atoms: set[Atom] = set()
    closure = _Closure(atoms, False)
    for head in seed:
        if head is None:
            return _Closure(atoms, True)
        atoms.update(head)
    pending = list(plain)
    changed = True
    while changed and pending:
        changed = False
        rest = []
        for cl in pending:
            if closure.holds(cl.premise):
                if cl.conclusion is None:
                    return _Closure(atoms, True)
                atoms.update(cl.conclusion)
                changed = True
            else:
                rest.append(cl)
        pending = rest
    return closure


def _contract_fixpoint(facts, plain, contracts) -> _Closure:
    active = list(contracts)
    while True:
        closure = _saturate(facts + [c.conclusion for c in active], plain)
        kept = [c for c in active if closure.holds(c.premise)]
        if len(kept) == len(active):
            return closure
        active = kept


@lru_cache(maxsize=65536)
def derive(theory: frozenset[HornClause]) -> _Closure:
    facts = [cl.conclusion for cl in theory if cl.is_fact]
    plain = [cl for cl in theory if not cl.contractual and not cl.is_fact]
    contracts = [cl for cl in theory if cl.contractual and isinstance(cl.guard, Top)]
    guarded = [cl for cl in theory if cl.contractual and not isinstance(cl.guard, Top)]
    # A guarded contract becomes usable once its guard is proved.
    while True:
        closure = _contract_fixpoint(facts, plain, contracts)
        ready = [cl for cl in guarded if closure.holds(cl.guard)]
        if not ready:
            return closure
        contracts = contracts + ready
        guarded = [cl for cl in guarded if cl not in ready]


def entails(theory: Iterable[HornClause], goal: Formula) -> bool:
    """Decide ``theory |- goal``.

    Goals are positive formulas, plus two derived forms: ``a -> g`` is
    decided by assuming ``a``, and ``p ->> q`` holds when ``q`` follows
    from ``p`` or when some promise ``r ->> s`` of the theory has ``p``
    entailing ``r`` and ``s`` entailing ``q``.
    """
    theory = frozenset(theory)
    match goal:
        case Impl(assumption, rest):
            return entails(theory | theory_of([assumption]), rest)
        case CImpl(premise, conclusion):
            if not is_positive(conclusion) or not _atomic_conjunction(premise):
                raise NonHornConstraint(f"unsupported contractual goal: {render(goal)}")
            assumed = theory | theory_of([premise])
            if entails(assumed, conclusion):
                return True
            return any(
                cl.contractual
                and derive(theory).holds(cl.guard)
                and entails(assumed, cl.premise)
                and entails(theory | theory_of([cl.conclusion_formula()]), conclusion)
                for cl in theory
            )
    if not is_positive(goal):
        raise NonHornConstraint(f"goal is not positive: {render(goal)}")
    return derive(theory).holds(goal)


def _atomic_conjunction(f: Formula) -> bool:
    return all(isinstance(c, (Atom, Top)) for c in conjuncts(f))


def fired_contracts(theory: Iterable[HornClause]) -> list[HornClause]:
    """The contractual clauses whose premises (and guards) end up derived,
    i.e. the promises that take effect."""
    theory = frozenset(theory)
    closure = derive(theory)
    return sorted(
        (cl for cl in theory if cl.contractual and closure.holds(cl.premise) and closure.holds(cl.guard)),
        key=str,
    )


@lru_cache(maxsize=262144)
def _store_entails(store: frozenset[Formula], goal: Formula) -> bool:
    return entails(theory_of(store), goal)


def store_entails(store: Iterable[Formula], goal: Formula) -> bool:
    """Entailment from a set of constraint formulas (normalized on the fly)."""
    return _store_entails(frozenset(store), goal)


def consistent(theory: Iterable[HornClause], extra: Iterable[Literal] = ()) -> bool:
    """True iff the theory plus the positive literals neither yields bot nor a negated atom."""
    extra = list(extra)
    facts = {HornClause(TOP, (lit.atom,)) for lit in extra if lit.positive}
    closure = derive(frozenset(theory) | facts)
    if closure.bottom:
        return False
    return not any(lit.atom in closure.atoms for lit in extra if not lit.positive)


def store_consistent(store: Iterable[Formula], extra: Iterable[Literal] = ()) -> bool:
    return consistent(theory_of(store), extra)


# ---------------------------------------------------------------------------
# Bounded oracle: backward sequent search, IPC + contract axiom schemata


PROVED = "proved"
NOT_PROVED = "not-proved-within-depth"

_TT = CImpl(TOP, TOP)


@lru_cache(maxsize=None)
def _key(f: Formula) -> str:
    return render(f)


class _Oracle:
    """Depth counts non-invertible steps only: right rules for conjunction and
    implication are free, everything else (disjunction choice, left rules and
    axiom uses) costs one unit."""

    # (context, goal) -> proved at depth v if v >= 0, failed at depth -v-1 otherwise
    memo: dict[tuple[frozenset, Formula], int] = {}

    def prove(self, ctx: frozenset, goal: Formula, depth: int) -> bool:
        if isinstance(goal, Top) or goal in ctx or BOT in ctx or goal == _TT:
            return True
        if depth <= 0:
            return False
        key = (ctx, goal)
        known = self.memo.get(key)
        if known is not None:
            if known >= 0 and known <= depth:
                return True
            if known < 0 and -known - 1 >= depth:
                return False
        ok = self._search(ctx, goal, depth)
        if ok:
            self.memo[key] = depth if known is None or known < 0 else min(known, depth)
        elif known is None or (known < 0 and -known - 1 < depth):
            self.memo[key] = -depth - 1
        return ok

    def _search(self, ctx: frozenset, goal: Formula, d: int) -> bool:
        d1 = d - 1
        # right rules
        match goal:
            case And(l, r):
                return self.prove(ctx, l, d) and self.prove(ctx, r, d)
            case Or(l, r):
                if self.prove(ctx, l, d1) or self.prove(ctx, r, d1):
                    return True
            case Impl(l, r):
                return self.prove(_extend(ctx, l), r, d)
            case CImpl(p2, q2):
                # (p'->p) -> (p->>q) -> (q->q') -> (p'->>q'), with top->>top among the contracts
                for h in [_TT, *sorted((h for h in ctx if isinstance(h, CImpl)), key=_key)]:
                    if self.prove(ctx, Impl(p2, h.premise), d1) and self.prove(ctx, Impl(h.conclusion, q2), d1):
                        return True
        # left rules
        for h in sorted(ctx, key=_key):
            match h:
                case Or(l, r):
                    if l not in ctx and r not in ctx:
                        if self.prove(_extend(ctx - {h}, l), goal, d1) and self.prove(_extend(ctx - {h}, r), goal, d1):
                            return True
                case Impl(l, r):
                    if r not in ctx and self.prove(ctx, l, d1):
                        if self.prove(_extend(ctx, r), goal, d1):
                            return True
        # (p ->> p) -> p
        if not (isinstance(goal, CImpl) and goal.premise == goal.conclusion):
            if any(isinstance(h, CImpl) for h in ctx) and self.prove(ctx, CImpl(goal, goal), d1):
                return True
        return False


def _extend(ctx: frozenset, f: Formula) -> frozenset:
    if isinstance(f, Top):
        return ctx
    if isinstance(f, And):
        return _extend(_extend(ctx, f.left), f.right)
    return ctx | {f}


def oracle_prove(theory: Iterable[HornClause | Formula], goal: Formula, depth: int) -> str:
    """Bounded proof search; ``PROVED`` is sound, ``NOT_PROVED`` is inconclusive."""
    if depth < 1:
        raise ValueError("depth must be positive")
    ctx: frozenset = frozenset()
    for item in theory:
        f = item.to_formula() if isinstance(item, HornClause) else item
        ctx = _extend(ctx, f)
    return PROVED if _Oracle().prove(ctx, goal, depth) else NOT_PROVED


FormulaLike = Union[Formula, str]


def as_formula(f: FormulaLike, resolve=name) -> Formula:
    return parse_formula(f, resolve) if isinstance(f, str) else f
