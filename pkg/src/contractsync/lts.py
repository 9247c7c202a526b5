"""Labelled transition semantics and the harnesses relating it to reduction.

Labels are computed in one bottom-up pass per term.  Every subterm has
exactly one constraint action (the set of its active constraints, with its
delimitations opened), so the Par* rules reduce to pairing one side's
tentative actions with the other side's constraint action.  Delimitations are
always opened into non-silent labels; closing at the root of the term then
yields, up to structural congruence, every silent step that closing at an
inner node would.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .fusion import local_minimal_fusions
from .logic import (
    Formula,
    Ident,
    Literal,
    apply_substitution,
    render,
    render_literal,
    store_consistent,
    store_entails,
)
from .reduction import Bounds, explore, successors
from .syntax import (
    Ask,
    Call,
    Check,
    Constraint,
    Delim,
    DefinitionSet,
    Fuse,
    Join,
    NormalForm,
    Par,
    Process,
    Sum,
    Tau,
    Tell,
    all_labels,
    delim,
    free_identifiers,
    fresh_label,
    par,
    prefixed,
    substitute,
    to_normal_form,
)

TAU, CONSTRAINTS, ASK, FUSE, JOIN, CHECK = "tau", "constraints", "ask", "fuse", "join", "check"


class BoundExceeded(Exception):
    pass


@dataclass(frozen=True)
class Action:
    kind: str
    opened: frozenset[Ident] = frozenset()
    constraints: frozenset[Formula] = frozenset()
    goal: Formula | None = None
    subject: Ident | None = None
    literals: tuple[Literal, ...] = ()

    def __str__(self):
        if self.kind == TAU:
            return "tau"
        head = ""
        if self.opened:
            head = "(" + ",".join(sorted(a.label for a in self.opened)) + ") "
        cs = "{" + ",".join(sorted(render(f) for f in self.constraints)) + "}"
        match self.kind:
            case "constraints":
                return head + cs
            case "ask":
                return f"{head}{cs} |- {render(self.goal)}"
            case "fuse":
                return f"{head}{cs} |-F_{self.subject.label} {render(self.goal)}"
            case "join":
                return f"{head}{cs} |-J_{self.subject.label} {render(self.goal)}"
            case "check":
                lits = ",".join(render_literal(lit) for lit in self.literals)
                return f"{head}{cs} + {{{lits}}} |/- bot"
        raise ValueError(self.kind)


@dataclass(frozen=True)
class LabelledStep:
    action: Action
    successor: Process

    def __str__(self):
        return f"--{self.action}--> {self.successor}"


@dataclass
class _Label:
    opened: tuple[Ident, ...]
    kind: str
    constraints: frozenset[Formula]
    goal: Formula | None
    subject: Ident | None
    literals: tuple[Literal, ...]
    successor: Process


@dataclass
class _Result:
    opened: tuple[Ident, ...]
    constraints: frozenset[Formula]
    constraint_successor: Process
    tentative: list[_Label] = field(default_factory=list)
    silent: list[Process] = field(default_factory=list)


class _Deriver:
    def __init__(self, p: Process, defs: DefinitionSet | None):
        self.defs = defs or DefinitionSet()
        self.used = all_labels(p)
        for d in self.defs.values():
            self.used |= all_labels(d.body) | {a.label for a in d.params}
        self.free = {a.label for a in free_identifiers(p)}
        self.opened: set[str] = set()

    def fresh(self, a: Ident) -> Ident:
        label = fresh_label(a.label, self.used)
        self.used.add(label)
        return Ident(a.kind, label)

    def open(self, a: Ident) -> Ident:
        # keep the binder's own label unless another opened binder or a free
        # identifier already uses it
        if a.label in self.free or a.label in self.opened:
            a = self.fresh(a)
        self.opened.add(a.label)
        return a

    def derive(self, p: Process) -> _Result:
        match p:
            case Constraint(u):
                return _Result((), frozenset([u]), p)
            case Sum(branches):
                res = _Result((), frozenset(), p)
                for pi, cont in branches:
                    match pi:
                        case Tau():
                            res.silent.append(cont)
                        case Tell(c):
                            res.silent.append(Par(Constraint(c), cont))
                        case Ask(c):
                            res.tentative.append(_Label((), ASK, frozenset(), c, None, (), cont))
                        case Check(lits):
                            res.tentative.append(_Label((), CHECK, frozenset(), None, None, lits, cont))
                        case Fuse(x, c):
                            res.tentative.append(_Label((), FUSE, frozenset(), c, x, (), cont))
                        case Join(x, c):
                            res.tentative.append(_Label((), JOIN, frozenset(), c, x, (), cont))
                return res
            case Call():
                body = self.defs.unfold(p)
                if body is None:
                    # constants without a definition idle like 0
                    return _Result((), frozenset(), p)
                return self.derive(body)
            case Par(left, right):
                lr, rr = self.derive(left), self.derive(right)
                res = _Result(
                    lr.opened + rr.opened,
                    lr.constraints | rr.constraints,
                    Par(lr.constraint_successor, rr.constraint_successor),
                )
                for t in lr.tentative:
                    res.tentative.append(self._extend(t, rr, lambda s: Par(s, rr.constraint_successor)))
                for t in rr.tentative:
                    res.tentative.append(self._extend(t, lr, lambda s: Par(lr.constraint_successor, s)))
                res.silent = [Par(s, right) for s in lr.silent] + [Par(left, s) for s in rr.silent]
                return res
            case Delim(a, body):
                a2 = self.open(a)
                inner = self.derive(body if a2 == a else substitute(body, {a: a2}))
                res = _Result((a2,) + inner.opened, inner.constraints, inner.constraint_successor)
                for t in inner.tentative:
                    t.opened = (a2,) + t.opened
                    res.tentative.append(t)
                res.silent = [Delim(a2, s) for s in inner.silent]
                return res
        raise TypeError(f"not a process: {p!r}")

    @staticmethod
    def _extend(t: _Label, other: _Result, wrap) -> _Label:
        return _Label(
            t.opened + other.opened,
            t.kind,
            t.constraints | other.constraints,
            t.goal,
            t.subject,
            t.literals,
            wrap(t.successor),
        )

    def close(self, t: _Label) -> list[Process]:
        """Silent successors obtained by discharging a tentative action."""
        opened = list(t.opened)
        match t.kind:
            case "ask":
                if store_entails(t.constraints, t.goal):
                    return [delim(opened, t.successor)]
            case "fuse":
                x = t.subject
                if x not in opened:
                    return []
                candidates = [a for a in opened if a.is_var]
                out = []
                for f in sorted(local_minimal_fusions(t.constraints, t.goal, x, candidates), key=_fusion_order):
                    n = self.fresh(Ident("name", "n"))
                    s = {v: n for v in f.variables}
                    rest = [a for a in opened if a not in f.variables]
                    out.append(delim([n] + rest, substitute(t.successor, s)))
                return out
            case "join":
                x = t.subject
                if x not in opened:
                    return []
                out = []
                for n in sorted(a for a in opened if a.is_name):
                    s = {x: n}
                    cs = [apply_substitution(f, s) for f in t.constraints]
                    if store_entails(cs, apply_substitution(t.goal, s)):
                        rest = [a for a in opened if a != x]
                        out.append(delim(rest, substitute(t.successor, s)))
                return out
        return []


def _fusion_order(f):
    return (len(f.variables), sorted(v.label for v in f.variables))


def _action(t: _Label) -> Action:
    return Action(t.kind, frozenset(t.opened), t.constraints, t.goal, t.subject, t.literals)


def labelled_steps(p: Process, defs: DefinitionSet | None = None) -> list[LabelledStep]:
    """Every step of ``p`` up to the choice between opening and keeping a
    delimitation that does not occur in the label."""
    d = _Deriver(p, defs)
    res = d.derive(p)
    steps = [LabelledStep(Action(CONSTRAINTS, frozenset(res.opened), res.constraints), res.constraint_successor)]
    for t in res.tentative:
        steps.append(LabelledStep(_action(t), t.successor))
    steps += [LabelledStep(Action(TAU), s) for s in res.silent]
    for t in res.tentative:
        steps += [LabelledStep(Action(TAU), s) for s in d.close(t)]
    return steps


def top_steps(p: Process, defs: DefinitionSet | None = None) -> list[Process]:
    """The top-level relation: silent steps plus checks consistent with
    every constraint collected from the whole term."""
    d = _Deriver(p, defs)
    res = d.derive(p)
    out = list(res.silent)
    for t in res.tentative:
        out += d.close(t)
        if t.kind == CHECK and store_consistent(t.constraints, t.literals):
            out.append(delim(list(t.opened), t.successor))
    return out


def top_successors(nf: NormalForm | Process, defs: DefinitionSet | None = None) -> list[tuple[str, NormalForm]]:
    p = nf.to_process() if isinstance(nf, NormalForm) else nf
    return [("tau", to_normal_form(s, defs)) for s in top_steps(p, defs)]


# ---------------------------------------------------------------------------
# Comparing steps up to renaming


_ACTION_MARK = {TAU: "#tau", CONSTRAINTS: "#constraints", ASK: "#ask", FUSE: "#fuse", JOIN: "#join", CHECK: "#check"}


def step_key(step: LabelledStep, defs: DefinitionSet | None = None) -> str:
    """Canonical text of (opened binders, action, successor) taken together,
    so that steps differing only in the names of opened binders coincide."""
    a = step.action
    mark = Call(_ACTION_MARK[a.kind], ())
    payload = par(mark, *(Constraint(f) for f in sorted(a.constraints, key=render)))
    match a.kind:
        case "ask":
            payload = prefixed(Ask(a.goal), payload)
        case "fuse":
            payload = prefixed(Fuse(a.subject, a.goal), payload)
        case "join":
            payload = prefixed(Join(a.subject, a.goal), payload)
        case "check":
            payload = prefixed(Check(a.literals), payload)
        case _:
            payload = prefixed(Tau(), payload)
    return to_normal_form(delim(sorted(a.opened), par(payload, step.successor)), defs).key


# ---------------------------------------------------------------------------
# Harnesses


@dataclass
class CorrespondenceReport:
    states_checked: int = 0
    truncated: bool = False
    counterexamples: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.counterexamples


def correspondence_check(
    p: Process,
    defs: DefinitionSet | None = None,
    bounds: Bounds = Bounds(200, 50),
    strict: bool = False,
    mutate_fuse: bool = False,
) -> CorrespondenceReport:
    """Compare reduction successors with top-level labelled successors on
    every explored state.  ``mutate_fuse`` breaks the reduction side on
    purpose (fusing only the subject) to show the harness can fail."""
    graph = explore(p, defs, bounds)
    if strict and graph.truncated:
        raise BoundExceeded(f"more than {bounds.max_states} states")
    report = CorrespondenceReport(truncated=graph.truncated)
    root = to_normal_form(p, defs)
    for key, nf in graph.states.items():
        if graph.depth[key] >= bounds.max_depth:
            continue
        if mutate_fuse:
            red = {_mutated_apply(nf, r, defs) for r, _ in successors(nf, defs)}
        else:
            red = {s.key for _, s in successors(nf, defs)}
        source = p if key == root.key else nf.to_process()
        lts = {to_normal_form(s, defs).key for s in top_steps(source, defs)}
        report.states_checked += 1
        if red != lts:
            report.counterexamples.append(
                {"state": key, "reduction_only": sorted(red - lts), "labelled_only": sorted(lts - red)}
            )
    return report


def _mutated_apply(nf: NormalForm, r, defs) -> str:
    from dataclasses import replace

    from .reduction import apply

    if r.rule == "Fuse":
        pi = nf.agents[r.agent].branches[r.branch][0]
        r = replace(r, fusion=replace(r.fusion, variables=frozenset([pi.subject])))
    return apply(nf, r, defs).key


@dataclass
class BisimReport:
    matched: bool
    pairs: int
    mismatch: dict | None = None


def bisim_probe(
    p: Process, q: Process, defs: DefinitionSet | None = None, depth: int = 5, max_pairs: int = 5000
) -> BisimReport:
    """Bounded check that every step of one term is matched by a step of the
    other with the same action and a structurally congruent successor."""
    seen: set[tuple[str, str]] = set()
    pairs = 0

    def steps_by_key(t: Process) -> dict[str, Process]:
        # Opened binders are free in the successor under labels that differ
        # between the two sides; matching keys already relate them, so the
        # probe continues from the successor with them delimited again.
        out: dict[str, Process] = {}
        for s in labelled_steps(t, defs):
            out.setdefault(step_key(s, defs), delim(sorted(s.action.opened), s.successor))
        return out

    def go(a: Process, b: Process, d: int) -> dict | None:
        nonlocal pairs
        ident = (repr(a), repr(b))
        if d == 0 or ident in seen:
            return None
        seen.add(ident)
        pairs += 1
        if pairs > max_pairs:
            raise BoundExceeded(f"more than {max_pairs} pairs")
        sa, sb = steps_by_key(a), steps_by_key(b)
        if sa.keys() != sb.keys():
            return {
                "left": str(a),
                "right": str(b),
                "left_only": sorted(sa.keys() - sb.keys()),
                "right_only": sorted(sb.keys() - sa.keys()),
            }
        for k in sorted(sa):
            bad = go(sa[k], sb[k], d - 1)
            if bad:
                return bad
        return None

    bad = go(p, q, depth)
    return BisimReport(bad is None, pairs, bad)


# ---------------------------------------------------------------------------
# Random guarded processes


_NAMES = ("a", "b")
_PREDS = (("p", 1), ("q", 1), ("s", 0))


def random_program(rng: random.Random, size: int = 12, max_binders: int = 3, max_defs: int = 2) -> tuple[DefinitionSet, Process]:
    """A random closed program with guarded recursion.

    ``size`` bounds the number of prefixes, constraints and calls in the main
    term; each definition body gets a small budget of its own.
    """
    from .logic import CImpl, Impl, atom, name, var

    defs = DefinitionSet()
    n_defs = rng.randint(0, max_defs)
    def_names = [f"D{i}" for i in range(n_defs)]
    arities = {d: rng.randint(0, 1) for d in def_names}

    def ident(scope_vars, scope_names):
        bound = list(scope_vars) + list(scope_names)
        if bound and rng.random() < 0.7:
            return rng.choice(bound)
        return name(rng.choice(_NAMES))

    def random_atom(sv, sn):
        pred, arity = rng.choice(_PREDS)
        return atom(pred, *(ident(sv, sn) for _ in range(arity)))

    def goal(sv, sn):
        g = random_atom(sv, sn)
        if rng.random() < 0.25:
            g = g & random_atom(sv, sn)
        return g

    def subject_goal(x, sv, sn):
        g = atom(rng.choice("pq"), x)
        if rng.random() < 0.3:
            g = g & random_atom(sv, sn)
        return g

    def told(sv, sn):
        r = rng.random()
        if r < 0.5:
            return random_atom(sv, sn)
        if r < 0.75:
            return CImpl(random_atom(sv, sn), random_atom(sv, sn))
        return Impl(random_atom(sv, sn), random_atom(sv, sn))

    state = {"binders": 0}

    def proc(budget, sv, sn, guarded) -> Process:
        if budget <= 0:
            return Sum(())
        r = rng.random()
        if r < 0.2 and state["binders"] < max_binders:
            state["binders"] += 1
            if rng.random() < 0.7:
                v = var(f"v{state['binders']}")
                return Delim(v, proc(budget, sv + [v], sn, guarded))
            n = name(f"m{state['binders']}")
            return Delim(n, proc(budget, sv, sn + [n], guarded))
        if r < 0.3 and budget >= 2:
            k = rng.randint(1, budget - 1)
            return Par(proc(k, sv, sn, guarded), proc(budget - k, sv, sn, guarded))
        if r < 0.4:
            return Constraint(told(sv, sn))
        if r < 0.47 and def_names and guarded:
            d = rng.choice(def_names)
            return Call(d, tuple(ident(sv, sn) for _ in range(arities[d])))
        branches = []
        for _ in range(1 if rng.random() < 0.75 else 2):
            branches.append((prefix(sv, sn), proc(budget - 1 - len(branches), sv, sn, True)))
        return Sum(tuple(branches))

    def prefix(sv, sn):
        r = rng.random()
        if r < 0.1:
            return Tau()
        if r < 0.4:
            return Tell(told(sv, sn))
        if r < 0.55:
            return Ask(goal(sv, sn))
        if r < 0.62:
            return Check((Literal(random_atom(sv, sn), rng.random() < 0.3),))
        if sv and r < 0.85:
            x = rng.choice(sv)
            return Fuse(x, subject_goal(x, sv, sn))
        if sv:
            x = rng.choice(sv)
            return Join(x, subject_goal(x, sv, sn))
        return Ask(goal(sv, sn))

    for d in def_names:
        params = [var(f"w{d[1:]}")] if arities[d] else []
        state["binders"] = 0
        body = proc(rng.randint(1, 4), params, [], False)
        if not isinstance(body, Sum) or not body.branches:
            body = prefixed(prefix(params, []), body)
        defs.define(d, params, body)
    defs.validate()
    # binders at the top put several variables in scope at once, which is
    # what fusions need
    top = [var(f"u{i}") for i in range(rng.randint(0, max_binders))]
    state["binders"] = len(top)
    main = delim(top, proc(size, top, [], False))
    return defs, main
