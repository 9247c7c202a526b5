"""Reduction semantics over normal forms, and bounded state-space search."""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .fusion import Fusion, join_instantiations, local_minimal_fusions, minimal_fusions
from .logic import Formula, Ident, apply_substitution, store_consistent, store_entails
from .syntax import (
    Ask,
    Call,
    Check,
    Constraint,
    DefinitionSet,
    Fuse,
    Join,
    NormalForm,
    Process,
    Sum,
    Tau,
    Tell,
    all_labels,
    delim,
    fresh_label,
    par,
    render_prefix,
    substitute,
    to_normal_form,
)

RULES = ("Tau", "Tell", "Ask", "Check", "Fuse", "Join")


class StaleRedex(Exception):
    pass


@dataclass(frozen=True)
class Redex:
    rule: str
    agent: int
    branch: int
    fusion: Fusion | None = None
    join_target: Ident | None = None
    witness: tuple[Formula, ...] | None = None

    def __post_init__(self):
        if (self.fusion is not None) != (self.rule == "Fuse"):
            raise ValueError("a fusion goes with exactly the Fuse rule")
        if (self.join_target is not None) != (self.rule == "Join"):
            raise ValueError("a join target goes with exactly the Join rule")
        if (self.witness is not None) != (self.rule in ("Ask", "Fuse", "Join")):
            raise ValueError("Ask, Fuse and Join redexes carry a witness store")

    def summary(self) -> str:
        out = f"{self.rule}@{self.agent}.{self.branch}"
        if self.fusion is not None:
            out += " " + str(self.fusion)
        if self.join_target is not None:
            out += " ->" + self.join_target.label
        return out

    def to_json(self) -> dict:
        d = {"rule": self.rule, "agent": self.agent, "branch": self.branch}
        if self.fusion is not None:
            d["fusion"] = sorted(v.label for v in self.fusion.variables)
        if self.join_target is not None:
            d["join"] = self.join_target.label
        return d


def _branches(nf: NormalForm):
    for i, agent in enumerate(nf.agents):
        if isinstance(agent, Sum):
            for j, (pi, cont) in enumerate(agent.branches):
                yield i, j, pi, cont


def enabled_redexes(nf: NormalForm, local: bool = True) -> list[Redex]:
    """Every redex of the normal form, one per distinct successor choice.

    With ``local=False`` fusions must be minimal for the whole store rather
    than for some part of it (used only to contrast the two readings).
    """
    store = nf.store
    variables = nf.variables
    names = nf.names
    out: list[Redex] = []
    for i, j, pi, _ in _branches(nf):
        match pi:
            case Tau():
                out.append(Redex("Tau", i, j))
            case Tell():
                out.append(Redex("Tell", i, j))
            case Ask(goal):
                if store_entails(store, goal):
                    out.append(Redex("Ask", i, j, witness=store))
            case Check(lits):
                if store_consistent(store, lits):
                    out.append(Redex("Check", i, j))
            case Fuse(x, goal):
                if x not in variables:
                    continue
                if local:
                    fusions = local_minimal_fusions(store, goal, x, variables)
                else:
                    fusions = minimal_fusions(store, goal, x, variables)
                for f in sorted(fusions, key=_fusion_key):
                    out.append(Redex("Fuse", i, j, fusion=f, witness=f.support))
            case Join(x, goal):
                if x not in variables:
                    continue
                for n in sorted(join_instantiations(store, goal, x, names)):
                    out.append(Redex("Join", i, j, join_target=n, witness=store))
    return out


def _fusion_key(f: Fusion):
    return (len(f.variables), sorted(v.label for v in f.variables))


def _lookup(nf: NormalForm, r: Redex):
    if not (0 <= r.agent < len(nf.agents)):
        raise StaleRedex(f"no agent {r.agent}")
    agent = nf.agents[r.agent]
    if not isinstance(agent, Sum) or not (0 <= r.branch < len(agent.branches)):
        raise StaleRedex(f"no branch {r.agent}.{r.branch}")
    pi, cont = agent.branches[r.branch]
    if type(pi).__name__ != r.rule:
        raise StaleRedex(f"branch {r.agent}.{r.branch} is {type(pi).__name__}, not {r.rule}")
    return pi, cont


def successor_process(nf: NormalForm, r: Redex) -> Process:
    """The successor as a (non-normalized) process term."""
    pi, cont = _lookup(nf, r)
    rest = [a for k, a in enumerate(nf.agents) if k != r.agent]
    store = list(nf.store)
    binders = list(nf.binders)
    match pi:
        case Tell(f):
            store.append(f)
        case Ask(goal):
            if not store_entails(nf.store, goal):
                raise StaleRedex("ask goal not entailed")
        case Check(lits):
            if not store_consistent(nf.store, lits):
                raise StaleRedex("check inconsistent")
        case Fuse(x, goal):
            fused = r.fusion.variables
            if x not in fused or not fused <= set(nf.variables):
                raise StaleRedex("fusion does not match the binders")
            n = Ident("name", fresh_label("n", all_labels(nf.to_process())))
            s = {v: n for v in fused}
            binders = [b for b in binders if b not in fused] + [n]
            return _rebuild(binders, store, rest, cont, s)
        case Join(x, goal):
            n = r.join_target
            if x not in nf.variables or n not in nf.names:
                raise StaleRedex("join does not match the binders")
            s = {x: n}
            if not store_entails([apply_substitution(f, s) for f in nf.store], apply_substitution(goal, s)):
                raise StaleRedex("join goal not entailed")
            binders = [b for b in binders if b != x]
            return _rebuild(binders, store, rest, cont, s)
    return _rebuild(binders, store, rest, cont, {})


def _rebuild(binders, store, agents, cont, s) -> Process:
    body = par(*(Constraint(apply_substitution(f, s)) for f in store), *(substitute(a, s) for a in agents), substitute(cont, s))
    return delim(binders, body)


def apply(nf: NormalForm, r: Redex, defs: DefinitionSet | None = None) -> NormalForm:
    return to_normal_form(successor_process(nf, r), defs)


def successors(nf: NormalForm, defs: DefinitionSet | None = None, local: bool = True) -> list[tuple[Redex, NormalForm]]:
    return [(r, apply(nf, r, defs)) for r in enabled_redexes(nf, local)]


# ---------------------------------------------------------------------------
# State graphs


@dataclass(frozen=True)
class Bounds:
    max_states: int = 1000
    max_depth: int = 50

    def __post_init__(self):
        if self.max_states < 1 or self.max_depth < 1:
            raise ValueError("bounds must be positive")


@dataclass
class StateGraph:
    root: str
    states: dict[str, NormalForm] = field(default_factory=dict)
    edges: list[tuple[str, Redex, str]] = field(default_factory=list)
    depth: dict[str, int] = field(default_factory=dict)
    truncated: bool = False

    def successors(self, key: str) -> list[tuple[Redex, str]]:
        return [(r, t) for s, r, t in self.edges if s == key]

    def to_dot(self) -> str:
        ids = {k: i for i, k in enumerate(self.states)}
        lines = ["digraph states {", "  node [shape=box, fontname=monospace];"]
        for k, i in ids.items():
            label = k.replace("\\", "\\\\").replace('"', '\\"')
            style = ", penwidth=2" if k == self.root else ""
            lines.append(f'  s{i} [label="{label}"{style}];')
        for s, r, t in self.edges:
            lines.append(f'  s{ids[s]} -> s{ids[t]} [label="{_label_text(r)}"];')
        lines.append("}")
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "root": self.root,
            "truncated": self.truncated,
            "states": list(self.states),
            "edges": [{"from": s, "to": t, **_label_json(r)} for s, r, t in self.edges],
        }


def _label_text(label) -> str:
    return label.summary() if isinstance(label, Redex) else str(label)


def _label_json(label) -> dict:
    return label.to_json() if isinstance(label, Redex) else {"action": str(label)}


StepFn = Callable[[NormalForm], list[tuple[object, NormalForm]]]


def explore(
    p: Process | NormalForm,
    defs: DefinitionSet | None = None,
    bounds: Bounds = Bounds(),
    step: StepFn | None = None,
    stop: Callable[[NormalForm], bool] | None = None,
) -> StateGraph:
    """Breadth-first exploration over canonical states.

    ``step`` defaults to the reduction successors; ``stop`` ends the search as
    soon as a state satisfies it.  States at ``max_depth`` are not expanded.
    """
    step = step or (lambda nf: successors(nf, defs))
    root = p if isinstance(p, NormalForm) else to_normal_form(p, defs)
    g = StateGraph(root.key, {root.key: root}, depth={root.key: 0})
    queue = deque([root])
    if stop is not None and stop(root):
        return g
    while queue:
        nf = queue.popleft()
        d = g.depth[nf.key]
        if d >= bounds.max_depth:
            if step(nf):
                g.truncated = True
            continue
        for label, succ in step(nf):
            g.edges.append((nf.key, label, succ.key))
            if succ.key in g.states:
                continue
            if len(g.states) >= bounds.max_states:
                g.truncated = True
                continue
            g.states[succ.key] = succ
            g.depth[succ.key] = d + 1
            if stop is not None and stop(succ):
                return g
            queue.append(succ)
    return g


def path_to(g: StateGraph, target: str) -> list[tuple[Redex, str]]:
    parent: dict[str, tuple[str, Redex]] = {}
    for s, r, t in g.edges:
        if t not in parent and t != g.root and g.depth.get(t) == g.depth.get(s, -2) + 1:
            parent[t] = (s, r)
    trace = []
    while target != g.root:
        s, r = parent[target]
        trace.append((r, target))
        target = s
    return trace[::-1]


YES, NO, UNKNOWN = "yes", "no", "unknown"


@dataclass(frozen=True)
class Reach:
    verdict: str
    trace: tuple[tuple[Redex, str], ...] = ()
    states: int = 0


def reaches(
    p: Process | NormalForm,
    defs: DefinitionSet | None,
    predicate: Callable[[NormalForm], bool],
    bounds: Bounds = Bounds(),
    step: StepFn | None = None,
) -> Reach:
    g = explore(p, defs, bounds, step, stop=predicate)
    for key, nf in g.states.items():
        if predicate(nf):
            return Reach(YES, tuple(path_to(g, key)), len(g.states))
    return Reach(UNKNOWN if g.truncated else NO, (), len(g.states))


def has_agent(const: str) -> Callable[[NormalForm], bool]:
    return lambda nf: any(isinstance(a, Call) and a.const == const for a in nf.agents)


def has_constraint(f: Formula) -> Callable[[NormalForm], bool]:
    """The store entails ``f`` (binder labels in ``f`` are matched literally)."""
    return lambda nf: store_entails(nf.store, f)


def run(
    p: Process | NormalForm,
    defs: DefinitionSet | None = None,
    seed: int = 0,
    max_steps: int = 100,
    step: StepFn | None = None,
) -> list[tuple[object, NormalForm]]:
    """One maximal run choosing uniformly among enabled steps."""
    rng = random.Random(seed)
    step = step or (lambda nf: successors(nf, defs))
    nf = p if isinstance(p, NormalForm) else to_normal_form(p, defs)
    out = []
    for _ in range(max_steps):
        options = step(nf)
        if not options:
            break
        label, nf = options[rng.randrange(len(options))]
        out.append((label, nf))
    return out


def trace_json(root: NormalForm, trace: Iterable[tuple[object, NormalForm | str]]) -> str:
    steps = []
    for label, state in trace:
        entry = _label_json(label)
        entry["state"] = state.key if isinstance(state, NormalForm) else state
        steps.append(entry)
    return json.dumps({"initial": root.key, "steps": steps}, indent=2, sort_keys=True)


def describe(nf: NormalForm, r: Redex) -> str:
    pi, _ = _lookup(nf, r)
    return f"{r.summary()}: {render_prefix(pi)}"


__all__ = [
    "RULES",
    "Redex",
    "StaleRedex",
    "Bounds",
    "StateGraph",
    "Reach",
    "YES",
    "NO",
    "UNKNOWN",
    "enabled_redexes",
    "apply",
    "successors",
    "successor_process",
    "explore",
    "reaches",
    "run",
    "path_to",
    "has_agent",
    "has_constraint",
    "trace_json",
    "describe",
]
