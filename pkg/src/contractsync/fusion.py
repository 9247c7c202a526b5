"""Minimal and local-minimal fusions.

A fusion instantiates a set of variables to one fresh name.  Entailment is
preserved by instantiation, so the variable sets whose fusion makes a store
entail a goal form an up-set; the searches below walk that up-set from its
minimal elements instead of enumerating subsets blindly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .logic import (
    Formula,
    Ident,
    apply_substitution,
    atoms_of,
    identifiers,
    normalize_constraint,
    store_entails,
)

PLACEHOLDER = Ident("name", "#fused")

# Cap on the number of sub-stores visited when looking for local-minimal
# fusions.  Stores in practice reach it only when many unrelated contracts
# share predicates; the fusions found up to the cap are still sound.
SUBSTORE_BUDGET = 128


@dataclass(frozen=True)
class Fusion:
    """The variables instantiated together, and the sub-store that makes the
    instantiation minimal."""

    variables: frozenset[Ident]
    support: tuple[Formula, ...] = ()

    def __str__(self):
        return "{" + ",".join(sorted(v.label for v in self.variables)) + "}"


def fuse_entails(store: Iterable[Formula], goal: Formula, fused: Iterable[Ident]) -> bool:
    s = {v: PLACEHOLDER for v in fused}
    return store_entails((apply_substitution(f, s) for f in store), apply_substitution(goal, s))


def _preds(f: Formula) -> set[str]:
    return {a.pred for a in atoms_of(f)}


def relevant_store(store: Sequence[Formula], goal: Formula) -> list[Formula]:
    """Constraints that can contribute to deriving ``goal`` (or falsity)."""
    clauses = [(f, normalize_constraint(f)) for f in store]
    needed = _preds(goal)
    chosen: set[int] = set()
    changed = True
    while changed:
        changed = False
        for i, (f, cls) in enumerate(clauses):
            if i in chosen:
                continue
            for c in cls:
                heads = None if c.conclusion is None else {a.pred for a in c.conclusion}
                if heads is None or heads & needed:
                    chosen.add(i)
                    changed = True
                    for d in cls:
                        needed |= _preds(d.premise) | _preds(d.guard)
                    break
    return [f for i, (f, _) in enumerate(clauses) if i in chosen]


def _transversals(sets: list[frozenset]) -> list[frozenset]:
    """Minimal hitting sets (Berge's incremental construction)."""
    out = [frozenset()]
    for a in sets:
        grown = set()
        for t in out:
            if t & a:
                grown.add(t)
            else:
                for v in a:
                    grown.add(t | {v})
        out = [t for t in grown if not any(u < t for u in grown)]
    return sorted(out, key=lambda t: (len(t), sorted(v.label for v in t)))


class _Search:
    def __init__(self, store: Sequence[Formula], goal: Formula, x: Ident):
        self.store = tuple(store)
        self.goal = goal
        self.x = x
        self.memo: dict[frozenset, bool] = {}

    def ent(self, z: frozenset) -> bool:
        r = self.memo.get(z)
        if r is None:
            r = self.memo[z] = fuse_entails(self.store, self.goal, z)
        return r

    def shrink(self, z: frozenset) -> frozenset:
        for v in sorted(z - {self.x}):
            if self.ent(z - {v}):
                z = z - {v}
        return z

    def minimal_sets(self, universe: frozenset) -> list[frozenset]:
        """Minimal variable sets containing x whose fusion entails the goal,
        and no proper subset of which (with or without x) does."""
        if self.x not in universe or not self.ent(universe):
            return []
        found: list[frozenset] = []
        while True:
            blockers = [m - {self.x} for m in found]
            if any(not b for b in blockers):
                break
            for h in _transversals(blockers):
                seed = universe - h
                if self.ent(seed):
                    found.append(self.shrink(seed))
                    break
            else:
                break
        return [m for m in found if not self.ent(m - {self.x})]


def _universe(store: Sequence[Formula], goal: Formula, x: Ident, candidates: Iterable[Ident]) -> frozenset:
    occurring = set(identifiers(goal))
    for f in store:
        occurring |= identifiers(f)
    return frozenset(v for v in candidates if v in occurring) | {x}


def minimal_fusions(
    store: Iterable[Formula], goal: Formula, x: Ident, candidates: Iterable[Ident]
) -> set[Fusion]:
    """Fusions of x and other candidates that are minimal for the whole store."""
    store = relevant_store(list(store), goal)
    search = _Search(store, goal, x)
    universe = _universe(store, goal, x, candidates)
    return {Fusion(m, tuple(store)) for m in search.minimal_sets(universe)}


def is_minimal(store: Iterable[Formula], goal: Formula, variables: Iterable[Ident]) -> bool:
    """Direct check: the fusion entails and no maximal proper subset does."""
    z = frozenset(variables)
    store = list(store)
    if not fuse_entails(store, goal, z):
        return False
    return not any(fuse_entails(store, goal, z - {v}) for v in z)


def _minimal_support(store: Sequence[Formula], goal: Formula, z: frozenset) -> tuple[Formula, ...]:
    kept = list(store)
    for f in list(store):
        trial = [g for g in kept if g is not f]
        if fuse_entails(trial, goal, z):
            kept = trial
    return tuple(kept)


def local_minimal_fusions(
    store: Iterable[Formula], goal: Formula, x: Ident, candidates: Iterable[Ident]
) -> set[Fusion]:
    """Fusions that are minimal for some sub-store of ``store``.

    Each result carries a minimal support witnessing its local minimality.
    """
    store = relevant_store(list(store), goal)
    universe = _universe(store, goal, x, candidates)
    results: dict[frozenset, tuple[Formula, ...]] = {}
    seen: set[frozenset[int]] = set()
    frontier = [frozenset(range(len(store)))]
    visited = 0
    while frontier and visited < SUBSTORE_BUDGET:
        next_frontier = []
        for idx in frontier:
            if visited >= SUBSTORE_BUDGET:
                break
            visited += 1
            sub = [store[i] for i in sorted(idx)]
            search = _Search(sub, goal, x)
            if not search.ent(universe):
                continue
            for m in search.minimal_sets(universe):
                if m not in results:
                    results[m] = _minimal_support(sub, goal, m)
            for i in sorted(idx):
                child = idx - {i}
                if child not in seen:
                    seen.add(child)
                    next_frontier.append(child)
        frontier = next_frontier
    return {Fusion(m, support) for m, support in results.items()}


def local_minimal(store: Iterable[Formula], goal: Formula, variables: Iterable[Ident]) -> bool:
    """True iff some sub-store makes the fusion of ``variables`` minimal.

    It suffices to try the inclusion-minimal supports of the fusion: shrinking
    a witness sub-store keeps the entailment failing for every smaller fusion.
    """
    z = frozenset(variables)
    store = list(store)
    if not fuse_entails(store, goal, z):
        return False
    for support in _minimal_supports(store, goal, z):
        if not any(fuse_entails(support, goal, z - {v}) for v in z):
            return True
    return False


def _minimal_supports(store: list[Formula], goal: Formula, z: frozenset) -> list[list[Formula]]:
    """All inclusion-minimal sub-stores entailing the fused goal."""
    out: list[frozenset[int]] = []
    seen: set[frozenset[int]] = set()

    def go(idx: frozenset[int]):
        if idx in seen:
            return
        seen.add(idx)
        minimal = True
        for i in sorted(idx):
            child = idx - {i}
            if fuse_entails([store[j] for j in sorted(child)], goal, z):
                minimal = False
                go(child)
        if minimal and not any(o <= idx for o in out):
            out.append(idx)

    go(frozenset(range(len(store))))
    return [[store[j] for j in sorted(idx)] for idx in out if not any(o < idx for o in out)]


def join_instantiations(
    store: Iterable[Formula], goal: Formula, x: Ident, names: Iterable[Ident]
) -> set[Ident]:
    """Delimited names n with ``store{n/x}`` entailing ``goal{n/x}``."""
    store = list(store)
    out = set()
    for n in names:
        s = {x: n}
        if store_entails((apply_substitution(f, s) for f in store), apply_substitution(goal, s)):
            out.add(n)
    return out
