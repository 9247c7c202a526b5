"""Hypergraph rewriting and its compilation into contract-based handshakes.

Every hyperedge of a host graph becomes an agent ``A_tag(n1..nk)``.  The
agent offers, under a one-shot choice, one contract per source-rule edge it
could play; a fuse demanding its own role obligations succeeds only when all
edges of an occurrence of the rule source agree.  The fused session name then
drives a reconfiguration protocol that spawns the target edges.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from ..logic import CImpl, atom, conj, name, var
from ..syntax import (
    Call,
    DefinitionSet,
    Fuse,
    Join,
    NormalForm,
    Process,
    Sum,
    Tell,
    delim,
    fresh_label,
    par,
    prefixed,
    to_normal_form,
)
from .idioms import oplus


class GraphError(Exception):
    pass


class DisconnectedSource(GraphError):
    pass


class ArityMismatch(GraphError):
    pass


@dataclass(frozen=True, order=True)
class Edge:
    id: str
    tag: str
    verts: tuple[str, ...]


@dataclass(frozen=True)
class Hypergraph:
    vertices: frozenset[str]
    edges: frozenset[Edge]

    def __post_init__(self):
        arity: dict[str, int] = {}
        ids = set()
        for e in self.edges:
            if e.id in ids:
                raise GraphError(f"duplicate hyperedge id {e.id}")
            ids.add(e.id)
            if arity.setdefault(e.tag, len(e.verts)) != len(e.verts):
                raise ArityMismatch(f"tag {e.tag} used with two arities")
            for v in e.verts:
                if v not in self.vertices:
                    raise GraphError(f"hyperedge {e.id} mentions unknown vertex {v}")

    @staticmethod
    def of(vertices: Iterable[str], edges: Iterable[tuple[str, str, Iterable[str]]]) -> "Hypergraph":
        return Hypergraph(frozenset(vertices), frozenset(Edge(i, t, tuple(vs)) for i, t, vs in edges))

    def edge(self, eid: str) -> Edge:
        for e in self.edges:
            if e.id == eid:
                return e
        raise KeyError(eid)

    def arities(self) -> dict[str, int]:
        return {e.tag: len(e.verts) for e in self.edges}

    def is_connected(self) -> bool:
        if not self.vertices:
            return True
        adj: dict[str, set[str]] = {v: set() for v in self.vertices}
        for e in self.edges:
            for a in e.verts:
                adj[a] |= set(e.verts)
        start = min(self.vertices)
        seen = {start}
        stack = [start]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen == set(self.vertices)

    def without_isolated(self) -> "Hypergraph":
        used = {v for e in self.edges for v in e.verts}
        return Hypergraph(frozenset(used), self.edges)

    def __str__(self):
        vs = " ".join(sorted(self.vertices))
        es = " ".join(f"edge {e.id} {e.tag} ({' '.join(e.verts)});" for e in sorted(self.edges))
        return f"vertex {vs}; {es}".strip()


@dataclass(frozen=True)
class RewriteRule:
    name: str
    source: Hypergraph
    target: Hypergraph

    def __post_init__(self):
        if not self.source.vertices <= self.target.vertices:
            raise GraphError(f"rule {self.name} discards vertices")
        if not self.source.is_connected():
            raise DisconnectedSource(f"rule {self.name} has a disconnected source")
        for t, k in self.source.arities().items():
            if self.target.arities().get(t, k) != k:
                raise ArityMismatch(f"tag {t} used with two arities in rule {self.name}")


@dataclass(frozen=True)
class Embedding:
    vertex_map: tuple[tuple[str, str], ...]
    edge_map: tuple[tuple[str, str], ...]

    @property
    def vertices(self) -> dict[str, str]:
        return dict(self.vertex_map)

    @property
    def edges(self) -> dict[str, str]:
        return dict(self.edge_map)


# ---------------------------------------------------------------------------
# Text format


_GRAPH_TOKEN = re.compile(r"\s*(?:(?P<op>[{}();])|(?P<word>[A-Za-z0-9_']+))")


def _graph_tokens(text: str) -> list[str]:
    text = "\n".join(line.split("#", 1)[0] for line in text.splitlines())
    out = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _GRAPH_TOKEN.match(text, pos)
        if not m:
            raise GraphError(f"unexpected input {text[pos:pos + 10]!r}")
        out.append(m.group("op") or m.group("word"))
        pos = m.end()
    return out


def _parse_items(tokens: list[str], i: int, stop: str | None) -> tuple[Hypergraph, int]:
    vertices: set[str] = set()
    edges = []
    while i < len(tokens) and tokens[i] != stop:
        kw = tokens[i]
        if kw == "vertex":
            i += 1
            while tokens[i] != ";":
                vertices.add(tokens[i])
                i += 1
            i += 1
        elif kw == "edge":
            eid, tag = tokens[i + 1], tokens[i + 2]
            if tokens[i + 3] != "(":
                raise GraphError(f"edge {eid}: expected '('")
            j = i + 4
            vs = []
            while tokens[j] != ")":
                vs.append(tokens[j])
                j += 1
            if j + 1 >= len(tokens) or tokens[j + 1] != ";":
                raise GraphError(f"edge {eid}: expected ';'")
            edges.append((eid, tag, vs))
            vertices |= set(vs)
            i = j + 2
        else:
            raise GraphError(f"unexpected {kw!r}")
    return Hypergraph.of(vertices, edges), i


def parse_hypergraph(text: str) -> Hypergraph:
    """``vertex v1 v2 ...; edge id tag (v ...); ...``"""
    g, _ = _parse_items(_graph_tokens(text), 0, None)
    return g


def parse_rules(text: str) -> list[RewriteRule]:
    """``rule name { source { ... } target { ... } }``, repeated."""
    tokens = _graph_tokens(text)
    rules = []
    i = 0
    while i < len(tokens):
        if tokens[i] != "rule" or tokens[i + 2] != "{":
            raise GraphError(f"expected 'rule NAME {{', found {tokens[i:i + 3]}")
        rname = tokens[i + 1]
        i += 3
        parts = {}
        for _ in range(2):
            part = tokens[i]
            if part not in ("source", "target") or tokens[i + 1] != "{":
                raise GraphError(f"rule {rname}: expected source/target block")
            parts[part], i = _parse_items(tokens, i + 2, "}")
            i += 1
        if tokens[i] != "}":
            raise GraphError(f"rule {rname}: expected '}}'")
        i += 1
        rules.append(RewriteRule(rname, parts["source"], parts["target"]))
    return rules


# ---------------------------------------------------------------------------
# Rewriting


def embed(rule: RewriteRule, host: Hypergraph) -> list[Embedding]:
    """All embeddings of the rule source into the host: edges map injectively
    to edges with the same tag, and vertex maps agree with incidence."""
    src = sorted(rule.source.edges)
    by_tag: dict[str, list[Edge]] = {}
    for e in sorted(host.edges):
        by_tag.setdefault(e.tag, []).append(e)
    out = []

    def go(k: int, vmap: dict[str, str], used: set[str], emap: dict[str, str]):
        if k == len(src):
            if set(vmap) == set(rule.source.vertices):
                out.append(Embedding(tuple(sorted(vmap.items())), tuple(sorted(emap.items()))))
            return
        e = src[k]
        for h in by_tag.get(e.tag, []):
            if h.id in used:
                continue
            trial = dict(vmap)
            if all(trial.setdefault(v, w) == w for v, w in zip(e.verts, h.verts)):
                go(k + 1, trial, used | {h.id}, {**emap, e.id: h.id})

    go(0, {}, set(), {})
    return out


def rewrite(host: Hypergraph, rule: RewriteRule, emb: Embedding) -> Hypergraph:
    vmap = emb.vertices
    emap = emb.edges
    vertices = set(host.vertices)
    edge_ids = {e.id for e in host.edges}
    for v in sorted(rule.target.vertices - rule.source.vertices):
        vmap[v] = _fresh_id(f"{rule.name}_{v}", vertices)
        vertices.add(vmap[v])
    removed = {emap[e.id] for e in rule.source.edges}
    edges = {e for e in host.edges if e.id not in removed}
    for e in sorted(rule.target.edges):
        if e.id in emap:
            eid = emap[e.id]
        else:
            eid = _fresh_id(f"{rule.name}_{e.id}", edge_ids)
        edge_ids.add(eid)
        edges.add(Edge(eid, e.tag, tuple(vmap[v] for v in e.verts)))
    return Hypergraph(frozenset(vertices), frozenset(edges))


def _fresh_id(base: str, used: set[str]) -> str:
    for i in itertools.count(1):
        if f"{base}_{i}" not in used:
            return f"{base}_{i}"
    raise AssertionError


def isomorphic(g: Hypergraph, h: Hypergraph, ignore_isolated: bool = True) -> bool:
    """Equality up to renaming of vertices and hyperedge ids."""
    if ignore_isolated:
        g, h = g.without_isolated(), h.without_isolated()
    if len(g.vertices) != len(h.vertices) or len(g.edges) != len(h.edges):
        return False
    target = {(e.tag, e.verts) for e in h.edges}
    if len(target) != len(h.edges):
        target_counts = _count((e.tag, e.verts) for e in h.edges)
    else:
        target_counts = None
    gv, hv = sorted(g.vertices), sorted(h.vertices)
    for perm in itertools.permutations(hv):
        m = dict(zip(gv, perm))
        mapped = [(e.tag, tuple(m[v] for v in e.verts)) for e in g.edges]
        if target_counts is None:
            if set(mapped) == target and len(set(mapped)) == len(mapped):
                return True
        elif _count(mapped) == target_counts:
            return True
    return False


def _count(items) -> dict:
    out: dict = {}
    for it in items:
        out[it] = out.get(it, 0) + 1
    return out


# ---------------------------------------------------------------------------
# Compilation


def agent_const(tag: str) -> str:
    return f"A_{tag}"


def _role_pred(e: str, h: int) -> str:
    return f"p_{e}_{h}"


def _vert_pred(v: str, new: bool = False) -> str:
    return f"newvert_{_ident(v)}" if new else f"vert_{_ident(v)}"


@dataclass
class CompiledSystem:
    defs: DefinitionSet
    rules: list[RewriteRule]
    continuation_tag: dict[str, str] = field(default_factory=dict)

    def encode_host(self, host: Hypergraph) -> Process:
        """One delimited name per vertex and one agent per hyperedge."""
        names = {v: name(_ident(v)) for v in host.vertices}
        agents = [Call(agent_const(e.tag), tuple(names[v] for v in e.verts)) for e in sorted(host.edges)]
        return delim([names[v] for v in sorted(host.vertices)], par(*agents))

    def handshake_image(self, host: Hypergraph, rule: RewriteRule, emb: Embedding) -> Process:
        """The host with the embedded edges replaced by their reconfiguration
        continuations, all sharing one session name ``m``."""
        names = {v: name(_ident(v)) for v in host.vertices}
        session = name(fresh_label("m", {n.label for n in names.values()}))
        emap = emb.edges
        moved = set(emap.values())
        agents = [Call(agent_const(e.tag), tuple(names[v] for v in e.verts)) for e in sorted(host.edges) if e.id not in moved]
        for e in sorted(rule.source.edges):
            h = host.edge(emap[e.id])
            agents.append(Call(f"B_{e.id}", (session, *(names[v] for v in h.verts))))
        return delim([names[v] for v in sorted(host.vertices)] + [session], par(*agents))

    def readback(self, nf: NormalForm) -> Hypergraph | None:
        """The hypergraph represented by a quiescent state, or None while a
        reconfiguration is still in progress."""
        edges = []
        for k, a in enumerate(nf.agents):
            match a:
                case Call(c, args) if c.startswith("A_"):
                    edges.append((f"e{k}", c[2:], [x.label for x in args]))
                case Sum(branches) if branches and all(
                    isinstance(pi, Fuse) and isinstance(cont, Call) and cont.const in self.continuation_tag
                    for pi, cont in branches
                ):
                    cont = branches[0][1]
                    edges.append((f"e{k}", self.continuation_tag[cont.const], [x.label for x in cont.args[1:]]))
                case _:
                    return None
        vertices = {v for _, _, vs in edges for v in vs}
        return Hypergraph.of(vertices, edges)


def without_store(nf: NormalForm, defs: DefinitionSet | None = None) -> NormalForm:
    return to_normal_form(delim(nf.binders, par(*nf.agents)), defs)


def _ident(label: str) -> str:
    label = re.sub(r"[^A-Za-z0-9_']", "_", label)
    return label if label[0].isalpha() else "v" + label


def compile_rules(rules: list[RewriteRule]) -> CompiledSystem:
    """Definitions ``A_t`` for every tag occurring in a rule source and
    ``B_e`` for every source hyperedge."""
    ids: set[str] = set()
    arity: dict[str, int] = {}
    for r in rules:
        for e in r.source.edges:
            if e.id in ids:
                raise GraphError(f"hyperedge id {e.id} used by two rule sources")
            ids.add(e.id)
        for e in r.source.edges | r.target.edges:
            if arity.setdefault(e.tag, len(e.verts)) != len(e.verts):
                raise ArityMismatch(f"tag {e.tag} used with two arities")
    defs = DefinitionSet()
    system = CompiledSystem(defs, list(rules))
    roles: dict[str, list[tuple[RewriteRule, Edge]]] = {}
    for r in rules:
        for e in sorted(r.source.edges):
            roles.setdefault(e.tag, []).append((r, e))
    for tag, played in sorted(roles.items()):
        k = arity[tag]
        params = [var(f"n{h}") for h in range(1, k + 1)]
        x = var("x")
        contracts = [_contract(r, e, x, params) for r, e in played]
        branches = []
        for r, e in played:
            demand = conj(atom(_role_pred(e.id, h), x, params[h - 1]) for h in range(1, k + 1))
            cont_name = f"B_{e.id}"
            system.continuation_tag[cont_name] = tag
            branches.append((Fuse(x, demand), Call(cont_name, (x, *params))))
        defs.define(agent_const(tag), params, delim([x], par(oplus(contracts), Sum(tuple(branches)))))
    for r in rules:
        for e in sorted(r.source.edges):
            params = [var("s")] + [var(f"n{h}") for h in range(1, len(e.verts) + 1)]
            defs.define(f"B_{e.id}", params, _reconfigure(r, e, params[0], params[1:]))
    defs.validate()
    return system


def _contract(rule: RewriteRule, e: Edge, x, params):
    """Edge ``e`` promises its role obligations provided every other edge of
    the source that shares one of its vertices promises its own."""
    premise = []
    for h, v in enumerate(e.verts, start=1):
        for other in sorted(rule.source.edges):
            for hb, w in enumerate(other.verts, start=1):
                if w == v and (other.id, hb) != (e.id, h):
                    premise.append(atom(_role_pred(other.id, hb), x, params[h - 1]))
    conclusion = conj(atom(_role_pred(e.id, h), x, params[h - 1]) for h in range(1, len(e.verts) + 1))
    return CImpl(conj(premise), conclusion)


def _reconfigure(rule: RewriteRule, e: Edge, session, params) -> Process:
    """Publish the vertex names known to this participant under the session,
    collect the ones it lacks, then spawn its share of the target edges.

    The participant with the least source edge id also creates the new
    vertices; target edges are dealt round-robin over the source edges.
    """
    src_ids = sorted(x.id for x in rule.source.edges)
    leader = e.id == src_ids[0]
    known = {}
    for v, n in zip(e.verts, params):
        known.setdefault(v, n)
    fresh = {}
    if leader:
        for v in sorted(rule.target.vertices - rule.source.vertices):
            fresh[v] = name(f"c_{_ident(v)}")
            known[v] = fresh[v]
    new_vertices = rule.target.vertices - rule.source.vertices
    told = [atom(_vert_pred(v, v in new_vertices), session, n) for v, n in sorted(known.items())]
    mine = [f for k, f in enumerate(sorted(rule.target.edges)) if src_ids[k % len(src_ids)] == e.id]
    needed = sorted({v for f in mine for v in f.verts if v not in known})
    joined = {v: var(f"y_{_ident(v)}") for v in needed}
    known.update(joined)
    spawn = par(*(Call(agent_const(f.tag), tuple(known[v] for v in f.verts)) for f in mine))
    body: Process = spawn
    for v in reversed(needed):
        y = joined[v]
        body = delim([y], prefixed(Join(y, atom(_vert_pred(v, v in new_vertices), session, y)), body))
    body = prefixed(Tell(conj(told)), body)
    return delim(list(fresh.values()), body)


# ---------------------------------------------------------------------------
# Named examples


def ring(k: int, tags: Iterable[str] | None = None) -> Hypergraph:
    tags = list(tags) if tags is not None else [f"A{i}" for i in range(1, k + 1)]
    vs = [f"n{i}" for i in range(1, k + 1)]
    edges = [(f"h{i}", tags[(i - 1) % len(tags)], (vs[i - 1], vs[i % k])) for i in range(1, k + 1)]
    return Hypergraph.of(vs, edges)


def ring_to_star() -> RewriteRule:
    """A 4-ring of edges A1..A4 becomes four unary edges B1..B4 on a new
    centre vertex; the ring vertices survive, isolated."""
    vs = ["v1", "v2", "v3", "v4"]
    source = Hypergraph.of(vs, [(f"e{i}", f"A{i}", (vs[i - 1], vs[i % 4])) for i in range(1, 5)])
    target = Hypergraph.of(vs + ["c"], [(f"f{i}", f"B{i}", ("c",)) for i in range(1, 5)])
    return RewriteRule("star", source, target)


def star_of(host: Hypergraph) -> Hypergraph:
    """The expected result of rewriting a 4-ring with :func:`ring_to_star`."""
    return Hypergraph.of(set(host.vertices) | {"c"}, [(f"f{i}", f"B{i}", ("c",)) for i in range(1, 5)])


def iter_edges(g: Hypergraph) -> Iterator[Edge]:
    return iter(sorted(g.edges))


__all__ = [
    "Edge",
    "Hypergraph",
    "RewriteRule",
    "Embedding",
    "GraphError",
    "DisconnectedSource",
    "ArityMismatch",
    "parse_hypergraph",
    "parse_rules",
    "embed",
    "rewrite",
    "isomorphic",
    "compile_rules",
    "CompiledSystem",
    "ring",
    "ring_to_star",
    "star_of",
    "without_store",
]
