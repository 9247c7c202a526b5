"""Concurrency idioms as processes: one-shot choice of constraints,
semaphores, memory cells and a Linda tuple space."""

from __future__ import annotations

from typing import Sequence

from ..logic import Formula, Ident, Impl, atom, conj, identifiers, name, var
from ..syntax import NIL, Constraint, Delim, Fuse, Join, Process, Tell, all_labels, delim, fresh_label, par, prefixed


def _fresh(kind, base: str, avoid: set[str]) -> Ident:
    label = fresh_label(base, avoid)
    avoid.add(label)
    return kind(label)


def oplus(formulas: Sequence[Formula], pred: str = "r_oplus") -> Process:
    """Expose ``formulas`` so that one fusion can consume any subset of them,
    after which the rest can no longer be obtained by fusion.

    Each formula is guarded by ``pred(o, z_i)``; only ``pred(o, z)`` is
    available, so deriving a formula forces ``z_i`` to be fused with ``z``.
    """
    formulas = list(formulas)
    if not formulas:
        raise ValueError("oplus needs at least one formula")
    avoid = {a.label for f in formulas for a in identifiers(f)}
    o = _fresh(name, "o", avoid)
    z = _fresh(var, "z", avoid)
    zs = [_fresh(var, "z", avoid) for _ in formulas]
    body = par(
        Constraint(atom(pred, o, z)),
        *(Constraint(Impl(atom(pred, o, zi), f)) for zi, f in zip(zs, formulas)),
    )
    return delim([o, z, *zs], body)


# semaphores


def sem_P(n: Ident, cont: Process = NIL, pred: str = "p") -> Process:
    x = var(fresh_label("x", {n.label, *all_labels(cont)}))
    return Delim(x, prefixed(Fuse(x, atom(pred, n, x)), cont))


def sem_V(n: Ident, cont: Process = NIL, pred: str = "p") -> Process:
    x = var(fresh_label("x", {n.label, *all_labels(cont)}))
    return Delim(x, prefixed(Tell(atom(pred, n, x)), cont))


def semaphore(n: Ident, tokens: int = 1, pred: str = "p") -> Process:
    """A semaphore initialised with ``tokens`` V operations."""
    return par(*(sem_V(n, NIL, pred) for _ in range(tokens)))


# memory cells


def cell_new(n: Ident, v: Ident, cont: Process = NIL) -> Process:
    x = var(fresh_label("x", {n.label, v.label, *all_labels(cont)}))
    return Delim(x, prefixed(Tell(atom("c", n, x) & atom("d", x, v)), cont))


def cell_get(n: Ident, y: Ident, cont: Process = NIL) -> Process:
    """Read the cell into the variable ``y`` (bound by the caller); reading
    consumes the cell, so it is re-created with the value read."""
    if not y.is_var:
        raise ValueError("the target of a cell read must be a variable")
    w = var(fresh_label("w", {n.label, y.label, *all_labels(cont)}))
    after = prefixed(Join(y, atom("d", w, y)), cell_new(n, y, cont))
    return Delim(w, prefixed(Fuse(w, atom("c", n, w)), after))


def cell_set(n: Ident, v: Ident, cont: Process = NIL) -> Process:
    w = var(fresh_label("w", {n.label, v.label, *all_labels(cont)}))
    return Delim(w, prefixed(Fuse(w, atom("c", n, w)), cell_new(n, v, cont)))


# Linda


def linda_out(w: Ident, y: Ident, cont: Process = NIL) -> Process:
    x = var(fresh_label("x", {w.label, y.label, *all_labels(cont)}))
    told = conj([atom("p", x), atom("p1", x, w), atom("p2", x, y)])
    return Delim(x, prefixed(Tell(told), cont))


def linda_in(w: Ident, y: Ident, cont: Process = NIL) -> Process:
    """Retrieve a pair.  A variable argument is a formal (``?w``) bound by
    the retrieval; a name argument must match exactly."""
    x = var(fresh_label("x", {w.label, y.label, *all_labels(cont)}))
    first, second = atom("p1", x, w), atom("p2", x, y)
    match (w.is_var, y.is_var):
        case (False, False):
            body = prefixed(Fuse(x, first & second), cont)
        case (True, False):
            body = prefixed(Fuse(x, second), prefixed(Join(w, first), cont))
        case (False, True):
            body = prefixed(Fuse(x, first), prefixed(Join(y, second), cont))
        case _:
            body = prefixed(Fuse(x, atom("p", x)), prefixed(Join(w, first), prefixed(Join(y, second), cont)))
    return Delim(x, body)
