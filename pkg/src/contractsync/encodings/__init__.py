"""Processes built from higher-level idioms: one-shot choice, semaphores,
memory cells, Linda, the pi-calculus and hypergraph rewriting."""

from .idioms import cell_get, cell_new, cell_set, linda_in, linda_out, oplus, sem_P, sem_V, semaphore
from .pi import encode_pi, encode_pi_program, parse_pi, pi_reductions
from .graph import Hypergraph, RewriteRule, compile_rules, embed, parse_hypergraph, parse_rules, rewrite

__all__ = [
    "cell_get",
    "cell_new",
    "cell_set",
    "linda_in",
    "linda_out",
    "oplus",
    "sem_P",
    "sem_V",
    "semaphore",
    "encode_pi",
    "encode_pi_program",
    "parse_pi",
    "pi_reductions",
    "Hypergraph",
    "RewriteRule",
    "compile_rules",
    "embed",
    "parse_hypergraph",
    "parse_rules",
    "rewrite",
]
