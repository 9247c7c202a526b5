"""Contract-based synchronization: a Horn entailment engine for contract
logic, reduction and labelled semantics for a calculus with fuse/join, and
encodings of common concurrency idioms."""

from .logic import (
    Formula,
    HornClause,
    Ident,
    consistent,
    entails,
    name,
    normalize_constraint,
    oracle_prove,
    parse_formula,
    parse_theory,
    store_consistent,
    store_entails,
    var,
)
from .fusion import Fusion, join_instantiations, local_minimal, local_minimal_fusions, minimal_fusions
from .syntax import (
    DefinitionSet,
    NormalForm,
    Process,
    Program,
    free_identifiers,
    parse_process,
    parse_program,
    render_process,
    render_program,
    struct_equiv,
    substitute,
    to_normal_form,
)
from .reduction import Bounds, Redex, apply, enabled_redexes, explore, reaches, run
from .lts import bisim_probe, correspondence_check, labelled_steps, top_steps

__version__ = "0.1.0"

__all__ = [
    "Formula",
    "HornClause",
    "Ident",
    "consistent",
    "entails",
    "name",
    "normalize_constraint",
    "oracle_prove",
    "parse_formula",
    "parse_theory",
    "store_consistent",
    "store_entails",
    "var",
    "Fusion",
    "join_instantiations",
    "local_minimal",
    "local_minimal_fusions",
    "minimal_fusions",
    "DefinitionSet",
    "NormalForm",
    "Process",
    "Program",
    "free_identifiers",
    "parse_process",
    "parse_program",
    "render_process",
    "render_program",
    "struct_equiv",
    "substitute",
    "to_normal_form",
    "Bounds",
    "Redex",
    "apply",
    "enabled_redexes",
    "explore",
    "reaches",
    "run",
    "bisim_probe",
    "correspondence_check",
    "labelled_steps",
    "top_steps",
]
