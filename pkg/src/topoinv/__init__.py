"""Universally quantified invariants for parameterized programs over topologies."""

from .backend import SolverConfig, SolverResult, emit_smtlib, parse_model, run_solver, solve
from .chc import ChcSystem, Options, encode_family, encode_single, symmetry_reduce
from .explicit import check_invariant_explicit, explicit_reach
from .families import FAMILY_NAMES, FamilyDescriptor, family
from .invariant import (
    AshcroftInvariant,
    assemble_invariant,
    check_family,
    export_invariant,
    hoare_triples,
    import_invariant,
)
from .program import ConcreteProgram, ProgramSpec, load_spec, parse_spec
from .symmetry import TypeTable, canonical_key, enumerate_qf_types

__all__ = [
    "AshcroftInvariant", "ChcSystem", "ConcreteProgram", "FAMILY_NAMES", "FamilyDescriptor", "Options",
    "ProgramSpec", "SolverConfig", "SolverResult", "TypeTable", "assemble_invariant", "canonical_key",
    "check_family", "check_invariant_explicit", "emit_smtlib", "encode_family", "encode_single",
    "enumerate_qf_types", "explicit_reach", "export_invariant", "family", "hoare_triples",
    "import_invariant", "load_spec", "parse_model", "parse_spec", "run_solver", "solve", "symmetry_reduce",
]
