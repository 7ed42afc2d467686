"""Causal effect identification by search over do-calculus and probability rules."""

from .engine import (
    DerivationStep,
    IdentifyResult,
    RuleId,
    SearchLimits,
    Status,
    close_search,
    identify,
    replay_trace,
)
from .formula import Atom, Product, ProbTable, Quotient, Sum, evaluate, parse_formula, render
from .graph import CausalGraph, GraphError, VarKind, augment_missing, parse_graph
from .scm import DiscreteScm, WitnessPair, check_witness, random_scm
from .terms import QuerySpec, Term, TermError, parse_term, render_term

__all__ = [
    "Atom",
    "CausalGraph",
    "DerivationStep",
    "DiscreteScm",
    "GraphError",
    "IdentifyResult",
    "ProbTable",
    "Product",
    "QuerySpec",
    "Quotient",
    "RuleId",
    "SearchLimits",
    "Status",
    "Sum",
    "Term",
    "TermError",
    "VarKind",
    "WitnessPair",
    "augment_missing",
    "check_witness",
    "close_search",
    "evaluate",
    "identify",
    "parse_formula",
    "parse_graph",
    "parse_term",
    "random_scm",
    "render",
    "render_term",
    "replay_trace",
]
