"""Discrete structural causal models as a brute-force ground truth.

Every bidirected edge ``A <-> B`` becomes an explicit latent parent named
``U[A,B]`` of both endpoints. CPT arrays are indexed by the parents' values
(in :attr:`DiscreteScm.parents` order) followed by the node's own value.
Proxies are deterministic: ``X* = X`` when ``R_X = 1`` and the extra last
category (NA) when ``R_X = 0``.
"""

from __future__ import annotations

import json
import warnings
import string
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .graph import CausalGraph, VarKind, augment_missing, bits, parse_graph
from .formula import ProbTable, term_scope
from .terms import Term, render_term


class ZeroProbabilityError(ValueError):
    """Conditioning on an event of probability zero."""


def latent_name(g: CausalGraph, a: int, b: int) -> str:
    return f"U[{g.variables[a].name},{g.variables[b].name}]"


def base_dsl(g: CausalGraph) -> str:
    """Graph text without proxy nodes (re-augment with :func:`missing_spec`)."""
    proxies = g.kind_mask(VarKind.PROXY)
    lines = [v.name for v in g.variables if not proxies >> v.index & 1]
    for a, b in g.directed_edges:
        if not (proxies >> a & 1 or proxies >> b & 1):
            lines.append(f"{g.variables[a].name} -> {g.variables[b].name}")
    for a, b in g.bidirected_edges:
        lines.append(f"{g.variables[a].name} <-> {g.variables[b].name}")
    return "\n".join(lines)


def missing_spec(g: CausalGraph) -> str:
    # listed in proxy order so that re-augmenting numbers the proxies identically
    pairs = sorted(g.missing_map.items(), key=lambda rx: g.proxy_for.get(rx[1], len(g)))
    return ", ".join(f"{g.variables[r].name} : {g.variables[x].name}" for r, x in pairs)


class DiscreteScm:
    """Fully specified discrete SCM over ``graph`` plus one latent per bidirected edge."""

    def __init__(
        self,
        graph: CausalGraph,
        cpts: Mapping[str, np.ndarray],
        cardinalities: Optional[Mapping[str, int]] = None,
        tol: float = 1e-12,
    ):
        self.graph = graph
        cardinalities = dict(cardinalities or {})
        self.latents: Dict[str, Tuple[int, int]] = {
            latent_name(graph, a, b): (a, b) for a, b in graph.bidirected_edges
        }
        self.parents: Dict[str, Tuple[str, ...]] = {}
        self.cards: Dict[str, int] = {}
        for u in self.latents:
            self.parents[u] = ()
            self.cards[u] = int(cardinalities.get(u, 2))
        for i in graph.topological_order:
            v = graph.variables[i]
            pa = graph.names_of(graph.parents[i])
            pa += [u for u, (a, b) in self.latents.items() if i in (a, b)]
            self.parents[v.name] = tuple(pa)
            if v.kind is VarKind.INDICATOR:
                self.cards[v.name] = 2
            elif v.kind is VarKind.PROXY:
                self.cards[v.name] = int(cardinalities.get(graph.variables[graph.proxy_of[i]].name, 2)) + 1
            else:
                self.cards[v.name] = int(cardinalities.get(v.name, 2))
        self.order: Tuple[str, ...] = tuple(self.latents) + tuple(
            graph.variables[i].name for i in graph.topological_order
        )
        self.cpts: Dict[str, np.ndarray] = {}
        for name in self.order:
            i = graph.index(name) if name in graph else None
            if i is not None and graph.kind(i) is VarKind.PROXY:
                self.cpts[name] = self._proxy_cpt(i)
                continue
            if name not in cpts:
                raise ValueError(f"no CPT given for {name}")
            arr = np.asarray(cpts[name], dtype=float)
            shape = tuple(self.cards[p] for p in self.parents[name]) + (self.cards[name],)
            if arr.shape != shape:
                raise ValueError(f"CPT for {name} has shape {arr.shape}, expected {shape}")
            if np.any(arr < 0) or np.max(np.abs(arr.sum(axis=-1) - 1.0)) > tol:
                raise ValueError(f"CPT rows for {name} must be distributions")
            self.cpts[name] = arr

    def is_positive(self) -> bool:
        """Every non-proxy CPT entry is nonzero."""
        g = self.graph
        return all(
            np.all(arr > 0)
            for n, arr in self.cpts.items()
            if not (n in g and g.kind(g.index(n)) is VarKind.PROXY)
        )

    def _proxy_cpt(self, p: int) -> np.ndarray:
        g = self.graph
        x = g.proxy_of[p]
        r = g.indicator_of[x]
        kx = self.cards[g.variables[x].name]
        pa = self.parents[g.variables[p].name]
        # parents are in index order: locate X and R_X axes
        shape = tuple(self.cards[q] for q in pa) + (kx + 1,)
        arr = np.zeros(shape)
        xi = pa.index(g.variables[x].name)
        ri = pa.index(g.variables[r].name)
        for idx in np.ndindex(*shape[:-1]):
            arr[idx + ((idx[xi] if idx[ri] == 1 else kx),)] = 1.0
        return arr

    # -- enumeration --------------------------------------------------------
    def marginal(self, keep: Sequence[str], intervened: Iterable[str] = ()) -> np.ndarray:
        """P(keep | do(intervened)) with do-variables as free axes.

        Axes follow ``keep`` order; intervened variables must be listed in
        ``keep`` to appear as axes.
        """
        intervened = set(intervened)
        letters = {name: string.ascii_letters[k] for k, name in enumerate(self.order)}
        if len(self.order) > len(string.ascii_letters):
            raise ValueError("too many nodes for einsum enumeration")
        operands = []
        present = set()
        for name in self.order:
            if name in intervened:
                continue
            spec = "".join(letters[p] for p in self.parents[name]) + letters[name]
            operands.extend([self.cpts[name], spec])
            present.update(spec)
        out = [letters[k] for k in keep if letters[k] in present]
        args = []
        for k in range(0, len(operands), 2):
            args.append(operands[k])
            args.append([string.ascii_letters.index(c) for c in operands[k + 1]])
        args.append([string.ascii_letters.index(c) for c in out])
        arr = np.einsum(*args, optimize=True) if operands else np.ones(())
        # Do-variables nobody depends on still need an axis.
        have = [k for k in keep if letters[k] in present]
        for k in keep:
            if k not in have:
                arr = np.repeat(arr[..., None], self.cards[k], axis=-1)
                have.append(k)
        return np.transpose(arr, [have.index(k) for k in keep])

    def enumerate_term(self, t: Term, strict: bool = True) -> ProbTable:
        """Exact table of ``t``; axes as in :func:`idsearch.formula.term_scope`."""
        g = self.graph
        name = lambda i: g.variables[i].name  # noqa: E731
        needed = [name(i) for i in bits(t.mentioned)]
        dos = {name(i) for i in bits(t.dos)}
        joint = self.marginal(needed, dos)
        value = {}
        for i in bits(t.fixed_one | t.left_fixed_one):
            value[name(i)] = 1
        for i in bits(t.fixed_zero | t.left_fixed_zero):
            value[name(i)] = 0
        lhs = {name(i) for i in bits(t.lhs)}
        num_ix = tuple(value.get(n, slice(None)) for n in needed)
        num = joint[num_ix]
        num_names = [n for n in needed if n not in value]
        if t.rhs:
            den_ix = tuple(
                slice(None) if n in lhs else value.get(n, slice(None)) for n in needed
            )
            den_full = joint[den_ix]
            den_names = [n for n in needed if n in lhs or n not in value]
            den = den_full.sum(axis=tuple(k for k, n in enumerate(den_names) if n in lhs))
            den_names = [n for n in den_names if n not in lhs]
            shape = [den.shape[den_names.index(n)] if n in den_names else 1 for n in num_names]
            den = den.reshape(shape)
            zero = den <= 0
            if strict and np.any(zero):
                raise ZeroProbabilityError(
                    f"conditioning event of {render_term(t, g, 'P')} has probability zero"
                )
            with np.errstate(invalid="ignore", divide="ignore"):
                num = np.where(zero, 0.0, num / np.where(zero, 1.0, den))
        scope = term_scope(t, g)
        perm = [num_names.index(n) for n in scope]
        values = np.transpose(num, perm)
        fixed = tuple(sorted(value.items()))
        return ProbTable(
            scope,
            tuple(self.cards[n] for n in scope),
            values,
            tuple(g.names_of(t.cond)),
            tuple(g.names_of(t.dos)),
            fixed,
        )

    # -- serialization ------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "graph_dsl": base_dsl(self.graph),
            "missing": missing_spec(self.graph),
            "cardinalities": {
                n: c for n, c in self.cards.items()
                if not (n in self.graph and self.graph.kind(self.graph.index(n)) in (VarKind.PROXY, VarKind.INDICATOR))
            },
            "cpts": {
                n: {"parents": list(self.parents[n]), "table": self.cpts[n].tolist()}
                for n in self.order
                if not (n in self.graph and self.graph.kind(self.graph.index(n)) is VarKind.PROXY)
            },
        }

    @classmethod
    def from_json(cls, obj: Union[str, Mapping], graph: Optional[CausalGraph] = None) -> "DiscreteScm":
        if isinstance(obj, str):
            obj = json.loads(obj)
        g = parse_graph(obj["graph_dsl"])
        if obj.get("missing"):
            g = augment_missing(g, obj["missing"])
        if graph is not None and (graph.names != g.names or graph != g):
            raise ValueError("SCM graph is inconsistent with the scenario graph")
        scm = cls(g, {n: np.asarray(c["table"]) for n, c in obj["cpts"].items()}, obj["cardinalities"])
        for n, c in obj["cpts"].items():
            if tuple(c["parents"]) != scm.parents[n]:
                raise ValueError(f"parent order for {n} differs from the graph's")
        return scm


def random_scm(
    g: CausalGraph,
    cardinalities: Union[int, Mapping[str, int]] = 2,
    seed: int = 0,
    floor: float = 1e-6,
) -> DiscreteScm:
    """CPT rows drawn from a flat Dirichlet, kept at least ``floor`` away from 0."""
    rng = np.random.default_rng(seed)
    if isinstance(cardinalities, int):
        cards = {v.name: cardinalities for v in g.variables if v.kind is VarKind.SUBSTANTIVE}
    else:
        cards = dict(cardinalities)
    cpts = {}
    for name, shape in _shapes(g, cards).items():
        rows = rng.dirichlet(np.ones(shape[-1]), size=int(np.prod(shape[:-1], dtype=int)))
        rows = np.clip(rows, floor, None)
        rows /= rows.sum(axis=-1, keepdims=True)
        cpts[name] = rows.reshape(shape)
    return DiscreteScm(g, cpts, cards)


def _shapes(g: CausalGraph, cards: Mapping[str, int]) -> Dict[str, Tuple[int, ...]]:
    def card(i: int) -> int:
        v = g.variables[i]
        if v.kind is VarKind.INDICATOR:
            return 2
        if v.kind is VarKind.PROXY:
            return cards.get(g.variables[g.proxy_of[i]].name, 2) + 1
        return cards.get(v.name, 2)

    shapes = {}
    for a, b in g.bidirected_edges:
        shapes[latent_name(g, a, b)] = (cards.get(latent_name(g, a, b), 2),)
    for v in g.variables:
        if v.kind is VarKind.PROXY:
            continue
        pa = [card(p) for p in bits(g.parents[v.index])]
        pa += [cards.get(latent_name(g, a, b), 2) for a, b in g.bidirected_edges if v.index in (a, b)]
        shapes[v.name] = tuple(pa) + (card(v.index),)
    return shapes


def point_mass_scm(g: CausalGraph, value: int = 0) -> DiscreteScm:
    """Every non-proxy node puts all mass on ``value`` whatever its parents."""
    cpts = {}
    for name, shape in _shapes(g, {}).items():
        arr = np.zeros(shape)
        arr[..., value] = 1.0
        cpts[name] = arr
    return DiscreteScm(g, cpts)


# -- witnesses -----------------------------------------------------------------


@dataclass
class WitnessPair:
    """Two models meant to agree on ``inputs`` and disagree on ``target``."""

    m1: DiscreteScm
    m2: DiscreteScm
    inputs: List[Term]
    target: Term
    label: str = ""

    def __post_init__(self):
        if self.m1.graph != self.m2.graph or self.m1.cards != self.m2.cards:
            raise ValueError("witness models must share graph and cardinalities")


@dataclass
class WitnessReport:
    inputs_agree: bool
    target_differs: bool
    input_gap: float
    target_gap: float

    def __bool__(self) -> bool:
        return self.inputs_agree and self.target_differs


def table_gap(a: ProbTable, b: ProbTable) -> float:
    b = b.transpose_to(a.variables)
    return float(np.max(np.abs(a.values - b.values))) if a.values.size else 0.0


def check_witness(w: WitnessPair, tol: float = 1e-12) -> WitnessReport:
    input_gap = 0.0
    for t in w.inputs:
        input_gap = max(input_gap, table_gap(w.m1.enumerate_term(t), w.m2.enumerate_term(t)))
    target_gap = table_gap(w.m1.enumerate_term(w.target), w.m2.enumerate_term(w.target))
    return WitnessReport(input_gap <= tol, target_gap > tol, input_gap, target_gap)


@dataclass
class Discrepancy:
    max_abs: float
    rows: int  # right-hand assignments compared
    skipped: int  # assignments left out for lack of support


def formula_check(formula, target: Term, inputs: Sequence[Term], m: DiscreteScm) -> Discrepancy:
    """Compare ``formula`` evaluated on ``m``'s input tables with the true target.

    Atom tables are computed from the input tables alone, so a formula that
    leans on anything but the declared data cannot pass. In a positive model
    every right-hand assignment is compared. Otherwise an assignment is
    skipped when the target or the formula puts no mass on it, since the
    formula is then undefined there.
    """
    from .formula import bind_atoms, evaluate

    positive = m.is_positive()
    tables = {t: m.enumerate_term(t, strict=positive) for t in inputs}
    bindings = bind_atoms(formula, tables, m.graph)
    cards = {n: c for n, c in m.cards.items() if n in m.graph}
    with warnings.catch_warnings():
        if not positive:
            warnings.simplefilter("ignore", RuntimeWarning)
        got = evaluate(formula, bindings, target, m.graph, cardinalities=cards)
    want = m.enumerate_term(target, strict=positive)
    got = got.transpose_to(want.variables)
    err = np.abs(want.values - got.values)
    outcome = tuple(i for i, v in enumerate(want.variables) if v in want.outcome)
    per_row = np.atleast_1d(err.max(axis=outcome) if outcome else err)
    keep = np.ones(per_row.shape, dtype=bool)
    if not positive:
        keep = np.atleast_1d((want.totals() > 0) & (got.totals() > 0))
    gap = float(per_row[keep].max()) if keep.any() else 0.0
    return Discrepancy(gap, int(keep.sum()), int((~keep).sum()))


def formula_discrepancy(formula, target: Term, inputs: Sequence[Term], m: DiscreteScm) -> float:
    """Max absolute per-entry gap; see :func:`formula_check`."""
    return formula_check(formula, target, inputs, m).max_abs
