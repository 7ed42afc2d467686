"""Identifying formulas: expression trees over distribution terms.

Rendering follows the bracketed style ``[sum_{Z} [p(Z|X)*p(Y|do(Z))]]``.
Evaluation works on dense numpy tables, one axis per free variable.
"""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .graph import CausalGraph, VarSet, bits
from .terms import Term, TermError, parse_term, render_term


class FormulaError(ValueError):
    pass


# -- expression tree --------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    term: Term


@dataclass(frozen=True)
class Sum:
    over: VarSet
    body: "Formula"


@dataclass(frozen=True)
class Product:
    factors: Tuple["Formula", ...]


@dataclass(frozen=True)
class Quotient:
    numerator: "Formula"
    denominator: "Formula"


Formula = Union[Atom, Sum, Product, Quotient]


def product(*factors: Formula) -> Formula:
    """Product node with nested products flattened."""
    flat: List[Formula] = []
    for f in factors:
        if isinstance(f, Product):
            flat.extend(f.factors)
        else:
            flat.append(f)
    if len(flat) == 1:
        return flat[0]
    return Product(tuple(flat))


def marginal(f: Formula, over: VarSet) -> Formula:
    """``sum_{over} f``; sums over variables that are not free are dropped."""
    over &= free_variables(f)
    if not over:
        return f
    if isinstance(f, Sum):
        return Sum(f.over | over, f.body)
    return Sum(over, f)


def free_variables(f: Formula) -> VarSet:
    if isinstance(f, Atom):
        return f.term.symbolic
    if isinstance(f, Sum):
        return free_variables(f.body) & ~f.over
    if isinstance(f, Product):
        out = 0
        for x in f.factors:
            out |= free_variables(x)
        return out
    if isinstance(f, Quotient):
        return free_variables(f.numerator) | free_variables(f.denominator)
    raise TypeError(f"not a formula node: {f!r}")


def atoms(f: Formula) -> Iterator[Term]:
    """Leaf terms, left to right, repeats included."""
    if isinstance(f, Atom):
        yield f.term
    elif isinstance(f, Sum):
        yield from atoms(f.body)
    elif isinstance(f, Product):
        for x in f.factors:
            yield from atoms(x)
    else:
        yield from atoms(f.numerator)
        yield from atoms(f.denominator)


def substitute_atom(f: Formula, term: Term, replacement: Formula, _bound: VarSet = 0) -> Formula:
    """Replace every ``Atom(term)`` by ``replacement``.

    Raises :class:`FormulaError` if a free variable of ``replacement`` would be
    captured by an enclosing sum.
    """
    if isinstance(f, Atom):
        if f.term != term:
            return f
        captured = free_variables(replacement) & _bound
        if captured:
            raise FormulaError("substitution would capture a summation variable")
        return replacement
    if isinstance(f, Sum):
        return Sum(f.over, substitute_atom(f.body, term, replacement, _bound | f.over))
    if isinstance(f, Product):
        return Product(tuple(substitute_atom(x, term, replacement, _bound) for x in f.factors))
    return Quotient(
        substitute_atom(f.numerator, term, replacement, _bound),
        substitute_atom(f.denominator, term, replacement, _bound),
    )


def map_atoms(f: Formula, fn) -> Optional[Formula]:
    """Rebuild ``f`` with each atom term replaced by ``fn(term)``; None aborts."""
    if isinstance(f, Atom):
        t = fn(f.term)
        return None if t is None else Atom(t)
    if isinstance(f, Sum):
        body = map_atoms(f.body, fn)
        return None if body is None else Sum(f.over, body)
    if isinstance(f, Product):
        out = []
        for x in f.factors:
            y = map_atoms(x, fn)
            if y is None:
                return None
            out.append(y)
        return Product(tuple(out))
    num = map_atoms(f.numerator, fn)
    den = map_atoms(f.denominator, fn)
    if num is None or den is None:
        return None
    return Quotient(num, den)


# -- text form --------------------------------------------------------------


def render(f: Formula, g: CausalGraph) -> str:
    if isinstance(f, Atom):
        return render_term(f.term, g)
    if isinstance(f, Sum):
        return "[sum_{" + ",".join(g.names_of(f.over)) + "} " + render(f.body, g) + "]"
    if isinstance(f, Product):
        return "[" + "*".join(render(x, g) for x in f.factors) + "]"
    return "[" + render(f.numerator, g) + "/" + render(f.denominator, g) + "]"


class _Reader:
    def __init__(self, text: str, g: CausalGraph):
        self.s = text
        self.i = 0
        self.g = g

    def skip(self) -> None:
        while self.i < len(self.s) and self.s[self.i].isspace():
            self.i += 1

    def peek(self) -> str:
        self.skip()
        return self.s[self.i] if self.i < len(self.s) else ""

    def expect(self, tok: str) -> None:
        self.skip()
        if not self.s.startswith(tok, self.i):
            raise FormulaError(f"expected {tok!r} at offset {self.i} in {self.s!r}")
        self.i += len(tok)

    def formula(self) -> Formula:
        c = self.peek()
        if c in "pP":
            return self.atom()
        if c != "[":
            raise FormulaError(f"unexpected {c!r} at offset {self.i}")
        self.expect("[")
        if self.s.startswith("sum_{", self.i):
            self.expect("sum_{")
            close = self.s.index("}", self.i)
            names = [n.strip() for n in self.s[self.i:close].split(",")]
            self.i = close + 1
            body = self.formula()
            self.expect("]")
            return Sum(self.g.mask(names), body)
        first = self.formula()
        c = self.peek()
        if c == "/":
            self.expect("/")
            den = self.formula()
            self.expect("]")
            return Quotient(first, den)
        factors = [first]
        while self.peek() == "*":
            self.expect("*")
            factors.append(self.formula())
        self.expect("]")
        if len(factors) == 1:
            raise FormulaError("bracketed expression without an operator")
        return Product(tuple(factors))

    def atom(self) -> Formula:
        start = self.i
        self.i += 1
        self.expect("(")
        depth = 1
        while depth and self.i < len(self.s):
            if self.s[self.i] == "(":
                depth += 1
            elif self.s[self.i] == ")":
                depth -= 1
            self.i += 1
        try:
            return Atom(parse_term(self.s[start:self.i], self.g))
        except TermError as exc:
            raise FormulaError(str(exc)) from exc


def parse_formula(text: str, g: CausalGraph) -> Formula:
    r = _Reader(text, g)
    f = r.formula()
    r.skip()
    if r.i != len(r.s):
        raise FormulaError(f"trailing text {r.s[r.i:]!r}")
    return f


# -- probability tables -------------------------------------------------------


@dataclass
class ProbTable:
    """Dense table with one axis per entry of ``variables``.

    ``conditioned`` and ``intervened`` name the axes on the right of the bar;
    ``fixed`` records indicator values the table is restricted to.
    """

    variables: Tuple[str, ...]
    cardinalities: Tuple[int, ...]
    values: np.ndarray
    conditioned: Tuple[str, ...] = ()
    intervened: Tuple[str, ...] = ()
    fixed: Tuple[Tuple[str, int], ...] = ()

    def __post_init__(self):
        self.variables = tuple(self.variables)
        self.cardinalities = tuple(int(c) for c in self.cardinalities)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.cardinalities:
            raise FormulaError(
                f"table shape {self.values.shape} does not match cardinalities {self.cardinalities}"
            )
        if np.any(self.values < -1e-15):
            raise FormulaError("probability table has negative entries")

    @property
    def semantics(self) -> str:
        parts = []
        if self.intervened:
            parts.append("interventional-on(" + ",".join(self.intervened) + ")")
        if self.conditioned:
            parts.append("conditional-on(" + ",".join(self.conditioned) + ")")
        return " ".join(parts) if parts else "joint"

    @property
    def outcome(self) -> Tuple[str, ...]:
        right = set(self.conditioned) | set(self.intervened)
        return tuple(v for v in self.variables if v not in right)

    def totals(self) -> np.ndarray:
        """Mass over the outcome axes for every right-hand assignment."""
        axes = tuple(i for i, v in enumerate(self.variables) if v in self.outcome)
        return self.values.sum(axis=axes)

    def transpose_to(self, order: Sequence[str]) -> "ProbTable":
        order = tuple(order)
        if sorted(order) != sorted(self.variables):
            raise FormulaError(f"cannot reorder {self.variables} as {order}")
        perm = [self.variables.index(v) for v in order]
        return ProbTable(
            order,
            tuple(self.cardinalities[p] for p in perm),
            np.transpose(self.values, perm),
            self.conditioned,
            self.intervened,
            self.fixed,
        )

    def to_json(self) -> dict:
        return {
            "variables": list(self.variables),
            "cardinalities": list(self.cardinalities),
            "semantics": self.semantics,
            "conditioned": list(self.conditioned),
            "intervened": list(self.intervened),
            "fixed": {k: v for k, v in self.fixed},
            "values": self.values.ravel(order="C").tolist(),
        }

    @classmethod
    def from_json(cls, obj: Union[str, Mapping]) -> "ProbTable":
        if isinstance(obj, str):
            obj = json.loads(obj)
        cards = tuple(obj["cardinalities"])
        return cls(
            tuple(obj["variables"]),
            cards,
            np.asarray(obj["values"], dtype=float).reshape(cards),
            tuple(obj.get("conditioned", ())),
            tuple(obj.get("intervened", ())),
            tuple(sorted(obj.get("fixed", {}).items())),
        )


def term_scope(t: Term, g: CausalGraph) -> Tuple[str, ...]:
    """Axis order used for a term's table: left, then do, then conditioned."""
    return tuple(g.names_of(t.left) + g.names_of(t.dos) + g.names_of(t.cond))


# -- evaluation -----------------------------------------------------------------

@dataclass
class _Factor:
    vars: Tuple[int, ...]  # ascending variable indices
    values: np.ndarray


def _align(fac: _Factor, target: Tuple[int, ...]) -> np.ndarray:
    """Broadcastable view of ``fac`` over the ascending index tuple ``target``."""
    shape = []
    pos = {v: i for i, v in enumerate(fac.vars)}
    for v in target:
        shape.append(fac.values.shape[pos[v]] if v in pos else 1)
    return fac.values.reshape(shape)


def _union(*vs: Tuple[int, ...]) -> Tuple[int, ...]:
    return tuple(sorted(set().union(*vs)))


@dataclass
class _Evaluator:
    g: CausalGraph
    tables: Dict[Term, _Factor]
    counter: Counter = field(default_factory=Counter)

    def run(self, f: Formula) -> _Factor:
        if isinstance(f, Atom):
            try:
                return self.tables[f.term]
            except KeyError:
                raise FormulaError(f"unbound atom {render_term(f.term, self.g)}") from None
        if isinstance(f, Sum):
            body = self.run(f.body)
            axes = tuple(i for i, v in enumerate(body.vars) if f.over >> v & 1)
            keep = tuple(v for v in body.vars if not f.over >> v & 1)
            return _Factor(keep, body.values.sum(axis=axes))
        if isinstance(f, Product):
            parts = [self.run(x) for x in f.factors]
            target = _union(*(p.vars for p in parts))
            out = np.ones([1] * len(target))
            for p in parts:
                out = out * _align(p, target)
            out = np.broadcast_to(out, self._shape(target, parts)).copy()
            return _Factor(target, out)
        num = self.run(f.numerator)
        den = self.run(f.denominator)
        target = _union(num.vars, den.vars)
        shape = self._shape(target, [num, den])
        n = np.broadcast_to(_align(num, target), shape)
        d = np.broadcast_to(_align(den, target), shape)
        zero = d == 0
        if np.any(zero & (n > 0)):
            where = np.argwhere(zero & (n > 0))[0]
            names = [self.g.variables[v].name for v in target]
            assignment = ", ".join(f"{a}={b}" for a, b in zip(names, where))
            raise FormulaError(f"division of positive mass by zero at {assignment}")
        if np.any(zero):
            self.counter["zero_over_zero"] += int(zero.sum())
            warnings.warn("0/0 in formula evaluation treated as 0", RuntimeWarning, stacklevel=3)
        out = np.divide(n, d, out=np.zeros(shape), where=~zero)
        return _Factor(target, out)

    @staticmethod
    def _shape(target, parts) -> Tuple[int, ...]:
        shape = [1] * len(target)
        for p in parts:
            for v, size in zip(p.vars, p.values.shape):
                shape[target.index(v)] = max(shape[target.index(v)], size)
        return tuple(shape)


def _to_factor(t: Term, table: ProbTable, g: CausalGraph) -> _Factor:
    want = term_scope(t, g)
    if set(table.variables) != set(want):
        raise FormulaError(
            f"binding for {render_term(t, g)} has scope {table.variables}, expected {want}"
        )
    idx = sorted(g.index(v) for v in table.variables)
    names = [g.variables[i].name for i in idx]
    return _Factor(tuple(idx), table.transpose_to(names).values)


def evaluate_factor(
    f: Formula,
    bindings: Mapping[Term, ProbTable],
    g: CausalGraph,
    counter: Optional[Counter] = None,
) -> Tuple[Tuple[str, ...], np.ndarray]:
    """Evaluate over all free variables; returns (names, array)."""
    tables = {t: _to_factor(t, tab, g) for t, tab in bindings.items()}
    ev = _Evaluator(g, tables, counter if counter is not None else Counter())
    out = ev.run(f)
    cards = _cardinalities(bindings, g)
    shape = tuple(cards[v] for v in out.vars)
    values = np.broadcast_to(out.values, shape)
    return tuple(g.variables[v].name for v in out.vars), np.array(values)


def _cardinalities(bindings: Mapping[Term, ProbTable], g: CausalGraph) -> Dict[int, int]:
    cards: Dict[int, int] = {}
    for tab in bindings.values():
        for name, c in zip(tab.variables, tab.cardinalities):
            i = g.index(name)
            if cards.setdefault(i, c) != c:
                raise FormulaError(f"inconsistent cardinality for {name}: {cards[i]} vs {c}")
    return cards


def evaluate(
    f: Formula,
    bindings: Mapping[Term, ProbTable],
    query_scope: Union[Term, Sequence[str]],
    g: CausalGraph,
    counter: Optional[Counter] = None,
    cardinalities: Optional[Mapping[str, int]] = None,
) -> ProbTable:
    """Numeric value of ``f`` as a table over ``query_scope``.

    Free variables outside the scope are ones the formula is constant in
    (left behind by dropping an independent condition); they are read at
    their first value. Scope variables the formula does not mention are
    broadcast, which needs their size from ``cardinalities`` unless some
    binding already covers them.
    """
    if isinstance(query_scope, Term):
        q = query_scope
        scope = term_scope(q, g)
        conditioned = tuple(g.names_of(q.cond))
        intervened = tuple(g.names_of(q.dos))
        fixed = tuple((n, 1) for n in g.names_of(q.fixed_one | q.left_fixed_one)) + tuple(
            (n, 0) for n in g.names_of(q.fixed_zero | q.left_fixed_zero)
        )
    else:
        scope = tuple(query_scope)
        conditioned = intervened = fixed = ()
    names, values = evaluate_factor(f, bindings, g, counter)
    cards = {g.variables[i].name: c for i, c in _cardinalities(bindings, g).items()}
    cards.update(cardinalities or {})
    index = []
    for n in names:
        index.append(slice(None) if n in scope else 0)
    values = values[tuple(index)]
    kept = [n for n in names if n in scope]
    missing = [n for n in scope if n not in kept]
    for n in missing:
        if n not in cards:
            raise FormulaError(f"cardinality of {n} unknown; pass cardinalities=")
        values = np.repeat(values[..., None], cards[n], axis=-1)
        kept.append(n)
    perm = [kept.index(n) for n in scope]
    values = np.transpose(values, perm)
    return ProbTable(scope, tuple(cards[n] for n in scope), values, conditioned, intervened, fixed)


# -- binding atoms from input data ----------------------------------------------


def _value_of(t: Term, v: int) -> Optional[int]:
    if (t.fixed_one | t.left_fixed_one) >> v & 1:
        return 1
    if (t.fixed_zero | t.left_fixed_zero) >> v & 1:
        return 0
    return None


def derivation_carriers(atom: Term, source: Term, g: CausalGraph) -> Optional[Dict[int, int]]:
    """Map atom variables to the source variables carrying them, or None.

    ``atom`` is computable from ``source`` by marginalizing source outcomes,
    conditioning on some of them, slicing indicator values, and reading a
    proxy as its true variable on the event that the matching indicator is
    1 (conditioned on, or in the joint event together with the variable).
    """
    if atom.dos != source.dos:
        return None
    carrier: Dict[int, int] = {}
    for v in bits(atom.mentioned & ~atom.dos):
        if source.mentioned >> v & 1:
            carrier[v] = v
            continue
        p = g.proxy_for.get(v)
        r = g.indicator_of.get(v)
        if p is None or not source.mentioned >> p & 1:
            return None
        # X* reads as X on the event R_X = 1 only (conditioned, or jointly with X).
        if atom.fixed_one >> r & 1 or atom.left_fixed_one >> r & 1 and atom.left >> v & 1:
            carrier[v] = p
            continue
        return None
    inv = {c: v for v, c in carrier.items()}
    if len(inv) != len(carrier):
        return None
    # Source conditions stay conditions; source-fixed values must be kept.
    for c in bits(source.rhs):
        if c not in inv or not atom.rhs >> inv[c] & 1:
            return None
    for c in bits(source.fixed):
        if c not in inv or _value_of(atom, inv[c]) != _value_of(source, c):
            return None
    # Normalizing needs the atom's outcomes summed over their full range,
    # which a value fixed on the source's left side does not offer.
    lhs_cond = [c for c in bits(source.lhs) if c in inv and atom.rhs >> inv[c] & 1]
    if lhs_cond and any(
        atom.lhs >> inv[c] & 1 for c in bits(source.left_fixed_one | source.left_fixed_zero)
    ):
        return None
    return carrier


def derive_table(atom: Term, source: Term, table: ProbTable, g: CausalGraph) -> Optional[ProbTable]:
    """Compute ``atom`` from the table of input ``source``.

    See :func:`derivation_carriers` for the allowed moves. Returns None when
    ``atom`` is not reachable from ``source`` that way.
    """
    carrier = derivation_carriers(atom, source, g)
    if carrier is None:
        return None
    inv = {c: v for v, c in carrier.items()}
    lhs_cond = [c for c in bits(source.lhs) if c in inv and atom.rhs >> inv[c] & 1]

    axes = [g.index(n) for n in table.variables]
    num_ix: List = []
    den_ix: List = []
    num_sum: List[int] = []
    den_sum: List[int] = []
    for pos, c in enumerate(axes):
        if source.dos >> c & 1:
            num_ix.append(slice(None))
            den_ix.append(slice(None))
            continue
        if c not in inv:
            num_ix.append(slice(None))
            den_ix.append(slice(None))
            num_sum.append(pos)
            den_sum.append(pos)
            continue
        v = inv[c]
        val = _value_of(atom, v)
        if val is not None:
            sel = val
        elif c != v:
            sel = slice(0, table.cardinalities[pos] - 1)
        else:
            sel = slice(None)
        num_ix.append(sel)
        if atom.lhs >> v & 1:
            den_ix.append(slice(None))
            den_sum.append(pos)
        else:
            den_ix.append(sel)

    def reduce(index: List, summed: List[int]) -> Tuple[List[int], np.ndarray]:
        arr = table.values[tuple(index)]
        kept = [pos for pos, ix in enumerate(index) if not isinstance(ix, int)]
        arr = arr.sum(axis=tuple(kept.index(p) for p in summed if p in kept))
        return [p for p in kept if p not in summed], arr

    num_axes, num = reduce(num_ix, num_sum)
    if lhs_cond:
        den_axes, den = reduce(den_ix, den_sum)
        shape = [den.shape[den_axes.index(p)] if p in den_axes else 1 for p in num_axes]
        den = den.reshape(shape)
        with np.errstate(invalid="ignore", divide="ignore"):
            num = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    names = tuple(g.variables[inv.get(axes[p], axes[p])].name for p in num_axes)
    out = ProbTable(
        names,
        num.shape,
        num,
        tuple(g.names_of(atom.cond)),
        tuple(g.names_of(atom.dos)),
    )
    return out.transpose_to(term_scope(atom, g))


def bind_atoms(
    f: Formula,
    inputs: Mapping[Term, ProbTable],
    g: CausalGraph,
) -> Dict[Term, ProbTable]:
    """Bindings for every atom of ``f`` computed only from the input tables."""
    out: Dict[Term, ProbTable] = {}
    for t in atoms(f):
        if t in out:
            continue
        for src, tab in inputs.items():
            derived = derive_table(t, src, tab, g)
            if derived is not None:
                out[t] = derived
                break
        else:
            raise FormulaError(f"atom {render_term(t, g)} is not computable from the inputs")
    return out
