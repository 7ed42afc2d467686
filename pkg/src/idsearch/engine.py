"""Breadth-first derivation search over do-calculus and probability calculus.

Each derived term carries a formula over the input terms. The three
do-calculus rules leave the formula untouched (they assert equality of two
distributions). Operations on the left of the bar rewrite the formula; when
the formula is a single atom and the rewritten atom is still computable from
one input by marginalizing, conditioning and slicing, the atom itself is
rewritten, which keeps emitted formulas short.

A formula may mention variables its term no longer does, after an
observation or intervention was dropped by rule 1 or rule 3. The formula is
constant in such variables, and evaluation reads them at their first value.
"""

from __future__ import annotations

import enum
import time
from collections import deque
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .formula import (
    Atom,
    Formula,
    FormulaError,
    Product,
    Quotient,
    Sum,
    atoms,
    derivation_carriers,
    map_atoms,
    marginal,
    product,
    render,
)
from .graph import CausalGraph, VarKind, VarSet, bits, subsets
from .terms import QuerySpec, Term, TermError, check_term, render_term


class RuleId(enum.Enum):
    INPUT = "InputAxiom"
    RULE1 = "DoCalc1"
    RULE2 = "DoCalc2"
    RULE3 = "DoCalc3"
    MARGINALIZE = "Marginalize"
    CONDITION = "Condition"
    DECOMPOSE = "ProductDecompose"
    COMPOSE = "ProductCompose"
    ENUMERATE = "EnumerateIndicator"
    EXCHANGE = "ProxyExchange"
    DIVIDE = "IndicatorDivide"


class Status(enum.Enum):
    IDENTIFIABLE = "identifiable"
    NOT_IDENTIFIABLE = "not identifiable by rule closure"
    INCONCLUSIVE = "inconclusive: limit"


@dataclass(frozen=True)
class SearchLimits:
    max_terms: int = 2_000_000
    max_seconds: float = 60.0
    max_subset: Optional[int] = None  # largest do-calculus subset tried; None = all


@dataclass(frozen=True)
class DerivationStep:
    """One rule application; ``parents`` and ``produced`` are term references."""

    rule_id: RuleId
    parents: Tuple[Term, ...]
    produced: Term
    rule_params: Tuple[Tuple[str, int], ...] = ()

    def params(self) -> Dict[str, int]:
        return dict(self.rule_params)

    def describe(self, g: CausalGraph) -> dict:
        out = {
            "rule": self.rule_id.value,
            "parents": [render_term(t, g, "P") for t in self.parents],
            "produced": render_term(self.produced, g, "P"),
        }
        for k, v in self.rule_params:
            out[k] = g.names_of(v) if k != "direction" else ("insert" if v else "delete")
        return out


@dataclass
class IdentifyResult:
    status: Status
    formula: Optional[Formula]
    trace: List[DerivationStep]
    stats: Dict[str, float]
    query: QuerySpec

    @property
    def identifiable(self) -> bool:
        return self.status is Status.IDENTIFIABLE

    def formula_string(self) -> Optional[str]:
        return None if self.formula is None else render(self.formula, self.query.graph)


class RuleFailed(Exception):
    """A rule does not apply to the given premises."""


# -- term-level rules ------------------------------------------------------------


def _without(t: Term, s: VarSet) -> Term:
    return Term(*(r & ~s for r in t))


def _dsep(g: CausalGraph, a: VarSet, b: VarSet, c: VarSet, cut_in: VarSet, cut_out: VarSet) -> bool:
    return g.dsep(a, b, c, cut_in, cut_out)


def apply_rule1(t: Term, z: VarSet, g: CausalGraph, _dsep=_dsep) -> Optional[Term]:
    """Insert (``z`` unmentioned) or delete (``z`` on the right) observations."""
    if not z:
        return None
    if z & t.rhs == z:
        new = _without(t, z)
    elif not z & t.mentioned:
        new = t._replace(cond=t.cond | z)
    else:
        return None
    w = (t.rhs | new.rhs) & ~z
    if not _dsep(g, t.lhs, z, t.dos | w, t.dos, 0):
        return None
    return new


def apply_rule2(t: Term, z: VarSet, g: CausalGraph, _dsep=_dsep) -> Optional[Term]:
    """Exchange ``do(z)`` with observing ``z``, in either direction."""
    if not z:
        return None
    if z & t.dos == z:
        new = t._replace(dos=t.dos & ~z, cond=t.cond | z)
    elif z & t.cond == z:
        new = t._replace(dos=t.dos | z, cond=t.cond & ~z)
    else:
        return None
    x = t.dos & ~z
    w = t.rhs & ~z
    if not _dsep(g, t.lhs, z, x | w, x, z):
        return None
    return new


def apply_rule3(t: Term, z: VarSet, g: CausalGraph, _dsep=_dsep) -> Optional[Term]:
    """Insert (``z`` unmentioned) or delete (``z`` among the do-set) interventions."""
    if not z:
        return None
    if z & t.dos == z:
        new = t._replace(dos=t.dos & ~z)
    elif not z & t.mentioned:
        new = t._replace(dos=t.dos | z)
    else:
        return None
    x = new.dos & ~z
    w = t.rhs
    z_w = z & ~g.ancestors(w, cut_in=x)
    if not _dsep(g, t.lhs, z, x | w, x | z_w, 0):
        return None
    return new


def marginalize(t: Term, out: VarSet) -> Term:
    """Sum symbolic left variables ``out`` away."""
    if not out or out & ~t.left:
        raise TermError("can only marginalize symbolic left-hand variables")
    new = t._replace(left=t.left & ~out)
    if not new.lhs:
        raise TermError("marginalizing everything leaves no distribution")
    return new


def condition(t: Term, onto: VarSet) -> Tuple[Term, Term]:
    """``P(A|onto,C)`` from ``P(A,onto|C)``; returns it and the denominator term.

    The denominator ``P(onto|C)`` is the marginal of ``t`` over the rest of
    its left side, so it needs no fixed indicators outside ``onto`` there.
    """
    if not onto or onto & ~t.lhs:
        raise TermError("conditioning variables must be on the left")
    new = Term(
        t.left & ~onto,
        t.dos,
        t.cond | (onto & t.left),
        t.fixed_one | (onto & t.left_fixed_one),
        t.fixed_zero | (onto & t.left_fixed_zero),
        t.left_fixed_one & ~onto,
        t.left_fixed_zero & ~onto,
    )
    if not new.lhs:
        raise TermError("conditioning on the whole left side")
    den = Term(
        onto & t.left, t.dos, t.cond, t.fixed_one, t.fixed_zero,
        onto & t.left_fixed_one, onto & t.left_fixed_zero,
    )
    return new, den


def product_decompose(t: Term, split: VarSet) -> Tuple[Term, Term]:
    """Chain rule: ``P(A,D|C)`` into ``(P(A|D,C), P(D|C))`` with ``D = split``."""
    cond_part, den = condition(t, split)
    return cond_part, den


def product_compose(t1: Term, t2: Term) -> Optional[Term]:
    """Chain rule: ``P(A|D,C)`` and ``P(D|C)`` give ``P(A,D|C)``."""
    if t1.dos != t2.dos:
        return None
    if t2.left & ~t1.cond or t2.left_fixed_one & ~t1.fixed_one or t2.left_fixed_zero & ~t1.fixed_zero:
        return None
    d = t2.lhs
    if (t1.cond & ~d, t1.fixed_one & ~d, t1.fixed_zero & ~d) != (t2.cond, t2.fixed_one, t2.fixed_zero):
        return None
    return Term(
        t1.left | t2.left,
        t1.dos,
        t2.cond,
        t2.fixed_one,
        t2.fixed_zero,
        t1.left_fixed_one | t2.left_fixed_one,
        t1.left_fixed_zero | t2.left_fixed_zero,
    )


def enumerate_indicator(t: Term, r: int, g: CausalGraph) -> Tuple[Term, Term]:
    """Split a symbolic indicator into its ``=1`` and ``=0`` terms."""
    bit = 1 << r
    if g.kind(r) is not VarKind.INDICATOR:
        raise TermError(f"{g.variables[r].name} is not a response indicator")
    if t.left & bit:
        base = t._replace(left=t.left & ~bit)
        return base._replace(left_fixed_one=t.left_fixed_one | bit), base._replace(
            left_fixed_zero=t.left_fixed_zero | bit
        )
    if t.cond & bit:
        base = t._replace(cond=t.cond & ~bit)
        return base._replace(fixed_one=t.fixed_one | bit), base._replace(fixed_zero=t.fixed_zero | bit)
    raise TermError(f"{g.variables[r].name} is not a symbolic variable of the term")


def proxy_exchange(t: Term, x: int, g: CausalGraph) -> Optional[Term]:
    """Swap a proxy with its true variable on the event that its indicator is 1."""
    if x in g.proxy_of:
        a, b = x, g.proxy_of[x]
    elif x in g.proxy_for:
        a, b = x, g.proxy_for[x]
    else:
        raise TermError(f"{g.variables[x].name} has no proxy relation")
    true_var = g.proxy_of.get(a, a)
    r = g.indicator_of[true_var]
    if not t.mentioned >> a & 1 or t.mentioned >> b & 1 or t.dos >> a & 1:
        return None
    # X* = X only on the event R_X = 1: that event must be conditioned on,
    # or be part of the same joint event as the swapped variable.
    if not (t.fixed_one >> r & 1 or t.left_fixed_one >> r & 1 and t.left >> a & 1):
        return None
    return Term(*(role & ~(1 << a) | ((1 << b) if role >> a & 1 else 0) for role in t))


def indicator_divide(t1: Term, t2: Term) -> Optional[Term]:
    """``P(A, D=1 | C) / P(D=1 | A, C)`` gives ``P(A | C)`` for fixed indicators ``D``."""
    d = t2.left_fixed_one
    if t2.left or t2.left_fixed_zero or not d or d & ~t1.left_fixed_one or t1.dos != t2.dos:
        return None
    result = t1._replace(left_fixed_one=t1.left_fixed_one & ~d)
    if not result.lhs:
        return None
    expect = Term(
        0,
        t1.dos,
        t1.left | t1.cond,
        result.left_fixed_one | t1.fixed_one,
        t1.left_fixed_zero | t1.fixed_zero,
        d,
        0,
    )
    return result if t2 == expect else None


# -- formula-level counterparts ---------------------------------------------------


def _bound_variables(f: Formula) -> VarSet:
    if isinstance(f, Atom):
        return 0
    if isinstance(f, Sum):
        return f.over | _bound_variables(f.body)
    if isinstance(f, Product):
        out = 0
        for x in f.factors:
            out |= _bound_variables(x)
        return out
    return _bound_variables(f.numerator) | _bound_variables(f.denominator)


def _mentioned(f: Formula) -> VarSet:
    out = _bound_variables(f)
    for t in atoms(f):
        out |= t.mentioned
    return out


def _fix_in_formula(f: Formula, r: int, g: CausalGraph) -> Optional[Formula]:
    """Evaluate ``f`` at indicator ``r = 1`` by fixing it in every atom."""
    if _bound_variables(f) >> r & 1:
        return None

    def fix(t: Term) -> Optional[Term]:
        if t.dos >> r & 1:
            return None
        if (t.left | t.cond) >> r & 1:
            return enumerate_indicator(t, r, g)[0]
        return t

    return map_atoms(f, fix)


def _rename_in_formula(f: Formula, a: int, b: int, g: CausalGraph) -> Optional[Formula]:
    """Read ``a`` as ``b`` in every atom; each such atom must fix the indicator at 1."""
    if _bound_variables(f) >> a & 1 or _mentioned(f) >> b & 1:
        return None

    def swap(t: Term) -> Optional[Term]:
        if not t.mentioned >> a & 1:
            return t
        return proxy_exchange(t, a, g)

    return map_atoms(f, swap)


# -- search -----------------------------------------------------------------------


@dataclass
class _Node:
    term: Term
    formula: Formula
    step: DerivationStep
    depth: int


class Search:
    """One identification search; holds the visited set and a d-separation cache."""

    def __init__(self, q: QuerySpec, limits: SearchLimits = SearchLimits(), stop_at_target: bool = True):
        self.q = q
        self.stop_at_target = stop_at_target
        self.g = q.graph
        self.limits = limits
        g = self.g
        mentioned = q.target.mentioned
        for t in q.inputs:
            mentioned |= t.mentioned
        self.relevant = g.ancestors(mentioned)
        do_ok = g.kind_mask(VarKind.SUBSTANTIVE) | q.target.dos
        for t in q.inputs:
            do_ok |= t.dos
        self.do_allowed = do_ok & self.relevant
        self.indicators = g.kind_mask(VarKind.INDICATOR)
        self.proxies = g.kind_mask(VarKind.PROXY)
        self._dsep_cache: Dict[Tuple[int, ...], bool] = {}
        self.nodes: Dict[Term, _Node] = {}
        self.order: List[Term] = []
        self.by_context: Dict[Tuple[int, int, int, int], List[Term]] = {}
        self.queue: deque = deque()
        self.steps_applied = 0
        self.dsep_calls = 0

    # -- helpers -------------------------------------------------------------
    def dsep(self, g, a, b, c, cut_in, cut_out) -> bool:
        key = (a, b, c, cut_in, cut_out)
        hit = self._dsep_cache.get(key)
        if hit is None:
            self.dsep_calls += 1
            hit = g.dsep(a, b, c, cut_in, cut_out)
            self._dsep_cache[key] = hit
        return hit

    def admissible(self, t: Term) -> bool:
        m = t.mentioned
        if m & ~self.relevant or t.dos & ~self.do_allowed:
            return False
        for p in bits(m & self.proxies):
            x = self.g.proxy_of[p]
            if m >> x & 1 or not m >> self.g.indicator_of[x] & 1:
                return False
        return True

    def derivable_atom(self, t: Term) -> bool:
        return any(derivation_carriers(t, s, self.g) is not None for s in self.q.inputs)

    # -- rule application with formulas --------------------------------------
    def apply(self, rule: RuleId, parents: Sequence[Tuple[Term, Formula]], params: Dict[str, int]):
        """Produce ``(term, formula)`` or raise :class:`RuleFailed`.

        Shared by the search and by :func:`replay_trace`.
        """
        g = self.g
        (t, f) = parents[0]
        if rule in (RuleId.RULE1, RuleId.RULE2, RuleId.RULE3):
            fn = {RuleId.RULE1: apply_rule1, RuleId.RULE2: apply_rule2, RuleId.RULE3: apply_rule3}[rule]
            new = fn(t, params["subset"], g, self.dsep)
            if new is None:
                raise RuleFailed
            return new, f
        if rule is RuleId.MARGINALIZE:
            v = params["subset"]
            new = marginalize(t, v)
            return new, self._atomwise(f, lambda a: marginalize(a, v) if a.left & v == v else None,
                                       lambda: marginal(f, v))
        if rule is RuleId.CONDITION:
            v = params["subset"]
            new, _ = condition(t, v)

            def structural():
                if t.lhs & ~v & ~t.left:
                    return None
                return Quotient(f, marginal(f, t.left & ~v))

            return new, self._atomwise(
                f, lambda a: condition(a, v)[0] if a.lhs & v == v else None, structural
            )
        if rule is RuleId.ENUMERATE:
            r = params["subset"].bit_length() - 1
            new = enumerate_indicator(t, r, g)[0]

            def on_atom(a: Term) -> Optional[Term]:
                if (a.left | a.cond) >> r & 1:
                    return enumerate_indicator(a, r, g)[0]
                return None if a.mentioned >> r & 1 else a

            return new, self._atomwise(f, on_atom, lambda: _fix_in_formula(f, r, g))
        if rule is RuleId.EXCHANGE:
            x = params["subset"].bit_length() - 1
            new = proxy_exchange(t, x, g)
            if new is None:
                raise RuleFailed
            other = g.proxy_of.get(x, g.proxy_for.get(x))

            def on_atom(a: Term) -> Optional[Term]:
                if a.mentioned >> x & 1:
                    return proxy_exchange(a, x, g)
                return None if a.mentioned >> other & 1 else a

            return new, self._atomwise(f, on_atom, lambda: _rename_in_formula(f, x, other, g))
        if rule is RuleId.COMPOSE:
            (t2, f2) = parents[1]
            new = product_compose(t, t2)
            if new is None:
                raise RuleFailed
            return new, product(f2, f)
        if rule is RuleId.DIVIDE:
            (t2, f2) = parents[1]
            new = indicator_divide(t, t2)
            if new is None:
                raise RuleFailed
            return new, Quotient(f, f2)
        raise ValueError(f"rule {rule} is not applied by the search")

    def _atomwise(self, f: Formula, on_atom, structural) -> Formula:
        if isinstance(f, Atom):
            try:
                a = on_atom(f.term)
            except TermError:
                a = None
            if a is not None and (a == f.term or self.derivable_atom(a)):
                return Atom(a)
        out = structural()
        if out is None:
            raise RuleFailed
        return out

    # -- search loop -----------------------------------------------------------
    def _add(self, term: Term, formula: Formula, step: DerivationStep, depth: int) -> bool:
        self.nodes[term] = _Node(term, formula, step, depth)
        self.order.append(term)
        key = (term.dos, term.cond, term.fixed_one, term.fixed_zero)
        self.by_context.setdefault(key, []).append(term)
        self.queue.append(term)
        return self.stop_at_target and term == self.q.target

    def _candidates(self, t: Term) -> Iterator[Tuple[RuleId, Tuple[Term, ...], Dict[str, int]]]:
        g = self.g
        cap = self.limits.max_subset
        free = self.relevant & ~t.mentioned
        # do-calculus
        for z in subsets(t.rhs, cap):
            yield RuleId.RULE1, (t,), {"subset": z, "direction": 0}
        for z in subsets(free, cap):
            yield RuleId.RULE1, (t,), {"subset": z, "direction": 1}
        for z in subsets(t.dos, cap):
            yield RuleId.RULE2, (t,), {"subset": z, "direction": 0}
        for z in subsets(t.cond & self.do_allowed, cap):
            yield RuleId.RULE2, (t,), {"subset": z, "direction": 1}
        for z in subsets(t.dos, cap):
            yield RuleId.RULE3, (t,), {"subset": z, "direction": 0}
        for z in subsets(free & self.do_allowed, cap):
            yield RuleId.RULE3, (t,), {"subset": z, "direction": 1}
        # left-hand side
        for v in bits(t.left):
            if t.lhs & ~(1 << v):
                yield RuleId.MARGINALIZE, (t,), {"subset": 1 << v}
        for v in bits(t.lhs):
            if t.lhs & ~(1 << v):
                yield RuleId.CONDITION, (t,), {"subset": 1 << v}
        for r in bits((t.left | t.cond) & self.indicators):
            yield RuleId.ENUMERATE, (t,), {"subset": 1 << r}
        for p in bits(t.mentioned & self.proxies):
            yield RuleId.EXCHANGE, (t,), {"subset": 1 << p}
        for x in bits(t.mentioned & ~t.dos):
            if x in g.proxy_for:
                yield RuleId.EXCHANGE, (t,), {"subset": 1 << x}
        # two-premise rules, t first then t second
        for d in subsets(t.rhs):
            partner = Term(
                t.cond & d, t.dos, t.cond & ~d, t.fixed_one & ~d, t.fixed_zero & ~d,
                t.fixed_one & d, t.fixed_zero & d,
            )
            if partner in self.nodes:
                yield RuleId.COMPOSE, (t, partner), {}
        key = (t.dos, t.cond | t.left, t.fixed_one | t.left_fixed_one, t.fixed_zero | t.left_fixed_zero)
        for other in self.by_context.get(key, ()):
            if not other.lhs & t.lhs and product_compose(other, t) is not None:
                yield RuleId.COMPOSE, (other, t), {}
        for d in subsets(t.left_fixed_one):
            partner = Term(
                0, t.dos, t.left | t.cond, (t.left_fixed_one & ~d) | t.fixed_one,
                t.left_fixed_zero | t.fixed_zero, d, 0,
            )
            if partner in self.nodes:
                yield RuleId.DIVIDE, (t, partner), {}
        if not t.left and not t.left_fixed_zero and t.left_fixed_one:
            for a in [0, *subsets(t.cond)]:
                for e in [0, *subsets(t.fixed_one)]:
                    partner = Term(
                        a, t.dos, t.cond & ~a, t.fixed_one & ~e, t.fixed_zero,
                        t.left_fixed_one | e, 0,
                    )
                    if partner in self.nodes and indicator_divide(partner, t) is not None:
                        yield RuleId.DIVIDE, (partner, t), {}

    def _preview(self, rule: RuleId, premises: Tuple[Term, ...], params: Dict[str, int]) -> Optional[Term]:
        """Cheap term-only version used to skip visited results before d-separation."""
        t = premises[0]
        z = params.get("subset", 0)
        if rule is RuleId.RULE1:
            return _without(t, z) if params["direction"] == 0 else t._replace(cond=t.cond | z)
        if rule is RuleId.RULE2:
            if params["direction"] == 0:
                return t._replace(dos=t.dos & ~z, cond=t.cond | z)
            return t._replace(dos=t.dos | z, cond=t.cond & ~z)
        if rule is RuleId.RULE3:
            return t._replace(dos=t.dos & ~z) if params["direction"] == 0 else t._replace(dos=t.dos | z)
        if rule is RuleId.MARGINALIZE:
            return t._replace(left=t.left & ~z)
        if rule is RuleId.CONDITION:
            return condition(t, z)[0]
        if rule is RuleId.ENUMERATE:
            return enumerate_indicator(t, z.bit_length() - 1, self.g)[0]
        if rule is RuleId.EXCHANGE:
            return proxy_exchange(t, z.bit_length() - 1, self.g)
        if rule is RuleId.COMPOSE:
            return product_compose(*premises)
        return indicator_divide(*premises)

    def run(self) -> IdentifyResult:
        start = time.perf_counter()
        q = self.q
        status = None
        for t in q.inputs:
            if t in self.nodes:
                continue
            step = DerivationStep(RuleId.INPUT, (), t)
            if self._add(t, Atom(t), step, 0):
                status = Status.IDENTIFIABLE
                break
        ticks = 0
        while status is None and self.queue:
            t = self.queue.popleft()
            for rule, premises, params in self._candidates(t):
                ticks += 1
                if ticks & 1023 == 0 and time.perf_counter() - start > self.limits.max_seconds:
                    status = Status.INCONCLUSIVE
                    break
                try:
                    preview = self._preview(rule, premises, params)
                except TermError:
                    continue
                if preview is None or preview in self.nodes or not self.admissible(preview):
                    continue
                try:
                    new, formula = self.apply(
                        rule, [(p, self.nodes[p].formula) for p in premises], params
                    )
                except (RuleFailed, TermError, FormulaError):
                    continue
                self.steps_applied += 1
                step = DerivationStep(rule, premises, new, tuple(sorted(params.items())))
                depth = 1 + max(self.nodes[p].depth for p in premises)
                if self._add(new, formula, step, depth):
                    status = Status.IDENTIFIABLE
                    break
                if len(self.nodes) >= self.limits.max_terms:
                    status = Status.INCONCLUSIVE
                    break
        if status is None:
            status = Status.NOT_IDENTIFIABLE
        stats = {
            "terms_generated": len(self.nodes),
            "steps_applied": self.steps_applied,
            "dsep_evaluations": self.dsep_calls,
            "wall_time": time.perf_counter() - start,
        }
        if status is Status.IDENTIFIABLE:
            target = self.nodes[q.target]
            return IdentifyResult(status, target.formula, self.trace_to(q.target), stats, q)
        return IdentifyResult(status, None, [], stats, q)

    def trace_to(self, term: Term) -> List[DerivationStep]:
        """Steps needed for ``term``, in discovery order."""
        needed = set()
        stack = [term]
        while stack:
            t = stack.pop()
            if t in needed:
                continue
            needed.add(t)
            stack.extend(self.nodes[t].step.parents)
        return [self.nodes[t].step for t in self.order if t in needed]


def identify(q: QuerySpec, limits: SearchLimits = SearchLimits()) -> IdentifyResult:
    """Search for a derivation of ``q.target`` from ``q.inputs``."""
    check_term(q.target, q.graph)
    return Search(q, limits).run()


def close_search(q: QuerySpec, limits: SearchLimits = SearchLimits()) -> Tuple[Dict[Term, int], Status]:
    """All terms derivable from the inputs (depth per term) and the closure status.

    Status is NOT_IDENTIFIABLE when the closure completed, INCONCLUSIVE on a
    limit. The target is ignored while closing.
    """
    s = Search(q, limits, stop_at_target=False)
    result = s.run()
    return {t: n.depth for t, n in s.nodes.items()}, result.status


def replay_trace(q: QuerySpec, trace: Sequence[DerivationStep]) -> Dict[Term, Formula]:
    """Recompute every step's formula from the inputs alone."""
    s = Search(q)
    formulas: Dict[Term, Formula] = {}
    for step in trace:
        if step.rule_id is RuleId.INPUT:
            if step.produced not in q.inputs:
                raise ValueError("trace cites a term that is not an input")
            formulas[step.produced] = Atom(step.produced)
            continue
        premises = [(p, formulas[p]) for p in step.parents]
        term, formula = s.apply(step.rule_id, premises, step.params())
        if term != step.produced:
            raise ValueError("trace step does not reproduce its term")
        formulas[term] = formula
    return formulas


__all__ = [
    "DerivationStep",
    "IdentifyResult",
    "RuleId",
    "SearchLimits",
    "Status",
    "apply_rule1",
    "apply_rule2",
    "apply_rule3",
    "close_search",
    "condition",
    "enumerate_indicator",
    "identify",
    "indicator_divide",
    "marginalize",
    "product_compose",
    "product_decompose",
    "proxy_exchange",
    "replay_trace",
    "Search",
]
