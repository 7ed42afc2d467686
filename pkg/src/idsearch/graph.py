"""Semi-Markovian causal graphs over at most 64 variables.

Variable subsets are plain ``int`` bitmasks (bit ``i`` <-> variable ``i``).
Bidirected edges stand for an implicit latent parent shared by both endpoints;
they are never materialized as nodes here.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

MAX_VARIABLES = 64

VarSet = int


class GraphError(ValueError):
    """Malformed graph text, cycles, or violated graph invariants."""


class VarKind(enum.Enum):
    SUBSTANTIVE = "substantive"
    PROXY = "proxy"
    INDICATOR = "response-indicator"


@dataclass(frozen=True)
class Variable:
    index: int
    name: str
    kind: VarKind = VarKind.SUBSTANTIVE


def bits(mask: VarSet) -> Iterator[int]:
    """Yield the indices set in ``mask`` in ascending order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def popcount(mask: VarSet) -> int:
    return bin(mask).count("1")


def subsets(mask: VarSet, max_size: Optional[int] = None) -> Iterator[VarSet]:
    """Nonempty subsets of ``mask`` in ascending numeric order."""
    members = list(bits(mask))
    n = len(members)
    for code in range(1, 1 << n):
        if max_size is not None and popcount(code) > max_size:
            continue
        sub = 0
        for j in range(n):
            if code >> j & 1:
                sub |= 1 << members[j]
        yield sub


_TOKEN = re.compile(r"\s*(?:(<->)|(->)|([A-Za-z_][A-Za-z0-9_]*\*?))")


def _tokenize(text: str) -> List[str]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = text[pos:].strip().split()[0]
            raise GraphError(f"malformed token {bad!r} in graph text")
        tokens.append(m.group(1) or m.group(2) or m.group(3))
        pos = m.end()
    return tokens


class CausalGraph:
    """Immutable semi-Markovian DAG.

    Build through :func:`parse_graph` or :meth:`from_edges`; derived graphs
    come from :meth:`mutilate` and :func:`augment_missing`.
    """

    def __init__(
        self,
        names: Sequence[str],
        directed: Iterable[Tuple[int, int]] = (),
        bidirected: Iterable[Tuple[int, int]] = (),
        kinds: Optional[Sequence[VarKind]] = None,
        missing_map: Optional[Dict[int, int]] = None,
    ):
        names = tuple(names)
        if len(names) > MAX_VARIABLES:
            raise GraphError(
                f"graph has {len(names)} variables; at most {MAX_VARIABLES} are supported"
            )
        if len(set(names)) != len(names):
            raise GraphError("variable names must be unique")
        n = len(names)
        kinds = tuple(kinds) if kinds is not None else (VarKind.SUBSTANTIVE,) * n
        self.variables: Tuple[Variable, ...] = tuple(
            Variable(i, name, kind) for i, (name, kind) in enumerate(zip(names, kinds))
        )
        self._index = {name: i for i, name in enumerate(names)}

        d_edges = []
        seen = set()
        for a, b in directed:
            if a == b:
                raise GraphError(f"self-loop on {names[a]}")
            if (a, b) not in seen:
                seen.add((a, b))
                d_edges.append((a, b))
        b_edges = []
        seen_b = set()
        for a, b in bidirected:
            if a == b:
                raise GraphError(f"self-loop on {names[a]}")
            key = (min(a, b), max(a, b))
            if key not in seen_b:
                seen_b.add(key)
                b_edges.append(key)
        self.directed_edges: Tuple[Tuple[int, int], ...] = tuple(d_edges)
        self.bidirected_edges: Tuple[Tuple[int, int], ...] = tuple(b_edges)

        self.parents: List[VarSet] = [0] * n
        self.children: List[VarSet] = [0] * n
        self.siblings: List[VarSet] = [0] * n
        for a, b in d_edges:
            self.parents[b] |= 1 << a
            self.children[a] |= 1 << b
        for a, b in b_edges:
            self.siblings[a] |= 1 << b
            self.siblings[b] |= 1 << a

        self.missing_map: Dict[int, int] = dict(missing_map or {})
        self.proxy_of: Dict[int, int] = {}
        self.proxy_for: Dict[int, int] = {}
        for r, x in self.missing_map.items():
            proxy = self._index.get(names[x] + "*")
            if proxy is not None:
                self.proxy_of[proxy] = x
                self.proxy_for[x] = proxy
        self.indicator_of: Dict[int, int] = {x: r for r, x in self.missing_map.items()}

        self.topological_order = self._toposort()
        self._check_invariants()

    # -- construction helpers -------------------------------------------
    @classmethod
    def from_edges(cls, directed=(), bidirected=(), names: Sequence[str] = ()):
        """Build from name pairs; extra ``names`` become isolated vertices."""
        order: List[str] = []
        for a, b in list(directed) + list(bidirected):
            for v in (a, b):
                if v not in order:
                    order.append(v)
        for v in names:
            if v not in order:
                order.append(v)
        idx = {v: i for i, v in enumerate(order)}
        return cls(
            order,
            [(idx[a], idx[b]) for a, b in directed],
            [(idx[a], idx[b]) for a, b in bidirected],
        )

    def _toposort(self) -> Tuple[int, ...]:
        n = len(self.variables)
        indeg = [popcount(p) for p in self.parents]
        ready = [i for i in range(n) if indeg[i] == 0]
        order = []
        while ready:
            v = ready.pop(0)
            order.append(v)
            for c in bits(self.children[v]):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != n:
            stuck = [self.variables[i].name for i in range(n) if indeg[i] > 0]
            raise GraphError("directed edges contain a cycle through " + ", ".join(stuck))
        return tuple(order)

    def _check_invariants(self) -> None:
        for p, x in self.proxy_of.items():
            r = self.indicator_of[x]
            if self.parents[p] != (1 << x | 1 << r):
                raise GraphError(
                    f"proxy {self.variables[p].name} must have parents exactly "
                    f"{{{self.variables[x].name}, {self.variables[r].name}}}"
                )
            if self.children[p] or self.siblings[p]:
                raise GraphError(f"proxy {self.variables[p].name} must have no other edges")

    # -- lookup -------------------------------------------------------------
    def __len__(self) -> int:
        return len(self.variables)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def all(self) -> VarSet:
        return (1 << len(self.variables)) - 1

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown variable {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def mask(self, names: Iterable[str]) -> VarSet:
        if isinstance(names, str):
            names = [names]
        m = 0
        for name in names:
            m |= 1 << self.index(name)
        return m

    def names_of(self, mask: VarSet) -> List[str]:
        return [self.variables[i].name for i in bits(mask)]

    def kind(self, i: int) -> VarKind:
        return self.variables[i].kind

    def kind_mask(self, kind: VarKind) -> VarSet:
        m = 0
        for v in self.variables:
            if v.kind is kind:
                m |= 1 << v.index
        return m

    def __eq__(self, other) -> bool:
        if not isinstance(other, CausalGraph):
            return NotImplemented
        return (
            self.variables == other.variables
            and set(self.directed_edges) == set(other.directed_edges)
            and set(self.bidirected_edges) == set(other.bidirected_edges)
            and self.missing_map == other.missing_map
        )

    def __hash__(self) -> int:
        return hash((self.variables, frozenset(self.directed_edges), frozenset(self.bidirected_edges)))

    def __repr__(self) -> str:
        return (
            f"CausalGraph({len(self)} variables, {len(self.directed_edges)} directed, "
            f"{len(self.bidirected_edges)} bidirected)"
        )

    # -- structural queries -------------------------------------------------
    def _pa(self, v: int, cut_in: VarSet, cut_out: VarSet) -> VarSet:
        if cut_in >> v & 1:
            return 0
        return self.parents[v] & ~cut_out

    def _ch(self, v: int, cut_in: VarSet, cut_out: VarSet) -> VarSet:
        if cut_out >> v & 1:
            return 0
        return self.children[v] & ~cut_in

    def _sib(self, v: int, cut_in: VarSet) -> VarSet:
        if cut_in >> v & 1:
            return 0
        return self.siblings[v] & ~cut_in

    def ancestors(self, s: VarSet, cut_in: VarSet = 0, cut_out: VarSet = 0) -> VarSet:
        """Reflexive ancestors of ``s``, optionally in a mutilated graph."""
        result = s
        frontier = s
        while frontier:
            nxt = 0
            for v in bits(frontier):
                nxt |= self._pa(v, cut_in, cut_out)
            frontier = nxt & ~result
            result |= nxt
        return result

    def descendants(self, s: VarSet, cut_in: VarSet = 0, cut_out: VarSet = 0) -> VarSet:
        """Reflexive descendants of ``s``, optionally in a mutilated graph."""
        result = s
        frontier = s
        while frontier:
            nxt = 0
            for v in bits(frontier):
                nxt |= self._ch(v, cut_in, cut_out)
            frontier = nxt & ~result
            result |= nxt
        return result

    def mutilate(self, cut_incoming: VarSet = 0, cut_outgoing: VarSet = 0) -> "CausalGraph":
        """Copy without edges into ``cut_incoming`` or out of ``cut_outgoing``.

        Bidirected edges touching ``cut_incoming`` go too, since they stand for
        a latent parent. Bidirected edges at ``cut_outgoing`` are kept.
        """
        if not cut_incoming and not cut_outgoing:
            return self
        directed = [
            (a, b)
            for a, b in self.directed_edges
            if not (cut_incoming >> b & 1) and not (cut_outgoing >> a & 1)
        ]
        bidirected = [
            (a, b)
            for a, b in self.bidirected_edges
            if not (cut_incoming >> a & 1) and not (cut_incoming >> b & 1)
        ]
        return CausalGraph(
            self.names,
            directed,
            bidirected,
            kinds=[v.kind for v in self.variables],
            missing_map=self.missing_map,
        )

    def d_separated(self, a: VarSet, b: VarSet, c: VarSet = 0) -> bool:
        """True iff ``a`` and ``b`` are d-separated given ``c``."""
        if not a or not b:
            raise ValueError("d_separated needs nonempty a and b")
        if a & b or a & c or b & c:
            raise ValueError("a, b and c must be pairwise disjoint")
        return self.dsep(a, b, c)

    def dsep(self, a: VarSet, b: VarSet, c: VarSet, cut_in: VarSet = 0, cut_out: VarSet = 0) -> bool:
        """Unchecked reachability test in the graph mutilated by the cut sets.

        Bayes-ball: a node entered from a child may continue anywhere unless
        observed; a node entered from a parent passes downwards unless observed
        and bounces upwards when it is an ancestor of ``c``. A bidirected edge
        is an unobserved fork, so crossing it always enters the far end from
        above.
        """
        anc_c = self.ancestors(c, cut_in, cut_out)
        up = a  # entered from a child (or start)
        down = 0  # entered from a parent
        seen_up = 0
        seen_down = 0
        while up or down:
            if (up | down) & b:
                return False
            seen_up |= up
            seen_down |= down
            nxt_up = 0
            nxt_down = 0
            for v in bits(up & ~c):
                nxt_up |= self._pa(v, cut_in, cut_out)
                nxt_down |= self._ch(v, cut_in, cut_out) | self._sib(v, cut_in)
            for v in bits(down):
                if not (c >> v & 1):
                    nxt_down |= self._ch(v, cut_in, cut_out)
                if anc_c >> v & 1:
                    nxt_up |= self._pa(v, cut_in, cut_out)
                    nxt_down |= self._sib(v, cut_in)
            up = nxt_up & ~seen_up
            down = nxt_down & ~seen_down
        return True

    # -- serialization ------------------------------------------------------
    def to_dsl(self) -> str:
        """Render as graph DSL text; ``parse_graph`` recovers the same graph."""
        lines = []
        order: List[int] = []
        stmts = [(a, b, "->") for a, b in self.directed_edges] + [
            (a, b, "<->") for a, b in self.bidirected_edges
        ]
        for a, b, _ in stmts:
            for v in (a, b):
                if v not in order:
                    order.append(v)
        isolated = [i for i in range(len(self)) if i not in order]
        if order + isolated != list(range(len(self))):
            # Declare every vertex first so first-appearance order survives.
            lines.extend(v.name for v in self.variables)
        for a, b, arrow in stmts:
            lines.append(f"{self.variables[a].name} {arrow} {self.variables[b].name}")
        if order + isolated == list(range(len(self))):
            lines.extend(self.variables[i].name for i in isolated)
        return "\n".join(lines)


def parse_graph(text: str) -> CausalGraph:
    """Parse ``A -> B`` / ``A <-> B`` statements; a lone name declares a vertex.

    Variables are numbered in order of first appearance and repeated edge
    statements collapse to one edge.
    """
    tokens = _tokenize(text)
    names: List[str] = []
    index: Dict[str, int] = {}
    directed = []
    bidirected = []

    def ident(tok: str) -> int:
        if tok in ("->", "<->"):
            raise GraphError(f"expected a variable name, found {tok!r}")
        if tok not in index:
            index[tok] = len(names)
            names.append(tok)
        return index[tok]

    i = 0
    while i < len(tokens):
        a = ident(tokens[i])
        if i + 1 < len(tokens) and tokens[i + 1] in ("->", "<->"):
            if i + 2 >= len(tokens):
                raise GraphError(f"edge statement from {tokens[i]!r} has no target")
            b = ident(tokens[i + 2])
            if a == b:
                raise GraphError(f"self-loop on {tokens[i]}")
            (directed if tokens[i + 1] == "->" else bidirected).append((a, b))
            i += 3
        else:
            i += 1
    return CausalGraph(names, directed, bidirected)


_MISSING_PAIR = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*:\s*([A-Za-z_][A-Za-z0-9_]*)\s*$")


def parse_missing_spec(spec: str) -> List[Tuple[str, str]]:
    """Parse ``"R_X : X, R_Y : Y"`` into ``[("R_X", "X"), ("R_Y", "Y")]``."""
    pairs = []
    if not spec or not spec.strip():
        return pairs
    for chunk in spec.split(","):
        m = _MISSING_PAIR.match(chunk)
        if m is None:
            raise GraphError(f"malformed missing-data entry {chunk.strip()!r}")
        pairs.append((m.group(1), m.group(2)))
    return pairs


def augment_missing(g: CausalGraph, spec: str) -> CausalGraph:
    """Add a proxy ``X*`` with parents ``{X, R_X}`` for every ``R_X : X`` pair.

    Indicators missing from the graph are created as isolated vertices.
    """
    pairs = parse_missing_spec(spec)
    if not pairs:
        return g
    names = list(g.names)
    kinds = [v.kind for v in g.variables]
    directed = list(g.directed_edges)
    bidirected = list(g.bidirected_edges)
    missing = dict(g.missing_map)
    targets = set(missing.values())

    for r_name, x_name in pairs:
        if x_name not in g:
            raise GraphError(f"missing-data target {x_name!r} is not a graph variable")
        x = names.index(x_name)
        if kinds[x] is not VarKind.SUBSTANTIVE or x_name.endswith("*"):
            raise GraphError(f"missing-data target {x_name!r} must be substantive")
        if r_name in names:
            r = names.index(r_name)
            if r in missing:
                raise GraphError(f"response indicator {r_name!r} is mapped twice")
        else:
            names.append(r_name)
            kinds.append(VarKind.INDICATOR)
            r = len(names) - 1
        if r == x:
            raise GraphError(f"{r_name!r} cannot indicate itself")
        if x in targets:
            raise GraphError(f"variable {x_name!r} already has a response indicator")
        kinds[r] = VarKind.INDICATOR
        missing[r] = x
        targets.add(x)

    for r, x in missing.items():
        if r in g.missing_map:
            continue
        proxy_name = names[x] + "*"
        if proxy_name in names:
            p = names.index(proxy_name)
        else:
            names.append(proxy_name)
            kinds.append(VarKind.PROXY)
            p = len(names) - 1
        kinds[p] = VarKind.PROXY
        directed.extend([(x, p), (r, p)])

    return CausalGraph(names, directed, bidirected, kinds=kinds, missing_map=missing)
