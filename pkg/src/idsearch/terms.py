"""Symbolic distribution terms ``P(A | do(B), C, R=1)`` and their text syntax."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

from .graph import CausalGraph, VarKind, VarSet, augment_missing, bits, parse_graph


class TermError(ValueError):
    """Unparseable or ill-formed distribution term."""


class Term(NamedTuple):
    """Role bitmasks of a distribution term.

    ``fixed_*`` hold response indicators conditioned at 1/0, ``left_fixed_*``
    hold indicators that are part of the joint event at 1/0, so
    ``P(X, R_X=1)`` and ``P(X | R_X=1)`` stay distinct.
    """

    left: VarSet = 0
    dos: VarSet = 0
    cond: VarSet = 0
    fixed_one: VarSet = 0
    fixed_zero: VarSet = 0
    left_fixed_one: VarSet = 0
    left_fixed_zero: VarSet = 0

    @property
    def lhs(self) -> VarSet:
        """Everything on the left of the bar, fixed or not."""
        return self.left | self.left_fixed_one | self.left_fixed_zero

    @property
    def rhs(self) -> VarSet:
        """Observed conditioning variables, fixed or not (``dos`` excluded)."""
        return self.cond | self.fixed_one | self.fixed_zero

    @property
    def fixed(self) -> VarSet:
        return self.fixed_one | self.fixed_zero | self.left_fixed_one | self.left_fixed_zero

    @property
    def mentioned(self) -> VarSet:
        return self.lhs | self.rhs | self.dos

    @property
    def symbolic(self) -> VarSet:
        """Variables that carry a free value (axes of the term's table)."""
        return self.left | self.dos | self.cond


def check_term(t: Term, g: Optional[CausalGraph] = None) -> Term:
    """Validate role disjointness and indicator-only value bindings."""
    roles = list(t)
    seen = 0
    for r in roles:
        if r < 0:
            raise TermError("negative role mask")
        if seen & r:
            raise TermError("a variable appears in two roles")
        seen |= r
    if not t.lhs:
        raise TermError("left side of a term must be nonempty")
    if g is not None:
        if seen & ~g.all:
            raise TermError("term mentions variables outside the graph")
        bad = t.fixed & ~g.kind_mask(VarKind.INDICATOR)
        if bad:
            raise TermError(
                "value bindings are only allowed for response indicators: "
                + ", ".join(g.names_of(bad))
            )
    return t


def canonicalize(t: Term) -> Term:
    """Role sets are already canonical bitmasks; returns an equal ``Term``."""
    return Term(*(int(r) for r in t))


def stable_hash(t: Term) -> str:
    """Process-independent digest of the role sets."""
    payload = b"".join(int(r).to_bytes(8, "little") for r in canonicalize(t))
    return hashlib.blake2b(payload, digest_size=8).hexdigest()


# -- text syntax ------------------------------------------------------------

_NAME = r"[A-Za-z_][A-Za-z0-9_]*\*?"
_ITEM = re.compile(rf"^(?:({_NAME})\s*=\s*([01])|({_NAME}))$")


def _split_items(body: str) -> List[str]:
    items = []
    depth = 0
    cur = []
    for ch in body:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            items.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail or items:
        items.append(tail)
    return items


def parse_term(text: str, g: CausalGraph) -> Term:
    """Parse ``P(A,B | do(C), D, R_D=1)`` against the variables of ``g``."""
    s = text.strip()
    m = re.match(r"^[Pp]\s*\((.*)\)$", s, re.S)
    if m is None:
        raise TermError(f"expected P(...), got {text!r}")
    body = m.group(1)
    if body.count("|") > 1:
        raise TermError(f"more than one '|' in {text!r}")
    left_txt, _, right_txt = body.partition("|")
    roles = dict(left=0, dos=0, cond=0, fixed_one=0, fixed_zero=0, left_fixed_one=0, left_fixed_zero=0)
    taken = 0

    def put(role: str, name: str) -> None:
        nonlocal taken
        if name not in g:
            raise TermError(f"unknown variable {name!r} in {text!r}")
        bit = 1 << g.index(name)
        if taken & bit:
            raise TermError(f"variable {name!r} appears in two roles in {text!r}")
        taken |= bit
        roles[role] |= bit

    def put_item(item: str, side: str) -> None:
        if not item:
            raise TermError(f"empty list entry in {text!r}")
        dm = re.match(r"^do\s*\((.*)\)$", item, re.S)
        if dm is not None:
            if side == "left":
                raise TermError(f"do() is not allowed left of '|' in {text!r}")
            for name in _split_items(dm.group(1)):
                if not re.fullmatch(_NAME, name):
                    raise TermError(f"bad name {name!r} inside do() in {text!r}")
                put("dos", name)
            return
        im = _ITEM.match(item)
        if im is None:
            raise TermError(f"cannot parse {item!r} in {text!r}")
        if im.group(3):
            put("left" if side == "left" else "cond", im.group(3))
            return
        name, value = im.group(1), im.group(2)
        if name in g and g.kind(g.index(name)) is not VarKind.INDICATOR:
            raise TermError(f"value binding on non-indicator {name!r} in {text!r}")
        prefix = "left_" if side == "left" else ""
        put(prefix + ("fixed_one" if value == "1" else "fixed_zero"), name)

    for item in _split_items(left_txt):
        put_item(item, "left")
    for item in _split_items(right_txt) if right_txt.strip() else []:
        put_item(item, "right")
    t = Term(**roles)
    if not t.lhs:
        raise TermError(f"empty left side in {text!r}")
    return check_term(t, g)


def split_terms(text: str) -> List[str]:
    """Cut a block like ``"P(Y|do(Z))  P(X,Z)"`` into individual term strings."""
    out = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        if text[i] not in "Pp":
            raise TermError(f"unexpected text {text[i:].split()[0]!r} in data block")
        j = i + 1
        while j < n and text[j].isspace():
            j += 1
        if j >= n or text[j] != "(":
            raise TermError(f"expected '(' after P in {text[i:i + 20]!r}")
        depth = 0
        k = j
        while k < n:
            if text[k] == "(":
                depth += 1
            elif text[k] == ")":
                depth -= 1
                if depth == 0:
                    break
            k += 1
        if depth != 0:
            raise TermError("unbalanced parentheses in data block")
        out.append(text[i:k + 1])
        i = k + 1
    return out


def _join(g: CausalGraph, mask: VarSet) -> List[str]:
    return g.names_of(mask)


def render_term(t: Term, g: CausalGraph, prefix: str = "p") -> str:
    """``p(left,R=1|do(dos),cond,R=1)`` with names in variable-index order."""
    left = _join(g, t.left)
    left += [f"{n}=1" for n in _join(g, t.left_fixed_one)]
    left += [f"{n}=0" for n in _join(g, t.left_fixed_zero)]
    right = []
    if t.dos:
        right.append("do(" + ",".join(_join(g, t.dos)) + ")")
    right += _join(g, t.cond)
    right += [f"{n}=1" for n in _join(g, t.fixed_one)]
    right += [f"{n}=0" for n in _join(g, t.fixed_zero)]
    body = ",".join(left)
    if right:
        body += "|" + ",".join(right)
    return f"{prefix}({body})"


@dataclass
class QuerySpec:
    """A target term, the available input terms and the graph they live on."""

    target: Term
    inputs: List[Term]
    graph: CausalGraph
    experimental: bool = field(default=False)

    def __post_init__(self):
        check_term(self.target, self.graph)
        for t in self.inputs:
            check_term(t, self.graph)
        # Queries conditioning on an indicator value are accepted but untested territory.
        self.experimental = bool(self.target.fixed)

    @classmethod
    def parse(
        cls,
        graph: str,
        data: str,
        query: str,
        missing: Optional[str] = None,
    ) -> "QuerySpec":
        g = parse_graph(graph)
        if missing:
            g = augment_missing(g, missing)
        inputs = [parse_term(s, g) for s in split_terms(data)]
        return cls(parse_term(query, g), inputs, g)


__all__ = [
    "Term",
    "TermError",
    "QuerySpec",
    "bits",
    "canonicalize",
    "check_term",
    "parse_term",
    "render_term",
    "split_terms",
    "stable_hash",
]
