"""Scenario files and the built-in fixture suites.

A scenario file is sectioned plain text::

    [meta]
    label = front-door
    [graph]
    X -> Z
    Z -> Y
    X <-> Y
    [data]
    P(Y|do(Z))
    P(X,Z)
    [query]
    P(Y|do(X))
    [missing]
    R_Z : Z

``[meta]`` and ``[missing]`` are optional. Lines starting with ``#`` are
comments everywhere.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from .terms import QuerySpec, split_terms

SECTIONS = ("meta", "graph", "data", "query", "missing")


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    graph: str
    data: List[str]
    query: str
    missing: str = ""
    meta: Dict[str, str] = field(default_factory=dict)

    @property
    def label(self) -> str:
        return self.meta.get("label", "")

    def spec(self) -> QuerySpec:
        return QuerySpec.parse(self.graph, " ".join(self.data), self.query, self.missing or None)

    def dumps(self) -> str:
        out = []
        if self.meta:
            out.append("[meta]")
            out.extend(f"{k} = {v}" for k, v in self.meta.items())
        out.append("[graph]")
        out.extend(line.strip() for line in self.graph.strip().splitlines() if line.strip())
        out.append("[data]")
        out.extend(self.data)
        out.append("[query]")
        out.append(self.query)
        if self.missing:
            out.append("[missing]")
            out.append(self.missing)
        return "\n".join(out) + "\n"


_HEADER = re.compile(r"^\[(\w+)\]$")


def loads(text: str) -> Scenario:
    blocks: Dict[str, List[str]] = {}
    current: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _HEADER.match(line)
        if m:
            current = m.group(1).lower()
            if current not in SECTIONS:
                raise ScenarioError(f"line {lineno}: unknown section [{current}]")
            if current in blocks:
                raise ScenarioError(f"line {lineno}: section [{current}] repeated")
            blocks[current] = []
            continue
        if current is None:
            raise ScenarioError(f"line {lineno}: text before the first section header")
        blocks[current].append(line)
    for required in ("graph", "data", "query"):
        if required not in blocks:
            raise ScenarioError(f"missing [{required}] section")
    if len(blocks["query"]) != 1:
        raise ScenarioError("[query] must hold exactly one term")
    meta = {}
    for line in blocks.get("meta", []):
        key, sep, value = line.partition("=")
        if not sep:
            raise ScenarioError(f"[meta] line {line!r} is not key = value")
        meta[key.strip()] = value.strip()
    data = split_terms(" ".join(blocks["data"]))
    return Scenario(
        graph="\n".join(blocks["graph"]),
        data=data,
        query=blocks["query"][0],
        missing=", ".join(blocks.get("missing", [])),
        meta=meta,
    )


def load(path) -> Scenario:
    return loads(Path(path).read_text())


# -- fixture suites ----------------------------------------------------------------
# Graph texts are kept verbatim, including a repeated `Z -> Y` line.

FIG1_GRAPHS: Dict[str, str] = {
    "a": "X -> Z\nZ -> Y\nZ -> Y\nX <-> Y",
    "b": "X -> Z\nZ -> Y\nX <-> Z",
    "c": "X -> Z\nZ -> Y\nX <-> Y\nX <-> Z",
    "d": "X -> Z\nZ -> Y\nZ <-> Y",
    "e": "X -> Z\nZ -> Y\nZ <-> Y\nX <-> Y",
    "f": "X -> Z\nZ -> Y\nW -> X\nW -> Z\nW -> Y\nX <-> Y",
    "g": "X -> Z\nZ -> Y\nW -> X\nW -> Z\nW -> Y\nX <-> Y\nX <-> Z",
}

TABLE1_SOURCES: List[List[str]] = [
    ["P(X,Y,Z)"],
    ["P(X,Z)", "P(Y|do(Z))"],
    ["P(Z|do(X))", "P(Y|do(Z))"],
    ["P(Z,Y)", "P(Z|do(X))"],
    ["P(X,Z)", "P(X,Y)", "P(Z,Y)", "P(Z|do(X))"],
    ["P(X,Y,Z,W)"],
    ["P(X,Z,W)", "P(Y|do(Z),W)"],
    ["P(Z|do(X),W)", "P(Y|do(Z),W)"],
    ["P(Z|do(X),W)", "P(Y|do(Z),W)", "P(W)"],
]

# Rows are data sources, columns graphs a..g; "+" identifiable, "-" not.
TABLE1_EXPECTED: List[str] = [
    "+--+---",
    "+------",
    "+++----",
    "-+-----",
    "-+-+---",
    "+--+-+-",
    "+----+-",
    "+++----",
    "+++--++",
]

QUERY = "P(Y|do(X))"

FIG2_GRAPH = "X -> Z\nZ -> Y\nX <-> Y"
FIG2_DATA = ["P(Y|do(Z))", "P(X,Z)"]
FIG2_FORMULA = "[sum_{Z} [p(Z|X)*p(Y|do(Z))]]"

# H is confounded with W.
FIG3_GRAPH = (
    "X -> Z\nZ -> Y\nW -> X\nW -> Z\nW -> Y\nH -> X\nH -> Z\nX <-> Y\nH <-> W"
)
FIG3_DATA = ["P(X,Z,H,W)", "P(Y|do(Z),W)"]

FIG4_GRAPHS: Dict[str, str] = {
    "a": (
        "X -> Z\nZ -> Y\nZ -> Y\nX <-> Y\nX -> R_Z\nY -> R_Z\n"
        "R_X <-> R_Z\nR_X <-> R_Y\nR_Z <-> R_Y"
    ),
    "b": (
        "X -> Z\nZ -> Y\nZ -> Y\nX <-> Y\nY -> R_Y\nR_Y -> R_X\nR_Y -> R_Z\n"
        "R_X <-> R_Z\nR_X <-> R_Y\nR_Z <-> R_Y"
    ),
}
FIG4_SOURCES: List[List[str]] = [
    ["P(X*,Y*,Z*,R_X,R_Y,R_Z)"],
    ["P(X*,Y*,Z*,R_X,R_Y,R_Z)", "P(Y)"],
    ["P(X*,Y*,Z*,R_X,R_Y,R_Z)", "P(R_Y|Y)"],
]
FIG4_MISSING = "R_X : X, R_Y : Y, R_Z : Z"
# Rows are data sources, columns graphs a, b.
FIG4_EXPECTED: List[str] = ["+-", "++", "++"]


def _mentions_w(data: List[str]) -> bool:
    return any(re.search(r"\bW\b", d) for d in data)


def table1_scenario(row: int, col: str) -> Scenario:
    """Row is 1-based; graphs a-e gain an isolated W when the data mention it."""
    data = TABLE1_SOURCES[row - 1]
    graph = FIG1_GRAPHS[col]
    if col in "abcde" and _mentions_w(data):
        graph += "\nW"
    expected = TABLE1_EXPECTED[row - 1]["abcdefg".index(col)] == "+"
    return Scenario(
        graph,
        list(data),
        QUERY,
        meta={
            "label": f"table1 row {row} graph {col}",
            "expected": "identifiable" if expected else "not identifiable",
        },
    )


def fig2_scenario() -> Scenario:
    return Scenario(
        FIG2_GRAPH, list(FIG2_DATA), QUERY,
        meta={"label": "front-door (fig 2)", "expected": "identifiable"},
    )


def fig3_scenario() -> Scenario:
    return Scenario(
        FIG3_GRAPH, list(FIG3_DATA), QUERY,
        meta={"label": "fig 3", "expected": "identifiable"},
    )


def fig4_scenario(row: int, col: str) -> Scenario:
    expected = FIG4_EXPECTED[row - 1]["ab".index(col)] == "+"
    return Scenario(
        FIG4_GRAPHS[col],
        list(FIG4_SOURCES[row - 1]),
        QUERY,
        missing=FIG4_MISSING,
        meta={
            "label": f"fig4 sources {row} graph {col}",
            "expected": "identifiable" if expected else "not identifiable",
        },
    )


def all_fixtures() -> Dict[str, Scenario]:
    """Relative file name -> scenario, for every shipped fixture."""
    out: Dict[str, Scenario] = {"fig2.scn": fig2_scenario(), "fig3.scn": fig3_scenario()}
    for row in range(1, 10):
        for col in "abcdefg":
            out[f"table1/row{row}_{col}.scn"] = table1_scenario(row, col)
    for row in range(1, 4):
        for col in "ab":
            out[f"fig4/sources{row}_{col}.scn"] = fig4_scenario(row, col)
    return out


def manifests() -> Dict[str, dict]:
    from .witnesses import CELL_WITNESS, UNCOVERED

    def witness(row: int, col: str) -> Optional[str]:
        if (row, col) in CELL_WITNESS:
            return CELL_WITNESS[row, col]
        if (row, col) in UNCOVERED:
            return "paper-asserted, oracle-uncovered"
        return None

    table1 = {
        "name": "table1",
        "rows": [f"{i}" for i in range(1, 10)],
        "columns": list("abcdefg"),
        "entries": [
            {
                "scenario": f"../scenarios/table1/row{row}_{col}.scn",
                "row": str(row),
                "column": col,
                "expected": table1_scenario(row, col).meta["expected"],
                **({"witness": witness(row, col)} if witness(row, col) else {}),
            }
            for row in range(1, 10)
            for col in "abcdefg"
        ],
    }
    fig4 = {
        "name": "fig4",
        "rows": ["1", "2", "3"],
        "columns": ["a", "b"],
        "entries": [
            {
                "scenario": f"../scenarios/fig4/sources{row}_{col}.scn",
                "row": str(row),
                "column": col,
                "expected": fig4_scenario(row, col).meta["expected"],
            }
            for row in range(1, 4)
            for col in "ab"
        ],
    }
    return {"table1.json": table1, "fig4.json": fig4}


DATA_DIR = Path(__file__).resolve().parent / "data"


def write_fixtures(root: Path = DATA_DIR) -> List[Path]:
    """Regenerate the shipped scenario files and manifests under ``root``."""
    written = []
    for rel, sc in all_fixtures().items():
        path = root / "scenarios" / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(sc.dumps())
        written.append(path)
    for name, obj in manifests().items():
        path = root / "manifests" / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(obj, indent=2) + "\n")
        written.append(path)
    return written


if __name__ == "__main__":
    for p in write_fixtures():
        print(p)
