"""Command-line front end.

    idsearch run FILE [--json] [--trace] [--limits terms=N,seconds=S] [--verify seed=K]
    idsearch batch MANIFEST [--json] [--jobs N] [--limits ...]
    idsearch verify FILE (--seed K | --scm JSON) [--inject-formula FILE] [--tol T]

Exit codes for ``run``: 0 identifiable, 1 not identifiable by rule closure,
2 inconclusive (a limit was hit). ``batch`` and ``verify`` exit 0 on success
and 1 on a mismatch or an out-of-tolerance discrepancy. 64 and up follow
sysexits: 64 usage, 65 bad scenario or data, 66 missing file, 70 a failed
``run --verify`` self-check.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

from .engine import IdentifyResult, SearchLimits, Status, identify
from .formula import parse_formula
from .scenarios import DATA_DIR, load
from .scm import DiscreteScm, ZeroProbabilityError, formula_check, formula_discrepancy, random_scm

EXIT_CODES = {Status.IDENTIFIABLE: 0, Status.NOT_IDENTIFIABLE: 1, Status.INCONCLUSIVE: 2}
EX_USAGE, EX_DATAERR, EX_NOINPUT, EX_SOFTWARE = 64, 65, 66, 70
DEFAULT_TOL = 1e-9
SCHEMA_PATH = DATA_DIR / "report.schema.json"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage, which would collide with "inconclusive"
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(f"{self.prog}: error: {message}", EX_USAGE)


def parse_limits(text: Optional[str]) -> SearchLimits:
    if not text:
        return SearchLimits()
    fields = {}
    for item in text.split(","):
        key, sep, value = item.partition("=")
        key = key.strip()
        try:
            if not sep:
                raise ValueError
            if key == "terms":
                fields["max_terms"] = int(value)
            elif key == "seconds":
                fields["max_seconds"] = float(value)
            elif key == "subset":
                fields["max_subset"] = int(value)
            else:
                raise ValueError
        except ValueError:
            raise CliError(f"bad --limits item {item!r}; expected terms=N,seconds=S", EX_USAGE)
    return SearchLimits(**fields)


def parse_seed(text: str) -> int:
    key, sep, value = text.partition("=")
    if sep and key.strip() != "seed":
        raise CliError(f"bad --verify value {text!r}; expected seed=K", EX_USAGE)
    try:
        return int(value if sep else key)
    except ValueError:
        raise CliError(f"bad --verify value {text!r}; expected seed=K", EX_USAGE)


def _read_scenario(path: str):
    p = Path(path)
    if not p.is_file():
        raise CliError(f"no such scenario file: {path}", EX_NOINPUT)
    try:
        sc = load(p)
        return sc, sc.spec()
    except ValueError as exc:
        raise CliError(f"{path}: {exc}", EX_DATAERR)


def build_report(result: IdentifyResult, with_trace: bool = True) -> dict:
    g = result.query.graph
    return {
        "identifiable": result.identifiable,
        "status": result.status.value,
        "formula": result.formula_string(),
        "trace": [s.describe(g) for s in result.trace] if with_trace else [],
        "stats": dict(result.stats),
    }


def _verdict_text(result: IdentifyResult) -> List[str]:
    lines = [f"identifiable: {'TRUE' if result.identifiable else 'FALSE'}"]
    if result.identifiable:
        lines.append(f"formula: {result.formula_string()}")
    else:
        lines.append(f"status: {result.status.value}")
    return lines


def _trace_text(report: dict) -> List[str]:
    lines = ["trace:"]
    for i, step in enumerate(report["trace"], 1):
        extra = ", ".join(f"{k}={v}" for k, v in step.items() if k not in ("rule", "parents", "produced"))
        src = " ; ".join(step["parents"])
        lines.append(f"  {i:3d}. {step['rule']}{f' [{extra}]' if extra else ''}: {src} => {step['produced']}")
    return lines


def _discrepancy(result: IdentifyResult, formula, m: DiscreteScm) -> float:
    q = result.query
    return formula_discrepancy(formula, q.target, q.inputs, m)


# -- subcommands --------------------------------------------------------------------


def cmd_run(args, out: TextIO) -> int:
    _, q = _read_scenario(args.file)
    result = identify(q, parse_limits(args.limits))
    report = build_report(result, with_trace=args.trace or args.json)
    code = EXIT_CODES[result.status]
    if args.verify is not None:
        seed = parse_seed(args.verify)
        if result.identifiable:
            gap = _discrepancy(result, result.formula, random_scm(q.graph, seed=seed))
            report["verify"] = {"seed": seed, "max_abs_discrepancy": gap, "tolerance": DEFAULT_TOL}
            if gap > DEFAULT_TOL:
                code = EX_SOFTWARE
        else:
            report["verify"] = None
    if args.json:
        out.write(json.dumps(report, indent=2) + "\n")
        return code
    lines = _verdict_text(result)
    if args.trace and result.identifiable:
        lines += _trace_text(report)
    if report.get("verify"):
        v = report["verify"]
        lines.append(f"verify: seed {v['seed']} max |error| {v['max_abs_discrepancy']:.3g}")
    s = result.stats
    lines.append(f"stats: {s['terms_generated']} terms, {s['steps_applied']} steps, {s['wall_time']:.3f} s")
    out.write("\n".join(lines) + "\n")
    return code


def _resolve_manifest(name: str) -> Path:
    p = Path(name)
    if p.is_file():
        return p
    shipped = DATA_DIR / "manifests" / f"{p.stem}.json"
    if not p.suffix and shipped.is_file():
        return shipped
    raise CliError(f"no such manifest: {name}", EX_NOINPUT)


def _batch_one(path: str, limits: SearchLimits) -> Tuple[str, float]:
    _, q = _read_scenario(path)
    result = identify(q, limits)
    return result.status.value, result.stats["wall_time"]


_MARK = {
    Status.IDENTIFIABLE.value: "+",
    Status.NOT_IDENTIFIABLE.value: "-",
    Status.INCONCLUSIVE.value: "?",
}


def _expected_status(text: str) -> str:
    t = text.strip().lower()
    if t in ("identifiable", "+", "true", "yes"):
        return Status.IDENTIFIABLE.value
    if t.startswith("not") or t in ("-", "false", "no"):
        return Status.NOT_IDENTIFIABLE.value
    raise CliError(f"bad expected verdict {text!r}", EX_DATAERR)


def run_batch(manifest: dict, base: Path, limits: SearchLimits, jobs: int = 1) -> List[dict]:
    entries = manifest.get("entries", [])
    paths = []
    for e in entries:
        p = (base / e["scenario"]).resolve()
        if not p.is_file():
            raise CliError(f"missing fixture: {e['scenario']}", EX_NOINPUT)
        paths.append(str(p))
    if jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_batch_one, paths, [limits] * len(paths)))
    else:
        outcomes = [_batch_one(p, limits) for p in paths]
    rows = []
    for e, (status, wall) in zip(entries, outcomes):
        expected = _expected_status(e["expected"])
        rows.append(
            {
                "scenario": e["scenario"],
                "row": str(e.get("row", "")),
                "column": str(e.get("column", "")),
                "expected": expected,
                "got": status,
                "match": status == expected,
                "wall_time": wall,
            }
        )
    return rows


def render_grid(manifest: dict, rows: List[dict]) -> List[str]:
    row_keys = manifest.get("rows") or sorted({r["row"] for r in rows})
    col_keys = manifest.get("columns") or sorted({r["column"] for r in rows})
    cell: Dict[Tuple[str, str], dict] = {(r["row"], r["column"]): r for r in rows}
    width = max([len(k) for k in row_keys] + [3])
    lines = [" " * width + "  " + " ".join(col_keys)]
    for rk in row_keys:
        marks = []
        for ck in col_keys:
            r = cell.get((rk, ck))
            if r is None:
                marks.append(".")
            else:
                marks.append(_MARK[r["got"]] if r["match"] else "!")
        lines.append(f"{rk:>{width}}  " + " ".join(m.ljust(len(ck)) for m in marks))
    return lines


def cmd_batch(args, out: TextIO) -> int:
    path = _resolve_manifest(args.manifest)
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: {exc}", EX_DATAERR)
    jobs = args.jobs if args.jobs is not None else min(4, os.cpu_count() or 1)
    rows = run_batch(manifest, path.parent, parse_limits(args.limits), jobs)
    bad = [r for r in rows if not r["match"]]
    if args.json:
        out.write(json.dumps({"name": manifest.get("name", path.stem), "cells": rows,
                              "mismatches": len(bad)}, indent=2) + "\n")
        return 1 if bad else 0
    lines = [f"{manifest.get('name', path.stem)}: {len(rows)} scenarios (+ identifiable, - not, ? limit, ! mismatch)"]
    lines += render_grid(manifest, rows)
    for r in bad:
        lines.append(f"mismatch row {r['row']} column {r['column']}: expected {r['expected']}, got {r['got']}")
    lines.append(f"mismatches: {len(bad)}")
    lines.append(f"search time: {sum(r['wall_time'] for r in rows):.2f} s")
    out.write("\n".join(lines) + "\n")
    return 1 if bad else 0


def cmd_verify(args, out: TextIO) -> int:
    _, q = _read_scenario(args.file)
    if args.scm is not None:
        p = Path(args.scm)
        if not p.is_file():
            raise CliError(f"no such SCM file: {args.scm}", EX_NOINPUT)
        try:
            m = DiscreteScm.from_json(p.read_text(), graph=q.graph)
        except (ValueError, KeyError) as exc:
            raise CliError(f"{args.scm}: {exc}", EX_DATAERR)
        source = f"scm {args.scm}"
    else:
        m = random_scm(q.graph, seed=args.seed)
        source = f"seed {args.seed}"
    if args.inject_formula is not None:
        p = Path(args.inject_formula)
        if not p.is_file():
            raise CliError(f"no such formula file: {args.inject_formula}", EX_NOINPUT)
        try:
            formula = parse_formula(p.read_text().strip(), q.graph)
        except ValueError as exc:
            raise CliError(f"{args.inject_formula}: {exc}", EX_DATAERR)
        origin = "injected"
    else:
        result = identify(q, parse_limits(args.limits))
        if not result.identifiable:
            out.write(f"nothing to verify: {result.status.value}\n")
            return EXIT_CODES[result.status]
        formula = result.formula
        origin = "emitted"
    try:
        check = formula_check(formula, q.target, q.inputs, m)
    except (ValueError, ZeroProbabilityError) as exc:
        raise CliError(f"cannot evaluate: {exc}", EX_DATAERR)
    gap = check.max_abs
    ok = gap <= args.tol
    if args.json:
        out.write(json.dumps({"formula": origin, "model": source, "max_abs_discrepancy": gap,
                              "rows_compared": check.rows, "rows_skipped": check.skipped,
                              "tolerance": args.tol, "pass": ok}, indent=2) + "\n")
    else:
        note = f", {check.skipped} unsupported rows skipped" if check.skipped else ""
        out.write(f"{origin} formula on {source}: max |error| = {gap:.6g} "
                  f"({'within' if ok else 'exceeds'} tolerance {args.tol:g}{note})\n")
    return 0 if ok else 1


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="idsearch", description="Identify causal effects by do-calculus search.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    run = sub.add_parser("run", help="identify the query of one scenario file")
    run.add_argument("file")
    run.add_argument("--json", action="store_true", help="emit the JSON report")
    run.add_argument("--trace", action="store_true", help="include the derivation")
    run.add_argument("--limits", metavar="terms=N,seconds=S")
    run.add_argument("--verify", metavar="seed=K", help="check the formula on a random model")

    batch = sub.add_parser("batch", help="run a manifest of scenarios and compare verdicts")
    batch.add_argument("manifest", help="manifest path, or the name of a shipped one (table1, fig4)")
    batch.add_argument("--json", action="store_true")
    batch.add_argument("--jobs", type=int, help="worker processes (default: up to 4)")
    batch.add_argument("--limits", metavar="terms=N,seconds=S")

    verify = sub.add_parser("verify", help="compare a formula with the true effect in a model")
    verify.add_argument("file")
    src = verify.add_mutually_exclusive_group(required=True)
    src.add_argument("--seed", type=int, help="random binary model seed")
    src.add_argument("--scm", help="model JSON file")
    verify.add_argument("--inject-formula", metavar="FILE", help="use this formula instead (testing)")
    verify.add_argument("--tol", type=float, default=DEFAULT_TOL)
    verify.add_argument("--json", action="store_true")
    verify.add_argument("--limits", metavar="terms=N,seconds=S")
    return parser


COMMANDS = {"run": cmd_run, "batch": cmd_batch, "verify": cmd_verify}


def main(argv: Optional[Sequence[str]] = None, out: Optional[TextIO] = None) -> int:
    out = out or sys.stdout
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EX_USAGE
        return COMMANDS[args.command](args, out)
    except CliError as exc:
        print(exc, file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
