"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in
the terminal summary under "acceptance criteria".
"""

import json
import random
import time
from fractions import Fraction

import numpy as np

from conftest import record, solved
from idsearch.cli import run_batch
from idsearch.formula import bind_atoms, evaluate, parse_formula
from idsearch.scenarios import DATA_DIR, FIG2_FORMULA, TABLE1_EXPECTED
from idsearch.scm import check_witness, formula_check, random_scm
from idsearch.engine import SearchLimits
from idsearch.terms import parse_term
from idsearch.witnesses import (
    CELL_WITNESS,
    CONSTRUCTIONS,
    SYMBOLIC,
    Params,
    first_of_3,
    witness_for_cell,
    xor_scm,
)

SEEDS = range(100)
TOL = 1e-9

IDENTIFIABLE_CELLS = [
    (row, col)
    for row in range(1, 10)
    for k, col in enumerate("abcdefg")
    if TABLE1_EXPECTED[row - 1][k] == "+"
]
FIG4_IDENTIFIABLE = [(1, "a"), (2, "a"), (2, "b"), (3, "a"), (3, "b")]


def _worst(q, result, seeds=SEEDS):
    worst, skipped = 0.0, 0
    for s in seeds:
        c = formula_check(result.formula, q.target, q.inputs, random_scm(q.graph, seed=s))
        worst = max(worst, c.max_abs)
        skipped += c.skipped
    return worst, skipped


def test_criterion_1_table1_grid():
    manifest_path = DATA_DIR / "manifests" / "table1.json"
    manifest = json.loads(manifest_path.read_text())
    start = time.perf_counter()
    rows = run_batch(manifest, manifest_path.parent, SearchLimits(), jobs=1)
    elapsed = time.perf_counter() - start
    bad = [(r["row"], r["column"]) for r in rows if not r["match"]]
    ok = len(rows) == 63 and not bad and elapsed < 60
    record(1, ok, f"{len(rows)} cells, {len(bad)} mismatches {bad}, {elapsed:.2f} s (limit 60 s)")
    assert len(rows) == 63
    assert not bad
    assert elapsed < 60


def test_criterion_2_front_door_formula_is_bit_exact():
    _, result = solved("fig2")
    got = result.formula_string()
    ok = result.identifiable and got == "[sum_{Z} [p(Z|X)*p(Y|do(Z))]]"
    record(2, ok, f"identifiable={result.identifiable}, formula {got}")
    assert result.identifiable
    assert got == FIG2_FORMULA == "[sum_{Z} [p(Z|X)*p(Y|do(Z))]]"


def test_criterion_3_soundness_on_random_models():
    start = time.perf_counter()
    cases = [("table1", r, c) for r, c in IDENTIFIABLE_CELLS]
    cases += [("fig3", 0, "")] + [("fig4", r, c) for r, c in FIG4_IDENTIFIABLE]
    failures = []
    worst_all = 0.0
    for case in cases:
        q, result = solved(*case)
        if not result.identifiable:
            failures.append((case, "not identifiable"))
            continue
        worst, skipped = _worst(q, result)
        worst_all = max(worst_all, worst)
        if worst > TOL or skipped:
            failures.append((case, worst))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 300
    record(
        3,
        ok,
        f"{len(cases)} scenarios x {len(SEEDS)} models, max error {worst_all:.2e} "
        f"(tol {TOL:g}), {elapsed:.1f} s (limit 300 s)",
    )
    assert not failures, failures
    assert elapsed < 300


def _random_params(rng: random.Random) -> Params:
    # |a-b|, |p-1/2|, |q-1/2| bounded away from 0 keeps the target gap above 1e-3
    while True:
        k = Params(p=rng.uniform(0.05, 0.95), q=rng.uniform(0.05, 0.95),
                   a=rng.uniform(0.05, 0.95), b=rng.uniform(0.05, 0.95))
        if abs(k.a - k.b) >= 0.1 and abs(k.p - 0.5) >= 0.1 and abs(k.q - 0.5) >= 0.1:
            return k


def _value(m, text, g, **assignment):
    t = parse_term(text, g)
    tab = m.enumerate_term(t)
    return float(tab.values[tuple(assignment[v] for v in tab.variables)])


def test_criterion_4_witness_constructions():
    problems = []
    for (row, col), name in sorted(CELL_WITNESS.items()):
        rep = check_witness(witness_for_cell(row, col))
        if not (rep.input_gap <= 1e-12 and rep.target_gap > 1e-3):
            problems.append((row, col, name, rep))

    # fully numeric construction: exact rational values
    q, _ = solved("table1", 4, "a")
    g = q.graph
    m1, m2 = first_of_3(g)
    yz = _value(m1, "P(Z,Y)", g, Z=1, Y=1)
    t1 = _value(m1, "P(Y|do(X))", g, Y=1, X=1)
    t2 = _value(m2, "P(Y|do(X))", g, Y=1, X=1)
    xy = _value(m1, "P(X,Y)", g, X=1, Y=1)
    numeric = {
        "P1(Y=1,Z=1)": (yz, Fraction(53, 160)),
        "P1(Y=1|do(X=1))": (t1, Fraction(13, 20)),
        "P2(Y=1|do(X=1))": (t2, Fraction(5, 8)),
        "P(X=1,Y=1)": (xy, Fraction(33, 128)),
    }
    for label, (got, want) in numeric.items():
        if abs(got - float(want)) > 1e-12:
            problems.append((label, got, want))

    rng = random.Random(20240607)
    draws = 0
    for name in SYMBOLIC:
        cells = [cell for cell, n in CELL_WITNESS.items() if n == name]
        for _ in range(50):
            k = _random_params(rng)
            row, col = rng.choice(cells)
            rep = check_witness(witness_for_cell(row, col, k))
            draws += 1
            if not (rep.input_gap <= 1e-12 and rep.target_gap > 1e-3):
                problems.append((name, row, col, k, rep))

    ok = not problems
    record(
        4,
        ok,
        f"{len(CELL_WITNESS)} cells over {len(CONSTRUCTIONS)} constructions, exact values "
        f"53/160 13/20 5/8 33/128, {draws} random symbolic draws; {len(problems)} problems",
    )
    assert not problems, problems


def test_criterion_5_xor_chain_of_experiments():
    q, result = solved("table1", 3, "d")
    g = q.graph
    m = xor_scm()
    z_do_x = m.enumerate_term(parse_term("P(Z|do(X))", g)).values
    y_do_z = m.enumerate_term(parse_term("P(Y|do(Z))", g)).values
    y_do_x = m.enumerate_term(parse_term("P(Y|do(X))", g)).values
    uniform = np.allclose(z_do_x, 0.5, atol=1e-12) and np.allclose(y_do_z, 0.5, atol=1e-12)
    deterministic = bool(np.all((np.abs(y_do_x) < 1e-12) | (np.abs(y_do_x - 1) < 1e-12)))
    ok = uniform and deterministic and not result.identifiable
    record(
        5,
        ok,
        f"P(Z|do(X)), P(Y|do(Z)) uniform={uniform}, P(Y|do(X)) deterministic={deterministic}, "
        f"verdict: {result.status.value}",
    )
    assert uniform and deterministic
    assert not result.identifiable


def test_criterion_6_missing_data_formulas():
    cases = [(1, "a"), (2, "b"), (3, "b")]
    failures = []
    worst_all = 0.0
    for row, col in cases:
        q, result = solved("fig4", row, col)
        if not result.identifiable:
            failures.append((row, col, "not identifiable"))
            continue
        worst, skipped = _worst(q, result)
        worst_all = max(worst_all, worst)
        if worst > TOL or skipped:
            failures.append((row, col, worst))
    ok = not failures
    record(6, ok, f"graph a joint proxies; graph b + P(Y); graph b + P(R_Y|Y): "
                  f"max error {worst_all:.2e} over {len(SEEDS)} models each")
    assert not failures, failures


REFERENCE_FIG3 = "[sum_{Z,H,W} [p(H,W)*p(Z|X,H,W)*p(Y|do(Z),W)]]"


def test_criterion_7_adjustment_formula_matches_reference():
    q, result = solved("fig3")
    g = q.graph
    reference = parse_formula(REFERENCE_FIG3, g)
    worst = 0.0
    for s in SEEDS:
        m = random_scm(g, seed=s)
        tables = {t: m.enumerate_term(t) for t in q.inputs}
        cards = {n: c for n, c in m.cards.items() if n in g}
        a = evaluate(result.formula, bind_atoms(result.formula, tables, g), q.target, g, cardinalities=cards)
        b = evaluate(reference, bind_atoms(reference, tables, g), q.target, g, cardinalities=cards)
        worst = max(worst, float(np.max(np.abs(a.values - b.transpose_to(a.variables).values))))
    ok = result.identifiable and worst <= TOL
    record(7, ok, f"emitted {result.formula_string()} vs reference {REFERENCE_FIG3}: "
                  f"max gap {worst:.2e} over {len(SEEDS)} models")
    assert result.identifiable
    assert worst <= TOL


def test_criterion_8_note_on_regression_tables():
    line = ("criterion 8: NOTE - regression and effect-estimate tables need the survey and "
            "meta-analysis datasets; out of scope, covered by criteria 3-7")
    from conftest import ACCEPTANCE_LINES

    ACCEPTANCE_LINES.append(line)
    print(line)
