import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idsearch.graph import augment_missing, parse_graph
from idsearch.scm import (
    DiscreteScm,
    WitnessPair,
    ZeroProbabilityError,
    check_witness,
    formula_check,
    point_mass_scm,
    random_scm,
)
from idsearch.formula import parse_formula
from idsearch.terms import parse_term

FRONT = parse_graph("X -> Z\nZ -> Y\nX <-> Y")
BIG = parse_graph("W -> X\nX -> Z\nZ -> Y\nW -> Y\nX <-> Y\nZ <-> W")
MISSING = augment_missing(parse_graph("X -> Z\nZ -> Y\nX <-> Y\nY -> R_Z"), "R_X : X, R_Z : Z")


def brute_joint(m: DiscreteScm, intervened=()):
    """Full joint by explicit loops over every node, latents included."""
    names = list(m.order)
    ranges = [range(m.cards[n]) for n in names]
    out = {}
    for values in itertools.product(*ranges):
        val = dict(zip(names, values))
        p = 1.0
        for n in names:
            if n in intervened:
                continue
            idx = tuple(val[q] for q in m.parents[n]) + (val[n],)
            p *= m.cpts[n][idx]
        if p:
            out[values] = p
    return names, out


def brute_term(m: DiscreteScm, text: str):
    g = m.graph
    t = parse_term(text, g)
    dos = g.names_of(t.dos)
    result = {}
    for do_vals in itertools.product(*[range(m.cards[d]) for d in dos]):
        names, joint = brute_joint(m, intervened=dos)
        fixed = dict(zip(dos, do_vals))
        # an intervened node takes its forced value
        rows = {k: v for k, v in joint.items()
                if all(k[names.index(d)] == fixed[d] for d in dos)}
        if not dos:
            rows = joint
        lhs = g.names_of(t.left)
        rhs = g.names_of(t.cond)
        vals = {n: 1 for n in g.names_of(t.fixed_one | t.left_fixed_one)}
        vals.update({n: 0 for n in g.names_of(t.fixed_zero | t.left_fixed_zero)})
        for assign in itertools.product(*[range(m.cards[n]) for n in lhs + rhs]):
            a = dict(zip(lhs + rhs, assign))
            a.update(vals)
            num = sum(p for k, p in rows.items() if all(k[names.index(n)] == v for n, v in a.items()))
            cond_names = rhs + g.names_of(t.fixed_one | t.fixed_zero)
            den = sum(p for k, p in rows.items()
                      if all(k[names.index(n)] == a[n] for n in cond_names))
            key = dict(a, **fixed)
            result[tuple(sorted((n, key[n]) for n in lhs + rhs + dos))] = num / den if den else 0.0
    return result


def _compare(m, text):
    t = parse_term(text, m.graph)
    tab = m.enumerate_term(t)
    want = brute_term(m, text)
    for idx in np.ndindex(*tab.values.shape):
        key = tuple(sorted(zip(tab.variables, idx)))
        assert tab.values[idx] == pytest.approx(want[key], abs=1e-12), (text, key)


@pytest.mark.parametrize(
    "text",
    ["P(X,Z,Y)", "P(Y|do(X))", "P(Y|do(Z),X)", "P(Z,Y|do(X))", "P(X|Z)", "P(Y|do(X,Z))"],
)
def test_enumeration_matches_brute_force_front_door(text):
    for seed in range(3):
        _compare(random_scm(FRONT, seed=seed), text)


@pytest.mark.parametrize("text", ["P(Y|do(X),W)", "P(W,Y|do(Z))", "P(X,Z|W)", "P(Y|do(W))"])
def test_enumeration_matches_brute_force_with_two_latents(text):
    _compare(random_scm(BIG, cardinalities={"W": 3, "X": 2, "Z": 3, "Y": 2}, seed=4), text)


@pytest.mark.parametrize(
    "text", ["P(X*,Z*,Y,R_X,R_Z)", "P(X*,Y|R_X=1)", "P(Z*,R_Z=0)", "P(Y|do(X),R_Z=1)"]
)
def test_enumeration_matches_brute_force_with_proxies(text):
    _compare(random_scm(MISSING, seed=2), text)


def test_proxies_copy_the_variable_or_report_missing():
    m = random_scm(MISSING, seed=5)
    g = MISSING
    tab = m.enumerate_term(parse_term("P(X*|X,R_X)", g))
    # axes follow term_scope order; index by name to stay layout-agnostic
    order = tab.variables
    for x, r, xs in itertools.product(range(2), range(2), range(3)):
        idx = tuple({"X": x, "R_X": r, "X*": xs}[n] for n in order)
        want = float(xs == x) if r == 1 else float(xs == 2)
        assert tab.values[idx] == pytest.approx(want)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_random_models_are_reproducible_and_positive(seed):
    a, b = random_scm(FRONT, seed=seed), random_scm(FRONT, seed=seed)
    for n in a.order:
        np.testing.assert_array_equal(a.cpts[n], b.cpts[n])
        assert np.all(a.cpts[n] >= 1e-6 * 0.999)
        np.testing.assert_allclose(a.cpts[n].sum(axis=-1), 1.0)
    assert a.is_positive()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_interventional_tables_are_distributions(seed):
    m = random_scm(BIG, seed=seed)
    tab = m.enumerate_term(parse_term("P(Y,Z|do(X),W)", BIG))
    np.testing.assert_allclose(tab.totals(), 1.0, atol=1e-12)


def test_intervention_cuts_dependence_on_ancestors():
    m = random_scm(BIG, seed=9)
    t = m.enumerate_term(parse_term("P(W|do(X))", BIG))
    w = m.enumerate_term(parse_term("P(W)", BIG))
    np.testing.assert_allclose(t.transpose_to(("W", "X")).values[:, 0], w.values, atol=1e-12)


def test_cpt_validation():
    good = random_scm(FRONT).to_json()["cpts"]
    cpts = {n: np.asarray(c["table"]) for n, c in good.items()}
    bad = dict(cpts, Y=cpts["Y"] * 0.5)
    with pytest.raises(ValueError, match="distributions"):
        DiscreteScm(FRONT, bad)
    with pytest.raises(ValueError, match="shape"):
        DiscreteScm(FRONT, dict(cpts, Y=np.full((2, 2), 0.5)))
    with pytest.raises(ValueError, match="no CPT"):
        DiscreteScm(FRONT, {k: v for k, v in cpts.items() if k != "Z"})


def test_json_round_trip_keeps_every_table():
    m = random_scm(MISSING, seed=3)
    back = DiscreteScm.from_json(json.dumps(m.to_json()), graph=MISSING)
    for n in m.order:
        np.testing.assert_array_equal(back.cpts[n], m.cpts[n])


def test_json_from_another_graph_is_refused():
    m = random_scm(FRONT)
    with pytest.raises(ValueError, match="inconsistent"):
        DiscreteScm.from_json(m.to_json(), graph=BIG)


def test_point_mass_conditionals_on_empty_events():
    m = point_mass_scm(FRONT)
    with pytest.raises(ZeroProbabilityError):
        m.enumerate_term(parse_term("P(Z|X)", FRONT))
    loose = m.enumerate_term(parse_term("P(Z|X)", FRONT), strict=False)
    assert loose.values[0, 0] == 1.0  # axes (X, Z) by index order
    assert loose.values[1].sum() == 0.0
    assert not m.is_positive()


def test_formula_check_on_point_mass_skips_only_unsupported_rows():
    q_in = [parse_term("P(X,Z)", FRONT), parse_term("P(Y|do(Z))", FRONT)]
    f = parse_formula("[sum_{Z} [p(Z|X)*p(Y|do(Z))]]", FRONT)
    c = formula_check(f, parse_term("P(Y|do(X))", FRONT), q_in, point_mass_scm(FRONT))
    assert c.max_abs == 0.0
    assert (c.rows, c.skipped) == (1, 1)
    r = formula_check(f, parse_term("P(Y|do(X))", FRONT), q_in, random_scm(FRONT, seed=0))
    assert r.skipped == 0 and r.rows == 2


def test_witness_pair_requires_a_shared_graph():
    with pytest.raises(ValueError):
        WitnessPair(random_scm(FRONT), random_scm(BIG), [], parse_term("P(Y)", FRONT))


def test_identical_models_are_not_a_witness():
    m = random_scm(FRONT, seed=1)
    rep = check_witness(WitnessPair(m, m, [parse_term("P(X,Z,Y)", FRONT)], parse_term("P(Y|do(X))", FRONT)))
    assert rep.inputs_agree and not rep.target_differs and not rep
