"""Hardness-reduction constructions checked against brute-force oracles."""

import random

import pytest

from krepair import (CandidateBounds, CQAAnswer, Cnf3, Graph, ReductionError,
                     cqa, exists_repair, oracle_1in3sat, oracle_3col,
                     oracle_classical_repairs, oracle_maxtrue_eq, parse_cnf,
                     parse_formula, parse_graph, reduce_1in3sat,
                     reduce_3col_cqa, reduce_3col_exists, reduce_maxsat_eq,
                     repairs, small_graphs)
from krepair.reductions import CLASSICAL_KINDS

from conftest import random_boolean_db

TRIANGLE = Graph(frozenset("abc"),
                 frozenset({("a", "b"), ("b", "c"), ("a", "c")}))
K4 = Graph(frozenset("abcd"),
           frozenset({(x, y) for x in "abcd" for y in "abcd" if x < y}))


def test_parse_graph():
    g = parse_graph("a b\nb c\n# comment\nd\n")
    assert g.vertices == {"a", "b", "c", "d"}
    assert g.undirected_edges == {("a", "b"), ("b", "c")}
    with pytest.raises(ReductionError):
        parse_graph("a b c\n")


def test_parse_cnf():
    cnf = parse_cnf("c sample\np cnf 3 2\n1 -2 3 0\n2 2 -3 0\n")
    assert cnf.variables == ("x1", "x2", "x3")
    assert len(cnf.clauses) == 2
    assert not cnf.positive
    assert cnf.satisfied({"x1": True, "x2": True, "x3": True})
    with pytest.raises(ReductionError):
        parse_cnf("1 2 0\n")       # width-2 clause


def test_oracle_3col():
    assert oracle_3col(TRIANGLE)
    assert not oracle_3col(K4)


def test_oracle_1in3sat():
    yes = Cnf3(("a", "b", "c"), ((("a", True), ("b", True), ("c", True)),))
    assert oracle_1in3sat(yes)
    no = Cnf3(("a",), ((("a", True), ("a", True), ("a", True)),
                       (("a", False), ("a", False), ("a", False))))
    assert not oracle_1in3sat(no)


def test_oracle_maxtrue_eq():
    one = Cnf3(("a", "b"), ((("a", True), ("a", True), ("b", True)),))
    other = Cnf3(("a", "b"), ((("a", True), ("b", False), ("b", False)),))
    assert oracle_maxtrue_eq(one, one) is True
    assert oracle_maxtrue_eq(one, other) is not None
    sat_all = Cnf3(("a",), ())
    assert oracle_maxtrue_eq(sat_all, sat_all) is True
    unsat = Cnf3(("a",), ((("a", True), ("a", True), ("a", True)),
                          (("a", False), ("a", False), ("a", False))))
    assert oracle_maxtrue_eq(unsat, one) is None


def test_small_graphs_cover_iso_classes():
    gs = small_graphs(3)
    assert len(gs) == 7          # graphs on <=3 vertices up to isomorphism
    assert len(small_graphs(4)) == 18


@pytest.mark.parametrize("g", [TRIANGLE, K4])
def test_3col_cqa_reduction(g):
    db, fw, q = reduce_3col_cqa(g)
    verdict = cqa(db, fw, q).verdict
    # the query flags a monochromatic edge in some repair: consistent
    # answers across all repairs exist exactly when g is not colourable
    expected = CQAAnswer.NOT_CONSISTENT if oracle_3col(g) \
        else CQAAnswer.CONSISTENT
    assert verdict == expected


@pytest.mark.parametrize("g", [TRIANGLE, K4])
def test_3col_exists_reduction(g):
    db, fw = reduce_3col_exists(g)
    assert exists_repair(db, fw) == oracle_3col(g)


@pytest.mark.parametrize("seed", range(6))
def test_1in3sat_reduction(seed):
    rng = random.Random(seed)
    nvars = rng.randint(2, 4)
    variables = tuple(f"v{i}" for i in range(nvars))
    clauses = tuple(
        tuple((rng.choice(variables), True) for _ in range(3))
        for _ in range(rng.randint(1, 3)))
    cnf = Cnf3(variables, clauses)
    assert cnf.positive
    db, fw, q = reduce_1in3sat(cnf)
    got = cqa(db, fw, q).verdict == CQAAnswer.CONSISTENT
    # the instance is a yes iff some repair avoids the bad pattern
    assert got == (not oracle_1in3sat(cnf))


def test_maxsat_eq_reduction_on_fixed_pair():
    a = parse_cnf("1 2 3 0\n")
    b = parse_cnf("-1 -2 -3 0\n")
    db, fw, q = reduce_maxsat_eq(a, b)
    # the query is forced in every repair exactly when the counts differ
    got = cqa(db, fw, q).verdict == CQAAnswer.CONSISTENT
    assert got == (not oracle_maxtrue_eq(a, b))
    db, fw, q = reduce_maxsat_eq(a, a)
    assert (cqa(db, fw, q).verdict == CQAAnswer.CONSISTENT) \
        == (not oracle_maxtrue_eq(a, a))


def test_maxsat_eq_requires_equal_clause_counts():
    a = parse_cnf("1 2 3 0\n")
    b = parse_cnf("1 2 3 0\n1 2 3 0\n")
    with pytest.raises(ReductionError):
        reduce_maxsat_eq(a, b)


@pytest.mark.parametrize("kind", CLASSICAL_KINDS)
def test_classical_oracle_sanity(kind):
    rng = random.Random(11)
    db = random_boolean_db(rng, max_adom=2)
    ics = [parse_formula("forall x . !R(x, x)")]
    reps = oracle_classical_repairs(db, ics, kind)
    if kind == "superset":
        # supersets keep every reflexive fact, so nothing can be repaired
        assert reps == [] or all(
            (x != y) for r in reps for x, y in r.support("R"))
        return
    assert reps, "dropping reflexive facts always yields a consistent instance"
    for r in reps:
        assert all((x != y) for x, y in r.support("R"))
    if kind == "subset":
        for r in reps:
            assert r.support("R") <= db.support("R")
            assert r.support("S") == db.support("S")


def test_classical_oracle_rejects_nonboolean(stock_db):
    with pytest.raises(ReductionError):
        oracle_classical_repairs(stock_db, [], "subset")
