"""Search engine behaviour, checked against the naive reference in conftest."""

import random

import pytest

from krepair import (BudgetError, CandidateBounds, CQAAnswer, EngineError,
                     cqa, cqa_binary_search, distance, enumerate_candidates,
                     eso_exists_repair_check, exists_repair, free_vars,
                     is_repair_candidate, parse_formula, rce, repairs)
from krepair.framework import COMPARE_DISTANCE, COMPARE_ORDER, MODE_UNAWARE

from conftest import (all_candidates, framework, naive_repairs,
                      passes_hard_conditions, random_boolean_db,
                      random_framework, random_natural_db, random_query)


def test_subset_order_repairs(stock_db):
    report = repairs(stock_db, framework("subset-order"))
    assert len(report.repairs) == 2
    for r in report.repairs:
        # each repair deletes exactly the records of one conflicting id
        assert r.support("STOCK") < stock_db.support("STOCK")
        ids = {rec[0] for rec in stock_db.support("STOCK") - r.support("STOCK")}
        assert len(ids) == 1 and ids < {"112", "113"}


def test_subset_distance_repair(stock_db):
    report = repairs(stock_db, framework("subset-distance"))
    assert report.min_distance == 4
    assert len(report.repairs) == 1
    only = report.repairs[0]
    assert only.support("STOCK") == {("112", "cabbage", "A"),
                                     ("113", "carrot", "B")}


def test_enumerate_candidates_is_the_full_grid(stock_db):
    fw = framework("subset-order")
    small = stock_db.with_relations(
        {"STOCK": {("112", "potato", "A"): 2, ("113", "carrot", "B"): 1}})
    got = list(enumerate_candidates(small, fw, CandidateBounds(ann_cap=2)))
    # 8 typed STOCK records, annotations 0..2 each
    assert len(got) == 3 ** 8
    assert len(set(got)) == len(got)


def test_is_repair_candidate_matches_reference(stock_db):
    fw = framework("subset-order")
    small = stock_db.with_relations(
        {"STOCK": {("112", "potato", "A"): 2, ("112", "cabbage", "A"): 1,
                   ("113", "potato", "B"): 1}})
    rng = random.Random(0)
    pool = list(all_candidates(small, ann_cap=2))   # 3^8 grids
    for cand in rng.sample(pool, 200):
        assert is_repair_candidate(small, cand, fw) == \
            passes_hard_conditions(small, cand, fw)


@pytest.mark.parametrize("seed", range(12))
def test_repairs_match_naive_boolean(seed):
    rng = random.Random(seed)
    db = random_boolean_db(rng)
    fw = random_framework(rng)
    got = sorted(repairs(db, fw).repairs, key=lambda d: d.facts())
    assert got == naive_repairs(db, fw)


@pytest.mark.parametrize("seed", range(6))
def test_repairs_match_naive_natural(seed):
    rng = random.Random(100 + seed)
    db = random_natural_db(rng)
    fw = random_framework(rng)
    got = sorted(repairs(db, fw).repairs, key=lambda d: d.facts())
    assert got == naive_repairs(db, fw)


@pytest.mark.parametrize("seed", range(15))
def test_exists_matches_naive(seed):
    rng = random.Random(200 + seed)
    db = random_boolean_db(rng)
    fw = random_framework(rng)
    expect = any(passes_hard_conditions(db, c, fw)
                 for c in all_candidates(db, mode=fw.mode))
    assert exists_repair(db, fw) == expect


def test_eso_requires_unaware_boolean(stock_db):
    with pytest.raises(EngineError):
        eso_exists_repair_check(stock_db, framework("subset-order"))


def test_consistent_db_is_its_own_repair(stock_db):
    fw = framework("subset-distance")
    fixed = stock_db.with_relations(
        {"STOCK": {("112", "cabbage", "A"): 6, ("113", "carrot", "B"): 7}})
    report = repairs(fixed, fw)
    assert report.repairs == (fixed,)
    assert report.min_distance == 0


def test_cqa_verdicts(stock_db):
    fw = framework("subset-order")
    keeps_carrot = parse_formula('exists x . STOCK(x, "carrot", "B")')
    keeps_potato = parse_formula('exists x . STOCK(x, "potato", "A")')
    assert cqa(stock_db, fw, keeps_carrot).verdict == CQAAnswer.CONSISTENT
    # one repair drops the potato record, so the answer is not consistent
    assert cqa(stock_db, fw, keeps_potato).verdict == CQAAnswer.NOT_CONSISTENT


def test_cqa_free_variable_binding(stock_db):
    fw = framework("subset-order")
    q = parse_formula('exists y . STOCK(x, y, "B")')
    ans = cqa(stock_db, fw, q, t=("113",))
    assert ans.verdict == CQAAnswer.CONSISTENT
    assert ans.tuple == ("113",)


def test_rce_probes_exact_distances(stock_db):
    fw = framework("subset-distance")
    assert rce(stock_db, fw, 4)
    assert not rce(stock_db, fw, 0)   # db itself breaks the key constraint
    assert not rce(stock_db, fw, 1)
    assert rce(stock_db, fw, 10)      # drop the cabbage record instead


def test_rce_rejects_order_mode(stock_db):
    with pytest.raises(EngineError):
        rce(stock_db, framework("subset-order"), 1)


@pytest.mark.parametrize("seed", range(10))
def test_binary_search_cqa_agrees(seed):
    rng = random.Random(300 + seed)
    db = random_boolean_db(rng)
    fw = random_framework(rng, compare=COMPARE_DISTANCE)
    q = random_query(rng)
    t = tuple(rng.choice(sorted(db.active_domain()))
              for _ in range(len(free_vars(q))))
    assert cqa_binary_search(db, fw, q, t).verdict == cqa(db, fw, q, t).verdict


def test_budget_is_enforced(stock_db):
    fw = framework("subset-order")
    with pytest.raises(BudgetError):
        repairs(stock_db, fw, CandidateBounds(ann_cap=7, max_candidates=3))


def test_inventory_example_repairs(products_db):
    fw = framework("warehouses")
    bounds = CandidateBounds(ann_cap=7)
    report = repairs(products_db, fw, bounds)
    assert len(report.repairs) == 3
