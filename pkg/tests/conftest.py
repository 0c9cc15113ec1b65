"""Shared fixtures: file loading plus naive reference implementations.

The reference code here deliberately avoids the engine's search machinery:
candidates are enumerated as plain value-grid products and every repair
condition is re-checked through the public framework primitives, so engine
results can be compared against an independent path.
"""

from __future__ import annotations

import random
from itertools import product
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import pytest

from krepair import (CandidateBounds, Evaluator, IMSpec, KDatabase,
                     RepairFramework, Schema, Semiring, check_hard_queries,
                     distance, inconsistency_measure, load_database,
                     load_framework, order_leq, parse_formula)
from krepair.framework import (COMPARE_DISTANCE, COMPARE_ORDER, FSC_ANNOTATED,
                               FSC_BOOLEAN, LEQ, MODE_AWARE, MODE_UNAWARE)
from krepair.kdata import Record
from krepair.semiring import AGG_MAX, AGG_SUM

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def stock_db() -> KDatabase:
    return load_database((DATA / "stock.kdb").read_text())


@pytest.fixture(scope="session")
def products_db() -> KDatabase:
    return load_database((DATA / "products.kdb").read_text())


def framework(name: str) -> RepairFramework:
    return load_framework(str(DATA / f"{name}.rf"))


# ------------------------------------------------- naive repair reference

def candidate_grid(db: KDatabase, ann_cap: Optional[int] = None,
                   extras: Sequence[str] = (),
                   mode: str = MODE_AWARE) \
        -> Tuple[List[Tuple[str, Record]], List[List[int]]]:
    """All type-consistent ground atoms with their admissible values.

    Annotation-unaware candidates only keep or drop an atom; aware
    candidates over the natural semiring range over 0..cap."""
    cap = max([ann_cap or 0, 1] + [w for rel in db.schema.relations
                                   for w in db.relations.get(rel, {}).values()])
    coords, values = [], []
    for rel in sorted(db.schema.relations):
        for rec in db.typed_tuples(rel, extras):
            coords.append((rel, rec))
            w = db.annotation(rel, rec)
            if db.semiring.kind == "natural" and mode == MODE_AWARE:
                values.append(list(range(cap + 1)))
            else:
                values.append(sorted({0, w if w > 0 else 1}))
    return coords, values


def all_candidates(db: KDatabase, ann_cap: Optional[int] = None,
                   extras: Sequence[str] = (),
                   mode: str = MODE_AWARE) -> Iterator[KDatabase]:
    coords, values = candidate_grid(db, ann_cap, extras, mode)
    for combo in product(*values):
        recs: Dict[str, Dict[Record, int]] = {}
        for (rel, rec), w in zip(coords, combo):
            if w:
                recs.setdefault(rel, {})[rec] = w
        yield KDatabase(db.schema, db.semiring, recs, db.constants)


def passes_hard_conditions(db: KDatabase, cand: KDatabase,
                           fw: RepairFramework,
                           extras: Sequence[str] = ()) -> bool:
    if not cand.active_domain() <= db.active_domain() | set(extras):
        return False
    ev = Evaluator(cand)
    if not all(ev.holds(h) for h in fw.hics):
        return False
    if not check_hard_queries(db, cand, fw, extras):
        return False
    im = inconsistency_measure(cand, fw.sics, fw.im, ev)
    return db.semiring.leq(im, fw.epsilon)


def naive_repairs(db: KDatabase, fw: RepairFramework,
                  ann_cap: Optional[int] = None,
                  extras: Sequence[str] = (),
                  candidates: Optional[Sequence[KDatabase]] = None) \
        -> List[KDatabase]:
    """Reference repair set: filter every candidate, then minimise by the
    framework's comparison, with no pruning anywhere."""
    pool = list(candidates) if candidates is not None \
        else list(all_candidates(db, ann_cap, extras, fw.mode))
    passers = [c for c in pool if passes_hard_conditions(db, c, fw, extras)]
    if fw.compare == COMPARE_DISTANCE:
        if not passers:
            return []
        dists = [distance(db, c, fw, extras) for c in passers]
        best = min(dists)
        keep = [c for c, d in zip(passers, dists) if d == best]
    else:
        keep = [c for c in passers
                if not any(order_leq(o, c, db, fw) == LEQ
                           and order_leq(c, o, db, fw) != LEQ
                           for o in passers)]
    return sorted(keep, key=lambda d: d.facts())


def bounded_candidates(db: KDatabase, max_total_delta: int,
                       ann_cap: Optional[int] = None,
                       extras: Sequence[str] = (),
                       mode: str = MODE_AWARE) -> Iterator[KDatabase]:
    """Candidates whose per-atom annotation changes sum to at most the
    bound; exhaustive inside that ball."""
    coords, values = candidate_grid(db, ann_cap, extras, mode)
    base = [db.annotation(rel, rec) for rel, rec in coords]

    def walk(i: int, budget: int, picked: List[int]) -> Iterator[List[int]]:
        if i == len(coords):
            yield list(picked)
            return
        for v in values[i]:
            d = abs(v - base[i])
            if d <= budget:
                picked.append(v)
                yield from walk(i + 1, budget - d, picked)
                picked.pop()

    for combo in walk(0, max_total_delta, []):
        recs: Dict[str, Dict[Record, int]] = {}
        for (rel, rec), w in zip(coords, combo):
            if w:
                recs.setdefault(rel, {})[rec] = w
        yield KDatabase(db.schema, db.semiring, recs, db.constants)


# --------------------------------------------------- random small worlds

_BOOL = Semiring("boolean")
_NAT = Semiring("natural")

_IC_POOL = [
    "forall x y . R(x,y) -> exists z . S(y,z)",
    "forall x y z . R(x,y) & R(x,z) -> y = z",
    "forall x y . R(x,y) -> !S(x,y)",
    "forall x . !R(x,x)",
    "forall x y . S(x,y) -> S(y,x)",
    "forall x y . R(x,y) -> R(y,x)",
    "forall x y . S(x,y) -> exists z . R(z,x)",
]

_QUERY_POOL = [
    "R(x,y)", "S(x,y)", "exists y . R(x,y)",
    "exists x y . R(x,y) & S(x,y)", "exists x . R(x,x)",
]

_SMALL_SCHEMA = Schema({"V": "string"}, {"R": ("V", "V"), "S": ("V", "V")}, {})


def random_boolean_db(rng: random.Random, max_adom: int = 3,
                      density: float = 0.3) -> KDatabase:
    adom = [f"v{i}" for i in range(rng.randint(1, max_adom))]
    rels = {rel: {(a, b): 1 for a in adom for b in adom
                  if rng.random() < density}
            for rel in ("R", "S")}
    # pin the intended domain even when the dice leave a value unused
    rels["R"][(adom[-1], adom[-1])] = rels["R"].get((adom[-1], adom[-1]), 0) or 1
    return KDatabase(_SMALL_SCHEMA, _BOOL, rels, {})


def random_natural_db(rng: random.Random, max_adom: int = 2,
                      max_ann: int = 3) -> KDatabase:
    adom = [f"v{i}" for i in range(rng.randint(1, max_adom))]
    rels = {rel: {(a, b): rng.randint(1, max_ann)
                  for a in adom for b in adom if rng.random() < 0.4}
            for rel in ("R", "S")}
    return KDatabase(_SMALL_SCHEMA, _NAT, rels, {})


def random_framework(rng: random.Random, compare: Optional[str] = None,
                     mode: Optional[str] = None) -> RepairFramework:
    atoms = (parse_formula("R(x,y)"), parse_formula("S(x,y)"))
    hics = tuple(parse_formula(s)
                 for s in rng.sample(_IC_POOL, rng.randint(0, 2)))
    sics = tuple(parse_formula(s)
                 for s in rng.sample(_IC_POOL, rng.randint(0, 1)))
    hq_plus = tuple(a for a in atoms if rng.random() < 0.3)
    hq_minus = tuple(a for a in atoms if rng.random() < 0.5)
    fsc = rng.choice((FSC_BOOLEAN, FSC_ANNOTATED))
    return RepairFramework(
        hics=hics, sics=sics, hq_plus=hq_plus, hq_minus=hq_minus,
        sqs=atoms,
        im=IMSpec(fsc, AGG_SUM),
        compare=compare or rng.choice((COMPARE_ORDER, COMPARE_DISTANCE)),
        agg=rng.choice((AGG_SUM, AGG_MAX)),
        epsilon=rng.choice((0, 1)),
        mode=mode or rng.choice((MODE_AWARE, MODE_UNAWARE)))


def random_query(rng: random.Random):
    return parse_formula(rng.choice(_QUERY_POOL))


def random_sentence(rng: random.Random, depth: int = 2):
    """A closed formula over R/S with random connectives and quantifiers."""

    def go(bound: List[str], d: int) -> str:
        if bound and (d == 0 or rng.random() < 0.25):
            rel = rng.choice(("R", "S"))
            s = f"{rel}({rng.choice(bound)},{rng.choice(bound)})"
            return f"!{s}" if rng.random() < 0.2 else s
        if not bound or rng.random() < 0.45:
            q = rng.choice(("exists", "forall"))
            v = f"q{d}_{len(bound)}"
            return f"{q} {v} . ({go(bound + [v], max(d - 1, 0))})"
        op = rng.choice(("&", "|"))
        return f"({go(bound, d - 1)}) {op} ({go(bound, d - 1)})"

    return parse_formula(go([], depth))


def tarski_holds(db: KDatabase, f, env: Optional[Dict[str, str]] = None) -> bool:
    """Textbook two-valued satisfaction, written from scratch as a check
    against the semiring evaluator."""
    from krepair.logic import (And, Atom, Cmp, Const, FalseF, Iff, Implies,
                               Lit, Not, Or, Quant, TrueF, Var, desugar)

    dom = sorted(db.active_domain())
    f = desugar(f)

    def term(t, env):
        if isinstance(t, Var):
            return env[t.name]
        if isinstance(t, Const):
            return db.constants[t.name]
        return t.value

    def sat(f, env) -> bool:
        if isinstance(f, TrueF):
            return True
        if isinstance(f, FalseF):
            return False
        if isinstance(f, Atom):
            rec = tuple(term(t, env) for t in f.args)
            return db.annotation(f.rel, rec) != 0
        if isinstance(f, Cmp):
            l, r = term(f.left, env), term(f.right, env)
            return (l == r) == (f.op == "=")
        if isinstance(f, Not):
            return not sat(f.body, env)
        if isinstance(f, And):
            return all(sat(p, env) for p in f.parts)
        if isinstance(f, Or):
            return any(sat(p, env) for p in f.parts)
        if isinstance(f, Implies):
            return (not sat(f.left, env)) or sat(f.right, env)
        if isinstance(f, Iff):
            return sat(f.left, env) == sat(f.right, env)
        if isinstance(f, Quant):
            picks = (sat(f.body, {**env, f.var: d}) for d in dom)
            return any(picks) if f.kind == "exists" else all(picks)
        raise TypeError(f)

    return sat(f, dict(env or {}))
