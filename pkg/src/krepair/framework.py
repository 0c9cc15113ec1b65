"""Repair frameworks: constraints, hard/soft queries and comparison modes.

A framework file is line-oriented::

    mode: annotation-aware          # or annotation-unaware
    compare: distance(abs, sum)     # or: order
    epsilon: 5
    measure: annotated sum          # or: boolean sum | boolean max | ...
    hic: forall x y x' y' . STOCK(x,y,A) & STOCK(x',y',A) -> y = y' ;
    sic: ... ;
    hq+: STOCK(x,y,z) ;
    hq-: !STOCK(x,y,z) ;
    sq: BUILDINGS(u,v) ;

Hard constraints must be jointly satisfiable; that is checked at load time
by searching for a small model (see `hics_witness`).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import combinations, product
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

from . import logic
from .kdata import KDatabase, Schema
from .logic import Atom, Const, Evaluator, Formula, Not, Var, free_vars, parse_formula
from .semiring import (AGG_COUNT_NONZERO, AGG_MAX, AGG_SUM, Semiring,
                       SemiringError, Value)

MODE_AWARE = "annotation-aware"
MODE_UNAWARE = "annotation-unaware"

COMPARE_ORDER = "order"
COMPARE_DISTANCE = "distance"

FSC_BOOLEAN = "boolean"
FSC_ANNOTATED = "annotated"

_AGG_NAMES = {"sum": AGG_SUM, "max": AGG_MAX, "count": AGG_COUNT_NONZERO}


class FrameworkError(ValueError):
    pass


@dataclass(frozen=True)
class IMSpec:
    """How a single soft constraint scores and how scores aggregate."""

    fsc: str = FSC_BOOLEAN       # boolean | annotated
    agg: str = AGG_SUM

    def __post_init__(self):
        if self.fsc not in (FSC_BOOLEAN, FSC_ANNOTATED):
            raise FrameworkError(f"unknown violation kind {self.fsc!r}")
        if self.agg not in (AGG_SUM, AGG_MAX, AGG_COUNT_NONZERO):
            raise FrameworkError(f"unknown aggregate {self.agg!r}")


@dataclass(frozen=True)
class RepairFramework:
    hics: Tuple[Formula, ...] = ()
    sics: Tuple[Formula, ...] = ()
    hq_plus: Tuple[Formula, ...] = ()
    hq_minus: Tuple[Formula, ...] = ()
    sqs: Tuple[Formula, ...] = ()
    im: IMSpec = IMSpec()
    compare: str = COMPARE_DISTANCE
    delta_kind: str = "abs"
    agg: str = AGG_SUM           # aggregate of the distance
    epsilon: Value = 0
    mode: str = MODE_AWARE

    def __post_init__(self):
        if self.compare not in (COMPARE_ORDER, COMPARE_DISTANCE):
            raise FrameworkError(f"unknown compare mode {self.compare!r}")
        if self.mode not in (MODE_AWARE, MODE_UNAWARE):
            raise FrameworkError(f"unknown mode {self.mode!r}")
        if self.delta_kind != "abs":
            raise FrameworkError(f"unknown delta {self.delta_kind!r}")
        if self.agg not in (AGG_SUM, AGG_MAX):
            raise FrameworkError(f"unknown distance aggregate {self.agg!r}")
        if self.epsilon < 0:
            raise FrameworkError("epsilon must be non-negative")


# ------------------------------------------------------------ parsing

_LINE = re.compile(r"(mode|compare|epsilon|measure|hic|sic|hq\+|hq-|sq)\s*:\s*(.*)")


def parse_framework(text: str, trust_hics: bool = False) -> RepairFramework:
    fields: Dict[str, str] = {}
    formulas: Dict[str, List[Formula]] = {"hic": [], "sic": [], "hq+": [],
                                          "hq-": [], "sq": []}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.fullmatch(line)
        if not m:
            raise FrameworkError(f"line {lineno}: bad directive {line!r}")
        key, value = m.group(1), m.group(2).strip().rstrip(";").strip()
        if key in formulas:
            try:
                formulas[key].append(parse_formula(value))
            except logic.FormulaError as exc:
                raise FrameworkError(f"line {lineno}: {exc}")
        else:
            if key in fields:
                raise FrameworkError(f"line {lineno}: duplicate {key!r}")
            fields[key] = value

    compare, delta_kind, agg = COMPARE_DISTANCE, "abs", AGG_SUM
    if "compare" in fields:
        value = fields["compare"]
        if value == COMPARE_ORDER:
            compare = COMPARE_ORDER
        else:
            m = re.fullmatch(r"distance(?:\s*\(\s*(\w+)\s*,\s*(\w+)\s*\))?", value)
            if not m:
                raise FrameworkError(f"bad compare mode {value!r}")
            if m.group(1):
                delta_kind = m.group(1)
                agg = _AGG_NAMES.get(m.group(2), m.group(2))

    im = IMSpec()
    if "measure" in fields:
        parts = fields["measure"].split()
        if len(parts) != 2:
            raise FrameworkError(f"bad measure {fields['measure']!r}")
        im = IMSpec(parts[0], _AGG_NAMES.get(parts[1], parts[1]))

    epsilon: Value = 0
    if "epsilon" in fields:
        try:
            frac = Fraction(fields["epsilon"])
        except (ValueError, ZeroDivisionError):
            raise FrameworkError(f"bad epsilon {fields['epsilon']!r}")
        epsilon = int(frac) if frac.denominator == 1 else frac

    for f in formulas["hic"] + formulas["sic"]:
        if free_vars(f):
            raise FrameworkError(f"constraint must be a sentence: {f}")

    fw = RepairFramework(
        hics=tuple(formulas["hic"]), sics=tuple(formulas["sic"]),
        hq_plus=tuple(formulas["hq+"]), hq_minus=tuple(formulas["hq-"]),
        sqs=tuple(formulas["sq"]), im=im, compare=compare,
        delta_kind=delta_kind, agg=agg, epsilon=epsilon,
        mode=fields.get("mode", MODE_AWARE))

    if fw.hics and not trust_hics and hics_witness(fw.hics) is None:
        raise FrameworkError(
            "hard-constraint consistency unverified: no model found within "
            "the bounded search (pass trust_hics to skip the check)")
    return fw


def load_framework(path: str, trust_hics: bool = False) -> RepairFramework:
    with open(path) as fh:
        return parse_framework(fh.read(), trust_hics)


_AGG_BACK = {AGG_SUM: "sum", AGG_MAX: "max", AGG_COUNT_NONZERO: "count"}


def serialize_framework(fw: RepairFramework) -> str:
    """Framework-file text that parses back to an equal framework."""
    lines = [f"mode: {fw.mode}"]
    if fw.compare == COMPARE_ORDER:
        lines.append("compare: order")
    else:
        lines.append(f"compare: distance({fw.delta_kind}, {_AGG_BACK[fw.agg]})")
    lines.append(f"epsilon: {fw.epsilon}")
    lines.append(f"measure: {fw.im.fsc} {_AGG_BACK[fw.im.agg]}")
    for key, formulas in (("hic", fw.hics), ("sic", fw.sics),
                          ("hq+", fw.hq_plus), ("hq-", fw.hq_minus),
                          ("sq", fw.sqs)):
        for f in formulas:
            lines.append(f"{key}: {f} ;")
    return "\n".join(lines) + "\n"


# --------------------------------------------- hard-constraint consistency

def _signature(formulas: Iterable[Formula]) -> Tuple[Dict[str, int], List[str]]:
    """Relation arities and constant names mentioned by the formulas."""
    rels: Dict[str, int] = {}
    consts: List[str] = []

    def walk(f: Formula) -> None:
        if isinstance(f, Atom):
            if rels.setdefault(f.rel, len(f.args)) != len(f.args):
                raise FrameworkError(f"inconsistent arity for {f.rel!r}")
            for t in f.args:
                if isinstance(t, Const) and t.name not in consts:
                    consts.append(t.name)
        elif isinstance(f, logic.Cmp):
            for t in (f.left, f.right):
                if isinstance(t, Const) and t.name not in consts:
                    consts.append(t.name)
        elif isinstance(f, Not):
            walk(f.body)
        elif isinstance(f, (logic.And, logic.Or)):
            for p in f.parts:
                walk(p)
        elif isinstance(f, (logic.Implies, logic.Iff)):
            walk(f.left)
            walk(f.right)
        elif isinstance(f, (logic.Quant, logic.Count)):
            walk(f.body)

    for f in formulas:
        walk(f)
    return rels, consts


def hics_witness(hics: Sequence[Formula], max_domain: int = 4,
                 budget: int = 100_000) -> Optional[KDatabase]:
    """Search for a small Boolean database satisfying every constraint.

    Domains of size 1..max_domain are tried in turn, interpretations by
    increasing support size, up to `budget` interpretations in total.
    Returns a witness database or None if none was found in budget.
    """
    rels, consts = _signature(hics)
    tried = 0
    for n in range(1, max_domain + 1):
        domain = [str(i) for i in range(1, n + 1)]
        schema = Schema({"V": "string"},
                        {r: ("V",) * k for r, k in rels.items()},
                        {c: "V" for c in consts})
        atoms = [(r, rec) for r, k in sorted(rels.items())
                 for rec in product(domain, repeat=k)]
        sr = Semiring("boolean")
        for cvals in product(domain, repeat=len(consts)):
            constants = dict(zip(consts, cvals))
            for size in range(len(atoms) + 1):
                for chosen in combinations(atoms, size):
                    tried += 1
                    if tried > budget:
                        return None
                    recs: Dict[str, Dict[Tuple[str, ...], Value]] = {}
                    for r, rec in chosen:
                        recs.setdefault(r, {})[rec] = 1
                    db = KDatabase(schema, sr, recs, constants)
                    ev = Evaluator(db, extra_domain=domain)
                    if all(ev.holds(f) for f in hics):
                        return db
    return None


# ------------------------------------------------------- relativisation

@dataclass(frozen=True)
class GroundQuerySet:
    """A formula together with its ground instantiations over one domain."""

    source: Formula
    variables: Tuple[str, ...]
    instances: Tuple[Tuple[str, ...], ...]

    def envs(self) -> Iterator[Dict[str, str]]:
        for inst in self.instances:
            yield dict(zip(self.variables, inst))


def _variable_pools(f: Formula, dbs: Sequence[KDatabase],
                    extra_values: Iterable[str] = ()) -> Dict[str, FrozenSet[str]]:
    """Type-aware value pools: an occurrence at an attribute position
    restricts the variable to values seen at that attribute."""
    adom: set = set(extra_values)
    for db in dbs:
        adom |= db.active_domain()
    pools: Dict[str, FrozenSet[str]] = {v: frozenset(adom) for v in free_vars(f)}

    def walk(g: Formula, bound: FrozenSet[str]) -> None:
        if isinstance(g, Atom):
            attrs = dbs[0].schema.relations.get(g.rel)
            if attrs is None:
                return
            for pos, t in enumerate(g.args):
                if isinstance(t, Var) and t.name not in bound:
                    seen: set = set(extra_values)
                    for db in dbs:
                        seen |= db.attribute_range(attrs[pos])
                    pools[t.name] = pools[t.name] & seen
        elif isinstance(g, Not):
            walk(g.body, bound)
        elif isinstance(g, (logic.And, logic.Or)):
            for p in g.parts:
                walk(p, bound)
        elif isinstance(g, (logic.Implies, logic.Iff)):
            walk(g.left, bound)
            walk(g.right, bound)
        elif isinstance(g, (logic.Quant, logic.Count)):
            walk(g.body, bound | {g.var})

    walk(f, frozenset())
    return pools


def relativise(queries: Sequence[Formula], db: KDatabase,
               extra_dbs: Sequence[KDatabase] = (),
               extra_values: Iterable[str] = ()) -> List[GroundQuerySet]:
    """Ground each query's free variables over the databases' active
    domains, respecting attribute types."""
    out = []
    for q in queries:
        pools = _variable_pools(q, [db, *extra_dbs], extra_values)
        fvs = tuple(sorted(pools))
        insts = tuple(product(*(sorted(pools[v]) for v in fvs)))
        out.append(GroundQuerySet(q, fvs, insts))
    return out


# ------------------------------------------------- measures and checks

def violation(db: KDatabase, f: Formula, spec: IMSpec,
              evaluator: Optional[Evaluator] = None) -> Value:
    """Score of one soft constraint: how badly `db` violates it."""
    ev = evaluator or Evaluator(db)
    if spec.fsc == FSC_BOOLEAN:
        return ev.sr.zero if ev.holds(f) else ev.sr.one
    return ev.evaluate(Not(f))


def inconsistency_measure(db: KDatabase, sics: Sequence[Formula],
                          spec: IMSpec,
                          evaluator: Optional[Evaluator] = None) -> Value:
    ev = evaluator or Evaluator(db)
    return db.semiring.aggregate(
        [violation(db, f, spec, ev) for f in sics], spec.agg)


def _weight(ev: Evaluator, q: Formula, env: Dict[str, str], mode: str) -> Value:
    return ev.evaluate(q, env) if mode == MODE_AWARE else ev.floor(q, env)


def check_hard_queries(db: KDatabase, cand: KDatabase, fw: RepairFramework,
                       extra_values: Iterable[str] = ()) -> bool:
    """Answers to positive hard queries may only grow (ground instance by
    ground instance); answers to negative ones may only shrink."""
    sr = db.semiring
    domain = sorted(db.active_domain() | cand.active_domain() | set(extra_values))
    ev_db = Evaluator(db, extra_domain=domain)
    ev_cand = Evaluator(cand, extra_domain=domain)
    for queries, keep_leq in ((fw.hq_plus, True), (fw.hq_minus, False)):
        for gq in relativise(queries, db, [cand], extra_values):
            for env in gq.envs():
                w0 = _weight(ev_db, gq.source, env, fw.mode)
                w1 = _weight(ev_cand, gq.source, env, fw.mode)
                ok = sr.leq(w0, w1) if keep_leq else sr.leq(w1, w0)
                if not ok:
                    return False
    return True


def sql_deltas(db: KDatabase, cand: KDatabase, fw: RepairFramework,
               extra_values: Iterable[str] = ()) -> List[Value]:
    """Per-ground-soft-query-instance change magnitudes, in canonical order."""
    sr = db.semiring
    domain = sorted(db.active_domain() | cand.active_domain() | set(extra_values))
    ev_db = Evaluator(db, extra_domain=domain)
    ev_cand = Evaluator(cand, extra_domain=domain)
    out = []
    for gq in relativise(fw.sqs, db, [cand], extra_values):
        for env in gq.envs():
            w0 = _weight(ev_db, gq.source, env, fw.mode)
            w1 = _weight(ev_cand, gq.source, env, fw.mode)
            out.append(sr.delta(w0, w1))
    return out


def distance(db: KDatabase, cand: KDatabase, fw: RepairFramework,
             extra_values: Iterable[str] = ()) -> Value:
    """Aggregate change over all ground soft-query instances.

    Distances are plain numbers, not semiring elements: even over the
    Boolean semiring the sum of changes is their count."""
    vals = sql_deltas(db, cand, fw, extra_values)
    return sum(vals) if fw.agg == AGG_SUM else max(vals, default=0)


LEQ, GT, INCOMPARABLE = "leq", "gt", "incomparable"

ORDER_CLOSENESS = "closeness"
ORDER_LITERAL = "literal"


def order_leq(cand_a: KDatabase, cand_b: KDatabase, db: KDatabase,
              fw: RepairFramework, semantics: str = ORDER_CLOSENESS,
              extra_values: Iterable[str] = ()) -> str:
    """Three-way comparison of two candidates relative to the original.

    `closeness`: a ≤ b iff a's change magnitude is pointwise at most b's on
    every ground soft-query instance.  `literal`: a ≤ b iff pointwise
    original ≤ a ≤ b in the semiring order.
    """
    sr = db.semiring
    domain = sorted(db.active_domain() | cand_a.active_domain()
                    | cand_b.active_domain() | set(extra_values))
    evs = [Evaluator(d, extra_domain=domain) for d in (db, cand_a, cand_b)]
    a_le, b_le = True, True
    for gq in relativise(fw.sqs, db, [cand_a, cand_b], extra_values):
        for env in gq.envs():
            w0, wa, wb = (_weight(ev, gq.source, env, fw.mode) for ev in evs)
            if semantics == ORDER_CLOSENESS:
                da, db_ = sr.delta(w0, wa), sr.delta(w0, wb)
                a_le = a_le and sr.leq(da, db_)
                b_le = b_le and sr.leq(db_, da)
            elif semantics == ORDER_LITERAL:
                a_le = a_le and sr.leq(w0, wa) and sr.leq(wa, wb)
                b_le = b_le and sr.leq(w0, wb) and sr.leq(wb, wa)
            else:
                raise FrameworkError(f"unknown order semantics {semantics!r}")
            if not a_le and not b_le:
                return INCOMPARABLE
    if a_le:
        return LEQ
    if b_le:
        return GT
    return INCOMPARABLE


def with_epsilon(fw: RepairFramework, epsilon: Value) -> RepairFramework:
    return replace(fw, epsilon=epsilon)
