"""Hardness-reduction instance builders and independent brute-force oracles.

Each `reduce_*` function turns a combinatorial problem instance (a graph
or small CNF formula) into a concrete (database, framework[, query])
triple for the repair engine.  The matching `oracle_*` functions decide
the source problems directly by exhaustive search, so engine behaviour on
the reduced instances can be cross-checked without sharing any code with
the candidate search.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, permutations, product
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

from .framework import (COMPARE_DISTANCE, FSC_BOOLEAN, MODE_UNAWARE,
                        IMSpec, RepairFramework)
from .kdata import KDatabase, Record, Schema
from .logic import Evaluator, Formula, parse_formula
from .semiring import AGG_SUM, Semiring


class ReductionError(ValueError):
    pass


# ---------------------------------------------------------------- inputs

@dataclass(frozen=True)
class Graph:
    vertices: FrozenSet[str]
    edges: FrozenSet[Tuple[str, str]]

    def __post_init__(self):
        for x, y in self.edges:
            if x not in self.vertices or y not in self.vertices:
                raise ReductionError(f"edge ({x}, {y}) has a foreign endpoint")

    @property
    def undirected_edges(self) -> Set[Tuple[str, str]]:
        return {(x, y) if x <= y else (y, x) for x, y in self.edges
                if x != y}


def parse_graph(text: str) -> Graph:
    """Edge-list format: one `v1 v2` pair per line; a lone token declares
    an isolated vertex.  `#` starts a comment."""
    vertices: Set[str] = set()
    edges: Set[Tuple[str, str]] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) == 1:
            vertices.add(parts[0])
        elif len(parts) == 2:
            vertices.update(parts)
            edges.add((parts[0], parts[1]))
        else:
            raise ReductionError(f"line {lineno}: expected `v1 v2`, got {line!r}")
    return Graph(frozenset(vertices), frozenset(edges))


Literal = Tuple[str, bool]                  # variable name, positive?


@dataclass(frozen=True)
class Cnf3:
    """A CNF with exactly three literals per clause (repeats allowed)."""

    variables: Tuple[str, ...]
    clauses: Tuple[Tuple[Literal, Literal, Literal], ...]

    def __post_init__(self):
        known = set(self.variables)
        for cl in self.clauses:
            if len(cl) != 3:
                raise ReductionError("clause width must be exactly 3")
            for v, _pos in cl:
                if v not in known:
                    raise ReductionError(f"undeclared variable {v!r}")

    @property
    def positive(self) -> bool:
        return all(pos for cl in self.clauses for _v, pos in cl)

    def satisfied(self, assignment: Dict[str, bool]) -> bool:
        return all(any(assignment[v] == pos for v, pos in cl)
                   for cl in self.clauses)


def parse_cnf(text: str) -> Cnf3:
    """DIMACS-like format: optional `p cnf <vars> <clauses>` header,
    `c` comment lines, clauses as integer literals terminated by 0."""
    nvars: Optional[int] = None
    lits: List[int] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ReductionError(f"bad header {line!r}")
            nvars = int(parts[2])
            continue
        try:
            lits.extend(int(tok) for tok in line.split())
        except ValueError:
            raise ReductionError(f"bad clause line {line!r}")
    clauses: List[Tuple[Literal, Literal, Literal]] = []
    current: List[Literal] = []
    seen = 0
    for lit in lits:
        if lit == 0:
            if len(current) != 3:
                raise ReductionError("clause width must be exactly 3")
            clauses.append((current[0], current[1], current[2]))
            current = []
        else:
            seen = max(seen, abs(lit))
            current.append((f"x{abs(lit)}", lit > 0))
    if current:
        raise ReductionError("unterminated clause")
    n = nvars if nvars is not None else seen
    return Cnf3(tuple(f"x{i}" for i in range(1, n + 1)), tuple(clauses))


# ------------------------------------------------------------- utilities

_COLOURS = ("1", "2", "3")
_BITS = ("0", "1")

_BOOLEAN = Semiring("boolean")


def _framework(hics: Sequence[str], hq_plus: Sequence[str],
               hq_minus: Sequence[str], sqs: Sequence[str]) -> RepairFramework:
    """All reductions live in the annotation-unaware, sum-distance world
    with no soft constraints."""
    return RepairFramework(
        hics=tuple(parse_formula(f) for f in hics),
        hq_plus=tuple(parse_formula(f) for f in hq_plus),
        hq_minus=tuple(parse_formula(f) for f in hq_minus),
        sqs=tuple(parse_formula(f) for f in sqs),
        im=IMSpec(FSC_BOOLEAN, AGG_SUM),
        compare=COMPARE_DISTANCE, agg=AGG_SUM,
        epsilon=0, mode=MODE_UNAWARE)


def _boolean(records: Iterable[Record]) -> Dict[Record, int]:
    return {rec: 1 for rec in records}


def _neq_pairs(values: Sequence[str]) -> List[Record]:
    return [(a, b) for a in values for b in values if a != b]


# ------------------------------------------------- 3-colourability, CQA

def reduce_3col_cqa(g: Graph) -> Tuple[KDatabase, RepairFramework, Formula]:
    """Non-3-colourability as consistent truth of a doubly-coloured-vertex
    query.  Colour assignments C start empty and are the only soft
    queries, so minimal repairs are cheapest hard-constraint-satisfying
    colourings of the edge-covered vertices."""
    schema = Schema(
        attributes={"V": "string", "Col": "string"},
        relations={"E": ("V", "V"), "C": ("V", "Col"), "P": ("Col", "Col")},
        constants={"Col1": "Col", "Col2": "Col", "Col3": "Col"})
    db = KDatabase(schema, _BOOLEAN,
                   {"E": _boolean(g.edges),
                    "C": {},
                    "P": _boolean(_neq_pairs(_COLOURS))},
                   {"Col1": "1", "Col2": "2", "Col3": "3"})
    fw = _framework(
        hics=["forall x y . E(x,y) -> exists j k . C(x,j) & C(y,k) & P(j,k)"],
        hq_plus=["E(x,y)", "P(j,k)"],
        hq_minus=["E(x,y)", "P(j,k)"],
        sqs=["C(x,j)"])
    q = parse_formula("exists x j k . C(x,j) & C(x,k) & P(j,k)")
    return db, fw, q


# --------------------------------------- 3-colourability, repair existence

def reduce_3col_exists(g: Graph) -> Tuple[KDatabase, RepairFramework]:
    """3-colourability as existence of a repair.  C is seeded with every
    vertex-colour pair; repairs must thin it to a proper colouring."""
    schema = Schema(
        attributes={"V": "string", "Col": "string"},
        relations={"E": ("V", "V"), "C": ("V", "Col"), "P": ("Col", "Col")},
        constants={"Col1": "Col", "Col2": "Col", "Col3": "Col"})
    db = KDatabase(schema, _BOOLEAN,
                   {"E": _boolean(g.edges),
                    "C": _boolean((v, c) for v in g.vertices for c in _COLOURS),
                    "P": _boolean(_neq_pairs(_COLOURS))},
                   {"Col1": "1", "Col2": "2", "Col3": "3"})
    fw = _framework(
        hics=["forall x j k . C(x,j) & C(x,k) & P(j,k) -> false",
              "forall x y j k . E(x,y) & C(x,k) & C(y,j) -> P(k,j)"],
        hq_plus=["exists j . C(x,j)", "E(x,y)", "P(j,k)"],
        hq_minus=["E(x,y)", "P(j,k)"],
        sqs=[])
    return db, fw


# --------------------------------------------------- positive 1-in-3-SAT

def reduce_1in3sat(cnf: Cnf3) -> Tuple[KDatabase, RepairFramework, Formula]:
    """Complement of positive 1-in-3-SAT as CQA.  P holds both truth
    values per variable; the hard constraint forces repairs to keep at
    most one, and the shrink-only hard query plus the soft query make
    minimal repairs exactly the total assignments."""
    if not cnf.positive:
        raise ReductionError("1-in-3 instances must be positive")
    schema = Schema(
        attributes={"Var": "string", "Bit": "string"},
        relations={"R": ("Var", "Var", "Var"), "P": ("Var", "Bit"),
                   "E": ("Bit", "Bit"), "S": ("Bit", "Bit", "Bit")},
        constants={"Bit0": "Bit", "Bit1": "Bit"})
    one_hots = {("1", "0", "0"), ("0", "1", "0"), ("0", "0", "1")}
    db = KDatabase(schema, _BOOLEAN,
                   {"R": _boolean(tuple(v for v, _p in cl) for cl in cnf.clauses),
                    "P": _boolean((v, b) for v in cnf.variables for b in _BITS),
                    "E": _boolean([("0", "0"), ("1", "1")]),
                    "S": _boolean(t for t in product(_BITS, repeat=3)
                                  if t not in one_hots)},
                   {"Bit0": "0", "Bit1": "1"})
    fw = _framework(
        hics=["forall x u u' . P(x,u) & P(x,u') -> E(u,u')"],
        hq_plus=["E(x,y)", "R(x,y,z)", "S(u,v,w)"],
        hq_minus=["E(x,y)", "R(x,y,z)", "S(u,v,w)", "P(x,u)"],
        sqs=["P(x,u)"])
    q = parse_formula("exists x1 x2 x3 u1 u2 u3 . R(x1,x2,x3) & P(x1,u1) "
                      "& P(x2,u2) & P(x3,u3) & S(u1,u2,u3)")
    return db, fw, q


# ------------------------------------------------ max-true 3SAT equality

def reduce_maxsat_eq(cnf0: Cnf3, cnf1: Cnf3) \
        -> Tuple[KDatabase, RepairFramework, Formula]:
    """Equality of max-true satisfying assignments as the complement of
    CQA.  Every zero assignment is charged twice through IHAT, so minimal
    repairs maximize ones; F must match the ones of the two sides and A
    becomes non-empty exactly when no one-to-one match exists.

    The encoding reads the two formulas through their clauses only: a
    variable outside every clause is dropped from the assignment relations
    for free, so oracle agreement requires each variable to occur in at
    least one clause."""
    if len(cnf0.variables) != len(cnf1.variables) \
            or len(cnf0.clauses) != len(cnf1.clauses):
        raise ReductionError(
            "the two formulas need equal variable and clause counts")

    # keep the two variable spaces apart in the shared active domain
    v0 = {v: f"{v}_f0" for v in cnf0.variables}
    v1 = {v: f"{v}_f1" for v in cnf1.variables}

    attributes = {"VA": "string", "VB": "string", "Var": "string",
                  "Bit": "string"}
    relations: Dict[str, Tuple[str, ...]] = {
        "I0": ("VA", "Bit"), "I1": ("VB", "Bit"),
        "E": ("Bit", "Bit"), "D": ("Var", "Var"),
        "F": ("VA", "VB"), "A": ("Bit",),
        "IHAT": ("Var", "Bit", "Bit")}
    patterns = ["".join(t) for t in product(_BITS, repeat=3)]
    for a in patterns:
        relations[f"T{a}"] = ("Bit", "Bit", "Bit")
        relations[f"R0_{a}"] = ("VA", "VA", "VA")
        relations[f"R1_{a}"] = ("VB", "VB", "VB")
    schema = Schema(attributes=attributes, relations=relations,
                    constants={"Bit0": "Bit", "Bit1": "Bit", "Bit2": "Bit"})

    records: Dict[str, Dict[Record, int]] = {
        f"T{a}": _boolean(t for t in product(_BITS, repeat=3)
                          if "".join(t) != a)
        for a in patterns}
    for i, (cnf, ren) in enumerate(((cnf0, v0), (cnf1, v1))):
        for cl in cnf.clauses:
            # pattern = the unique assignment falsifying the clause
            a = "".join("0" if pos else "1" for _v, pos in cl)
            rel = f"R{i}_{a}"
            records.setdefault(rel, {})[tuple(ren[v] for v, _p in cl)] = 1
        records[f"I{i}"] = _boolean((ren[v], b) for v in cnf.variables
                                    for b in _BITS)
    records["E"] = _boolean([("0", "0"), ("1", "1")])
    records["D"] = _boolean(
        [(a, b) for a, b in _neq_pairs(sorted(v0.values()))]
        + [(a, b) for a, b in _neq_pairs(sorted(v1.values()))])
    db = KDatabase(schema, _BOOLEAN, records,
                   {"Bit0": "0", "Bit1": "1", "Bit2": "2"})

    hics = []
    for i in range(2):
        for a in patterns:
            hics.append(
                f"forall x1 x2 x3 . R{i}_{a}(x1,x2,x3) -> exists v1 v2 v3 . "
                f"I{i}(x1,v1) & I{i}(x2,v2) & I{i}(x3,v3) & T{a}(v1,v2,v3)")
        hics.append(f"forall x v1 v2 . I{i}(x,v1) & I{i}(x,v2) -> E(v1,v2)")
        hics.append(f'forall x . I{i}(x,"0") -> IHAT(x,"{i}","1") '
                    f'& IHAT(x,"{i}","2")')
    hics.append('forall x . I0(x,"1") -> exists y . F(x,y) & I1(y,"1")')
    hics.append('forall y . I1(y,"1") -> exists x . F(x,y) & I0(x,"1")')
    hics.append("forall x y z . F(x,y) & F(x,z) & D(y,z) -> exists s . A(s)")
    hics.append("forall x y z . F(x,y) & F(z,y) & D(x,z) -> exists s . A(s)")

    frozen = (["E(x,y)", "D(x,y)"]
              + [f"R{i}_{a}(x,y,z)" for i in range(2) for a in patterns]
              + [f"T{a}(x,y,z)" for a in patterns])
    fw = _framework(
        hics=hics,
        hq_plus=frozen,
        hq_minus=frozen + ["I0(x,v)", "I1(x,v)"],
        sqs=["IHAT(x,y,z)", "A(s)"])
    q = parse_formula("exists s . A(s)")
    return db, fw, q


# ---------------------------------------------------------------- oracles

def oracle_3col(g: Graph, max_vertices: int = 8) -> bool:
    """Brute force over all 3^|V| colourings."""
    vs = sorted(g.vertices)
    if len(vs) > max_vertices:
        raise ReductionError(f"graph too large for the oracle ({len(vs)} vertices)")
    edges = g.undirected_edges
    for colouring in product(range(3), repeat=len(vs)):
        f = dict(zip(vs, colouring))
        if all(f[x] != f[y] for x, y in edges):
            return True
    return False


def oracle_1in3sat(cnf: Cnf3) -> bool:
    """Brute force: some assignment makes exactly one literal true per
    clause."""
    vs = sorted(cnf.variables)
    for bits in product((False, True), repeat=len(vs)):
        a = dict(zip(vs, bits))
        if all(sum(a[v] == pos for v, pos in cl) == 1 for cl in cnf.clauses):
            return True
    return False


def _max_true(cnf: Cnf3) -> Optional[int]:
    vs = sorted(cnf.variables)
    best: Optional[int] = None
    for bits in product((False, True), repeat=len(vs)):
        a = dict(zip(vs, bits))
        if cnf.satisfied(a):
            ones = sum(bits)
            best = ones if best is None else max(best, ones)
    return best


def oracle_maxtrue_eq(cnf0: Cnf3, cnf1: Cnf3) -> Optional[bool]:
    """Compare the maximal numbers of true variables over satisfying
    assignments.  Returns None when either formula is unsatisfiable (the
    maximum over an empty set is undefined)."""
    m0, m1 = _max_true(cnf0), _max_true(cnf1)
    if m0 is None or m1 is None:
        return None
    return m0 == m1


# ------------------------------------------------------ classical repairs

CLASSICAL_KINDS = ("subset", "superset", "symdiff", "cardinality")


def oracle_classical_repairs(db: KDatabase, ics: Sequence[Formula],
                             kind: str, max_universe: int = 22) \
        -> List[KDatabase]:
    """Brute-force classical repairs of a Boolean database.

    subset: maximal consistent sub-instances; superset: minimal consistent
    super-instances over the typed-tuple universe; symdiff: consistent
    instances with subset-minimal symmetric difference; cardinality:
    consistent instances with minimum |symmetric difference|."""
    if db.semiring.kind != "boolean":
        raise ReductionError("classical repairs need the Boolean semiring")
    if kind not in CLASSICAL_KINDS:
        raise ReductionError(f"unknown repair kind {kind!r}")

    base: Set[Tuple[str, Record]] = {
        (rel, rec) for rel in db.schema.relations for rec in db.support(rel)}
    universe: List[Tuple[str, Record]] = sorted(
        (rel, rec) for rel in sorted(db.schema.relations)
        for rec in db.typed_tuples(rel))
    if len(universe) > max_universe:
        raise ReductionError(
            f"typed-tuple universe too large for the oracle ({len(universe)})")

    def instance(facts: Iterable[Tuple[str, Record]]) -> KDatabase:
        recs: Dict[str, Dict[Record, int]] = {}
        for rel, rec in facts:
            recs.setdefault(rel, {})[rec] = 1
        return KDatabase(db.schema, db.semiring, recs, db.constants)

    def consistent(d: KDatabase) -> bool:
        ev = Evaluator(d)
        return all(ev.holds(f) for f in ics)

    if kind == "subset":
        facts = sorted(base)
        good = [frozenset(sub)
                for k in range(len(facts), -1, -1)
                for sub in combinations(facts, k)
                if consistent(instance(sub))]
        keep = [s for s in good if not any(s < t for t in good)]
        return sorted((instance(s) for s in keep), key=lambda d: d.facts())

    if kind == "superset":
        extra = sorted(set(universe) - base)
        good = [base | set(add)
                for k in range(len(extra) + 1)
                for add in combinations(extra, k)
                if consistent(instance(base | set(add)))]
        keep = [s for s in good if not any(t < s for t in good)]
        return sorted((instance(s) for s in keep), key=lambda d: d.facts())

    if kind == "cardinality":
        for k in range(len(universe) + 1):
            found = [set(base).symmetric_difference(flips)
                     for flips in combinations(universe, k)
                     if consistent(instance(
                         set(base).symmetric_difference(flips)))]
            if found:
                return sorted((instance(s) for s in found),
                              key=lambda d: d.facts())
        return []

    # symdiff: subset-minimal symmetric difference
    good_diffs: List[FrozenSet[Tuple[str, Record]]] = []
    for k in range(len(universe) + 1):
        for flips in combinations(universe, k):
            diff = frozenset(flips)
            if any(d <= diff for d in good_diffs):
                continue
            if consistent(instance(set(base).symmetric_difference(diff))):
                good_diffs.append(diff)
    return sorted((instance(set(base).symmetric_difference(d))
                   for d in good_diffs), key=lambda d: d.facts())


# ------------------------------------------------------- small instances

def small_graphs(max_vertices: int = 4) -> List[Graph]:
    """All graphs on 1..max_vertices vertices, up to isomorphism."""
    out: List[Graph] = []
    seen: Set[Tuple[int, FrozenSet[Tuple[int, int]]]] = set()
    for n in range(1, max_vertices + 1):
        pairs = list(combinations(range(n), 2))
        for picks in product((False, True), repeat=len(pairs)):
            edges = {p for p, chosen in zip(pairs, picks) if chosen}
            canon = min(
                (frozenset((min(pi[x], pi[y]), max(pi[x], pi[y]))
                           for x, y in edges)
                 for pi in permutations(range(n))),
                key=sorted)
            if (n, canon) in seen:
                continue
            seen.add((n, canon))
            out.append(Graph(frozenset(f"v{i}" for i in range(n)),
                             frozenset((f"v{x}", f"v{y}") for x, y in edges)))
    return out
