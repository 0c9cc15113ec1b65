"""Repair search: candidate enumeration, minimality, existence and CQA.

The search space is the grid of type-consistent ground atoms ("coordinates")
over the original database's attribute ranges (plus any extra values), each
carrying a finite set of admissible annotations.  Atomic hard queries prune
the sets directly; everything else is compiled into ground constraints that
a depth-first search checks as soon as their coordinates are assigned.
Distance-mode searches run iterative deepening with branch-and-bound on the
accumulated per-coordinate distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Dict, FrozenSet, Iterable, Iterator, List, \
    Optional, Sequence, Set, Tuple

from . import framework as fwk
from . import logic
from .framework import (MODE_AWARE, ORDER_CLOSENESS, ORDER_LITERAL,
                        RepairFramework, check_hard_queries,
                        inconsistency_measure, relativise)
from .kdata import KDatabase, Record, Schema
from .logic import Atom, Const, Evaluator, Formula, Lit, Not, Var, free_vars
from .semiring import AGG_MAX, AGG_SUM, Value


class EngineError(RuntimeError):
    pass


class BudgetError(EngineError):
    """The search exceeded the configured candidate budget."""


@dataclass(frozen=True)
class CandidateBounds:
    """Finitization knobs for the candidate space."""

    ann_cap: Optional[int] = None          # natural semiring annotation cap
    extra_values: Tuple[str, ...] = ()
    max_candidates: Optional[int] = 2_000_000

    def cap_for(self, db: KDatabase) -> int:
        observed = max([1] + [ann for recs in db.relations.values()
                              for ann in recs.values()
                              if isinstance(ann, int)])
        if self.ann_cap is None:
            return observed
        return max(self.ann_cap, observed)


@dataclass(frozen=True)
class RepairReport:
    repairs: Tuple[KDatabase, ...]
    min_distance: Optional[Value]          # distance mode only
    candidates_examined: int


@dataclass(frozen=True)
class CQAAnswer:
    query: Formula
    tuple: Tuple[str, ...]
    verdict: str                           # consistent | not-consistent
    vacuous: bool

    CONSISTENT = "consistent"
    NOT_CONSISTENT = "not-consistent"


# ------------------------------------------------------------------
# ground expression trees over coordinates
#
# node shapes: ("k", value) constant; ("c", i) coordinate value;
# ("nc", i) indicator of coordinate i being zero; ("+", parts);
# ("*", parts).

def _tree_deps(node, out: Set[int]) -> None:
    tag = node[0]
    if tag in ("c", "nc"):
        out.add(node[1])
    elif tag in ("+", "*"):
        for p in node[1]:
            _tree_deps(p, out)


def _eval_num(node, assign: List[Value], sr) -> Value:
    tag = node[0]
    if tag == "k":
        return node[1]
    if tag == "c":
        return assign[node[1]]
    if tag == "nc":
        return sr.one if assign[node[1]] == sr.zero else sr.zero
    if tag == "+":
        out = sr.zero
        for p in node[1]:
            out = sr.add(out, _eval_num(p, assign, sr))
        return out
    out = sr.one
    for p in node[1]:
        out = sr.mul(out, _eval_num(p, assign, sr))
        if out == sr.zero:
            return out
    return out


def _eval_bool(node, assign: List[Value]) -> bool:
    tag = node[0]
    if tag == "k":
        return node[1] != 0
    if tag == "c":
        return assign[node[1]] != 0
    if tag == "nc":
        return assign[node[1]] == 0
    if tag == "+":
        return any(_eval_bool(p, assign) for p in node[1])
    return all(_eval_bool(p, assign) for p in node[1])


def _tree_bounds(node, lo_assign, hi_assign, sr) -> Tuple[Value, Value]:
    """Value interval of a tree; sound because + and * are monotone."""
    return (_eval_num(node, lo_assign, sr), _eval_num(node, hi_assign, sr))


# ------------------------------------------------------------------
# domain exactness: does evaluating a constraint with quantifiers over
# the full original domain agree with evaluating it over the candidate's
# own (possibly smaller) active domain, for every candidate?

def _vars_alive_when_false(f: Formula) -> FrozenSet[str]:
    """Variables whose values must appear in the database whenever the
    (NNF) formula is false."""
    if isinstance(f, Not) and isinstance(f.body, Atom):
        return frozenset(t.name for t in f.body.args if isinstance(t, Var))
    if isinstance(f, logic.Or):
        out: FrozenSet[str] = frozenset()
        for p in f.parts:
            out |= _vars_alive_when_false(p)
        return out
    if isinstance(f, logic.And):
        outs = [_vars_alive_when_false(p) for p in f.parts]
        return frozenset.intersection(*outs) if outs else frozenset()
    if isinstance(f, logic.Quant):
        return _vars_alive_when_false(f.body) - {f.var}
    return frozenset()


def _vars_alive_when_true(f: Formula) -> FrozenSet[str]:
    if isinstance(f, Atom):
        return frozenset(t.name for t in f.args if isinstance(t, Var))
    if isinstance(f, logic.And):
        out: FrozenSet[str] = frozenset()
        for p in f.parts:
            out |= _vars_alive_when_true(p)
        return out
    if isinstance(f, logic.Or):
        outs = [_vars_alive_when_true(p) for p in f.parts]
        return frozenset.intersection(*outs) if outs else frozenset()
    if isinstance(f, logic.Quant):
        return _vars_alive_when_true(f.body) - {f.var}
    return frozenset()


def _domain_exact(f: Formula) -> bool:
    """True if the truth of the NNF sentence is insensitive to enlarging
    the quantification domain with values absent from the database."""
    if isinstance(f, (logic.TrueF, logic.FalseF, Atom, logic.Cmp)):
        return True
    if isinstance(f, Not):
        return isinstance(f.body, Atom)
    if isinstance(f, (logic.And, logic.Or)):
        return all(_domain_exact(p) for p in f.parts)
    if isinstance(f, logic.Quant):
        if not _domain_exact(f.body):
            return False
        if f.kind == "exists":
            return f.var in _vars_alive_when_true(f.body)
        return f.var in _vars_alive_when_false(f.body)
    return False


def _zero_when_dead(var: str, f: Formula) -> bool:
    """Is the formula's semiring value 0 whenever `var` is bound to a value
    outside the database?"""
    if isinstance(f, Atom):
        return any(isinstance(t, Var) and t.name == var for t in f.args)
    if isinstance(f, logic.And):
        return any(_zero_when_dead(var, p) for p in f.parts)
    if isinstance(f, logic.Or):
        return all(_zero_when_dead(var, p) for p in f.parts)
    if isinstance(f, logic.Quant) and f.kind == "exists" and f.var != var:
        return _zero_when_dead(var, f.body)
    return False


def _value_exact(f: Formula) -> bool:
    """True if the NNF formula's semiring *value* is insensitive to
    enlarging the quantification domain (every summand over a dead value
    vanishes; universal quantifiers are rejected conservatively)."""
    if isinstance(f, (logic.TrueF, logic.FalseF, Atom, logic.Cmp)):
        return True
    if isinstance(f, Not):
        return isinstance(f.body, Atom)
    if isinstance(f, (logic.And, logic.Or)):
        return all(_value_exact(p) for p in f.parts)
    if isinstance(f, logic.Quant):
        return (f.kind == "exists" and _value_exact(f.body)
                and _zero_when_dead(f.var, f.body))
    return False


def _relations_of(f: Formula, out: Set[str]) -> None:
    if isinstance(f, Atom):
        out.add(f.rel)
    elif isinstance(f, Not):
        _relations_of(f.body, out)
    elif isinstance(f, (logic.And, logic.Or)):
        for p in f.parts:
            _relations_of(p, out)
    elif isinstance(f, (logic.Implies, logic.Iff)):
        _relations_of(f.left, out)
        _relations_of(f.right, out)
    elif isinstance(f, (logic.Quant, logic.Count)):
        _relations_of(f.body, out)


# ------------------------------------------------------------------

def _atomic_pattern(f: Formula) -> Optional[Tuple[bool, Atom]]:
    """(positive?, atom) when the formula is a bare or negated atom."""
    if isinstance(f, Atom):
        return True, f
    if isinstance(f, Not) and isinstance(f.body, Atom):
        return False, f.body
    return None


def _match(atom: Atom, rec: Record, db: KDatabase) -> bool:
    binding: Dict[str, str] = {}
    for t, v in zip(atom.args, rec):
        if isinstance(t, Var):
            if binding.setdefault(t.name, v) != v:
                return False
        elif isinstance(t, Const):
            if db.constants.get(t.name) != v:
                return False
        elif t.value != v:
            return False
    return True


class _Space:
    """The finite candidate grid plus all compiled ground constraints."""

    def __init__(self, db: KDatabase, fw: RepairFramework,
                 bounds: CandidateBounds, need_distance: bool,
                 order_semantics: str = ORDER_CLOSENESS,
                 thin: bool = False, thin_uncovered: bool = False):
        if db.semiring.kind == "probability":
            raise EngineError(
                "candidate enumeration is unsupported for the probability "
                "semiring (evaluation only)")
        self.db = db
        self.fw = fw
        self.bounds = bounds
        self.sr = db.semiring
        self.need_distance = need_distance
        self.order_semantics = order_semantics
        self.aware = fw.mode == MODE_AWARE and self.sr.kind == "natural"
        self.cap = bounds.cap_for(db)
        self.extras = tuple(bounds.extra_values)
        self.domain: List[str] = sorted(db.active_domain() | set(self.extras))
        self.nodes = 0
        self.leaves = 0

        # coordinates
        self.coords: List[Tuple[str, Record]] = []
        self.coord_index: Dict[Tuple[str, Record], int] = {}
        for rel in sorted(db.schema.relations):
            for rec in db.typed_tuples(rel, self.extras):
                self.coord_index[(rel, rec)] = len(self.coords)
                self.coords.append((rel, rec))
        self.base: List[Value] = [db.annotation(r, rec)
                                  for r, rec in self.coords]

        # admissible values per coordinate
        self.values: List[List[Value]] = []
        for w in self.base:
            if self.aware:
                vals = list(range(0, self.cap + 1))
            else:
                vals = sorted({0, w if w > 0 else 1})
            self.values.append(vals)
        self._apply_atomic_hq()
        self.feasible = all(self.values)

        self.pinned = [len(v) == 1 for v in self.values]
        self.pin_value = [v[0] if len(v) == 1 else None for v in self.values]

        # ground constraints from non-atomic hard queries
        self._ev_db = Evaluator(db, extra_domain=self.domain)
        self.bool_constraints: List[Tuple[object, bool]] = []
        self.num_constraints: List[Tuple[object, Value, bool]] = []  # tree, w0, keep_geq
        self._compile_hq()

        # ground clauses from hard constraints; inexact ones fall back to
        # a direct check on the completed candidate
        self.clauses: List[Tuple[object, bool]] = []
        self.leaf_hics: List[Formula] = []
        self._compile_hics()

        # soft constraints, compiled when their value survives shrinking
        # the active domain; otherwise checked on the completed candidate
        self.im_trees: List[object] = []
        self.im_compiled = False
        self._compile_sics()

        # distance structure
        self.cost: List[Dict[Value, Value]] = [dict() for _ in self.coords]
        self.residual_sql: List[Tuple[object, Value]] = []
        self.sql_instances: List[Tuple[str, object, Value]] = []  # kind, ref, w0
        if need_distance or fw.compare == fwk.COMPARE_ORDER:
            self._compile_sql()

        if thin:
            self._thin_values(thin_uncovered)
            self.pinned = [len(v) == 1 for v in self.values]
            self.pin_value = [v[0] if len(v) == 1 else None
                              for v in self.values]
            self.feasible = self.feasible and all(self.values)

        self._order_dfs()

    # -- weights

    def _wfun(self, v: Value) -> Value:
        if self.fw.mode == MODE_AWARE:
            return v
        return self.sr.one if v != 0 else self.sr.zero

    # -- atomic hard queries restrict coordinate values directly

    def _apply_atomic_hq(self) -> None:
        db, sr = self.db, self.sr
        for queries, is_plus in ((self.fw.hq_plus, True),
                                 (self.fw.hq_minus, False)):
            for q in queries:
                pat = _atomic_pattern(q)
                if pat is None:
                    continue
                positive, atom = pat
                if atom.rel not in db.schema.relations:
                    continue
                for i, (rel, rec) in enumerate(self.coords):
                    if rel != atom.rel or not _match(atom, rec, db):
                        continue
                    w = self.base[i]
                    if positive:
                        if self.fw.mode == MODE_AWARE:
                            keep = ((lambda v, w=w: sr.leq(w, v)) if is_plus
                                    else (lambda v, w=w: sr.leq(v, w)))
                        else:
                            if is_plus:
                                keep = (lambda v, w=w: v != 0 or w == 0)
                            else:
                                keep = (lambda v, w=w: v == 0 or w != 0)
                    else:
                        # floor of a negated atom flips the support bit
                        if is_plus:
                            keep = (lambda v, w=w: v == 0 or w != 0)
                        else:
                            keep = (lambda v, w=w: v != 0 or w == 0)
                    self.values[i] = [v for v in self.values[i] if keep(v)]

    # -- compiling formulas to ground trees

    def _compile(self, f: Formula, env: Dict[str, str]):
        sr = self.sr
        if isinstance(f, logic.TrueF):
            return ("k", sr.one)
        if isinstance(f, logic.FalseF):
            return ("k", sr.zero)
        if isinstance(f, logic.Cmp):
            a = self._resolve(f.left, env)
            b = self._resolve(f.right, env)
            holds = (a == b) if f.op == "=" else (a != b)
            return ("k", sr.one if holds else sr.zero)
        if isinstance(f, Atom):
            rec = tuple(self._resolve(t, env) for t in f.args)
            i = self.coord_index.get((f.rel, rec))
            if i is None:
                return ("k", sr.zero)
            if self.pinned[i]:
                return ("k", self.pin_value[i])
            return ("c", i)
        if isinstance(f, Not):
            assert isinstance(f.body, Atom), "expects negation normal form"
            rec = tuple(self._resolve(t, env) for t in f.body.args)
            i = self.coord_index.get((f.body.rel, rec))
            if i is None:
                return ("k", sr.one)
            if self.pinned[i]:
                return ("k", sr.one if self.pin_value[i] == 0 else sr.zero)
            return ("nc", i)
        if isinstance(f, (logic.And, logic.Or)):
            mul = isinstance(f, logic.And)
            absorb = self._absorbing(mul)
            parts = []
            for p in f.parts:
                node = self._compile(p, env)
                if node == absorb:
                    return absorb
                parts.append(node)
            return self._combine(parts, mul)
        if isinstance(f, logic.Quant):
            mul = f.kind == "forall"
            absorb = self._absorbing(mul)
            parts = []
            shadow = env.get(f.var)
            try:
                for value in self.domain:
                    env[f.var] = value
                    node = self._compile(f.body, env)
                    if node == absorb:
                        return absorb
                    parts.append(node)
            finally:
                if shadow is None:
                    env.pop(f.var, None)
                else:
                    env[f.var] = shadow
            return self._combine(parts, mul)
        return self._compile(logic.normalize(f), env)

    def _absorbing(self, mul: bool) -> Optional[Tuple[str, Value]]:
        """Constant node that settles the combination outright: zero for
        products always, one for sums only where addition is idempotent
        at one (the Boolean semiring)."""
        if mul:
            return ("k", self.sr.zero)
        if self.sr.kind == "boolean":
            return ("k", self.sr.one)
        return None

    def _resolve(self, t, env: Dict[str, str]) -> str:
        if isinstance(t, Var):
            return env[t.name]
        if isinstance(t, Const):
            return self.db.constants[t.name]
        return t.value

    def _combine(self, parts, mul: bool):
        sr = self.sr
        const = sr.one if mul else sr.zero
        rest = []
        for p in parts:
            if p[0] == "k":
                const = sr.combine(const, p[1], "mul" if mul else "add")
                if mul and const == sr.zero:
                    return ("k", sr.zero)
            else:
                rest.append(p)
        if not rest:
            return ("k", const)
        if mul:
            if const != sr.one:
                rest.append(("k", const))
        else:
            if const != sr.zero:
                rest.append(("k", const))
        if len(rest) == 1:
            return rest[0]
        return ("*" if mul else "+", tuple(rest))

    # -- hard queries (non-atomic): per-ground-instance comparisons

    def _compile_hq(self) -> None:
        boolean_weights = self.fw.mode != MODE_AWARE or self.sr.kind == "boolean"
        for queries, is_plus in ((self.fw.hq_plus, True),
                                 (self.fw.hq_minus, False)):
            for q in queries:
                if _atomic_pattern(q) is not None:
                    continue
                nf = logic.normalize(q)
                for gq in relativise([q], self.db, extra_values=self.extras):
                    for env in gq.envs():
                        if boolean_weights:
                            w0 = self._ev_db.holds(q, env)
                            tree = self._compile(nf, dict(env))
                            if is_plus and w0:
                                self.bool_constraints.append((tree, True))
                            elif not is_plus and not w0:
                                self.bool_constraints.append((tree, False))
                        else:
                            w0 = self._ev_db.evaluate(q, env)
                            tree = self._compile(nf, dict(env))
                            self.num_constraints.append((tree, w0, is_plus))

    # -- hard constraints

    def _compile_hics(self) -> None:
        for hic in self.fw.hics:
            nf = logic.normalize(hic)
            if not _domain_exact(nf):
                self.leaf_hics.append(hic)
                continue
            tree = self._compile(nf, {})
            parts = tree[1] if tree[0] == "*" else (tree,)
            for p in parts:
                if p[0] == "k":
                    if p[1] == 0:
                        self.feasible = False
                else:
                    self.clauses.append((p, True))

    # -- soft constraints

    def _compile_sics(self) -> None:
        if not self.fw.sics:
            self.im_compiled = True
            return
        boolean_kind = self.fw.im.fsc == fwk.FSC_BOOLEAN
        trees = []
        for sic in self.fw.sics:
            neg = logic.normalize(Not(sic))
            exact = _domain_exact(neg) if boolean_kind else _value_exact(neg)
            if not exact:
                return  # fall back to direct evaluation at leaves
            trees.append(self._compile(neg, {}))
        self.im_trees = trees
        self.im_compiled = True

    def _im_value(self, assign: List[Value]) -> Value:
        vals = []
        for tree in self.im_trees:
            if self.fw.im.fsc == fwk.FSC_BOOLEAN:
                vals.append(self.sr.one if _eval_bool(tree, assign)
                            else self.sr.zero)
            else:
                vals.append(_eval_num(tree, assign, self.sr))
        return self.sr.aggregate(vals, self.fw.im.agg)

    # -- value thinning: for a coordinate observed only through its
    # zero-pattern (boolean clauses, atomic soft-query costs), values in
    # the same pattern class with strictly dominated costs can never occur
    # in a minimal (or any distance-bounded) repair: reverting to the
    # cheaper class representative yields a strictly closer candidate that
    # passes the same checks.

    def _thin_values(self, thin_uncovered: bool) -> None:
        protected: Set[int] = set()
        for tree, _w0, _k in self.num_constraints:
            _tree_deps(tree, protected)
        numeric = self.fw.mode == MODE_AWARE and self.sr.kind != "boolean"
        if numeric:
            for tree, _w0 in self.residual_sql:
                _tree_deps(tree, protected)
        if self.im_compiled:
            if self.fw.im.fsc != fwk.FSC_BOOLEAN:
                for tree in self.im_trees:
                    _tree_deps(tree, protected)
        else:
            rels: Set[str] = set()
            for sic in self.fw.sics:
                _relations_of(sic, rels)
            protected |= {i for i, (rel, _r) in enumerate(self.coords)
                          if rel in rels}
        leaf_rels: Set[str] = set()
        for hic in self.leaf_hics:
            _relations_of(hic, leaf_rels)
        protected |= {i for i, (rel, _r) in enumerate(self.coords)
                      if rel in leaf_rels}

        insts_by_coord: Dict[int, List[Tuple[bool, Value]]] = {}
        for kind, ref, w0 in self.sql_instances:
            if kind == "coord":
                insts_by_coord.setdefault(ref[0], []).append((ref[1], w0))

        for i in range(len(self.coords)):
            if i in protected or self.pinned[i]:
                continue
            insts = insts_by_coord.get(i, [])
            if not insts and not thin_uncovered:
                continue

            def key(v: Value) -> Tuple[Value, ...]:
                return tuple(self.sr.delta(w0, self._hq_weight_atomic(p, v))
                             for p, w0 in insts)

            kept = []
            for v in self.values[i]:
                kv = key(v)
                same_class = [u for u in self.values[i]
                              if (u == 0) == (v == 0) and u != v]
                if insts:
                    dominated = any(
                        key(u) != kv and all(self.sr.leq(a, b)
                                             for a, b in zip(key(u), kv))
                        for u in same_class)
                else:
                    # nothing observes the value: keep the base-closest
                    dominated = any(
                        abs(u - self.base[i]) < abs(v - self.base[i])
                        or (abs(u - self.base[i]) == abs(v - self.base[i])
                            and u < v)
                        for u in same_class)
                if not dominated:
                    kept.append(v)
            if kept:
                self.values[i] = kept

    # -- soft queries: coordinate costs plus residual ground trees

    def _compile_sql(self) -> None:
        for q in self.fw.sqs:
            pat = _atomic_pattern(q)
            if pat is not None and pat[1].rel in self.db.schema.relations:
                positive, atom = pat
                for i, (rel, rec) in enumerate(self.coords):
                    if rel != atom.rel or not _match(atom, rec, self.db):
                        continue
                    w0 = self._hq_weight_atomic(positive, self.base[i])
                    self.sql_instances.append(("coord", (i, positive), w0))
                    if self.pinned[i]:
                        continue
                    for v in self.values[i]:
                        wv = self._hq_weight_atomic(positive, v)
                        d = self.sr.delta(w0, wv)
                        self.cost[i][v] = self.cost[i].get(v, 0) + d \
                            if self.fw.agg == AGG_SUM else max(self.cost[i].get(v, 0), d)
                continue
            nf = logic.normalize(q)
            for gq in relativise([q], self.db, extra_values=self.extras):
                for env in gq.envs():
                    if self.fw.mode == MODE_AWARE:
                        w0 = self._ev_db.evaluate(q, env)
                    else:
                        w0 = self._ev_db.floor(q, env)
                    tree = self._compile(nf, dict(env))
                    self.residual_sql.append((tree, w0))
                    self.sql_instances.append(("tree", tree, w0))

    def _hq_weight_atomic(self, positive: bool, v: Value) -> Value:
        if positive:
            return self._wfun(v)
        return self.sr.one if v == 0 else self.sr.zero

    def _tree_weight(self, tree, assign: List[Value]) -> Value:
        if self.fw.mode == MODE_AWARE:
            return _eval_num(tree, assign, self.sr)
        return self.sr.one if _eval_bool(tree, assign) else self.sr.zero

    # -- DFS ordering and constraint readiness

    def _constraint_order(self) -> List[int]:
        """Order the unpinned coordinates so ground constraints become
        checkable as early as possible: repeatedly emit the dependencies
        of the constraint with the fewest coordinates still unplaced."""
        remaining = {i for i in range(len(self.coords)) if not self.pinned[i]}
        groups: List[Set[int]] = []

        def add_group(trees) -> None:
            deps: Set[int] = set()
            for tree in trees:
                _tree_deps(tree, deps)
            deps &= remaining
            if deps:
                groups.append(deps)

        for tree, _expect in self.clauses + self.bool_constraints:
            add_group([tree])
        for tree, _w0, _keep_geq in self.num_constraints:
            add_group([tree])
        if self.im_compiled and self.fw.sics:
            add_group(self.im_trees)

        order: List[int] = []
        while groups:
            best = min(groups, key=lambda g: (len(g), sorted(g)))
            order.extend(sorted(best))
            remaining -= best
            groups = [g - best for g in groups]
            groups = [g for g in groups if g]
        order.extend(sorted(remaining))
        return order

    def _order_dfs(self) -> None:
        self.order = self._constraint_order()
        pos = {c: d for d, c in enumerate(self.order)}

        def readiness(deps: Set[int]) -> int:
            # pinned coordinates are preset in every assignment
            return max((pos[c] for c in deps if c in pos), default=-1)

        self.bool_at: List[List[Tuple[object, bool]]] = \
            [[] for _ in range(len(self.order))]
        self.num_at: List[List[Tuple[object, Value, bool]]] = \
            [[] for _ in range(len(self.order))]
        self.upfront_ok = True
        for tree, expect in self.clauses + self.bool_constraints:
            deps: Set[int] = set()
            _tree_deps(tree, deps)
            r = readiness(deps)
            if r < 0:
                self.upfront_ok = self.upfront_ok and \
                    (_eval_bool(tree, self.assign_template()) == expect)
            else:
                self.bool_at[r].append((tree, expect))
        for tree, w0, keep_geq in self.num_constraints:
            deps = set()
            _tree_deps(tree, deps)
            r = readiness(deps)
            if r < 0:
                v = self._tree_weight(tree, self.assign_template())
                ok = self.sr.leq(w0, v) if keep_geq else self.sr.leq(v, w0)
                self.upfront_ok = self.upfront_ok and ok
            else:
                self.num_at[r].append((tree, w0, keep_geq))

        self.im_check_at: Optional[int] = None
        if self.im_compiled and self.fw.sics:
            deps = set()
            for tree in self.im_trees:
                _tree_deps(tree, deps)
            r = readiness(deps)
            if r < 0:
                im = self._im_value(self.assign_template())
                self.upfront_ok = self.upfront_ok and self.sr.leq(im, self._eps())
            else:
                self.im_check_at = r

        # values tried in ascending distance-cost, database value first
        self.sorted_values: List[List[Value]] = []
        for i, vals in enumerate(self.values):
            base = self.base[i]
            self.sorted_values.append(sorted(
                vals, key=lambda v, i=i, b=base: (self.cost[i].get(v, 0), v != b, v)))

    # -- leaf handling

    def assign_template(self) -> List[Value]:
        return [pv if pv is not None else 0 for pv in self.pin_value]

    def build(self, assign: List[Value]) -> KDatabase:
        recs: Dict[str, Dict[Record, Value]] = {}
        for (rel, rec), v in zip(self.coords, assign):
            if v != 0:
                recs.setdefault(rel, {})[rec] = v
        return KDatabase(self.db.schema, self.sr, recs, self.db.constants)

    def leaf_passes(self, assign: List[Value],
                    cand: Optional[KDatabase] = None) -> Optional[KDatabase]:
        """Run the checks that need the completed candidate."""
        check_im = self.fw.sics and not self.im_compiled
        if self.leaf_hics or check_im:
            cand = cand or self.build(assign)
            ev = Evaluator(cand)
            for hic in self.leaf_hics:
                if not ev.holds(hic):
                    return None
            if check_im:
                im = inconsistency_measure(cand, self.fw.sics, self.fw.im, ev)
                if not self.sr.leq(im, self._eps()):
                    return None
        return cand or self.build(assign)

    def _eps(self) -> Value:
        return self.fw.epsilon

    def residual_distance(self, assign: List[Value]) -> Value:
        out: Value = 0
        for tree, w0 in self.residual_sql:
            d = self.sr.delta(w0, self._tree_weight(tree, assign))
            out = out + d if self.fw.agg == AGG_SUM else max(out, d)
        return out

    def sql_vector(self, assign: List[Value]) -> Tuple[Value, ...]:
        """Candidate weights of all ground soft-query instances."""
        out = []
        for kind, ref, _w0 in self.sql_instances:
            if kind == "coord":
                i, positive = ref
                out.append(self._hq_weight_atomic(positive, assign[i]))
            else:
                out.append(self._tree_weight(ref, assign))
        return tuple(out)

    def sql_base_vector(self) -> Tuple[Value, ...]:
        return tuple(w0 for _k, _r, w0 in self.sql_instances)

    def distance_upper_bound(self) -> Value:
        lo = [v[0] for v in (sorted(vs) for vs in self.values)]
        hi_assign = [max(vs) for vs in self.values]
        lo_assign = [min(vs) for vs in self.values]
        total: Value = 0
        for kind, ref, w0 in self.sql_instances:
            if kind == "coord":
                i, positive = ref
                d = max((self.sr.delta(w0, self._hq_weight_atomic(positive, v))
                         for v in self.values[i]), default=0)
            else:
                if self.fw.mode == MODE_AWARE:
                    vlo, vhi = _tree_bounds(ref, lo_assign, hi_assign, self.sr)
                else:
                    vlo, vhi = 0, 1
                d = max(self.sr.delta(w0, vlo), self.sr.delta(w0, vhi))
            total = total + d if self.fw.agg == AGG_SUM else max(total, d)
        return total

    # -- the search itself

    def search(self, on_leaf: Callable[[List[Value], Value], bool],
               bound: Optional[Value] = None) -> None:
        """DFS over unpinned coordinates.  `on_leaf(assign, cost)` returns
        True to stop the whole search.  `bound` prunes partial sums of
        coordinate costs (residual soft queries are settled at the leaf)."""
        if not self.feasible or not self.upfront_ok:
            return
        budget = self.bounds.max_candidates
        assign = self.assign_template()
        order, svals, cost = self.order, self.sorted_values, self.cost
        agg_sum = self.fw.agg == AGG_SUM

        def rec(d: int, acc: Value) -> bool:
            self.nodes += 1
            if budget is not None and self.nodes > budget:
                raise BudgetError(
                    f"candidate budget of {budget} exceeded")
            if d == len(order):
                self.leaves += 1
                return on_leaf(assign, acc)
            i = order[d]
            for v in svals[i]:
                c = cost[i].get(v, 0)
                acc2 = acc + c if agg_sum else max(acc, c)
                if bound is not None and acc2 > bound:
                    continue
                assign[i] = v
                ok = True
                for tree, expect in self.bool_at[d]:
                    if _eval_bool(tree, assign) != expect:
                        ok = False
                        break
                if ok:
                    for tree, w0, keep_geq in self.num_at[d]:
                        val = self._tree_weight(tree, assign)
                        good = self.sr.leq(w0, val) if keep_geq \
                            else self.sr.leq(val, w0)
                        if not good:
                            ok = False
                            break
                if ok and d == self.im_check_at:
                    ok = self.sr.leq(self._im_value(assign), self._eps())
                if ok and rec(d + 1, acc2):
                    return True
            assign[order[d]] = 0
            return False

        rec(0, 0)


# ------------------------------------------------------------------ ops

def enumerate_candidates(db: KDatabase, fw: RepairFramework,
                         bounds: CandidateBounds = CandidateBounds()
                         ) -> Iterator[KDatabase]:
    """The unpruned candidate stream: every annotation assignment to every
    type-consistent coordinate, within the mode's value sets."""
    space = _Space(db, fw, bounds, need_distance=False)
    value_sets = []
    for i, w in enumerate(space.base):
        if space.aware:
            value_sets.append(list(range(0, space.cap + 1)))
        else:
            value_sets.append(sorted({0, w if w > 0 else 1}))
    estimate = 1
    for vs in value_sets:
        estimate *= len(vs)
        if bounds.max_candidates is not None and estimate > bounds.max_candidates:
            raise BudgetError(
                f"candidate space of at least {estimate} exceeds the budget "
                f"of {bounds.max_candidates}")
    for combo in product(*value_sets):
        yield space.build(list(combo))


def is_repair_candidate(db: KDatabase, cand: KDatabase, fw: RepairFramework,
                        extra_values: Iterable[str] = ()) -> bool:
    """Direct check of the hard conditions: domain containment, hard
    constraints, hard-query preservation, and bounded inconsistency."""
    allowed = db.active_domain() | set(extra_values)
    if not cand.active_domain() <= allowed:
        return False
    ev = Evaluator(cand)
    if not all(ev.holds(h) for h in fw.hics):
        return False
    if not check_hard_queries(db, cand, fw, extra_values):
        return False
    im = inconsistency_measure(cand, fw.sics, fw.im, ev)
    return db.semiring.leq(im, fw.epsilon)


def _canonical(dbs: Iterable[KDatabase]) -> Tuple[KDatabase, ...]:
    return tuple(sorted(dbs, key=lambda d: d.facts()))


def repairs(db: KDatabase, fw: RepairFramework,
            bounds: CandidateBounds = CandidateBounds(),
            order_semantics: str = ORDER_CLOSENESS) -> RepairReport:
    """All repairs: candidates passing the hard conditions that are minimal
    in the framework's comparison mode."""
    if fw.compare == fwk.COMPARE_DISTANCE:
        return _repairs_distance(db, fw, bounds)
    return _repairs_order(db, fw, bounds, order_semantics)


def _repairs_distance(db, fw, bounds) -> RepairReport:
    space = _Space(db, fw, bounds, need_distance=True, thin=True)
    ub = space.distance_upper_bound()
    found: List[KDatabase] = []
    best: Optional[Value] = None

    bound = 0
    while True:
        hits: List[Tuple[KDatabase, Value]] = []

        def on_leaf(assign, acc):
            total = acc if not space.residual_sql else \
                _agg2(space, acc, space.residual_distance(assign))
            if total > bound:
                return False
            cand = space.leaf_passes(assign)
            if cand is not None:
                hits.append((cand, total))
            return False

        space.search(on_leaf, bound=bound)
        if hits:
            best = min(t for _c, t in hits)
            found = [c for c, t in hits if t == best]
            break
        if bound >= ub:
            break
        bound += 1
    return RepairReport(_canonical(found), best, space.leaves)


def _agg2(space, a: Value, b: Value) -> Value:
    return a + b if space.fw.agg == AGG_SUM else max(a, b)


def _repairs_order(db, fw, bounds, order_semantics) -> RepairReport:
    space = _Space(db, fw, bounds, need_distance=False,
                   order_semantics=order_semantics, thin=True)
    base_vec = space.sql_base_vector()
    sr = space.sr
    passers: List[Tuple[KDatabase, Tuple[Value, ...]]] = []

    def on_leaf(assign, _acc):
        cand = space.leaf_passes(assign)
        if cand is not None:
            passers.append((cand, space.sql_vector(assign)))
        return False

    space.search(on_leaf)

    def strictly_closer(va, vb) -> bool:
        # does a strictly precede b in the chosen order semantics?
        a_le = b_le = True
        for w0, wa, wb in zip(base_vec, va, vb):
            if order_semantics == ORDER_LITERAL:
                a_le = a_le and sr.leq(w0, wa) and sr.leq(wa, wb)
                b_le = b_le and sr.leq(w0, wb) and sr.leq(wb, wa)
            else:
                da, db_ = sr.delta(w0, wa), sr.delta(w0, wb)
                a_le = a_le and sr.leq(da, db_)
                b_le = b_le and sr.leq(db_, da)
            if not a_le:
                return False
        return a_le and not b_le

    # any dominator of a candidate is itself dominated by some minimal
    # passer, so comparing against the running frontier suffices; sorting
    # by total change lets dominators precede what they dominate
    def total(vec) -> Value:
        return sum(sr.delta(w0, w) for w0, w in zip(base_vec, vec))

    frontier: List[Tuple[KDatabase, Tuple[Value, ...]]] = []
    for cand, vec in sorted(passers, key=lambda p: total(p[1])):
        if not any(strictly_closer(vo, vec) for _o, vo in frontier):
            frontier.append((cand, vec))
    return RepairReport(_canonical(c for c, _v in frontier), None,
                        space.leaves)


def exists_repair(db: KDatabase, fw: RepairFramework,
                  bounds: CandidateBounds = CandidateBounds()) -> bool:
    """Does any candidate pass the hard conditions?  Minimality and the
    soft queries play no role in existence."""
    space = _Space(db, fw, bounds, need_distance=False,
                   thin=True, thin_uncovered=True)
    found = []

    def on_leaf(assign, _acc):
        if space.leaf_passes(assign) is not None:
            found.append(True)
            return True
        return False

    space.search(on_leaf)
    return bool(found)


# -- existential second-order formulation

def eso_exists_repair_check(db: KDatabase, fw: RepairFramework,
                            bounds: CandidateBounds = CandidateBounds()) -> bool:
    """Decides existence by model checking: guess interpretations of a
    fresh copy of each (unpinned) relation symbol and verify a single
    first-order matrix with the generic evaluator."""
    if fw.mode == MODE_AWARE and db.semiring.kind != "boolean":
        raise EngineError("the second-order check covers the "
                          "annotation-unaware case only")
    if fw.sics:
        raise EngineError("the second-order check requires an empty "
                          "soft-constraint set")
    space = _Space(db, fw, bounds, need_distance=False)

    free_rels = sorted({rel for i, (rel, _r) in enumerate(space.coords)
                        if not space.pinned[i]})
    fresh = {r: f"{r}__s" for r in free_rels}

    schema = db.schema
    new_rels = dict(schema.relations)
    for r, s in fresh.items():
        new_rels[s] = schema.relations[r]
    big_schema = Schema(schema.attributes, new_rels, schema.constants)

    def rename(f: Formula) -> Formula:
        if isinstance(f, Atom):
            return Atom(fresh.get(f.rel, f.rel), f.args)
        if isinstance(f, Not):
            return Not(rename(f.body))
        if isinstance(f, (logic.And, logic.Or)):
            cls = type(f)
            return cls(tuple(rename(p) for p in f.parts))
        if isinstance(f, (logic.Implies, logic.Iff)):
            return type(f)(rename(f.left), rename(f.right))
        if isinstance(f, (logic.Quant,)):
            return logic.Quant(f.kind, f.var, rename(f.body))
        if isinstance(f, logic.Count):
            return logic.Count(f.cmp, f.k, f.var, rename(f.body))
        return f

    def closed(f: Formula) -> Formula:
        out = f
        for v in sorted(free_vars(f)):
            out = logic.Quant("forall", v, out)
        return out

    matrix_parts: List[Formula] = [rename(h) for h in fw.hics]
    for q in fw.hq_plus:
        matrix_parts.append(closed(logic.Implies(q, rename(q))))
    for q in fw.hq_minus:
        matrix_parts.append(closed(logic.Implies(rename(q), q)))
    matrix: Formula = logic.And(tuple(matrix_parts)) if matrix_parts else logic.TRUE

    free_coords = [i for i in range(len(space.coords)) if not space.pinned[i]]
    budget = bounds.max_candidates
    tried = 0
    base_recs = {rel: dict(recs) for rel, recs in db.relations.items()}
    for combo in product(*(space.values[i] for i in free_coords)):
        tried += 1
        if budget is not None and tried > budget:
            raise BudgetError(f"candidate budget of {budget} exceeded")
        recs = {s: {} for s in fresh.values()}
        for i, (rel, _rec) in enumerate(space.coords):
            if space.pinned[i] and rel in fresh:
                if space.pin_value[i] != 0:
                    recs[fresh[rel]][space.coords[i][1]] = space.pin_value[i]
        for i, v in zip(free_coords, combo):
            if v != 0:
                rel, rec = space.coords[i]
                recs[fresh[rel]][rec] = v
        combined = KDatabase(big_schema, db.semiring,
                             {**base_recs, **recs}, db.constants)
        if Evaluator(combined, extra_domain=space.domain).holds(matrix):
            return True
    return False


# -- consistent query answering

def _query_env(q: Formula, t: Sequence[str]) -> Dict[str, str]:
    fvs = sorted(free_vars(q))
    if len(fvs) != len(t):
        raise EngineError(
            f"query has {len(fvs)} free variables, tuple has {len(t)}")
    return dict(zip(fvs, t))


def cqa(db: KDatabase, fw: RepairFramework, q: Formula,
        t: Sequence[str] = (),
        bounds: CandidateBounds = CandidateBounds(),
        order_semantics: str = ORDER_CLOSENESS) -> CQAAnswer:
    """Naive consistent query answering: materialise the repair set and
    intersect the answers."""
    env = _query_env(q, t)
    report = repairs(db, fw, bounds, order_semantics)
    if not report.repairs:
        return CQAAnswer(q, tuple(t), CQAAnswer.CONSISTENT, vacuous=True)
    ok = all(Evaluator(r).holds(q, env) for r in report.repairs)
    verdict = CQAAnswer.CONSISTENT if ok else CQAAnswer.NOT_CONSISTENT
    return CQAAnswer(q, tuple(t), verdict, vacuous=False)


def rce(db: KDatabase, fw: RepairFramework, n: Value,
        q: Optional[Formula] = None, t: Sequence[str] = (),
        bounds: CandidateBounds = CandidateBounds()) -> bool:
    """Repair-candidate existence: a candidate passing the hard conditions
    at distance exactly n, falsifying q(t) when q is given."""
    if fw.compare != fwk.COMPARE_DISTANCE:
        raise EngineError("rce requires the distance comparison mode")
    env = _query_env(q, t) if q is not None else {}
    space = _Space(db, fw, bounds, need_distance=True)
    found = []

    def on_leaf(assign, acc):
        total = acc if not space.residual_sql else \
            _agg2(space, acc, space.residual_distance(assign))
        if total != n:
            return False
        cand = space.leaf_passes(assign)
        if cand is None:
            return False
        if q is not None and Evaluator(cand).holds(q, env):
            return False
        found.append(True)
        return True

    space.search(on_leaf, bound=n)
    return bool(found)


def _bounded_exists(space: _Space, bound: Value) -> bool:
    found = []

    def on_leaf(assign, acc):
        total = acc if not space.residual_sql else \
            _agg2(space, acc, space.residual_distance(assign))
        if total > bound:
            return False
        if space.leaf_passes(assign) is not None:
            found.append(True)
            return True
        return False

    space.search(on_leaf, bound=bound)
    return bool(found)


def cqa_binary_search(db: KDatabase, fw: RepairFramework, q: Formula,
                      t: Sequence[str] = (),
                      bounds: CandidateBounds = CandidateBounds()) -> CQAAnswer:
    """CQA via binary search for the minimal repair distance followed by a
    single repair-candidate-existence call with the negated answer."""
    if fw.compare != fwk.COMPARE_DISTANCE:
        raise EngineError("binary-search CQA requires the distance mode")
    env = _query_env(q, t)
    # thinning is safe here: a candidate using a strictly dominated value
    # has a strictly closer twin, so it can never sit at the minimal
    # distance that the search converges to
    space = _Space(db, fw, bounds, need_distance=True, thin=True)
    ub = space.distance_upper_bound()
    if not _bounded_exists(space, ub):
        return CQAAnswer(q, tuple(t), CQAAnswer.CONSISTENT, vacuous=True)
    lo, hi = 0, ub
    while lo < hi:
        mid = (lo + hi) // 2
        if _bounded_exists(space, mid):
            hi = mid
        else:
            lo = mid + 1
    n0 = lo
    found = []

    def on_leaf(assign, acc):
        total = acc if not space.residual_sql else \
            _agg2(space, acc, space.residual_distance(assign))
        if total != n0:
            return False
        cand = space.leaf_passes(assign)
        if cand is None or Evaluator(cand).holds(q, env):
            return False
        found.append(True)
        return True

    space.search(on_leaf, bound=n0)
    verdict = CQAAnswer.NOT_CONSISTENT if found else CQAAnswer.CONSISTENT
    return CQAAnswer(q, tuple(t), verdict, vacuous=False)
