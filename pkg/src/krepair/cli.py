"""Batch command-line front-end.

Exit codes: 0 success, 1 semantic negative (no repair, inconsistent
answer, oracle says no), 2 usage or parse error, 3 budget exceeded.
Output is deterministic; `--output-format json-lines` emits one JSON
object per result line, with repairs carried as database text that
`load_database` accepts unchanged.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional, Sequence

from . import engine, framework as fwk, reductions
from .engine import BudgetError, CandidateBounds, CQAAnswer, EngineError
from .framework import FrameworkError, load_framework, serialize_framework
from .kdata import DatabaseFormatError, KDatabase, load_database, serialize_database
from .logic import (FormulaError, annotated_answers, evaluate, free_vars,
                    parse_formula)
from .reductions import ReductionError, parse_cnf, parse_graph
from .semiring import SemiringError

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2
EXIT_BUDGET = 3

_PARSE_ERRORS = (DatabaseFormatError, FormulaError, FrameworkError,
                 ReductionError, SemiringError, EngineError, OSError)


class _Output:
    def __init__(self, fmt: str):
        self.json = fmt == "json-lines"

    def emit(self, kind: str, text: str, **payload) -> None:
        if self.json:
            print(json.dumps({"type": kind, **payload}, sort_keys=True))
        else:
            print(text)

    def repair(self, index: int, db: KDatabase) -> None:
        text = serialize_database(db)
        if self.json:
            print(json.dumps({"type": "repair", "index": index, "kdb": text},
                             sort_keys=True))
        else:
            print(f"repair {index}:")
            for rel, rec, w in db.facts():
                print(f"  {rel}{rec!r} @ {w}")


def _bounds(args) -> CandidateBounds:
    extras = tuple(v for v in (args.extra_values or "").split(",") if v)
    return CandidateBounds(ann_cap=args.ann_cap,
                           extra_values=extras,
                           max_candidates=args.max_candidates)


def _load(args):
    db = load_database(open(args.db).read())
    fw = load_framework(args.framework, trust_hics=args.trust_hics)
    return db, fw


def _parse_tuple(text: Optional[str]) -> tuple:
    if not text:
        return ()
    return tuple(text.split(","))


def _cmd_eval(args, out: _Output) -> int:
    db = load_database(open(args.db).read())
    f = parse_formula(args.formula)
    if free_vars(f):
        rows = sorted(annotated_answers(db, f).items())
        for rec, w in rows:
            out.emit("answer", f"{' '.join(rec)} -> {db.semiring.format_value(w)}",
                     tuple=list(rec), value=str(w))
        return EXIT_OK if rows else EXIT_NEGATIVE
    value = db.semiring.format_value(evaluate(db, f))
    out.emit("value", f"value = {value}", value=value)
    return EXIT_OK


def _cmd_im(args, out: _Output) -> int:
    db, fw = _load(args)
    im = fwk.inconsistency_measure(db, fw.sics, fw.im)
    out.emit("im", f"IM = {db.semiring.format_value(im)}", value=str(im))
    return EXIT_OK


def _cmd_repair(args, out: _Output) -> int:
    db, fw = _load(args)
    report = engine.repairs(db, fw, _bounds(args), args.order_semantics)
    for i, r in enumerate(report.repairs):
        out.repair(i, r)
    if report.min_distance is not None:
        out.emit("distance", f"min distance = {report.min_distance}",
                 value=str(report.min_distance))
    out.emit("count", f"{len(report.repairs)} repair(s)",
             value=len(report.repairs))
    return EXIT_OK if report.repairs else EXIT_NEGATIVE


def _cmd_exists(args, out: _Output) -> int:
    db, fw = _load(args)
    if args.via == "eso":
        found = engine.eso_exists_repair_check(db, fw, _bounds(args))
    else:
        found = engine.exists_repair(db, fw, _bounds(args))
    out.emit("exists", f"exists: {'true' if found else 'false'}", value=found)
    return EXIT_OK if found else EXIT_NEGATIVE


def _cmd_cqa(args, out: _Output) -> int:
    db, fw = _load(args)
    q = parse_formula(args.query)
    t = _parse_tuple(args.tuple)
    if args.algo == "binsearch":
        ans = engine.cqa_binary_search(db, fw, q, t, _bounds(args))
    else:
        ans = engine.cqa(db, fw, q, t, _bounds(args), args.order_semantics)
    suffix = " (vacuously)" if ans.vacuous else ""
    out.emit("cqa", f"cqa: {ans.verdict}{suffix}",
             verdict=ans.verdict, vacuous=ans.vacuous)
    return EXIT_OK if ans.verdict == CQAAnswer.CONSISTENT else EXIT_NEGATIVE


def _cmd_reduce(args, out: _Output) -> int:
    if args.kind in ("3col-cqa", "3col-exists"):
        g = parse_graph(open(args.graph).read())
        if args.kind == "3col-cqa":
            db, fw, q = reductions.reduce_3col_cqa(g)
        else:
            db, fw = reductions.reduce_3col_exists(g)
            q = None
    elif args.kind == "1in3sat":
        db, fw, q = reductions.reduce_1in3sat(parse_cnf(open(args.cnf).read()))
    else:
        db, fw, q = reductions.reduce_maxsat_eq(
            parse_cnf(open(args.cnf).read()),
            parse_cnf(open(args.cnf2).read()))
    db_text, fw_text = serialize_database(db), serialize_framework(fw)
    if out.json:
        out.emit("instance", "", kdb=db_text, framework=fw_text,
                 query=None if q is None else str(q))
    else:
        print("# database")
        print(db_text, end="")
        print("# framework")
        print(fw_text, end="")
        if q is not None:
            print("# query")
            print(q)
    return EXIT_OK


def _cmd_oracle(args, out: _Output) -> int:
    if args.kind == "3col":
        verdict = reductions.oracle_3col(parse_graph(open(args.graph).read()))
    elif args.kind == "1in3sat":
        verdict = reductions.oracle_1in3sat(parse_cnf(open(args.cnf).read()))
    elif args.kind == "maxeq":
        verdict = reductions.oracle_maxtrue_eq(
            parse_cnf(open(args.cnf).read()),
            parse_cnf(open(args.cnf2).read()))
        if verdict is None:
            out.emit("oracle", "oracle: undefined (unsatisfiable input)",
                     value=None)
            return EXIT_NEGATIVE
    else:
        db = load_database(open(args.db).read())
        ics = [parse_formula(s) for s in args.ic or []]
        found = reductions.oracle_classical_repairs(db, ics, args.repair_kind)
        for i, r in enumerate(found):
            out.repair(i, r)
        out.emit("count", f"{len(found)} repair(s)", value=len(found))
        return EXIT_OK if found else EXIT_NEGATIVE
    out.emit("oracle", f"oracle: {'true' if verdict else 'false'}",
             value=verdict)
    return EXIT_OK if verdict else EXIT_NEGATIVE


def _add_common(p: argparse.ArgumentParser, db=True, framework=True) -> None:
    if db:
        p.add_argument("--db", required=True, help="database file")
    if framework:
        p.add_argument("--framework", required=True, help="framework file")
    p.add_argument("--ann-cap", type=int, default=None,
                   help="cap for searched natural annotations")
    p.add_argument("--max-candidates", type=int, default=2_000_000,
                   help="abort after this many search nodes")
    p.add_argument("--extra-values", default="",
                   help="comma-separated values adjoined to the domain")
    p.add_argument("--order-semantics", choices=("closeness", "literal"),
                   default="closeness")
    p.add_argument("--trust-hics", action="store_true",
                   help="skip the hard-constraint consistency probe")
    p.add_argument("--output-format", choices=("text", "json-lines"),
                   default="text")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="krepair",
        description="semiring-annotated database repair toolkit")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate a formula on a database")
    _add_common(p, framework=False)
    p.add_argument("--formula", required=True)

    p = sub.add_parser("im", help="inconsistency measure of a database")
    _add_common(p)

    p = sub.add_parser("repair", help="enumerate all repairs")
    _add_common(p)

    p = sub.add_parser("exists", help="does any repair exist?")
    _add_common(p)
    p.add_argument("--via", choices=("search", "eso"), default="search")

    p = sub.add_parser("cqa", help="consistent query answering")
    _add_common(p)
    p.add_argument("--query", required=True)
    p.add_argument("--tuple", default="", help="comma-separated answer tuple")
    p.add_argument("--algo", choices=("naive", "binsearch"), default="naive")

    p = sub.add_parser("reduce", help="build a hardness-reduction instance")
    p.add_argument("kind", choices=("3col-cqa", "3col-exists", "1in3sat",
                                    "maxsat-eq"))
    p.add_argument("--graph", help="edge-list file")
    p.add_argument("--cnf", help="DIMACS-like CNF file")
    p.add_argument("--cnf2", help="second CNF file (maxsat-eq)")
    p.add_argument("--output-format", choices=("text", "json-lines"),
                   default="text")

    p = sub.add_parser("oracle", help="brute-force problem oracles")
    p.add_argument("kind", choices=("3col", "1in3sat", "maxeq", "classical"))
    p.add_argument("--graph")
    p.add_argument("--cnf")
    p.add_argument("--cnf2")
    p.add_argument("--db")
    p.add_argument("--ic", action="append", help="integrity constraint "
                   "(repeatable, classical kind)")
    p.add_argument("--repair-kind", choices=reductions.CLASSICAL_KINDS,
                   default="subset")
    p.add_argument("--output-format", choices=("text", "json-lines"),
                   default="text")
    return top


_COMMANDS = {"eval": _cmd_eval, "im": _cmd_im, "repair": _cmd_repair,
             "exists": _cmd_exists, "cqa": _cmd_cqa, "reduce": _cmd_reduce,
             "oracle": _cmd_oracle}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    out = _Output(args.output_format)
    try:
        return _COMMANDS[args.command](args, out)
    except BudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except _PARSE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())
