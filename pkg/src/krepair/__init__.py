"""krepair: repairs and consistent query answering over semiring-annotated
databases, with first-order constraints and hard/soft query preservation."""

from .semiring import Semiring, SemiringError, Value, \
    AGG_SUM, AGG_MAX, AGG_COUNT_NONZERO
from .kdata import DatabaseFormatError, KDatabase, Schema, \
    load_database, serialize_database
from .logic import Evaluator, Formula, FormulaError, annotated_answers, \
    answers, desugar, evaluate, free_vars, holds, nnf, normalize, \
    parse_formula
from .framework import FrameworkError, GroundQuerySet, IMSpec, \
    RepairFramework, check_hard_queries, distance, hics_witness, \
    inconsistency_measure, load_framework, order_leq, parse_framework, \
    relativise, serialize_framework
from .engine import BudgetError, CandidateBounds, CQAAnswer, EngineError, \
    RepairReport, cqa, cqa_binary_search, enumerate_candidates, \
    eso_exists_repair_check, exists_repair, is_repair_candidate, rce, repairs
from .reductions import Cnf3, Graph, ReductionError, \
    oracle_1in3sat, oracle_3col, oracle_classical_repairs, oracle_maxtrue_eq, \
    parse_cnf, parse_graph, reduce_1in3sat, reduce_3col_cqa, \
    reduce_3col_exists, reduce_maxsat_eq, small_graphs

__version__ = "0.1.0"
