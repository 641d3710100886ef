"""Grounded SAT and ungrounded QBF encodings for STRIPS planning."""

from .driver import find_plan
from .pddl import compile_task, load_task, parse_domain, parse_problem
from .plans import Plan, bfs_oracle, validate
from .qbf_encoder import emit_qcir, encode_qbf, to_qdimacs
from .sat_encoder import encode_sat
from .solvers import decode_plan, evaluate_qbf, run_external_qbf, solve_cnf
from .task import PlanningTask, enumerate_fluents, ground_schema

__version__ = "0.1.0"

__all__ = [
    "Plan", "PlanningTask", "bfs_oracle", "compile_task", "decode_plan", "emit_qcir",
    "encode_qbf", "encode_sat", "enumerate_fluents", "evaluate_qbf", "find_plan",
    "ground_schema", "load_task", "parse_domain", "parse_problem", "run_external_qbf",
    "solve_cnf", "to_qdimacs", "validate",
]
