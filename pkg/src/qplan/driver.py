"""Horizon sweep: encode, solve, decode and validate for growing k."""

from __future__ import annotations

import logging
import os
import tempfile
from dataclasses import dataclass, field
from typing import Optional

from .circuit import tseitin
from .plans import Plan, validate
from .qbf_encoder import encode_qbf, format_qdimacs, qdimacs_prefix, to_qdimacs
from .sat_encoder import DEFAULT_CLAUSE_CAP, encode_sat
from .solvers import (
    UNKNOWN, MalformedWitness, SolveResult, decode_plan, evaluate_qbf,
    run_external_qbf, solve_cnf,
)
from .task import PlanningTask

log = logging.getLogger(__name__)

BACKENDS = ("sat-internal", "qbf-internal", "qbf-external")


class PlanningError(RuntimeError):
    pass


@dataclass
class SearchOutcome:
    k: Optional[int] = None
    plan: Optional[Plan] = None
    refuted: list[int] = field(default_factory=list)
    unknown_at: Optional[int] = None
    diagnostic: str = ""

    @property
    def found(self) -> bool:
        return self.plan is not None


def _external_qbf(enc, command, timeout) -> tuple[SolveResult, Optional[dict]]:
    """Solve through an external binary; recover the plan bits by
    self-reduction if the solver prints no assignment."""
    layout = enc.layout.variables()
    cnf = tseitin(enc.circuit, enc.root)
    prefix = qdimacs_prefix(enc, cnf)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "enc.qdimacs")
        with open(path, "w") as fh:
            fh.write(to_qdimacs(enc))
        res = run_external_qbf(path, command, timeout)
        if not res.positive:
            return res, None
        plan_vars = layout.plan_vars()
        if res.witness and all(v in res.witness for v in plan_vars):
            return res, res.witness
        log.info("solver gave no certificate; fixing %d plan bits one at a time", len(plan_vars))
        fixed: dict[int, bool] = {}
        units: list[list[int]] = []
        for v in plan_vars:
            trial = cnf.clauses + units + [[v]]
            with open(path, "w") as fh:
                fh.write(format_qdimacs(prefix, type(cnf)(cnf.num_vars, trial, cnf.num_original)))
            sub = run_external_qbf(path, command, timeout)
            if sub.verdict == UNKNOWN:
                return sub, None
            fixed[v] = sub.positive
            units.append([v if sub.positive else -v])
        return res, fixed


def solve_horizon(task: PlanningTask, k: int, backend: str, solver_cmd=None,
                  timeout: Optional[float] = None, clause_cap: int = DEFAULT_CLAUSE_CAP
                  ) -> tuple[SolveResult, Optional[Plan]]:
    if backend == "sat-internal":
        cnf = encode_sat(task, k, clause_cap)
        res = solve_cnf(cnf)
        layout, witness = cnf.layout, res.witness
    elif backend == "qbf-internal":
        enc = encode_qbf(task, k)
        res = evaluate_qbf(enc)
        layout, witness = enc.layout.variables(), res.witness
    elif backend == "qbf-external":
        enc = encode_qbf(task, k)
        res, witness = _external_qbf(enc, solver_cmd, timeout)
        layout = enc.layout.variables()
    else:
        raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    if not res.positive:
        return res, None
    plan = decode_plan(witness, layout, task)
    return res, plan


def find_plan(task: PlanningTask, k_start: int = 0, step: int = 1, k_max: int = 20,
              backend: str = "qbf-internal", solver_cmd=None, timeout: Optional[float] = None,
              clause_cap: int = DEFAULT_CLAUSE_CAP) -> SearchOutcome:
    """First horizon k = k_start, k_start+step, ... <= k_max with a valid plan."""
    if step < 1:
        raise ValueError("step must be at least 1")
    if k_start < 0:
        raise ValueError("k_start must be non-negative")
    out = SearchOutcome()
    for k in range(k_start, k_max + 1, step):
        try:
            res, plan = solve_horizon(task, k, backend, solver_cmd, timeout, clause_cap)
        except MalformedWitness as e:
            out.unknown_at, out.diagnostic = k, f"malformed witness: {e}"
            return out
        if res.verdict == UNKNOWN:
            out.unknown_at, out.diagnostic = k, res.diagnostic
            return out
        if plan is None:
            log.info("k=%d refuted", k)
            out.refuted.append(k)
            continue
        check = validate(task, plan)
        if not check.valid:
            raise PlanningError(f"decoded plan at k={k} is invalid at step {check.step}: "
                                f"{check.reason}")
        out.k, out.plan = k, plan
        return out
    return out
