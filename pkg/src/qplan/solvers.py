"""Reference decision procedures and witness decoding.

``solve_cnf`` is a DPLL search with unit propagation (two watched
literals), pure-literal elimination at the root and conflict-driven clause
learning.  ``evaluate_qbf`` splits the outermost quantifiers and expands the
innermost universal block into a propositional formula.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import os
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .circuit import EXISTS, FALSE, FORALL, TRUE, Circuit, CnfEncoding, Qbf, compose, tseitin
from .layout import VariableLayout
from .plans import Plan
from .task import PlanningTask

log = logging.getLogger(__name__)

SAT, UNSAT = "SAT", "UNSAT"
QTRUE, QFALSE = "TRUE", "FALSE"
UNKNOWN = "UNKNOWN"

SOLVER_ENV = "QPLAN_QBF_SOLVER"


@dataclass
class SolveResult:
    verdict: str
    witness: Optional[dict[int, bool]] = None
    stats: dict = field(default_factory=dict)
    diagnostic: str = ""

    @property
    def positive(self) -> bool:
        return self.verdict in (SAT, QTRUE)

    @property
    def negative(self) -> bool:
        return self.verdict in (UNSAT, QFALSE)


class MalformedWitness(ValueError):
    pass


# SAT


class _Cdcl:
    def __init__(self, num_vars: int):
        n = self.n = num_vars
        self.value = [0] * (n + 1)
        self.level = [0] * (n + 1)
        self.reason: list[Optional[int]] = [None] * (n + 1)
        self.phase = [False] * (n + 1)
        self.activity = [0.0] * (n + 1)
        self.var_inc = 1.0
        self.watches: dict[int, list[int]] = {}
        self.clauses: list[list[int]] = []
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.heap = [(0.0, v) for v in range(1, n + 1)]
        self.ok = True
        self.decisions = self.conflicts = self.propagations = 0

    def lit_value(self, lit: int) -> int:
        v = self.value[abs(lit)]
        return v if lit > 0 else -v

    def enqueue(self, lit: int, reason: Optional[int]) -> bool:
        val = self.lit_value(lit)
        if val:
            return val > 0
        v = abs(lit)
        self.value[v] = 1 if lit > 0 else -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)
        return True

    def add_clause(self, lits: Sequence[int]) -> None:
        lits = list(dict.fromkeys(lits))
        if any(-x in lits for x in lits):
            return
        lits = [x for x in lits if self.lit_value(x) >= 0]
        if any(self.lit_value(x) > 0 for x in lits):
            return
        if not lits:
            self.ok = False
        elif len(lits) == 1:
            if not self.enqueue(lits[0], None):
                self.ok = False
        else:
            self._attach(lits)

    def _attach(self, lits: list[int]) -> int:
        ci = len(self.clauses)
        self.clauses.append(lits)
        self.watches.setdefault(lits[0], []).append(ci)
        self.watches.setdefault(lits[1], []).append(ci)
        return ci

    def propagate(self) -> Optional[int]:
        clauses, watches, value = self.clauses, self.watches, self.value
        while self.qhead < len(self.trail):
            p = self.trail[self.qhead]
            self.qhead += 1
            self.propagations += 1
            false_lit = -p
            ws = watches.get(false_lit)
            if not ws:
                continue
            kept = []
            conflict = None
            idx = 0
            for idx, ci in enumerate(ws):
                c = clauses[ci]
                if c[0] == false_lit:
                    c[0], c[1] = c[1], c[0]
                first = c[0]
                fv = value[abs(first)]
                if (fv if first > 0 else -fv) > 0:
                    kept.append(ci)
                    continue
                for k in range(2, len(c)):
                    lk = c[k]
                    vk = value[abs(lk)]
                    if (vk if lk > 0 else -vk) >= 0:
                        c[1], c[k] = lk, false_lit
                        watches.setdefault(lk, []).append(ci)
                        break
                else:
                    kept.append(ci)
                    if (fv if first > 0 else -fv) < 0:
                        conflict = ci
                        break
                    self.enqueue(first, ci)
            if conflict is not None:
                kept.extend(ws[idx + 1:])
                watches[false_lit] = kept
                self.qhead = len(self.trail)
                return conflict
            watches[false_lit] = kept
        return None

    def _bump(self, v: int) -> None:
        self.activity[v] += self.var_inc
        if self.activity[v] > 1e100:
            self.activity = [a * 1e-100 for a in self.activity]
            self.var_inc *= 1e-100
            self.heap = [(-self.activity[u], u) for u in range(1, self.n + 1)
                         if not self.value[u]]
            heapq.heapify(self.heap)
        heapq.heappush(self.heap, (-self.activity[v], v))

    def analyze(self, confl: int) -> tuple[list[int], int]:
        seen = set()
        learnt = [0]
        counter = 0
        p = None
        idx = len(self.trail) - 1
        cur_level = len(self.trail_lim)
        c = self.clauses[confl]
        while True:
            for q in (c if p is None else c[1:]):
                v = abs(q)
                if v not in seen and self.level[v] > 0:
                    seen.add(v)
                    self._bump(v)
                    if self.level[v] >= cur_level:
                        counter += 1
                    else:
                        learnt.append(q)
            while abs(self.trail[idx]) not in seen:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            counter -= 1
            if counter == 0:
                break
            c = self.clauses[self.reason[abs(p)]]
        learnt[0] = -p
        if len(learnt) == 1:
            return learnt, 0
        best = max(range(1, len(learnt)), key=lambda i: self.level[abs(learnt[i])])
        learnt[1], learnt[best] = learnt[best], learnt[1]
        return learnt, self.level[abs(learnt[1])]

    def backtrack(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        start = self.trail_lim[lvl]
        for lit in self.trail[start:]:
            v = abs(lit)
            self.phase[v] = lit > 0
            self.value[v] = 0
            self.reason[v] = None
            heapq.heappush(self.heap, (-self.activity[v], v))
        del self.trail[start:]
        del self.trail_lim[lvl:]
        self.qhead = len(self.trail)

    def pick(self) -> Optional[int]:
        while self.heap:
            _, v = heapq.heappop(self.heap)
            if not self.value[v]:
                return v if self.phase[v] else -v
        return None

    def eliminate_pure(self) -> None:
        """Fix pure literals at the root (one sweep to a fixpoint)."""
        changed = True
        while changed and self.ok:
            changed = False
            polarity: dict[int, int] = {}
            for c in self.clauses:
                if any(self.lit_value(x) > 0 for x in c):
                    continue
                for x in c:
                    if not self.lit_value(x):
                        polarity[abs(x)] = polarity.get(abs(x), 0) | (1 if x > 0 else 2)
            for v, pol in polarity.items():
                if pol in (1, 2) and not self.value[v]:
                    self.enqueue(v if pol == 1 else -v, None)
                    changed = True
            if changed and self.propagate() is not None:
                self.ok = False

    def solve(self, max_conflicts: Optional[int]) -> Optional[bool]:
        if not self.ok or self.propagate() is not None:
            return False
        self.eliminate_pure()
        if not self.ok:
            return False
        restart_at, restart_gap = 100, 100
        while True:
            confl = self.propagate()
            if confl is not None:
                self.conflicts += 1
                if not self.trail_lim:
                    return False
                learnt, lvl = self.analyze(confl)
                self.backtrack(lvl)
                if len(learnt) == 1:
                    self.enqueue(learnt[0], None)
                else:
                    ci = self._attach(learnt)
                    self.enqueue(learnt[0], ci)
                self.var_inc /= 0.95
                if max_conflicts is not None and self.conflicts >= max_conflicts:
                    return None
                if self.conflicts >= restart_at:
                    restart_gap = int(restart_gap * 1.5)
                    restart_at = self.conflicts + restart_gap
                    self.backtrack(0)
                continue
            lit = self.pick()
            if lit is None:
                return True
            self.decisions += 1
            self.trail_lim.append(len(self.trail))
            self.enqueue(lit, None)


def solve_cnf(cnf: CnfEncoding, max_conflicts: Optional[int] = None) -> SolveResult:
    start = time.perf_counter()
    s = _Cdcl(cnf.num_vars)
    for cl in cnf.clauses:
        for x in cl:
            if not 0 < abs(x) <= cnf.num_vars:
                raise ValueError(f"literal {x} outside 1..{cnf.num_vars}")
        s.add_clause(cl)
        if not s.ok:
            break
    answer = s.solve(max_conflicts)
    stats = {"decisions": s.decisions, "conflicts": s.conflicts,
             "time": time.perf_counter() - start}
    if answer is None:
        return SolveResult(UNKNOWN, stats=stats, diagnostic="conflict budget exhausted")
    if not answer:
        return SolveResult(UNSAT, stats=stats)
    model = {v: s.value[v] > 0 for v in range(1, cnf.num_vars + 1)}
    return SolveResult(SAT, model, stats)


# QBF


class _Budget(Exception):
    pass


def evaluate_qbf(enc, max_depth: int = 64, max_copies: int = 1 << 16,
                 max_conflicts: Optional[int] = None) -> SolveResult:
    """Decide a prenex QBF given in circuit form.

    Quantifier blocks are split one variable at a time from the outside
    (exists: either branch, forall: both) until the rest of the prefix has
    the shape [exists] [forall] [exists]; that remainder is expanded over
    all universal assignments and handed to :func:`solve_cnf`.  Results are
    memoized on the cofactored matrix, which structural hashing makes
    canonical for identical subproblems.
    """
    start = time.perf_counter()
    qbf: Qbf = getattr(enc, "formula", enc)
    c = qbf.circuit
    blocks = [(q, list(vs)) for q, vs in qbf.normalized_prefix()]
    bound = {v for _, vs in blocks for v in vs}
    free = [v for v in c.support(qbf.root) if v not in bound]
    if free:
        if blocks and blocks[0][0] == EXISTS:
            blocks[0] = (EXISTS, free + blocks[0][1])
        else:
            blocks.insert(0, (EXISTS, free))

    # smallest t such that blocks[t:] holds at most one universal block
    t = len(blocks)
    while t > 0 and sum(q == FORALL for q, _ in blocks[t - 1:]) <= 1:
        t -= 1
    split_vars = [(q, v) for q, vs in blocks[:t] for v in vs]
    tail = blocks[t:]
    n_univ = sum(len(vs) for q, vs in tail if q == FORALL)
    depth = len(split_vars) + n_univ
    stats = {"split_vars": len(split_vars), "universal_expanded": n_univ, "sat_calls": 0}
    if depth > max_depth:
        return SolveResult(UNKNOWN, stats=stats,
                           diagnostic=f"decision depth {depth} exceeds budget {max_depth}")
    if (1 << n_univ) > max_copies:
        return SolveResult(UNKNOWN, stats=stats,
                           diagnostic=f"2^{n_univ} universal branches exceed {max_copies}")

    outer = blocks[0][1] if blocks and blocks[0][0] == EXISTS else []
    memo: dict[tuple[int, int], tuple[bool, dict]] = {}

    def expand(root: int) -> tuple[bool, dict]:
        ex_outer = tail[0][1] if tail and tail[0][0] == EXISTS else []
        rest = tail[1:] if ex_outer else tail
        univ = rest[0][1] if rest and rest[0][0] == FORALL else []
        inner = rest[1][1] if len(rest) > 1 else []
        support = set(c.support(root))
        dst = Circuit()
        xmap = {v: dst.var(c.names.get(v, f"v{v}")) for v in ex_outer}
        inner_used = [z for z in inner if z in support]
        copies = []
        for n, bits in enumerate(itertools.product((False, True), repeat=len(univ))):
            mapping = dict(xmap)
            mapping.update((y, TRUE if b else FALSE) for y, b in zip(univ, bits))
            mapping.update((z, dst.var(f"{c.names.get(z, z)}@{n}")) for z in inner_used)
            lit = compose(c, root, dst, mapping)
            if lit == FALSE:
                return False, {}
            copies.append(lit)
        top = dst.all_(copies)
        if top == TRUE:
            return True, {v: False for v in ex_outer}
        stats["sat_calls"] += 1
        res = solve_cnf(tseitin(dst, top), max_conflicts)
        if res.verdict == UNKNOWN:
            raise _Budget(res.diagnostic)
        if not res.positive:
            return False, {}
        return True, {v: res.witness[dst.var_index(xmap[v])] for v in ex_outer}

    def search(pos: int, root: int) -> tuple[bool, dict]:
        if root in (TRUE, FALSE):
            return root == TRUE, {}
        if pos == len(split_vars):
            return expand(root)
        key = (pos, root)
        if key in memo:
            return memo[key]
        q, v = split_vars[pos]
        result = (q == FORALL, {})
        for val in (False, True):
            sub = compose(c, root, c, {v: TRUE if val else FALSE})
            ok, wit = search(pos + 1, sub)
            if q == EXISTS and ok:
                result = (True, {v: val, **wit})
                break
            if q == FORALL and not ok:
                result = (False, {})
                break
        memo[key] = result
        return result

    try:
        ok, wit = search(0, qbf.root)
    except _Budget as e:
        stats["time"] = time.perf_counter() - start
        return SolveResult(UNKNOWN, stats=stats, diagnostic=str(e))
    stats["time"] = time.perf_counter() - start
    if not ok:
        return SolveResult(QFALSE, stats=stats)
    witness = {c.var_index(v): bool(wit.get(v, False)) for v in outer}
    return SolveResult(QTRUE, witness, stats)


# external solvers


def _command_argv(command: Union[str, Sequence[str], None], path: str) -> list[str]:
    if command is None:
        command = os.environ.get(SOLVER_ENV)
        if not command:
            raise ValueError(f"no solver command given and {SOLVER_ENV} is unset")
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    if any("{file}" in a for a in argv):
        return [a.replace("{file}", path) for a in argv]
    return argv + [path]


def run_external_qbf(qdimacs_path: str, command=None, timeout: Optional[float] = None
                     ) -> SolveResult:
    """Run a QDIMACS solver: exit 10 = TRUE, 20 = FALSE, ``V`` lines = witness."""
    start = time.perf_counter()
    try:
        argv = _command_argv(command, str(qdimacs_path))
    except ValueError as e:
        return SolveResult(UNKNOWN, diagnostic=str(e))
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
    except FileNotFoundError:
        return SolveResult(UNKNOWN, diagnostic=f"solver binary not found: {argv[0]}")
    except PermissionError:
        return SolveResult(UNKNOWN, diagnostic=f"solver not executable: {argv[0]}")
    except subprocess.TimeoutExpired:
        return SolveResult(UNKNOWN, diagnostic=f"solver timed out after {timeout}s")
    stats = {"time": time.perf_counter() - start, "returncode": proc.returncode}
    out = proc.stdout
    if proc.returncode not in (10, 20):
        return SolveResult(UNKNOWN, stats=stats,
                           diagnostic=f"exit status {proc.returncode}; output: {out[-2000:]!r}"
                                      f"{' stderr: ' + proc.stderr[-500:] if proc.stderr else ''}")
    if proc.returncode == 20:
        return SolveResult(QFALSE, stats=stats)
    witness: dict[int, bool] = {}
    for line in out.splitlines():
        parts = line.split()
        if not parts or parts[0] != "V":
            continue
        try:
            lits = [int(x) for x in parts[1:]]
        except ValueError:
            return SolveResult(UNKNOWN, stats=stats, diagnostic=f"unparseable line {line!r}")
        for x in lits:
            if x:
                witness[abs(x)] = x > 0
    return SolveResult(QTRUE, witness or None, stats)


# decoding


def _read_bits(witness: dict[int, bool], bits: Sequence[int]) -> int:
    value = 0
    for b, v in enumerate(bits):
        if v not in witness:
            raise MalformedWitness(f"witness does not assign plan variable {v}")
        if witness[v]:
            value |= 1 << b
    return value


def decode_plan(witness: dict[int, bool], layout: VariableLayout, task: PlanningTask) -> Plan:
    sig = task.signature
    steps = []
    for i in range(layout.k):
        a = _read_bits(witness, layout.action_bits[i])
        if a >= len(sig.actions):
            raise MalformedWitness(f"step {i}: action code {a} but only {len(sig.actions)} actions")
        objs = []
        for j in range(sig.action_arity[a]):
            o = _read_bits(witness, layout.param_bits[i][j])
            if o >= len(sig.objects):
                raise MalformedWitness(f"step {i}: object code {o} for parameter {j + 1} "
                                       f"but only {len(sig.objects)} objects")
            objs.append(o)
        steps.append((a, tuple(objs)))
    return Plan(tuple(steps))
