"""Reference semantics: plans, state transitions, validation and a BFS oracle."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .task import (
    ActionSchema, PlanningTask, TaskError, ground_actions, ground_atom,
    equality_holds,
)

State = frozenset  # of Fluent, closed world


@dataclass(frozen=True)
class Plan:
    steps: tuple[tuple[int, tuple[int, ...]], ...] = ()

    def __len__(self):
        return len(self.steps)

    def names(self, task: PlanningTask) -> list[str]:
        return [task.action_name(a, objs) for a, objs in self.steps]


def format_plan(task: PlanningTask, plan: Plan) -> str:
    sig = task.signature
    return "".join(
        "(" + " ".join([sig.actions[a], *(sig.objects[o] for o in objs)]).lower() + ")\n"
        for a, objs in plan.steps)


def parse_plan(task: PlanningTask, text: str) -> Plan:
    sig = task.signature
    steps = []
    for line in text.splitlines():
        line = line.split(";", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\(\s*(.*?)\s*\)", line)
        if not m:
            raise TaskError(f"bad plan line {line!r}")
        name, *args = m.group(1).lower().split()
        a = sig.action_index(name)
        if len(args) != sig.action_arity[a]:
            raise TaskError(f"{name} expects {sig.action_arity[a]} arguments")
        steps.append((a, tuple(sig.object_index(o) for o in args)))
    return Plan(tuple(steps))


def _failed_precondition(task: PlanningTask, state, schema: ActionSchema, objs) -> Optional[str]:
    eq = task.equality_predicate
    for atom in schema.pre_pos:
        if atom.predicate == eq:
            if not equality_holds(atom, objs):
                return "equality " + task.fluent_name(ground_atom(atom, objs))
        elif ground_atom(atom, objs) not in state:
            return "precondition " + task.fluent_name(ground_atom(atom, objs))
    for atom in schema.pre_neg:
        if atom.predicate == eq:
            if equality_holds(atom, objs):
                return "inequality " + task.fluent_name(ground_atom(atom, objs))
        elif ground_atom(atom, objs) in state:
            return "negative precondition " + task.fluent_name(ground_atom(atom, objs))
    # distinct schematic effects can collide once parameters are bound; the
    # encodings cannot satisfy both, so such a ground action never applies
    clash = ({ground_atom(a, objs) for a in schema.eff_pos}
             & {ground_atom(a, objs) for a in schema.eff_neg})
    if clash:
        return "conflicting effects on " + task.fluent_name(min(clash))
    return None


def apply(task: PlanningTask, state, schema: ActionSchema, objs) -> Optional[frozenset]:
    """Successor state, or None when the action is not applicable."""
    objs = tuple(objs)
    if len(objs) != schema.arity:
        raise TaskError(f"expected {schema.arity} objects, got {len(objs)}")
    if _failed_precondition(task, state, schema, objs) is not None:
        return None
    dels = {ground_atom(a, objs) for a in schema.eff_neg}
    adds = {ground_atom(a, objs) for a in schema.eff_pos}
    return frozenset((set(state) - dels) | adds)


def goal_satisfied(task: PlanningTask, state) -> bool:
    return task.goal_pos <= state and not (task.goal_neg & state)


@dataclass
class Validation:
    valid: bool
    trace: list = field(default_factory=list)
    step: Optional[int] = None
    reason: str = ""

    def __bool__(self):
        return self.valid


def validate(task: PlanningTask, plan: Plan) -> Validation:
    sig = task.signature
    state = task.init
    trace = [state]
    for n, (a, objs) in enumerate(plan.steps):
        if not 0 <= a < len(sig.actions):
            return Validation(False, trace, n, f"unknown action index {a}")
        schema = task.schemas[a]
        if len(objs) != schema.arity or any(not 0 <= o < len(sig.objects) for o in objs):
            return Validation(False, trace, n, "bad arguments")
        why = _failed_precondition(task, state, schema, objs)
        if why is not None:
            return Validation(False, trace, n, why)
        state = apply(task, state, schema, objs)
        trace.append(state)
    for f in sorted(task.goal_pos):
        if f not in state:
            return Validation(False, trace, len(plan), f"goal {task.fluent_name(f)} not reached")
    for f in sorted(task.goal_neg):
        if f in state:
            return Validation(False, trace, len(plan), f"goal not {task.fluent_name(f)} violated")
    return Validation(True, trace)


@dataclass
class OracleEntry:
    exists: bool
    plan: Optional[Plan] = None


@dataclass
class OracleResult:
    horizons: dict[int, OracleEntry]
    complete: bool = True

    def __getitem__(self, k):
        return self.horizons[k]


def bfs_oracle(task: PlanningTask, max_k: int, max_states: int = 200_000) -> OracleResult:
    """Exact-length reachability by layered breadth-first search.

    Layer t holds every state reachable by exactly t actions, so a goal
    at layer k means a plan of length exactly k exists.
    """
    ground = list(ground_actions(task))
    layer = {task.init: None}
    history = [layer]
    out: dict[int, OracleEntry] = {}
    for k in range(max_k + 1):
        goal_state = next((s for s in layer if goal_satisfied(task, s)), None)
        if goal_state is None:
            out[k] = OracleEntry(False)
        else:
            out[k] = OracleEntry(True, _backtrack(history, goal_state))
        if k == max_k:
            break
        nxt: dict = {}
        for s in layer:
            for schema, objs in ground:
                t = apply(task, s, schema, objs)
                if t is not None and t not in nxt:
                    nxt[t] = (s, schema.index, objs)
                    if len(nxt) > max_states:
                        return OracleResult(out, complete=False)
        layer = nxt
        history.append(layer)
    return OracleResult(out)


def _backtrack(history, state) -> Plan:
    steps = []
    for layer in reversed(history[1:]):
        prev, a, objs = layer[state]
        steps.append((a, objs))
        state = prev
    return Plan(tuple(reversed(steps)))
