"""Grounded sequential SAT encoding with logarithmic action/parameter codes."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .circuit import (
    BitVector, Circuit, CnfEncoding, eq_const, lt_const, new_bitvector, tseitin,
)
from .layout import VariableLayout
from .task import (
    EFF_NEG, EFF_POS, PRE_NEG, PRE_POS, SELECTORS, Fluent, PlanningTask,
    enumerate_fluents, ground_actions, ground_schema,
)

DEFAULT_CLAUSE_CAP = 50_000_000


class SatSizeError(RuntimeError):
    def __init__(self, projected: int, cap: int):
        self.projected, self.cap = projected, cap
        super().__init__(f"grounded SAT encoding refused: projected {projected} clauses "
                         f"exceeds cap {cap}")


def sat_fluents(task: PlanningTask) -> list[Fluent]:
    """Fluents that get a SAT variable per step.

    Equality is grounded like any other predicate: its |O|^2 fluents are
    appended and its truth table is put into the initial state.
    """
    fl = enumerate_fluents(task)
    eq = task.equality_predicate
    if eq is not None:
        n = len(task.signature.objects)
        fl.extend(Fluent(eq, (a, b)) for a in range(n) for b in range(n))
    return fl


def sat_init(task: PlanningTask) -> frozenset:
    eq = task.equality_predicate
    if eq is None:
        return task.init
    n = len(task.signature.objects)
    return task.init | {Fluent(eq, (o, o)) for o in range(n)}


@dataclass
class SatLayout:
    circuit: Circuit
    k: int
    fluents: list[Fluent]
    action_bits: list[BitVector] = field(default_factory=list)
    param_bits: list[list[BitVector]] = field(default_factory=list)
    fluent_vars: list[dict[Fluent, int]] = field(default_factory=list)
    # (selector, fluent) -> [(action index, objects)]
    occurrences: dict = field(default_factory=dict)

    def variables(self) -> VariableLayout:
        c = self.circuit
        return VariableLayout(
            k=self.k,
            action_bits=[[c.var_index(b) for b in v.bits] for v in self.action_bits],
            param_bits=[[[c.var_index(b) for b in v.bits] for v in step]
                        for step in self.param_bits],
        )


def grounded_occurrences(task: PlanningTask) -> dict:
    occ = defaultdict(list)
    for schema, objs in ground_actions(task):
        for sel in SELECTORS:
            for f in sorted(ground_schema(sel, schema, objs)):
                occ[sel, f].append((schema.index, objs))
    return dict(occ)


def make_sat_layout(task: PlanningTask, k: int) -> SatLayout:
    sig = task.signature
    c = Circuit()
    lay = SatLayout(c, k, sat_fluents(task))
    sigma, gamma, phat = sig.action_bits, sig.object_bits, sig.max_action_arity
    for i in range(k):
        lay.action_bits.append(new_bitvector(c, f"a_{i}", sigma))
        lay.param_bits.append([new_bitvector(c, f"x_{i}_{j}", gamma) for j in range(1, phat + 1)])
    for i in range(k + 1):
        lay.fluent_vars.append({f: c.var(f"s_{i}_{n}") for n, f in enumerate(lay.fluents)})
    lay.occurrences = grounded_occurrences(task)
    return lay


def encode_initial_sat(task: PlanningTask, layout: SatLayout) -> int:
    c = layout.circuit
    init = sat_init(task)
    return c.all_(v if f in init else -v for f, v in layout.fluent_vars[0].items())


def encode_goal_sat(task: PlanningTask, layout: SatLayout, k: int) -> int:
    c = layout.circuit
    st = layout.fluent_vars[k]
    return c.all_([*(st[f] for f in sorted(task.goal_pos)),
                   *(-st[f] for f in sorted(task.goal_neg))])


def encode_grounded_action_constraint(fluent: Fluent, selector: str, i: int,
                                      task: PlanningTask, layout: SatLayout) -> int:
    """Disjunction over ground actions having ``fluent`` in the selected set."""
    c = layout.circuit
    disjuncts = []
    for a, objs in layout.occurrences.get((selector, fluent), ()):
        disjuncts.append(c.and_(
            eq_const(c, layout.action_bits[i], a),
            c.all_(eq_const(c, layout.param_bits[i][j], o) for j, o in enumerate(objs)),
        ))
    return c.any_(disjuncts)


def encode_transition_sat(task: PlanningTask, layout: SatLayout, i: int) -> int:
    c = layout.circuit
    now, nxt = layout.fluent_vars[i], layout.fluent_vars[i + 1]
    parts = []
    for f in layout.fluents:
        pre_p = encode_grounded_action_constraint(f, PRE_POS, i, task, layout)
        pre_n = encode_grounded_action_constraint(f, PRE_NEG, i, task, layout)
        eff_p = encode_grounded_action_constraint(f, EFF_POS, i, task, layout)
        eff_n = encode_grounded_action_constraint(f, EFF_NEG, i, task, layout)
        b0, b1 = now[f], nxt[f]
        parts.append(c.and_(
            c.implies(pre_p, b0),
            c.implies(pre_n, -b0),
            c.implies(eff_p, b1),
            c.implies(eff_n, -b1),
            c.or_(c.iff(b0, b1), eff_p, eff_n),
        ))
    return c.all_(parts)


def encode_rc(layout, i: int, task: PlanningTask) -> int:
    """Rule out codes beyond the real number of actions and objects."""
    c = layout.circuit
    sig = task.signature
    return c.and_(lt_const(c, layout.action_bits[i], len(sig.actions)),
                  c.all_(lt_const(c, v, len(sig.objects)) for v in layout.param_bits[i]))


def projected_clauses(task: PlanningTask, k: int) -> int:
    """Upper bound on the Tseitin clause count, computed without grounding.

    A gate with m inputs yields m + 1 clauses.  Per fluent and step the
    transition uses four implications (3 each), an iff (9), the frame
    disjunction (4), their conjunction (6) and four selector disjunctions
    whose inputs sum to the number of atom occurrences.
    """
    sig = task.signature
    n_obj = len(sig.objects)
    n_fl = sum(n_obj ** sig.predicate_arity[p] for p in task.fluent_predicates)
    if task.equality_predicate is not None:
        n_fl += n_obj ** 2
    sigma, gamma, phat = sig.action_bits, sig.object_bits, sig.max_action_arity
    ground = sum(n_obj ** s.arity for s in task.schemas)
    occ = sum(n_obj ** s.arity * sum(len(s.atoms(sel)) for sel in SELECTORS)
              for s in task.schemas)
    per_step = (31 * n_fl + 4 * n_fl + occ + (n_fl + 1)
                + ground * (phat + 2)
                + len(sig.actions) * (sigma + 1) + phat * n_obj * (gamma + 1)
                + (sigma + 1) ** 2 + phat * (gamma + 1) ** 2 + phat + 2)
    goal = len(task.goal_pos) + len(task.goal_neg)
    return (n_fl + 1) + (goal + 1) + k * per_step + (2 * k + 3) + 1


def build_sat_circuit(task: PlanningTask, k: int) -> tuple[SatLayout, int]:
    if k < 0:
        raise ValueError("horizon must be non-negative")
    lay = make_sat_layout(task, k)
    c = lay.circuit
    parts = [encode_initial_sat(task, lay), encode_goal_sat(task, lay, k)]
    for i in range(k):
        parts.append(encode_transition_sat(task, lay, i))
    for i in range(k):
        parts.append(encode_rc(lay, i, task))
    return lay, c.all_(parts)


def encode_sat(task: PlanningTask, k: int, clause_cap: int = DEFAULT_CLAUSE_CAP) -> CnfEncoding:
    projected = projected_clauses(task, k)
    if projected > clause_cap:
        raise SatSizeError(projected, clause_cap)
    lay, root = build_sat_circuit(task, k)
    cnf = tseitin(lay.circuit, root)
    cnf.layout = lay.variables()
    cnf.comments = cnf.layout.comment_lines()
    c = lay.circuit
    for i, step in enumerate(lay.fluent_vars):
        for f, v in step.items():
            cnf.comments.append(f"fluent {i} {task.fluent_name(f)} {c.var_index(v)}")
    cnf.sat_layout = lay
    cnf.root = root
    return cnf
