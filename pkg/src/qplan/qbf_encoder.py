"""Ungrounded exists-forall-exists QBF encoding, QCIR and QDIMACS output.

Object combinations are never enumerated: the universal bit-vectors
y_1..y_v stand for the arguments of a predicate and one existential
variable per predicate and timestep holds its value on that branch.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .circuit import (
    AND, CONST, EXISTS, FALSE, FORALL, OR, TRUE, VAR, BitVector, Circuit, CircuitError,
    CnfEncoding, Qbf, eq_const, eq_vars, new_bitvector, tseitin,
)
from .layout import VariableLayout
from .sat_encoder import encode_rc
from .task import (
    EFF_NEG, EFF_POS, PRE_NEG, PRE_POS, Const, Param, PlanningTask, Term,
)


@dataclass
class QbfLayout:
    circuit: Circuit
    k: int
    action_bits: list[BitVector] = field(default_factory=list)
    param_bits: list[list[BitVector]] = field(default_factory=list)
    y_bits: list[BitVector] = field(default_factory=list)
    # pred_vars[i][p]; static predicates map to the same node for every i
    pred_vars: list[dict[int, int]] = field(default_factory=list)
    static_vars: dict[int, int] = field(default_factory=dict)
    # ("init", pred) / ("goal", pred) / (i, pred) / (i, "=") -> gate
    groups: dict = field(default_factory=dict)

    def plan_nodes(self) -> list[int]:
        out = []
        for i in range(self.k):
            out.extend(self.action_bits[i].bits)
            for v in self.param_bits[i]:
                out.extend(v.bits)
        return out

    def universal_nodes(self) -> list[int]:
        return [b for v in self.y_bits for b in v.bits]

    def predicate_nodes(self) -> list[int]:
        out = []
        for step in self.pred_vars:
            out.extend(n for n in step.values() if n not in self.static_vars.values())
        out.extend(self.static_vars.values())
        return out

    def variables(self) -> VariableLayout:
        c = self.circuit
        return VariableLayout(
            k=self.k,
            action_bits=[[c.var_index(b) for b in v.bits] for v in self.action_bits],
            param_bits=[[[c.var_index(b) for b in v.bits] for v in step]
                        for step in self.param_bits],
        )


@dataclass
class QbfEncoding:
    formula: Qbf
    layout: QbfLayout
    task: PlanningTask
    k: int

    @property
    def circuit(self) -> Circuit:
        return self.formula.circuit

    @property
    def root(self) -> int:
        return self.formula.root

    @property
    def prefix(self):
        return self.formula.prefix

    def counts(self) -> dict:
        lay = self.layout
        plan, univ, preds = (len(lay.plan_nodes()), len(lay.universal_nodes()),
                             len(lay.predicate_nodes()))
        return {"plan_vars": plan, "universal_vars": univ, "predicate_vars": preds,
                "vars": plan + univ + preds,
                "gates": len(self.circuit.cone(self.root)) - len(
                    self.circuit.support(self.root))}


def qbf_variable_count(task: PlanningTask, k: int) -> int:
    """Closed form: k(sigma + p*gamma) + v*gamma + (k+1)|P_ns| + |P_s|."""
    sig = task.signature
    gamma = sig.object_bits
    return (k * (sig.action_bits + sig.max_action_arity * gamma)
            + task.max_predicate_arity * gamma
            + (k + 1) * len(task.nonstatic_predicates) + len(task.static_predicates))


_NAME_RE = re.compile(r"[^A-Za-z0-9_]")


def _pred_tags(task: PlanningTask) -> dict[int, str]:
    tags: dict[int, str] = {}
    used = set()
    for p in task.fluent_predicates:
        tag = _NAME_RE.sub("_", task.signature.predicates[p])
        if tag in used:
            tag = f"{tag}_{p}"
        used.add(tag)
        tags[p] = tag
    return tags


def make_qbf_layout(task: PlanningTask, k: int) -> QbfLayout:
    sig = task.signature
    c = Circuit()
    lay = QbfLayout(c, k)
    sigma, gamma, phat = sig.action_bits, sig.object_bits, sig.max_action_arity
    for i in range(k):
        lay.action_bits.append(new_bitvector(c, f"a_{i}", sigma))
        lay.param_bits.append([new_bitvector(c, f"x_{i}_{j}", gamma) for j in range(1, phat + 1)])
    for j in range(1, task.max_predicate_arity + 1):
        lay.y_bits.append(new_bitvector(c, f"y_{j}", gamma))
    tags = _pred_tags(task)
    for i in range(k + 1):
        lay.pred_vars.append({p: c.var(f"q_{i}_{tags[p]}") for p in task.nonstatic_predicates})
    for p in sorted(task.static_predicates):
        lay.static_vars[p] = c.var(f"q_{tags[p]}")
    for step in lay.pred_vars:
        step.update(lay.static_vars)
    return lay


def _y_match(c: Circuit, lay: QbfLayout, objects) -> int:
    return c.all_(eq_const(c, lay.y_bits[j], o) for j, o in enumerate(objects))


def _fluent_branches(c, lay, fluents, p) -> int:
    """Universal branches where some listed fluent of ``p`` is instantiated."""
    return c.any_(_y_match(c, lay, f.objects) for f in sorted(fluents) if f.predicate == p)


def encode_initial_qbf(task: PlanningTask, layout: QbfLayout) -> int:
    c = layout.circuit
    parts = []
    for p in task.fluent_predicates:
        g = c.iff(_fluent_branches(c, layout, task.init, p), layout.pred_vars[0][p])
        layout.groups["init", p] = g
        parts.append(g)
    return c.all_(parts)


def encode_goal_qbf(task: PlanningTask, layout: QbfLayout, k: int) -> int:
    c = layout.circuit
    parts = []
    for p in task.fluent_predicates:
        q = layout.pred_vars[k][p]
        g = c.and_(c.implies(_fluent_branches(c, layout, task.goal_pos, p), q),
                   c.implies(_fluent_branches(c, layout, task.goal_neg, p), -q))
        layout.groups["goal", p] = g
        parts.append(g)
    return c.all_(parts)


def _arg_matches_y(c, lay: QbfLayout, i: int, term: Term, j: int) -> int:
    y = lay.y_bits[j]
    if isinstance(term, Param):
        return eq_vars(c, lay.param_bits[i][term.index - 1], y)
    return eq_const(c, y, term.obj)


def encode_ungrounded_action_constraint(p: int, selector: str, i: int, task: PlanningTask,
                                        layout: QbfLayout) -> int:
    """Branches (object combinations) where the step-i action has ``p`` in ``selector``."""
    if p == task.equality_predicate:
        raise ValueError("equality has no action constraint; use the parameter gadget")
    c = layout.circuit
    disjuncts = []
    for schema in task.schemas:
        occs = [a for a in schema.atoms(selector) if a.predicate == p]
        if not occs:
            continue
        match = c.any_(c.all_(_arg_matches_y(c, layout, i, t, j) for j, t in enumerate(a.args))
                       for a in occs)
        disjuncts.append(c.and_(eq_const(c, layout.action_bits[i], schema.index), match))
    return c.any_(disjuncts)


def _terms_equal(c, lay: QbfLayout, i: int, s: Term, t: Term) -> int:
    if isinstance(s, Const) and isinstance(t, Const):
        return TRUE if s.obj == t.obj else FALSE
    if isinstance(s, Const):
        s, t = t, s
    if isinstance(t, Const):
        return eq_const(c, lay.param_bits[i][s.index - 1], t.obj)
    return eq_vars(c, lay.param_bits[i][s.index - 1], lay.param_bits[i][t.index - 1])


def encode_equality_constraint(task: PlanningTask, layout: QbfLayout, i: int) -> int:
    """Parameter (in)equalities of the step-i action, independent of y."""
    eq = task.equality_predicate
    c = layout.circuit
    if eq is None:
        return TRUE
    parts = []
    for schema in task.schemas:
        conds = [_terms_equal(c, layout, i, *a.args) for a in schema.pre_pos if a.predicate == eq]
        conds += [-_terms_equal(c, layout, i, *a.args) for a in schema.pre_neg if a.predicate == eq]
        if conds:
            parts.append(c.implies(eq_const(c, layout.action_bits[i], schema.index), c.all_(conds)))
    return c.all_(parts)


def encode_transition_qbf(task: PlanningTask, layout: QbfLayout, i: int) -> int:
    c = layout.circuit
    parts = []
    for p in task.fluent_predicates:
        q0, q1 = layout.pred_vars[i][p], layout.pred_vars[i + 1][p]
        pre_p = encode_ungrounded_action_constraint(p, PRE_POS, i, task, layout)
        pre_n = encode_ungrounded_action_constraint(p, PRE_NEG, i, task, layout)
        if p in task.static_predicates:
            g = c.and_(c.implies(pre_p, q0), c.implies(pre_n, -q0))
        else:
            eff_p = encode_ungrounded_action_constraint(p, EFF_POS, i, task, layout)
            eff_n = encode_ungrounded_action_constraint(p, EFF_NEG, i, task, layout)
            g = c.and_(
                c.implies(pre_p, q0),
                c.implies(pre_n, -q0),
                c.implies(eff_p, q1),
                c.implies(eff_n, -q1),
                c.or_(c.iff(q0, q1), eff_p, eff_n),
            )
        layout.groups[i, p] = g
        parts.append(g)
    g = encode_equality_constraint(task, layout, i)
    layout.groups[i, "="] = g
    parts.append(g)
    return c.all_(parts)


def encode_qbf(task: PlanningTask, k: int) -> QbfEncoding:
    if k < 0:
        raise ValueError("horizon must be non-negative")
    lay = make_qbf_layout(task, k)
    c = lay.circuit
    parts = [encode_initial_qbf(task, lay), encode_goal_qbf(task, lay, k)]
    for i in range(k):
        parts.append(encode_transition_qbf(task, lay, i))
    for i in range(k):
        g = encode_rc(lay, i, task)
        lay.groups[i, "rc"] = g
        parts.append(g)
    root = c.all_(parts)
    prefix = [(EXISTS, lay.plan_nodes()), (FORALL, lay.universal_nodes()),
              (EXISTS, lay.predicate_nodes())]
    return QbfEncoding(Qbf(c, prefix, root), lay, task, k)


# QCIR


def _qcir_lit(c: Circuit, lit: int, gate_names: dict[int, str]) -> str:
    n = abs(lit)
    name = c.names[n] if c.kinds[n - 1] == VAR else gate_names[n]
    return name if lit > 0 else "-" + name


def emit_qcir(enc) -> str:
    """QCIR-G14 text (prenex, closed)."""
    qbf = getattr(enc, "formula", enc)
    c = qbf.circuit
    lines = ["#QCIR-G14"]
    for q, vs in qbf.normalized_prefix():
        word = "exists" if q == EXISTS else "forall"
        lines.append(f"{word}({', '.join(c.names[v] for v in vs)})")
    gate_names: dict[int, str] = {}
    body = []
    for n in c.cone(qbf.root):
        k = c.kinds[n - 1]
        if k == CONST:
            gate_names[n] = f"g{n}"
            body.append(f"g{n} = and()")
        elif k in (AND, OR):
            gate_names[n] = f"g{n}"
            ins = ", ".join(_qcir_lit(c, o, gate_names) for o in c.operands[n - 1])
            body.append(f"g{n} = {k}({ins})")
    lines.append(f"output({_qcir_lit(c, qbf.root, gate_names)})")
    lines.extend(body)
    return "\n".join(lines) + "\n"


def parse_qcir(text: str) -> Qbf:
    c = Circuit()
    prefix = []
    names: dict[str, int] = {}
    output = None
    gate_defs = []
    lines = [ln.strip() for ln in text.splitlines()]
    if not lines or not lines[0].upper().startswith("#QCIR"):
        raise CircuitError("missing #QCIR header")
    for ln in lines[1:]:
        if not ln or ln.startswith("#"):
            continue
        m = re.fullmatch(r"(exists|forall|free)\s*\((.*)\)", ln)
        if m:
            vs = []
            for name in filter(None, (s.strip() for s in m.group(2).split(","))):
                names[name] = c.var(name)
                vs.append(names[name])
            prefix.append((FORALL if m.group(1) == "forall" else EXISTS, vs))
            continue
        m = re.fullmatch(r"output\s*\(\s*(-?[\w]+)\s*\)", ln)
        if m:
            output = m.group(1)
            continue
        m = re.fullmatch(r"([\w]+)\s*=\s*(and|or)\s*\((.*)\)", ln)
        if m:
            gate_defs.append((m.group(1), m.group(2), [s.strip() for s in m.group(3).split(",")
                                                       if s.strip()]))
            continue
        raise CircuitError(f"cannot parse QCIR line {ln!r}")

    def lit(tok):
        neg = tok.startswith("-")
        name = tok[1:] if neg else tok
        if name not in names:
            raise CircuitError(f"undefined QCIR identifier {name!r}")
        return -names[name] if neg else names[name]

    for name, kind, ins in gate_defs:
        lits = [lit(t) for t in ins]
        names[name] = c.all_(lits) if kind == "and" else c.any_(lits)
    if output is None:
        raise CircuitError("QCIR without output statement")
    return Qbf(c, prefix, lit(output))


# QDIMACS


def qdimacs_prefix(enc, cnf: CnfEncoding) -> list[tuple[str, list[int]]]:
    qbf = getattr(enc, "formula", enc)
    c = qbf.circuit
    blocks = [(q, [c.var_index(v) for v in vs]) for q, vs in qbf.prefix]
    aux = list(cnf.aux_vars)
    if blocks and blocks[-1][0] == EXISTS:
        blocks[-1] = (EXISTS, blocks[-1][1] + aux)
    else:
        blocks.append((EXISTS, aux))
    out: list[tuple[str, list[int]]] = []
    for q, vs in blocks:
        if not vs:
            continue
        if out and out[-1][0] == q:
            out[-1] = (q, out[-1][1] + vs)
        else:
            out.append((q, vs))
    return out


def to_qdimacs(enc: QbfEncoding) -> str:
    c = enc.circuit
    cnf = tseitin(c, enc.root)
    comments = ["layout"]
    comments += enc.layout.variables().comment_lines()
    for j, v in enumerate(enc.layout.y_bits, start=1):
        comments.append(f"objvar {j} bits {' '.join(str(c.var_index(b)) for b in v.bits)}".rstrip())
    for n in enc.layout.predicate_nodes():
        comments.append(f"pred {c.names[n]} {c.var_index(n)}")
    return format_qdimacs(qdimacs_prefix(enc, cnf), cnf, comments)


def format_qdimacs(prefix, cnf: CnfEncoding, comments=()) -> str:
    lines = [f"c {x}" for x in comments]
    lines.append(f"p cnf {cnf.num_vars} {len(cnf.clauses)}")
    for q, vs in prefix:
        lines.append(f"{q} {' '.join(map(str, vs))} 0")
    lines.extend(" ".join(map(str, cl + [0])) for cl in cnf.clauses)
    return "\n".join(lines) + "\n"


def parse_qdimacs(text: str) -> tuple[list[tuple[str, list[int]]], CnfEncoding]:
    prefix = []
    body = []
    comments = []
    num_vars = 0
    for line in text.splitlines():
        s = line.strip()
        if not s:
            continue
        if s.startswith("c"):
            comments.append(s[1:].strip())
        elif s.startswith("p"):
            num_vars = int(s.split()[2])
        elif s[0] in "ae":
            toks = s.split()
            if toks[-1] != "0":
                raise CircuitError(f"quantifier line not terminated by 0: {s!r}")
            prefix.append((toks[0], [int(t) for t in toks[1:-1]]))
        else:
            body.append(s)
    clauses, cur = [], []
    for tok in " ".join(body).split():
        x = int(tok)
        if x == 0:
            clauses.append(cur)
            cur = []
        else:
            cur.append(x)
    if cur:
        clauses.append(cur)
    return prefix, CnfEncoding(num_vars, clauses, num_vars, comments=comments)
