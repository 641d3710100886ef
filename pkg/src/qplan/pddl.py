"""Reader for the STRIPS subset of PDDL and compilation to :class:`PlanningTask`.

Supported: ``:strips``, ``:typing``, ``:equality``, ``:negative-preconditions``,
constants, flat conjunctions of (possibly negated) atoms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .task import (
    EQUALITY, ActionSchema, Atom, Const, Fluent, Param, PlanningTask, Signature,
    TaskError,
)

SUPPORTED_REQUIREMENTS = {":strips", ":typing", ":equality", ":negative-preconditions"}

# keyword -> human readable feature name
UNSUPPORTED_KEYWORDS = {
    "when": "conditional effects",
    "forall": "universal quantification",
    "exists": "existential quantification",
    "or": "disjunctive conditions",
    "imply": "implications",
    "either": "either-types",
    "increase": "numeric fluents",
    "decrease": "numeric fluents",
    "assign": "numeric fluents",
    ":functions": "numeric fluents",
    ":derived": "derived predicates",
    ":durative-action": "durative actions",
    ":constraints": "trajectory constraints",
    ":metric": "plan metrics",
}


class PddlError(Exception):
    def __init__(self, message: str, line: Optional[int] = None, col: Optional[int] = None):
        self.line, self.col = line, col
        where = f"line {line}, column {col}: " if line is not None else ""
        super().__init__(where + message)


class UnsupportedFeature(PddlError):
    def __init__(self, feature: str, line=None, col=None):
        self.feature = feature
        super().__init__(f"unsupported feature: {feature}", line, col)


# s-expressions


class Token(str):
    """A lowercase symbol that remembers where it came from."""

    line: int = 0
    col: int = 0


class SList(list):
    line: int = 0
    col: int = 0


def _tok(text, line, col):
    t = Token(text)
    t.line, t.col = line, col
    return t


def tokenize(text: str):
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line, col = line + 1, 1
            i += 1
        elif c.isspace():
            i += 1
            col += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            yield _tok(c, line, col)
            i += 1
            col += 1
        else:
            start, scol = i, col
            while i < n and not text[i].isspace() and text[i] not in "();":
                i += 1
                col += 1
            yield _tok(text[start:i].lower(), line, scol)


def read_sexpr(text: str) -> SList:
    """Parse exactly one top-level s-expression."""
    stack: list[SList] = []
    result = None
    for tok in tokenize(text):
        if result is not None:
            raise PddlError(f"unexpected {tok!s} after end of definition", tok.line, tok.col)
        if tok == "(":
            lst = SList()
            lst.line, lst.col = tok.line, tok.col
            stack.append(lst)
        elif tok == ")":
            if not stack:
                raise PddlError("unbalanced ')'", tok.line, tok.col)
            done = stack.pop()
            if stack:
                stack[-1].append(done)
            else:
                result = done
        else:
            if not stack:
                raise PddlError(f"expected '(' but found {tok!s}", tok.line, tok.col)
            stack[-1].append(tok)
    if stack:
        raise PddlError("unexpected end of input: missing ')'", stack[-1].line, stack[-1].col)
    if result is None:
        raise PddlError("empty input")
    return result


# AST


@dataclass(frozen=True)
class Literal:
    predicate: str
    args: tuple[str, ...]
    positive: bool = True


@dataclass(frozen=True)
class ActionAst:
    name: str
    parameters: tuple[tuple[str, str], ...]  # (?var, type)
    precondition: tuple[Literal, ...]
    effect: tuple[Literal, ...]


@dataclass(frozen=True)
class DomainAst:
    name: str
    requirements: tuple[str, ...] = ()
    types: tuple[tuple[str, str], ...] = ()  # (type, parent)
    constants: tuple[tuple[str, str], ...] = ()
    predicates: tuple[tuple[str, tuple[tuple[str, str], ...]], ...] = ()
    actions: tuple[ActionAst, ...] = ()


@dataclass(frozen=True)
class ProblemAst:
    name: str
    domain: str
    objects: tuple[tuple[str, str], ...] = ()
    init: tuple[Literal, ...] = ()
    goal: tuple[Literal, ...] = ()
    requirements: tuple[str, ...] = ()


def _where(x):
    return getattr(x, "line", None), getattr(x, "col", None)


def _expect_list(x, what):
    if not isinstance(x, list):
        raise PddlError(f"expected a list for {what}, found {x!s}", *_where(x))
    return x


def _expect_symbol(x, what):
    if isinstance(x, list):
        raise PddlError(f"expected a name for {what}", *_where(x))
    return str(x)


def _check_unsupported(x):
    if isinstance(x, Token) and str(x) in UNSUPPORTED_KEYWORDS:
        raise UnsupportedFeature(UNSUPPORTED_KEYWORDS[x], x.line, x.col)


def _typed_list(items, what) -> tuple[tuple[str, str], ...]:
    """``a b - t c`` -> ((a, t), (b, t), (c, object))."""
    out = []
    pending = []
    i = 0
    while i < len(items):
        it = items[i]
        if isinstance(it, list):
            if it and it[0] == "either":
                raise UnsupportedFeature("either-types", *_where(it))
            raise PddlError(f"unexpected list in {what}", *_where(it))
        if it == "-":
            if i + 1 >= len(items):
                raise PddlError(f"missing type after '-' in {what}", *_where(it))
            t = items[i + 1]
            if isinstance(t, list):
                if t and t[0] == "either":
                    raise UnsupportedFeature("either-types", *_where(t))
                raise PddlError(f"bad type in {what}", *_where(t))
            if not pending:
                raise PddlError(f"type without names in {what}", *_where(it))
            out.extend((p, str(t)) for p in pending)
            pending = []
            i += 2
            continue
        pending.append(str(it))
        i += 1
    out.extend((p, "object") for p in pending)
    return tuple(out)


def _literal(x, what) -> Literal:
    x = _expect_list(x, what)
    if not x:
        raise PddlError(f"empty atom in {what}", *_where(x))
    _check_unsupported(x[0])
    if x[0] == "not":
        if len(x) != 2:
            raise PddlError(f"'not' takes one argument in {what}", *_where(x))
        inner = _literal(x[1], what)
        if not inner.positive:
            raise PddlError(f"double negation in {what}", *_where(x))
        return Literal(inner.predicate, inner.args, False)
    if x[0] == "and":
        raise PddlError(f"nested 'and' in {what}", *_where(x))
    for a in x[1:]:
        if isinstance(a, list):
            raise PddlError(f"nested term in {what}", *_where(a))
    return Literal(str(x[0]), tuple(str(a) for a in x[1:]), True)


def _conjunction(x, what) -> tuple[Literal, ...]:
    x = _expect_list(x, what)
    if x and isinstance(x[0], Token):
        _check_unsupported(x[0])
    if x and x[0] == "and":
        return tuple(_literal(y, what) for y in x[1:])
    if not x:
        return ()
    return (_literal(x, what),)


def _header(expr, kind):
    expr = _expect_list(expr, kind)
    if len(expr) < 2 or expr[0] != "define":
        raise PddlError("expected (define ...)", *_where(expr))
    head = _expect_list(expr[1], f"{kind} header")
    if len(head) != 2 or head[0] != kind:
        raise PddlError(f"expected ({kind} <name>)", *_where(head))
    return _expect_symbol(head[1], f"{kind} name"), expr[2:]


def _requirements(sec):
    reqs = tuple(str(r) for r in sec[1:])
    for r in sec[1:]:
        if r not in SUPPORTED_REQUIREMENTS:
            raise UnsupportedFeature(f"requirement {r}", *_where(r))
    return reqs


def parse_domain(text: str) -> DomainAst:
    name, sections = _header(read_sexpr(text), "domain")
    reqs, types, consts, preds, actions = (), (), (), [], []
    for sec in sections:
        sec = _expect_list(sec, "domain section")
        if not sec:
            raise PddlError("empty section", *_where(sec))
        key = sec[0]
        _check_unsupported(key)
        if key == ":requirements":
            reqs = _requirements(sec)
        elif key == ":types":
            types = _typed_list(sec[1:], ":types")
        elif key == ":constants":
            consts = _typed_list(sec[1:], ":constants")
        elif key == ":predicates":
            for p in sec[1:]:
                p = _expect_list(p, "predicate declaration")
                if not p:
                    raise PddlError("empty predicate declaration", *_where(p))
                preds.append((_expect_symbol(p[0], "predicate name"),
                              _typed_list(p[1:], "predicate parameters")))
        elif key == ":action":
            actions.append(_action(sec))
        else:
            raise PddlError(f"unknown domain section {key!s}", *_where(key))
    return DomainAst(name, reqs, types, consts, tuple(preds), tuple(actions))


def _action(sec) -> ActionAst:
    if len(sec) < 2:
        raise PddlError("action without a name", *_where(sec))
    name = _expect_symbol(sec[1], "action name")
    params, pre, eff = (), (), ()
    rest = sec[2:]
    if len(rest) % 2:
        raise PddlError(f"malformed action {name}", *_where(sec))
    for key, val in zip(rest[::2], rest[1::2]):
        _check_unsupported(key)
        if key == ":parameters":
            params = _typed_list(_expect_list(val, ":parameters"), ":parameters")
        elif key == ":precondition":
            pre = _conjunction(val, f"precondition of {name}")
        elif key == ":effect":
            eff = _conjunction(val, f"effect of {name}")
        else:
            raise PddlError(f"unknown action key {key!s}", *_where(key))
    return ActionAst(name, params, pre, eff)


def parse_problem(text: str) -> ProblemAst:
    name, sections = _header(read_sexpr(text), "problem")
    domain, objs, init, goal, reqs = None, (), (), (), ()
    for sec in sections:
        sec = _expect_list(sec, "problem section")
        if not sec:
            raise PddlError("empty section", *_where(sec))
        key = sec[0]
        _check_unsupported(key)
        if key == ":domain":
            domain = _expect_symbol(sec[1], "domain name") if len(sec) == 2 else None
            if domain is None:
                raise PddlError("malformed :domain", *_where(sec))
        elif key == ":requirements":
            reqs = _requirements(sec)
        elif key == ":objects":
            objs = _typed_list(sec[1:], ":objects")
        elif key == ":init":
            init = tuple(_literal(x, ":init") for x in sec[1:])
            for lit in init:
                if not lit.positive:
                    raise PddlError("negative literal in :init", *_where(sec))
        elif key == ":goal":
            if len(sec) != 2:
                raise PddlError("malformed :goal", *_where(sec))
            goal = _conjunction(sec[1], ":goal")
        else:
            raise PddlError(f"unknown problem section {key!s}", *_where(key))
    if domain is None:
        raise PddlError("problem has no :domain")
    return ProblemAst(name, domain, objs, init, goal, reqs)


# pretty printing


def _fmt_typed(items):
    # untyped names would otherwise attach to a following "- type"
    if all(t == "object" for _, t in items):
        return " ".join(n for n, _ in items)
    return " ".join(f"{n} - {t}" for n, t in items)


def _fmt_lit(lit: Literal) -> str:
    atom = "(" + " ".join((lit.predicate, *lit.args)) + ")"
    return atom if lit.positive else f"(not {atom})"


def _fmt_conj(lits) -> str:
    return "(and" + "".join(" " + _fmt_lit(x) for x in lits) + ")"


def format_domain(d: DomainAst) -> str:
    lines = [f"(define (domain {d.name})"]
    if d.requirements:
        lines.append(f"  (:requirements {' '.join(d.requirements)})")
    if d.types:
        lines.append(f"  (:types {_fmt_typed(d.types)})")
    if d.constants:
        lines.append(f"  (:constants {_fmt_typed(d.constants)})")
    if d.predicates:
        preds = " ".join("(" + " ".join(filter(None, (n, _fmt_typed(ps)))) + ")"
                         for n, ps in d.predicates)
        lines.append(f"  (:predicates {preds})")
    for a in d.actions:
        lines.append(f"  (:action {a.name}")
        lines.append(f"    :parameters ({_fmt_typed(a.parameters)})")
        lines.append(f"    :precondition {_fmt_conj(a.precondition)}")
        lines.append(f"    :effect {_fmt_conj(a.effect)})")
    lines.append(")")
    return "\n".join(lines) + "\n"


def format_problem(p: ProblemAst) -> str:
    lines = [f"(define (problem {p.name})", f"  (:domain {p.domain})"]
    if p.requirements:
        lines.append(f"  (:requirements {' '.join(p.requirements)})")
    lines.append(f"  (:objects {_fmt_typed(p.objects)})")
    lines.append("  (:init" + "".join(" " + _fmt_lit(x) for x in p.init) + ")")
    lines.append(f"  (:goal {_fmt_conj(p.goal)})")
    lines.append(")")
    return "\n".join(lines) + "\n"


# compilation


def _type_closure(types: tuple[tuple[str, str], ...]) -> tuple[list[str], dict]:
    order: list[str] = []
    parent: dict[str, str] = {}
    for t, par in types:
        for name in (t, par):
            if name != "object" and name not in order:
                order.append(name)
        if t == "object":
            continue
        if t in parent and parent[t] != par:
            raise PddlError(f"type {t} declared with two parents")
        parent[t] = par

    def ancestors(t):
        seen = []
        while t != "object":
            if t in seen:
                raise PddlError(f"cyclic type hierarchy at {t}")
            seen.append(t)
            t = parent.get(t, "object")
        return seen

    return order, {t: ancestors(t) for t in order}


def compile_task(domain: DomainAst, problem: ProblemAst) -> PlanningTask:
    """Normalize a domain/problem pair into an index-based planning task."""
    if problem.domain != domain.name:
        raise PddlError(f"problem refers to domain {problem.domain!r}, "
                        f"but the domain is {domain.name!r}")
    type_order, ancestors = _type_closure(domain.types)

    def type_chain(t, where):
        if t == "object":
            return []
        if t not in ancestors:
            raise PddlError(f"undeclared type {t!r} in {where}")
        return ancestors[t]

    # objects: constants first, then problem objects
    objects: list[str] = []
    obj_types: dict[str, list[str]] = {}
    for name, t in domain.constants + problem.objects:
        chain = type_chain(t, f"object {name}")
        if name in obj_types:
            # redeclared object: union of memberships
            obj_types[name] = list(dict.fromkeys(obj_types[name] + chain))
            continue
        objects.append(name)
        obj_types[name] = chain

    pred_names = [n for n, _ in domain.predicates]
    pred_arity = [len(ps) for _, ps in domain.predicates]
    if len(set(pred_names)) != len(pred_names):
        raise PddlError("duplicate predicate declaration")
    if EQUALITY in pred_names:
        raise PddlError("'=' cannot be declared as a predicate")
    for t in type_order:
        if t in pred_names:
            raise PddlError(f"type {t!r} clashes with a predicate of the same name")
        pred_names.append(t)
        pred_arity.append(1)

    uses_eq = any(lit.predicate == EQUALITY
                  for a in domain.actions for lit in a.precondition + a.effect)
    eq_index = None
    if uses_eq:
        pred_names.append(EQUALITY)
        pred_arity.append(2)
        eq_index = len(pred_names) - 1

    action_names = [a.name for a in domain.actions]
    if len(set(action_names)) != len(action_names):
        raise PddlError("duplicate action declaration")
    try:
        sig = Signature(tuple(pred_names), tuple(action_names), tuple(objects),
                        predicate_arity=tuple(pred_arity),
                        action_arity=tuple(len(a.parameters) for a in domain.actions))
    except TaskError as e:
        raise PddlError(str(e)) from None

    pindex = {n: i for i, n in enumerate(pred_names)}
    oindex = {n: i for i, n in enumerate(objects)}

    def check_pred(lit, where):
        if lit.predicate not in pindex:
            raise PddlError(f"undeclared predicate {lit.predicate!r} in {where}")
        p = pindex[lit.predicate]
        if len(lit.args) != pred_arity[p]:
            raise PddlError(f"{lit.predicate} expects {pred_arity[p]} arguments, "
                            f"got {len(lit.args)} in {where}")
        return p

    schemas = []
    for ai, act in enumerate(domain.actions):
        where = f"action {act.name}"
        var_index = {}
        for j, (v, _) in enumerate(act.parameters, start=1):
            if not v.startswith("?"):
                raise PddlError(f"parameter {v!r} must start with '?' in {where}")
            if v in var_index:
                raise PddlError(f"duplicate parameter {v} in {where}")
            var_index[v] = j

        def term(a):
            if a.startswith("?"):
                if a not in var_index:
                    raise PddlError(f"unknown parameter {a} in {where}")
                return Param(var_index[a])
            if a not in oindex:
                raise PddlError(f"undeclared constant {a!r} in {where}")
            return Const(oindex[a])

        def atom(lit):
            return Atom(check_pred(lit, where), tuple(term(a) for a in lit.args))

        pre_pos, pre_neg, eff_pos, eff_neg = [], [], [], []
        for lit in act.precondition:
            (pre_pos if lit.positive else pre_neg).append(atom(lit))
        for j, (_, t) in enumerate(act.parameters, start=1):
            if t != "object":
                type_chain(t, where)
                pre_pos.append(Atom(pindex[t], (Param(j),)))
        for lit in act.effect:
            if lit.predicate == EQUALITY:
                raise PddlError(f"equality used as an effect in {where}")
            (eff_pos if lit.positive else eff_neg).append(atom(lit))
        try:
            schemas.append(ActionSchema(
                ai, len(act.parameters),
                *(tuple(dict.fromkeys(x)) for x in (pre_pos, pre_neg, eff_pos, eff_neg))))
        except TaskError as e:
            raise PddlError(f"{where}: {e}") from None

    def ground(lit, where):
        p = check_pred(lit, where)
        if p == eq_index:
            raise PddlError(f"equality is not allowed in {where}")
        for a in lit.args:
            if a not in oindex:
                raise PddlError(f"undeclared object {a!r} in {where}")
        return Fluent(p, tuple(oindex[a] for a in lit.args))

    init = {ground(lit, ":init") for lit in problem.init}
    for name in objects:
        for t in obj_types[name]:
            init.add(Fluent(pindex[t], (oindex[name],)))
    goal_pos = {ground(l, ":goal") for l in problem.goal if l.positive}
    goal_neg = {ground(l, ":goal") for l in problem.goal if not l.positive}
    try:
        return PlanningTask(sig, tuple(schemas), frozenset(init), frozenset(goal_pos),
                            frozenset(goal_neg), equality_predicate=eq_index)
    except TaskError as e:
        raise PddlError(str(e)) from None


def load_task(domain_text: str, problem_text: str) -> PlanningTask:
    return compile_task(parse_domain(domain_text), parse_problem(problem_text))
