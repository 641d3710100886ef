"""Planning signature, schematic actions and fluents.

Everything here is index based: predicates, actions and objects are
numbered in declaration order and those numbers become the binary codes
used by the encoders.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

PRE_POS = "pre+"
PRE_NEG = "pre-"
EFF_POS = "eff+"
EFF_NEG = "eff-"
SELECTORS = (PRE_POS, PRE_NEG, EFF_POS, EFF_NEG)

EQUALITY = "="


class TaskError(ValueError):
    """Raised when a task (or a query against it) is malformed."""


def bits_for(count: int) -> int:
    """Number of bits of a logarithmic code for ``count`` values (0 for 0 or 1)."""
    if count <= 1:
        return 0
    return (count - 1).bit_length()


@dataclass(frozen=True)
class Param:
    """Reference to action parameter x_j (1-based)."""

    index: int

    def __str__(self) -> str:
        return f"?x{self.index}"


@dataclass(frozen=True)
class Const:
    """Constant object argument inside a schema body."""

    obj: int


Term = Union[Param, Const]


@dataclass(frozen=True)
class Atom:
    predicate: int
    args: tuple[Term, ...] = ()

    def params(self) -> set[int]:
        return {a.index for a in self.args if isinstance(a, Param)}


@dataclass(frozen=True, order=True)
class Fluent:
    predicate: int
    objects: tuple[int, ...] = ()


@dataclass(frozen=True)
class Signature:
    predicates: tuple[str, ...]
    actions: tuple[str, ...]
    objects: tuple[str, ...]
    arity: dict = field(default_factory=dict, compare=False, hash=False)
    # predicate and action arities kept apart since names may coincide
    predicate_arity: tuple[int, ...] = ()
    action_arity: tuple[int, ...] = ()

    def __post_init__(self):
        for kind, names in (("predicate", self.predicates), ("action", self.actions),
                            ("object", self.objects)):
            if len(set(names)) != len(names):
                raise TaskError(f"duplicate {kind} name in {names}")
        if len(self.predicate_arity) != len(self.predicates):
            raise TaskError("predicate arity missing")
        if len(self.action_arity) != len(self.actions):
            raise TaskError("action arity missing")
        arity = dict(zip(self.predicates, self.predicate_arity))
        arity.update(zip(self.actions, self.action_arity))
        object.__setattr__(self, "arity", arity)

    @property
    def action_bits(self) -> int:
        return bits_for(len(self.actions))

    @property
    def object_bits(self) -> int:
        return bits_for(len(self.objects))

    @property
    def max_action_arity(self) -> int:
        return max(self.action_arity, default=0)

    def predicate_index(self, name: str) -> int:
        try:
            return self.predicates.index(name)
        except ValueError:
            raise TaskError(f"unknown predicate {name!r}") from None

    def action_index(self, name: str) -> int:
        try:
            return self.actions.index(name)
        except ValueError:
            raise TaskError(f"unknown action {name!r}") from None

    def object_index(self, name: str) -> int:
        try:
            return self.objects.index(name)
        except ValueError:
            raise TaskError(f"unknown object {name!r}") from None


@dataclass(frozen=True)
class ActionSchema:
    index: int
    arity: int
    pre_pos: tuple[Atom, ...] = ()
    pre_neg: tuple[Atom, ...] = ()
    eff_pos: tuple[Atom, ...] = ()
    eff_neg: tuple[Atom, ...] = ()

    def __post_init__(self):
        for atoms in (self.pre_pos, self.pre_neg, self.eff_pos, self.eff_neg):
            for atom in atoms:
                for j in atom.params():
                    if not 1 <= j <= self.arity:
                        raise TaskError(
                            f"parameter x{j} out of range for action of arity {self.arity}")
        both = set(self.eff_pos) & set(self.eff_neg)
        if both:
            raise TaskError(f"atom(s) in both positive and negative effects: {sorted(both, key=repr)}")

    def atoms(self, selector: str) -> tuple[Atom, ...]:
        if selector == PRE_POS:
            return self.pre_pos
        if selector == PRE_NEG:
            return self.pre_neg
        if selector == EFF_POS:
            return self.eff_pos
        if selector == EFF_NEG:
            return self.eff_neg
        raise TaskError(f"unknown atom selector {selector!r}")


@dataclass(frozen=True)
class PlanningTask:
    signature: Signature
    schemas: tuple[ActionSchema, ...]
    init: frozenset
    goal_pos: frozenset = frozenset()
    goal_neg: frozenset = frozenset()
    static_predicates: Optional[frozenset] = None
    equality_predicate: Optional[int] = None

    def __post_init__(self):
        sig = self.signature
        if len(self.schemas) != len(sig.actions):
            raise TaskError("one schema per action name required")
        for i, schema in enumerate(self.schemas):
            if schema.index != i or schema.arity != sig.action_arity[i]:
                raise TaskError(f"schema {i} does not match the signature")
            for sel in SELECTORS:
                for atom in schema.atoms(sel):
                    self._check_atom(atom)
            if self.equality_predicate is not None:
                for atom in schema.eff_pos + schema.eff_neg:
                    if atom.predicate == self.equality_predicate:
                        raise TaskError("equality cannot be an action effect")
        if self.goal_pos & self.goal_neg:
            raise TaskError("goal requires a fluent to be both true and false")
        for f in itertools.chain(self.init, self.goal_pos, self.goal_neg):
            self._check_fluent(f)
            if f.predicate == self.equality_predicate:
                raise TaskError("equality is not allowed in init or goal")
        computed = detect_static_predicates(self)
        if self.static_predicates is None:
            object.__setattr__(self, "static_predicates", computed)
        elif frozenset(self.static_predicates) != computed:
            raise TaskError("stored static predicates disagree with the schemas")

    def _check_atom(self, atom: Atom) -> None:
        sig = self.signature
        if not 0 <= atom.predicate < len(sig.predicates):
            raise TaskError(f"unknown predicate index {atom.predicate}")
        if len(atom.args) != sig.predicate_arity[atom.predicate]:
            raise TaskError(f"arity mismatch for {sig.predicates[atom.predicate]}")
        for a in atom.args:
            if isinstance(a, Const) and not 0 <= a.obj < len(sig.objects):
                raise TaskError(f"unknown object index {a.obj}")

    def _check_fluent(self, f: Fluent) -> None:
        sig = self.signature
        if not 0 <= f.predicate < len(sig.predicates):
            raise TaskError(f"unknown predicate index {f.predicate}")
        if len(f.objects) != sig.predicate_arity[f.predicate]:
            raise TaskError(f"arity mismatch for {sig.predicates[f.predicate]}")
        if any(not 0 <= o < len(sig.objects) for o in f.objects):
            raise TaskError(f"object index out of range in {f}")

    # derived accessors

    @property
    def fluent_predicates(self) -> list[int]:
        """Predicate indices that carry truth values (equality excluded)."""
        return [p for p in range(len(self.signature.predicates))
                if p != self.equality_predicate]

    @property
    def max_predicate_arity(self) -> int:
        return max((self.signature.predicate_arity[p] for p in self.fluent_predicates), default=0)

    @property
    def nonstatic_predicates(self) -> list[int]:
        return [p for p in self.fluent_predicates if p not in self.static_predicates]

    def fluent_name(self, f: Fluent) -> str:
        sig = self.signature
        args = ",".join(sig.objects[o] for o in f.objects)
        return f"{sig.predicates[f.predicate]}({args})"

    def action_name(self, index: int, objects: Iterable[int]) -> str:
        sig = self.signature
        return f"{sig.actions[index]}({','.join(sig.objects[o] for o in objects)})"

    def to_dict(self) -> dict:
        """Plain serializable form; stable across runs."""
        sig = self.signature

        def term(t):
            return f"?x{t.index}" if isinstance(t, Param) else sig.objects[t.obj]

        def atom(a):
            return [sig.predicates[a.predicate], *map(term, a.args)]

        def fluent(f):
            return [sig.predicates[f.predicate], *(sig.objects[o] for o in f.objects)]

        return {
            "predicates": [[n, a] for n, a in zip(sig.predicates, sig.predicate_arity)],
            "actions": [
                {
                    "name": sig.actions[s.index],
                    "arity": s.arity,
                    **{sel: [atom(a) for a in s.atoms(sel)] for sel in SELECTORS},
                }
                for s in self.schemas
            ],
            "objects": list(sig.objects),
            "init": [fluent(f) for f in sorted(self.init)],
            "goal_pos": [fluent(f) for f in sorted(self.goal_pos)],
            "goal_neg": [fluent(f) for f in sorted(self.goal_neg)],
            "static": [sig.predicates[p] for p in sorted(self.static_predicates)],
            "equality": None if self.equality_predicate is None
            else sig.predicates[self.equality_predicate],
        }


def make_task(predicates, actions, objects, init=(), goal_pos=(), goal_neg=(),
              equality: Optional[str] = None) -> PlanningTask:
    """Build a task from names.

    ``predicates`` is a list of ``(name, arity)``; ``actions`` a list of
    ``(name, arity, {selector: [(pred, args...)]})`` where args are ints for
    parameters (1-based) or strings for constant objects.  Fluents are given
    as tuples ``(pred, obj, ...)``.
    """
    pred_names = [p for p, _ in predicates]
    pred_ar = [a for _, a in predicates]
    eq_index = None
    if equality is not None:
        pred_names.append(equality)
        pred_ar.append(2)
        eq_index = len(pred_names) - 1
    sig = Signature(
        predicates=tuple(pred_names),
        actions=tuple(a[0] for a in actions),
        objects=tuple(objects),
        predicate_arity=tuple(pred_ar),
        action_arity=tuple(a[1] for a in actions),
    )

    def atom(spec):
        name, *args = spec
        return Atom(sig.predicate_index(name),
                    tuple(Param(a) if isinstance(a, int) else Const(sig.object_index(a))
                          for a in args))

    def fluent(spec):
        name, *args = spec
        return Fluent(sig.predicate_index(name), tuple(sig.object_index(o) for o in args))

    schemas = []
    for i, (_, arity, body) in enumerate(actions):
        schemas.append(ActionSchema(
            index=i,
            arity=arity,
            **{key: tuple(dict.fromkeys(atom(s) for s in body.get(sel, ())))
               for key, sel in (("pre_pos", PRE_POS), ("pre_neg", PRE_NEG),
                                ("eff_pos", EFF_POS), ("eff_neg", EFF_NEG))},
        ))
    return PlanningTask(
        signature=sig,
        schemas=tuple(schemas),
        init=frozenset(map(fluent, init)),
        goal_pos=frozenset(map(fluent, goal_pos)),
        goal_neg=frozenset(map(fluent, goal_neg)),
        equality_predicate=eq_index,
    )


def enumerate_fluents(task: PlanningTask) -> list[Fluent]:
    """All grounded atoms, ordered by (predicate index, object indices)."""
    sig = task.signature
    n = len(sig.objects)
    out = []
    for p in task.fluent_predicates:
        for objs in itertools.product(range(n), repeat=sig.predicate_arity[p]):
            out.append(Fluent(p, objs))
    return out


def ground_atom(atom: Atom, objs: tuple[int, ...]) -> Fluent:
    return Fluent(atom.predicate, tuple(
        objs[a.index - 1] if isinstance(a, Param) else a.obj for a in atom.args))


def ground_schema(selector: str, schema: ActionSchema, objs: tuple[int, ...]) -> set[Fluent]:
    """Substitute ``objs`` for the parameters in the selected atom set."""
    if len(objs) != schema.arity:
        raise TaskError(f"expected {schema.arity} objects, got {len(objs)}")
    return {ground_atom(a, tuple(objs)) for a in schema.atoms(selector)}


def detect_static_predicates(task: PlanningTask) -> frozenset:
    """Predicates occurring in no action effect (equality is never counted)."""
    touched = set()
    for schema in task.schemas:
        for atom in schema.eff_pos + schema.eff_neg:
            touched.add(atom.predicate)
    return frozenset(p for p in task.fluent_predicates if p not in touched)


def equality_holds(atom: Atom, objs: tuple[int, ...]) -> bool:
    f = ground_atom(atom, objs)
    return f.objects[0] == f.objects[1]


def ground_actions(task: PlanningTask):
    """Yield every (schema, object tuple) pair."""
    n = len(task.signature.objects)
    for schema in task.schemas:
        for objs in itertools.product(range(n), repeat=schema.arity):
            yield schema, objs
