"""And/or circuits with structural hashing, bit-vector gadgets and Tseitin CNF.

Literals are signed node ids.  Node 1 is the constant TRUE, so FALSE is -1.
Variables and gates share the node id space; every variable additionally
has a dense *variable index* (1, 2, ...) in creation order, which is the
number it gets in DIMACS/QDIMACS output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

TRUE = 1
FALSE = -1

CONST, VAR, AND, OR = "const", "var", "and", "or"


class CircuitError(ValueError):
    pass


class Circuit:
    def __init__(self):
        self.kinds: list[str] = [CONST]
        self.operands: list[tuple[int, ...]] = [()]
        self.names: dict[int, str] = {}
        self.var_nodes: list[int] = []  # variable index - 1 -> node id
        self._by_name: dict[str, int] = {}
        self._hash: dict[tuple, int] = {}

    def __len__(self):
        return len(self.kinds)

    @property
    def num_vars(self) -> int:
        return len(self.var_nodes)

    @property
    def num_gates(self) -> int:
        return sum(1 for k in self.kinds if k in (AND, OR))

    def kind(self, lit: int) -> str:
        return self.kinds[abs(lit) - 1]

    def ops(self, lit: int) -> tuple[int, ...]:
        return self.operands[abs(lit) - 1]

    def _new(self, kind, ops) -> int:
        self.kinds.append(kind)
        self.operands.append(ops)
        return len(self.kinds)

    def var(self, name: str) -> int:
        if name in self._by_name:
            raise CircuitError(f"duplicate variable name {name!r}")
        node = self._new(VAR, ())
        self.names[node] = name
        self._by_name[name] = node
        self.var_nodes.append(node)
        return node

    def lookup(self, name: str) -> int:
        return self._by_name[name]

    def var_index(self, lit: int) -> int:
        """Dense 1-based index of a variable literal's node."""
        node = abs(lit)
        if self.kinds[node - 1] != VAR:
            raise CircuitError(f"node {node} is not a variable")
        return self._var_pos()[node]

    def _var_pos(self) -> dict[int, int]:
        cache = getattr(self, "_pos_cache", None)
        if cache is None or len(cache) != len(self.var_nodes):
            cache = {n: i + 1 for i, n in enumerate(self.var_nodes)}
            self._pos_cache = cache
        return cache

    def _gate(self, kind: str, lits: Iterable[int]) -> int:
        absorbing = FALSE if kind == AND else TRUE
        neutral = -absorbing
        seen: dict[int, None] = {}
        for lit in lits:
            if lit == absorbing:
                return absorbing
            if lit == neutral:
                continue
            if -lit in seen:
                return absorbing
            seen[lit] = None
        ops = tuple(seen)
        if not ops:
            return neutral
        if len(ops) == 1:
            return ops[0]
        key = (kind, tuple(sorted(ops)))
        node = self._hash.get(key)
        if node is None:
            node = self._new(kind, ops)
            self._hash[key] = node
        return node

    def and_(self, *lits: int) -> int:
        return self._gate(AND, lits)

    def or_(self, *lits: int) -> int:
        return self._gate(OR, lits)

    def all_(self, lits: Iterable[int]) -> int:
        return self._gate(AND, lits)

    def any_(self, lits: Iterable[int]) -> int:
        return self._gate(OR, lits)

    @staticmethod
    def not_(lit: int) -> int:
        return -lit

    def implies(self, a: int, b: int) -> int:
        return self.or_(-a, b)

    def iff(self, a: int, b: int) -> int:
        return self.or_(self.and_(a, b), self.and_(-a, -b))

    # traversal

    def cone(self, root: int) -> list[int]:
        """Node ids reachable from ``root``, ascending (topological)."""
        seen = set()
        stack = [abs(root)]
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            stack.extend(abs(o) for o in self.operands[n - 1])
        return sorted(seen)

    def support(self, root: int) -> list[int]:
        return [n for n in self.cone(root) if self.kinds[n - 1] == VAR]

    def evaluate(self, root: int, assignment: dict[int, bool]) -> bool:
        """Evaluate with ``assignment`` keyed by variable node id."""
        val: dict[int, bool] = {}
        for n in self.cone(root):
            k = self.kinds[n - 1]
            if k == CONST:
                val[n] = True
            elif k == VAR:
                val[n] = bool(assignment[n])
            else:
                vs = ((val[abs(o)] if o > 0 else not val[abs(o)]) for o in self.operands[n - 1])
                val[n] = all(vs) if k == AND else any(vs)
        return val[abs(root)] if root > 0 else not val[abs(root)]

    def evaluate_batch(self, root: int, columns: dict[int, np.ndarray]) -> np.ndarray:
        """Vectorized evaluation; ``columns`` maps variable nodes to bool arrays."""
        size = len(next(iter(columns.values()))) if columns else 1
        val: dict[int, np.ndarray] = {}
        for n in self.cone(root):
            k = self.kinds[n - 1]
            if k == CONST:
                val[n] = np.ones(size, dtype=bool)
            elif k == VAR:
                val[n] = np.asarray(columns[n], dtype=bool)
            else:
                acc = None
                for o in self.operands[n - 1]:
                    v = val[abs(o)] if o > 0 else ~val[abs(o)]
                    if acc is None:
                        acc = v.copy()
                    elif k == AND:
                        acc &= v
                    else:
                        acc |= v
                val[n] = acc
        out = val[abs(root)]
        return out if root > 0 else ~out


def compose(src: Circuit, root: int, dst: Circuit, mapping: dict[int, int],
            memo: Optional[dict[int, int]] = None) -> int:
    """Rebuild the cone of ``root`` inside ``dst``.

    ``mapping`` sends variable nodes of ``src`` to literals of ``dst``
    (constants allowed).  Unmapped variables are kept only when
    ``src is dst``.
    """
    memo = {} if memo is None else memo
    memo.setdefault(1, TRUE)
    for n in src.cone(root):
        if n in memo:
            continue
        k = src.kinds[n - 1]
        if k == VAR:
            if n in mapping:
                memo[n] = mapping[n]
            elif src is dst:
                memo[n] = n
            else:
                raise CircuitError(f"variable {src.names[n]!r} has no image")
        else:
            lits = [memo[abs(o)] if o > 0 else -memo[abs(o)] for o in src.operands[n - 1]]
            memo[n] = dst._gate(k, lits)
    r = memo[abs(root)]
    return r if root > 0 else -r


# bit vectors and gadgets


@dataclass(frozen=True)
class BitVector:
    """Variable literals, least significant bit first."""

    bits: tuple[int, ...]

    @property
    def width(self) -> int:
        return len(self.bits)


def new_bitvector(c: Circuit, prefix: str, width: int) -> BitVector:
    return BitVector(tuple(c.var(f"{prefix}_b{b}") for b in range(width)))


def eq_const(c: Circuit, v: BitVector, idx: int) -> int:
    """True iff ``v`` spells ``idx``."""
    if idx < 0 or idx >= (1 << v.width):
        raise CircuitError(f"{idx} is not representable in {v.width} bits")
    return c.all_(bit if (idx >> b) & 1 else -bit for b, bit in enumerate(v.bits))


def eq_vars(c: Circuit, u: BitVector, v: BitVector) -> int:
    if u.width != v.width:
        raise CircuitError(f"width mismatch {u.width} != {v.width}")
    return c.all_(c.iff(p, q) for p, q in zip(u.bits, v.bits))


def lt_const(c: Circuit, v: BitVector, n: int) -> int:
    """Unsigned ``v < n``."""
    if n <= 0:
        return FALSE
    if n >= (1 << v.width):
        return TRUE
    # v < n iff at some set bit i of n, v_i = 0 and v agrees with n above i
    terms = []
    for i in range(v.width):
        if (n >> i) & 1:
            above = [v.bits[j] if (n >> j) & 1 else -v.bits[j] for j in range(i + 1, v.width)]
            terms.append(c.all_([-v.bits[i], *above]))
    return c.any_(terms)


# CNF


@dataclass
class CnfEncoding:
    num_vars: int
    clauses: list[list[int]]
    num_original: int = 0
    layout: object = None
    comments: list[str] = field(default_factory=list)

    @property
    def aux_vars(self) -> range:
        return range(self.num_original + 1, self.num_vars + 1)

    def to_dimacs(self) -> str:
        lines = [f"c {line}" for line in self.comments]
        lines.append(f"p cnf {self.num_vars} {len(self.clauses)}")
        lines.extend(" ".join(map(str, cl + [0])) for cl in self.clauses)
        return "\n".join(lines) + "\n"


def tseitin(c: Circuit, root: int) -> CnfEncoding:
    """Full (both polarity) Tseitin encoding with the root asserted.

    Circuit variables keep their variable index as DIMACS id; each AND/OR
    gate in the cone of ``root`` gets a fresh auxiliary id after them.
    """
    nv = c.num_vars
    pos = c._var_pos()
    ids: dict[int, int] = {}
    clauses: list[list[int]] = []
    next_id = nv
    for n in c.cone(root):
        k = c.kinds[n - 1]
        if k == VAR:
            ids[n] = pos[n]
        elif k in (AND, OR):
            next_id += 1
            t = ids[n] = next_id
            ins = [ids[abs(o)] if o > 0 else -ids[abs(o)] for o in c.operands[n - 1]]
            if k == AND:
                clauses.extend([-t, x] for x in ins)
                clauses.append([t, *(-x for x in ins)])
            else:
                clauses.extend([t, -x] for x in ins)
                clauses.append([-t, *ins])
    if abs(root) == TRUE:
        if root == FALSE:
            clauses.append([])
    else:
        r = ids[abs(root)]
        clauses.append([r if root > 0 else -r])
    return CnfEncoding(num_vars=next_id, clauses=clauses, num_original=nv)


def parse_dimacs(text: str) -> CnfEncoding:
    num_vars, clauses, cur, comments = 0, [], [], []
    for line in text.splitlines():
        s = line.strip()
        if not s:
            continue
        if s.startswith("c"):
            comments.append(s[1:].strip())
            continue
        if s.startswith("p"):
            parts = s.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise CircuitError(f"bad problem line {s!r}")
            num_vars = int(parts[2])
            continue
        for tok in s.split():
            lit = int(tok)
            if lit == 0:
                clauses.append(cur)
                cur = []
            else:
                cur.append(lit)
    if cur:
        clauses.append(cur)
    return CnfEncoding(num_vars=num_vars, clauses=clauses, num_original=num_vars,
                       comments=comments)


# quantified circuits

EXISTS, FORALL = "e", "a"


@dataclass
class Qbf:
    """Prenex QBF whose matrix is a circuit root.

    ``prefix`` is a list of ``(quantifier, [variable node, ...])`` blocks,
    outermost first.
    """

    circuit: Circuit
    prefix: list[tuple[str, list[int]]]
    root: int

    def normalized_prefix(self) -> list[tuple[str, list[int]]]:
        """Drop empty blocks and merge neighbours with the same quantifier."""
        out: list[tuple[str, list[int]]] = []
        for q, vs in self.prefix:
            if not vs:
                continue
            if out and out[-1][0] == q:
                out[-1] = (q, out[-1][1] + list(vs))
            else:
                out.append((q, list(vs)))
        return out


def cnf_to_qbf(prefix: Sequence[tuple[str, Sequence[int]]], cnf: CnfEncoding) -> Qbf:
    """Circuit view of a QDIMACS formula; variable index i is node of var ``v{i}``."""
    c = Circuit()
    nodes = [c.var(f"v{i}") for i in range(1, cnf.num_vars + 1)]

    def lit(x):
        return nodes[x - 1] if x > 0 else -nodes[-x - 1]

    root = c.all_(c.any_(lit(x) for x in cl) for cl in cnf.clauses)
    return Qbf(c, [(q, [nodes[v - 1] for v in vs]) for q, vs in prefix], root)
