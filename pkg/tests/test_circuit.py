import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_sat, random_circuit, tseitin_agreement
from qplan.circuit import (
    EXISTS, FALSE, FORALL, TRUE, Circuit, CircuitError, Qbf, cnf_to_qbf, compose, eq_const,
    eq_vars, lt_const, new_bitvector, parse_dimacs, tseitin,
)
from qplan.solvers import solve_cnf


def _value(bits):
    return sum(1 << i for i, b in enumerate(bits) if b)


@pytest.mark.parametrize("width", range(0, 5))
def test_eq_const_exhaustive(width):
    c = Circuit()
    v = new_bitvector(c, "v", width)
    gates = {n: eq_const(c, v, n) for n in range(1 << width)}
    for bits in itertools.product((False, True), repeat=width):
        asg = dict(zip(v.bits, bits))
        for n, g in gates.items():
            assert c.evaluate(g, asg) == (_value(bits) == n)


@pytest.mark.parametrize("width", range(0, 5))
def test_eq_vars_exhaustive(width):
    c = Circuit()
    u, v = new_bitvector(c, "u", width), new_bitvector(c, "v", width)
    g = eq_vars(c, u, v)
    for bits in itertools.product((False, True), repeat=2 * width):
        asg = dict(zip(u.bits + v.bits, bits))
        assert c.evaluate(g, asg) == (_value(bits[:width]) == _value(bits[width:]))


@pytest.mark.parametrize("width", range(0, 5))
def test_lt_const_exhaustive(width):
    c = Circuit()
    v = new_bitvector(c, "v", width)
    gates = {n: lt_const(c, v, n) for n in range(-1, (1 << width) + 2)}
    for bits in itertools.product((False, True), repeat=width):
        asg = dict(zip(v.bits, bits))
        for n, g in gates.items():
            assert c.evaluate(g, asg) == (_value(bits) < n)


def test_lt_const_trivial_bounds():
    c = Circuit()
    v = new_bitvector(c, "v", 3)
    assert lt_const(c, v, 0) == FALSE
    assert lt_const(c, v, 8) == TRUE


def test_gadget_errors():
    c = Circuit()
    v = new_bitvector(c, "v", 2)
    with pytest.raises(CircuitError):
        eq_const(c, v, 4)
    with pytest.raises(CircuitError):
        eq_vars(c, v, new_bitvector(c, "w", 3))
    with pytest.raises(CircuitError):
        c.var("v_b0")


def test_structural_hashing_and_folding():
    c = Circuit()
    a, b = c.var("a"), c.var("b")
    g = c.and_(a, b)
    assert c.and_(b, a) == g
    assert c.and_(a, a) == a
    assert c.and_(a, -a) == FALSE
    assert c.or_(a, -a) == TRUE
    assert c.and_(a, TRUE) == a
    assert c.or_(a, FALSE) == a
    assert c.and_() == TRUE and c.or_() == FALSE
    assert c.num_gates == 1


def test_tseitin_clause_bound():
    c = Circuit()
    xs = [c.var(f"x{i}") for i in range(4)]
    root = c.or_(c.and_(xs[0], -xs[1]), c.and_(xs[2], xs[3], -xs[0]))
    cnf = tseitin(c, root)
    assert cnf.num_original == 4
    assert cnf.num_vars == 4 + 3
    # one clause per input plus one per gate, plus the root unit
    assert len(cnf.clauses) == (2 + 1) + (3 + 1) + (2 + 1) + 1
    assert list(cnf.aux_vars) == [5, 6, 7]
    assert cnf.clauses[-1] == [7]


def test_tseitin_constant_roots():
    c = Circuit()
    c.var("a")
    assert tseitin(c, TRUE).clauses == []
    assert tseitin(c, FALSE).clauses == [[]]
    assert not solve_cnf(tseitin(c, FALSE)).positive


def test_tseitin_negated_root():
    c = Circuit()
    a, b = c.var("a"), c.var("b")
    cnf = tseitin(c, -c.and_(a, b))
    assert cnf.clauses[-1] == [-3]
    assert tseitin_agreement(c, -c.and_(a, b)) == 4


@pytest.mark.parametrize("seed", range(40))
def test_tseitin_equisatisfiable_random(seed):
    n = 2 + seed % 19
    c, root = random_circuit(seed, n, 3 * n)
    assert tseitin_agreement(c, root) == 1 << n


@pytest.mark.parametrize("seed", range(15))
def test_tseitin_aux_forced(seed):
    # any model of definitions + root restricted to the originals satisfies the circuit
    c, root = random_circuit(1000 + seed, 5, 12)
    cnf = tseitin(c, root)
    for bits in itertools.product((False, True), repeat=5):
        units = [[i + 1 if b else -(i + 1)] for i, b in enumerate(bits)]
        asg = dict(zip(c.var_nodes, bits))
        res = solve_cnf(type(cnf)(cnf.num_vars, cnf.clauses + units, cnf.num_original))
        assert res.positive == c.evaluate(root, asg)


def test_dimacs_round_trip():
    c, root = random_circuit(3, 6, 15)
    cnf = tseitin(c, root)
    cnf.comments = ["hello"]
    back = parse_dimacs(cnf.to_dimacs())
    assert back.num_vars == cnf.num_vars
    assert back.clauses == cnf.clauses
    assert back.comments == ["hello"]


def test_compose_into_other_circuit():
    c = Circuit()
    a, b = c.var("a"), c.var("b")
    root = c.or_(c.and_(a, -b), c.and_(-a, b))
    d = Circuit()
    x = d.var("x")
    r = compose(c, root, d, {a: x, b: TRUE})
    assert r == -x
    assert compose(c, root, c, {a: FALSE}) == b


def test_compose_unmapped_variable():
    c = Circuit()
    a = c.var("a")
    with pytest.raises(CircuitError):
        compose(c, a, Circuit(), {})


def test_normalized_prefix():
    c = Circuit()
    a, b, y = c.var("a"), c.var("b"), c.var("y")
    q = Qbf(c, [(EXISTS, [a]), (EXISTS, [b]), (FORALL, []), (FORALL, [y])], c.and_(a, b, y))
    assert q.normalized_prefix() == [(EXISTS, [a, b]), (FORALL, [y])]


def test_cnf_to_qbf():
    q = cnf_to_qbf([(EXISTS, [1, 2])], parse_dimacs("p cnf 2 2\n1 2 0\n-1 0\n"))
    c = q.circuit
    v1, v2 = c.lookup("v1"), c.lookup("v2")
    assert c.evaluate(q.root, {v1: False, v2: True})
    assert not c.evaluate(q.root, {v1: True, v2: True})


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.integers(-5, 5).filter(bool), min_size=1, max_size=4),
                max_size=14))
def test_cnf_round_trip_preserves_satisfiability(clauses):
    q = cnf_to_qbf([], parse_dimacs("p cnf 5 0\n" + "".join(
        " ".join(map(str, cl)) + " 0\n" for cl in clauses)))
    assert solve_cnf(tseitin(q.circuit, q.root)).positive == brute_sat(5, clauses)
