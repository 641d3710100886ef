import random
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_sat, flatten_prefix, naive_qbf
from qplan.circuit import EXISTS, FORALL, Circuit, CnfEncoding, Qbf, cnf_to_qbf
from qplan.layout import VariableLayout
from qplan.plans import validate
from qplan.qbf_encoder import encode_qbf, parse_qdimacs, to_qdimacs
from qplan.task import make_task
from qplan.solvers import (
    QFALSE, QTRUE, SAT, SOLVER_ENV, UNKNOWN, UNSAT, MalformedWitness, decode_plan,
    evaluate_qbf, run_external_qbf, solve_cnf,
)


@pytest.fixture(scope="module")
def solvers(data_dir):
    return data_dir / "solvers"


def mock(solvers, name, *extra):
    return [sys.executable, str(solvers / f"{name}.py"), *extra]


def _random_cnf(rng, n, m, width=3):
    return [[rng.choice((1, -1)) * rng.randint(1, n) for _ in range(rng.randint(1, width))]
            for _ in range(m)]


# CDCL


@pytest.mark.parametrize("seed", range(150))
def test_cdcl_matches_brute_force(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 16)
    clauses = _random_cnf(rng, n, rng.randint(1, 5 * n))
    res = solve_cnf(CnfEncoding(n, clauses, n))
    assert res.positive == brute_sat(n, clauses)
    if res.positive:
        assert all(any(res.witness[abs(x)] == (x > 0) for x in cl) for cl in clauses)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 10).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(st.lists(st.integers(1, n).flatmap(
        lambda v: st.sampled_from((v, -v))), min_size=0, max_size=4), max_size=30))))
def test_cdcl_property(case):
    n, clauses = case
    res = solve_cnf(CnfEncoding(n, clauses, n))
    assert res.verdict == (SAT if brute_sat(n, clauses) else UNSAT)


def test_cdcl_empty_and_trivial():
    assert solve_cnf(CnfEncoding(0, [], 0)).verdict == SAT
    assert solve_cnf(CnfEncoding(1, [[]], 1)).verdict == UNSAT
    assert solve_cnf(CnfEncoding(1, [[1], [-1]], 1)).verdict == UNSAT
    assert solve_cnf(CnfEncoding(2, [[1, -1]], 2)).positive


def test_cdcl_pigeonhole_unsat():
    # 5 pigeons, 4 holes
    var = lambda p, h: p * 4 + h + 1
    clauses = [[var(p, h) for h in range(4)] for p in range(5)]
    clauses += [[-var(p, h), -var(q, h)] for h in range(4)
                for p in range(5) for q in range(p + 1, 5)]
    assert solve_cnf(CnfEncoding(20, clauses, 20)).verdict == UNSAT


def test_cdcl_conflict_budget():
    var = lambda p, h: p * 6 + h + 1
    clauses = [[var(p, h) for h in range(6)] for p in range(7)]
    clauses += [[-var(p, h), -var(q, h)] for h in range(6)
                for p in range(7) for q in range(p + 1, 7)]
    res = solve_cnf(CnfEncoding(42, clauses, 42), max_conflicts=5)
    assert res.verdict == UNKNOWN
    assert res.diagnostic


# QBF evaluation


def _qbf_from_clauses(blocks, n, clauses):
    return cnf_to_qbf(blocks, CnfEncoding(n, clauses, n))


def test_exists_x_x():
    c = Circuit()
    x = c.var("x")
    res = evaluate_qbf(Qbf(c, [(EXISTS, [x])], x))
    assert res.verdict == QTRUE and res.witness == {1: True}


def test_forall_exists_iff():
    c = Circuit()
    y, q = c.var("y"), c.var("q")
    assert evaluate_qbf(Qbf(c, [(FORALL, [y]), (EXISTS, [q])], c.iff(y, q))).verdict == QTRUE
    assert evaluate_qbf(Qbf(c, [(EXISTS, [q]), (FORALL, [y])], c.iff(y, q))).verdict == QFALSE


@pytest.mark.parametrize("seed", range(120))
def test_evaluate_qbf_matches_naive(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 12)
    order = list(range(1, n + 1))
    rng.shuffle(order)
    blocks, pos = [], 0
    while pos < n:
        size = rng.randint(1, 4)
        blocks.append((rng.choice((EXISTS, FORALL)), order[pos:pos + size]))
        pos += size
    # leave a few variables free now and then
    if rng.random() < 0.2 and len(blocks) > 1:
        blocks = blocks[1:]
    clauses = _random_cnf(rng, n, rng.randint(1, 3 * n))
    res = evaluate_qbf(_qbf_from_clauses(blocks, n, clauses))
    assert res.positive == naive_qbf(flatten_prefix(blocks), clauses)


def test_witness_satisfies_for_all_universals():
    # exists a b forall y exists z: (a | y) & (b | -y) & (z <-> y)
    clauses = [[1, 3], [2, -3], [-4, 3], [4, -3]]
    res = evaluate_qbf(_qbf_from_clauses([("e", [1, 2]), ("a", [3]), ("e", [4])], 4, clauses))
    assert res.verdict == QTRUE and res.witness == {1: True, 2: True}


def test_depth_budget():
    c = Circuit()
    ys = [c.var(f"y{i}") for i in range(20)]
    res = evaluate_qbf(Qbf(c, [(FORALL, ys)], c.any_(ys)), max_copies=1 << 10)
    assert res.verdict == UNKNOWN
    assert "exceed" in res.diagnostic


def test_two_block_horizons(blocks):
    verdicts = [evaluate_qbf(encode_qbf(blocks, k)).verdict for k in range(4)]
    assert verdicts == [QFALSE, QFALSE, QTRUE, QFALSE]


# external solvers


def _two_block_k2(blocks, tmp_path):
    enc = encode_qbf(blocks, 2)
    path = tmp_path / "bw.qdimacs"
    path.write_text(to_qdimacs(enc))
    return enc, path


def test_external_true_with_witness(blocks, solvers, tmp_path):
    enc, path = _two_block_k2(blocks, tmp_path)
    res = run_external_qbf(path, mock(solvers, "answer_true"))
    assert res.verdict == QTRUE
    assert res.witness == {1: False, 2: True, 3: False, 4: True, 5: False, 6: True}
    # decode through the layout recorded in the file itself
    _, cnf = parse_qdimacs(path.read_text())
    layout = VariableLayout.from_comments(cnf.comments)
    plan = decode_plan(res.witness, layout, blocks)
    assert plan.names(blocks) == ["unstack(b2,b1)", "stack(b1,b2)"]
    assert validate(blocks, plan).valid


def test_external_false(solvers, tmp_path):
    path = tmp_path / "f.qdimacs"
    path.write_text("p cnf 1 1\ne 1 0\n1 0\n")
    assert run_external_qbf(path, mock(solvers, "answer_false")).verdict == QFALSE


def test_external_garbage(solvers, tmp_path):
    path = tmp_path / "f.qdimacs"
    path.write_text("p cnf 1 1\ne 1 0\n1 0\n")
    res = run_external_qbf(path, mock(solvers, "answer_garbage"))
    assert res.verdict == UNKNOWN
    assert "segmentation fault" in res.diagnostic


def test_external_unparseable_vline(solvers, tmp_path):
    path = tmp_path / "f.qdimacs"
    path.write_text("p cnf 1 0\n")
    assert run_external_qbf(path, mock(solvers, "answer_bad_vline")).verdict == UNKNOWN


def test_external_missing_binary(tmp_path):
    res = run_external_qbf(tmp_path / "x.qdimacs", "/nonexistent/qbf-solver")
    assert res.verdict == UNKNOWN
    assert "not found" in res.diagnostic


def test_external_timeout(solvers, tmp_path):
    res = run_external_qbf(tmp_path / "x.qdimacs", mock(solvers, "answer_slow"), timeout=0.5)
    assert res.verdict == UNKNOWN
    assert "timed out" in res.diagnostic


def test_external_file_placeholder(solvers, tmp_path):
    path = tmp_path / "f.qdimacs"
    path.write_text("p cnf 1 1\ne 1 0\n1 0\n")
    cmd = f"{sys.executable} {solvers / 'reference_solver.py'} {{file}}"
    res = run_external_qbf(path, cmd)
    assert res.verdict == QTRUE and res.witness == {1: True}


def test_external_env_variable(solvers, tmp_path, monkeypatch):
    path = tmp_path / "f.qdimacs"
    path.write_text("p cnf 1 2\ne 1 0\n1 0\n-1 0\n")
    monkeypatch.setenv(SOLVER_ENV, f"{sys.executable} {solvers / 'reference_solver.py'}")
    assert run_external_qbf(path).verdict == QFALSE
    monkeypatch.delenv(SOLVER_ENV)
    assert run_external_qbf(path).verdict == UNKNOWN


@pytest.mark.parametrize("k", range(4))
def test_reference_solver_agrees(blocks, solvers, tmp_path, k):
    path = tmp_path / "bw.qdimacs"
    path.write_text(to_qdimacs(encode_qbf(blocks, k)))
    res = run_external_qbf(path, mock(solvers, "reference_solver"))
    assert res.positive == (k == 2)


# decoding


def _layout():
    return VariableLayout(k=1, action_bits=[[1]], param_bits=[[[2], [3]]])


def test_decode_plan(blocks):
    plan = decode_plan({1: True, 2: False, 3: True}, _layout(), blocks)
    assert plan.names(blocks) == ["stack(b1,b2)"]


def test_decode_missing_variable(blocks):
    with pytest.raises(MalformedWitness, match="does not assign"):
        decode_plan({1: True, 2: False}, _layout(), blocks)


def test_decode_out_of_range_codes():
    task = make_task([("p", 1)], [(f"a{i}", 1, {}) for i in range(3)], ["x", "y", "z"])
    layout = VariableLayout(k=1, action_bits=[[1, 2]], param_bits=[[[3, 4]]])
    with pytest.raises(MalformedWitness, match="action code 3"):
        decode_plan({1: True, 2: True, 3: False, 4: False}, layout, task)
    with pytest.raises(MalformedWitness, match="object code 3"):
        decode_plan({1: False, 2: False, 3: True, 4: True}, layout, task)
