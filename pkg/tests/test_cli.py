import csv
import json
import subprocess
import sys

import pytest

from qplan.cli import main
from qplan.circuit import parse_dimacs
from qplan.qbf_encoder import parse_qcir, parse_qdimacs


@pytest.fixture
def files(data_dir):
    return ["--domain", str(data_dir / "blocksworld_domain.pddl"),
            "--problem", str(data_dir / "blocksworld_problem.pddl")]


@pytest.fixture
def typed(data_dir):
    return ["--domain", str(data_dir / "typed_domain.pddl"),
            "--problem", str(data_dir / "typed_problem.pddl")]


def _kv(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


def test_encode_sat(files, tmp_path, capsys):
    base = tmp_path / "bw"
    assert main(["encode-sat", *files, "-k", "2", "--out", str(base)]) == 0
    out = _kv(capsys.readouterr().out)
    assert out["original_vars"] == "30"
    cnf = parse_dimacs((tmp_path / "bw.cnf").read_text())
    assert str(len(cnf.clauses)) == out["clauses"]
    layout = json.loads((tmp_path / "bw.layout.json").read_text())
    assert layout["action_bits"] == [[1], [4]]
    assert layout["actions"] == ["unstack", "stack"]


def test_encode_sat_default_name(files, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(["encode-sat", *files, "-k", "1"]) == 0
    assert (tmp_path / "blocksworld_problem_k1.cnf").exists()


def test_encode_sat_guard(files, tmp_path, capsys):
    code = main(["encode-sat", *files, "-k", "2", "--out", str(tmp_path / "x"),
                 "--sat-clause-cap", "5"])
    assert code == 65
    assert "projected" in capsys.readouterr().err


def test_encode_qbf(files, tmp_path, capsys, data_dir):
    base = tmp_path / "bw"
    assert main(["encode-qbf", *files, "-k", "2", "--out", str(base)]) == 0
    out = _kv(capsys.readouterr().out)
    assert (out["plan_vars"], out["universal_vars"], out["predicate_vars"]) == ("6", "2", "9")
    qcir = (tmp_path / "bw.qcir").read_text()
    assert qcir == (data_dir / "blocksworld_k2.qcir").read_text()
    parse_qcir(qcir)
    prefix, _ = parse_qdimacs((tmp_path / "bw.qdimacs").read_text())
    assert [q for q, _ in prefix] == ["e", "a", "e"]


@pytest.mark.parametrize("backend", ["sat-internal", "qbf-internal"])
def test_solve(files, tmp_path, capsys, backend):
    plan = tmp_path / "plan.txt"
    assert main(["solve", *files, "--backend", backend, "--out", str(plan)]) == 0
    out = capsys.readouterr().out
    assert "refuted horizons: 0 1" in out
    assert "plan found at k=2" in out
    assert plan.read_text() == "(unstack b2 b1)\n(stack b1 b2)\n"


def test_solve_external(files, data_dir, capsys, monkeypatch):
    solver = f"{sys.executable} {data_dir / 'solvers' / 'reference_solver.py'}"
    monkeypatch.setenv("QPLAN_QBF_SOLVER", solver)
    assert main(["solve", *files, "--backend", "qbf-external"]) == 0
    assert "(stack b1 b2)" in capsys.readouterr().out


def test_solve_external_needs_command(files, monkeypatch, capsys):
    monkeypatch.delenv("QPLAN_QBF_SOLVER", raising=False)
    assert main(["solve", *files, "--backend", "qbf-external"]) == 64


def test_solve_bogus_solver_is_unknown(files, capsys):
    code = main(["solve", *files, "--backend", "qbf-external",
                 "--solver-cmd", "/nonexistent/solver"])
    assert code == 2
    assert "unknown at k=0" in capsys.readouterr().err


def test_solve_refuted(files, capsys):
    assert main(["solve", *files, "--k-max", "1"]) == 1
    assert "no plan of length <= 1 (exact-k semantics)" in capsys.readouterr().out


def test_solve_sweep_with_step(files, capsys):
    assert main(["solve", *files, "--k-start", "1", "--k-step", "2", "--k-max", "5"]) == 1
    assert "no plan at horizons [1, 3, 5]" in capsys.readouterr().out


def test_solve_typed(typed, capsys):
    assert main(["solve", *typed]) == 0
    assert "(drive t1 l2 l3)" in capsys.readouterr().out


def test_validate(files, tmp_path, capsys):
    good, bad = tmp_path / "good.txt", tmp_path / "bad.txt"
    good.write_text("(unstack b2 b1)\n(stack b1 b2)\n")
    bad.write_text("(stack b1 b2)\n")
    assert main(["validate", *files, "--plan", str(good)]) == 0
    assert "valid plan of length 2" in capsys.readouterr().out
    assert main(["validate", *files, "--plan", str(bad)]) == 1
    assert "invalid at step 0: precondition clear(b1)" in capsys.readouterr().out


def test_validate_malformed_plan(files, tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("(fly b1)\n")
    assert main(["validate", *files, "--plan", str(bad)]) == 65


def test_oracle(files, capsys):
    assert main(["oracle", *files, "--k-max", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == ["k=0 exists=no", "k=1 exists=no",
                     "k=2 exists=yes plan=(unstack b2 b1) (stack b1 b2)", "k=3 exists=no"]


def test_stats(files, tmp_path, capsys):
    out_csv = tmp_path / "stats.csv"
    assert main(["stats", *files, "--k-max", "3", "--out", str(out_csv)]) == 0
    rows = list(csv.DictReader(out_csv.open()))
    assert [(r["k"], r["encoding"]) for r in rows][:2] == [("0", "qbf"), ("0", "sat")]
    qbf2 = next(r for r in rows if r["k"] == "2" and r["encoding"] == "qbf")
    sat2 = next(r for r in rows if r["k"] == "2" and r["encoding"] == "sat")
    assert qbf2["vars"] == "17" and qbf2["universal_vars"] == "2"
    assert sat2["vars"] == "30" and sat2["fluent_vars"] == "8"


def test_stats_refused_sat_row(files, capsys):
    assert main(["stats", *files, "--k-max", "1", "--sat-clause-cap", "5"]) == 0
    assert "encoding=sat status=refused" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["solve"],
    ["encode-sat", "--domain", "d", "--problem", "p"],
    ["encode-sat", "--domain", "d", "--problem", "p", "-k", "x"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 64


def test_negative_k(files, capsys):
    assert main(["encode-qbf", *files, "-k", "-1"]) == 64


def test_bad_k_range(files, capsys):
    assert main(["solve", *files, "--k-step", "0"]) == 64
    assert main(["solve", *files, "--k-start", "5", "--k-max", "2"]) == 64


def test_missing_file(data_dir, capsys):
    code = main(["oracle", "--domain", str(data_dir / "nope.pddl"),
                 "--problem", str(data_dir / "blocksworld_problem.pddl")])
    assert code == 65
    assert "cannot read domain file" in capsys.readouterr().err


def test_parse_error_names_file(data_dir, tmp_path, capsys):
    prob = tmp_path / "p.pddl"
    prob.write_text("(define (problem p) (:domain blocksworld) (:objects b1)\n (:init (on b1)))")
    code = main(["oracle", "--domain", str(data_dir / "blocksworld_domain.pddl"),
                 "--problem", str(prob)])
    assert code == 65
    err = capsys.readouterr().err
    assert str(prob) in err and "expects 2" in err


def test_unsupported_feature_is_input_error(tmp_path, data_dir, capsys):
    dom = tmp_path / "d.pddl"
    dom.write_text("(define (domain blocksworld) (:predicates (p))\n"
                   "(:action a :parameters () :effect (when (p) (p))))")
    code = main(["oracle", "--domain", str(dom),
                 "--problem", str(data_dir / "blocksworld_problem.pddl")])
    assert code == 65
    assert "conditional effects" in capsys.readouterr().err


def test_module_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "qplan", "oracle", *files, "--k-max", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "k=2 exists=yes" in proc.stdout
