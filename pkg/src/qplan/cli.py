"""Command-line front end.

Exit codes: 0 success / plan found, 1 refuted or invalid plan, 2 unknown,
64 usage error, 65 input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path

from .circuit import tseitin
from .driver import BACKENDS, find_plan
from .pddl import PddlError, load_task, parse_domain
from .plans import bfs_oracle, format_plan, parse_plan, validate
from .qbf_encoder import emit_qcir, encode_qbf, qbf_variable_count, to_qdimacs
from .sat_encoder import DEFAULT_CLAUSE_CAP, SatSizeError, encode_sat
from .solvers import SOLVER_ENV
from .task import TaskError

EXIT_FOUND, EXIT_REFUTED, EXIT_UNKNOWN, EXIT_USAGE, EXIT_INPUT = 0, 1, 2, 64, 65


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _read(path: str, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise PddlError(f"cannot read {what} file {path}: {e.strerror}") from None


def _load(args):
    domain = _read(args.domain, "domain")
    problem = _read(args.problem, "problem")
    try:
        return load_task(domain, problem)
    except PddlError as e:
        # point at the offending file
        name = args.domain
        try:
            parse_domain(domain)
            name = args.problem
        except PddlError:
            pass
        raise PddlError(f"{name}: {e}") from None


def _out_base(args, k) -> str:
    if args.out:
        return args.out
    return f"{Path(args.problem).stem}_k{k}"


def _layout_extra(task):
    sig = task.signature
    return {"actions": list(sig.actions), "objects": list(sig.objects),
            "action_arity": list(sig.action_arity)}


def cmd_encode_sat(args) -> int:
    task = _load(args)
    try:
        cnf = encode_sat(task, args.k, args.sat_clause_cap)
    except SatSizeError as e:
        print(str(e), file=sys.stderr)
        return EXIT_INPUT
    base = _out_base(args, args.k)
    Path(base + ".cnf").write_text(cnf.to_dimacs())
    cnf.layout.extra = _layout_extra(task)
    Path(base + ".layout.json").write_text(cnf.layout.to_json() + "\n")
    print(f"file={base}.cnf")
    print(f"original_vars={cnf.num_original}")
    print(f"aux_vars={cnf.num_vars - cnf.num_original}")
    print(f"clauses={len(cnf.clauses)}")
    return EXIT_FOUND


def cmd_encode_qbf(args) -> int:
    task = _load(args)
    enc = encode_qbf(task, args.k)
    base = _out_base(args, args.k)
    qdimacs = to_qdimacs(enc)
    Path(base + ".qcir").write_text(emit_qcir(enc))
    Path(base + ".qdimacs").write_text(qdimacs)
    layout = enc.layout.variables()
    layout.extra = _layout_extra(task)
    Path(base + ".layout.json").write_text(layout.to_json() + "\n")
    counts = enc.counts()
    cnf = tseitin(enc.circuit, enc.root)
    print(f"file={base}.qcir")
    print(f"file={base}.qdimacs")
    for key in ("plan_vars", "universal_vars", "predicate_vars", "vars", "gates"):
        print(f"{key}={counts[key]}")
    print(f"aux_vars={cnf.num_vars - cnf.num_original}")
    print(f"clauses={len(cnf.clauses)}")
    return EXIT_FOUND


def _check_k_range(args):
    if args.k_step < 1:
        raise UsageError("--k-step must be at least 1")
    if args.k_start < 0 or args.k_start > args.k_max:
        raise UsageError("need 0 <= --k-start <= --k-max")


def cmd_solve(args) -> int:
    _check_k_range(args)
    task = _load(args)
    if args.backend == "qbf-external" and not (args.solver_cmd or os.environ.get(SOLVER_ENV)):
        raise UsageError(f"qbf-external needs --solver-cmd or {SOLVER_ENV}")
    try:
        out = find_plan(task, args.k_start, args.k_step, args.k_max, args.backend,
                        args.solver_cmd, args.timeout, args.sat_clause_cap)
    except SatSizeError as e:
        print(f"unknown: {e}", file=sys.stderr)
        return EXIT_UNKNOWN
    if out.refuted:
        print("refuted horizons: " + " ".join(map(str, out.refuted)))
    if out.unknown_at is not None:
        print(f"unknown at k={out.unknown_at}: {out.diagnostic}", file=sys.stderr)
        return EXIT_UNKNOWN
    if not out.found:
        if args.k_start == 0 and args.k_step == 1:
            print(f"no plan of length <= {args.k_max} (exact-k semantics)")
        else:
            print(f"no plan at horizons {out.refuted} (exact-k semantics)")
        return EXIT_REFUTED
    text = format_plan(task, out.plan)
    print(f"plan found at k={out.k}")
    if args.out:
        Path(args.out).write_text(text)
        print(f"file={args.out}")
    sys.stdout.write(text)
    return EXIT_FOUND


def cmd_validate(args) -> int:
    task = _load(args)
    try:
        plan = parse_plan(task, _read(args.plan, "plan"))
    except TaskError as e:
        raise PddlError(f"{args.plan}: {e}") from None
    res = validate(task, plan)
    if res.valid:
        print(f"valid plan of length {len(plan)}")
        return EXIT_FOUND
    print(f"invalid at step {res.step}: {res.reason}")
    return EXIT_REFUTED


def cmd_oracle(args) -> int:
    task = _load(args)
    res = bfs_oracle(task, args.k_max)
    for k, entry in sorted(res.horizons.items()):
        line = f"k={k} exists={'yes' if entry.exists else 'no'}"
        if entry.plan is not None:
            line += " plan=" + " ".join(format_plan(task, entry.plan).split("\n")).strip()
        print(line)
    if not res.complete:
        print("incomplete: state budget exhausted")
        return EXIT_UNKNOWN
    return EXIT_FOUND


STATS_FIELDS = ["k", "encoding", "status", "vars", "aux_vars", "clauses", "gates", "bytes",
                "universal_vars", "fluent_vars"]


def stats_rows(task, k_values, clause_cap=DEFAULT_CLAUSE_CAP):
    rows = []
    for k in k_values:
        enc = encode_qbf(task, k)
        counts = enc.counts()
        assert counts["vars"] == qbf_variable_count(task, k)
        cnf = tseitin(enc.circuit, enc.root)
        rows.append({"k": k, "encoding": "qbf", "status": "ok", "vars": counts["vars"],
                     "aux_vars": cnf.num_vars - cnf.num_original, "clauses": len(cnf.clauses),
                     "gates": counts["gates"], "bytes": len(to_qdimacs(enc).encode()),
                     "universal_vars": counts["universal_vars"], "fluent_vars": ""})
        try:
            scnf = encode_sat(task, k, clause_cap)
        except SatSizeError as e:
            rows.append({"k": k, "encoding": "sat", "status": "refused",
                         "clauses": e.projected, **{f: "" for f in
                                                    ("vars", "aux_vars", "gates", "bytes",
                                                     "universal_vars", "fluent_vars")}})
            continue
        lay = scnf.sat_layout
        rows.append({"k": k, "encoding": "sat", "status": "ok", "vars": scnf.num_original,
                     "aux_vars": scnf.num_vars - scnf.num_original,
                     "clauses": len(scnf.clauses),
                     "gates": len(lay.circuit.cone(scnf.root)) - len(lay.circuit.support(scnf.root)),
                     "bytes": len(scnf.to_dimacs().encode()), "universal_vars": 0,
                     "fluent_vars": len(lay.fluents)})
    return rows


def cmd_stats(args) -> int:
    _check_k_range(args)
    task = _load(args)
    rows = stats_rows(task, range(args.k_start, args.k_max + 1, args.k_step),
                      args.sat_clause_cap)
    for row in rows:
        print(" ".join(f"{f}={row[f]}" for f in STATS_FIELDS if row[f] != ""))
    buf = io.StringIO()
    w = csv.DictWriter(buf, STATS_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.out:
        Path(args.out).write_text(buf.getvalue())
        print(f"file={args.out}")
    return EXIT_FOUND


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qplan", description="SAT/QBF encodings of STRIPS planning tasks")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--domain", required=True)
        sp.add_argument("--problem", required=True)

    sp = sub.add_parser("encode-sat", help="write the grounded CNF encoding")
    common(sp)
    sp.add_argument("-k", type=int, required=True)
    sp.add_argument("--out")
    sp.add_argument("--sat-clause-cap", type=int, default=DEFAULT_CLAUSE_CAP)
    sp.set_defaults(func=cmd_encode_sat)

    sp = sub.add_parser("encode-qbf", help="write the ungrounded QCIR and QDIMACS encodings")
    common(sp)
    sp.add_argument("-k", type=int, required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_encode_qbf)

    sp = sub.add_parser("solve", help="sweep horizons until a plan is found")
    common(sp)
    sp.add_argument("--k-start", type=int, default=0)
    sp.add_argument("--k-step", type=int, default=1)
    sp.add_argument("--k-max", type=int, default=20)
    sp.add_argument("--backend", choices=BACKENDS, default="qbf-internal")
    sp.add_argument("--solver-cmd", help="external QDIMACS solver; {file} is replaced by the path")
    sp.add_argument("--timeout", type=float)
    sp.add_argument("--out", help="plan output file")
    sp.add_argument("--sat-clause-cap", type=int, default=DEFAULT_CLAUSE_CAP)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("validate", help="check a plan file against the task")
    common(sp)
    sp.add_argument("--plan", required=True)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("oracle", help="exact-length reachability by breadth-first search")
    common(sp)
    sp.add_argument("--k-max", type=int, default=5)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("stats", help="encoding sizes over a range of horizons")
    common(sp)
    sp.add_argument("--k-start", type=int, default=0)
    sp.add_argument("--k-step", type=int, default=1)
    sp.add_argument("--k-max", type=int, default=5)
    sp.add_argument("--out", help="CSV output file")
    sp.add_argument("--sat-clause-cap", type=int, default=DEFAULT_CLAUSE_CAP)
    sp.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "k", 0) is not None and getattr(args, "k", 0) < 0:
            raise UsageError("-k must be non-negative")
        return args.func(args)
    except UsageError as e:
        print(f"qplan: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (PddlError, TaskError) as e:
        print(f"qplan: input error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
