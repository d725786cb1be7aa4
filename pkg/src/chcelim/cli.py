"""Command-line entry point.

Exit codes are a stable contract for scripts:

====  ==========================================
0     success / sat / in-class
1     property refuted (solver answered unsat)
2     transformation diverged (budget exhausted)
3     out of the termination class, or undecided
4     solver error, timeout or unknown
5     usage, parse or type error
====  ==========================================
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .analysis import check_class, rewrite_constrained_facts
from .constraints import simplify
from .core import Program, tidy
from .frontend import FrontendError, parse_fun, translate_program, translate_property
from .io import ParseError, emit_solver_exchange, format_program, parse_chc, solve_external
from .kernel import replay
from .strategy import AlgorithmConfig, DivergenceError, run

log = logging.getLogger("chcelim")

EXIT_OK, EXIT_UNSAT, EXIT_DIVERGED, EXIT_OUT_OF_CLASS, EXIT_SOLVER, EXIT_USAGE = range(6)


@dataclass
class StageReport:
    name: str
    status: str
    seconds: float
    counts: dict = field(default_factory=dict)


@dataclass
class RunReport:
    """Per-stage outcome of one pipeline run, in pipeline order."""

    input: str
    stages: list = field(default_factory=list)
    verdict: str = ""

    def stage(self, name: str, status: str, start: float, **counts) -> StageReport:
        st = StageReport(name, status, round(time.monotonic() - start, 6), counts)
        self.stages.append(st)
        return st

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


class _Usage(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise _Usage(f"cannot read {path}: {e.strerror}") from e


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _load_chc(path: str, report: RunReport) -> Program:
    t0 = time.monotonic()
    try:
        prog = parse_chc(_read(path))
    except ParseError as e:
        report.stage("parse", "error", t0, message=str(e))
        raise _Usage(f"{path}: {e}") from e
    report.stage("parse", "ok", t0, clauses=len(prog.clauses))
    return prog


# ---------------------------------------------------------------- commands


def cmd_translate(args) -> int:
    report = RunReport(args.source)
    t0 = time.monotonic()
    try:
        fp = parse_fun(_read(args.source))
        prog = translate_program(fp)
        goals = translate_property(fp)
    except FrontendError as e:
        report.stage("translate", "error", t0, message=str(e))
        report.verdict = "error"
        _emit_report(args, report)
        print(f"{args.source}:{e}", file=sys.stderr)
        return EXIT_USAGE
    if not goals:
        print(f"warning: {args.source} has no property; no goal", file=sys.stderr)
    prog = prog.with_clauses(prog.clauses + tuple(goals))
    report.stage("translate", "ok", t0, clauses=len(prog.clauses), goals=len(goals))
    report.verdict = "ok"
    _write(args.out, format_program(prog))
    _emit_report(args, report)
    return EXIT_OK


def _check_one(path: str, pre_process: bool, as_json: bool) -> tuple:
    report = RunReport(path)
    try:
        prog = _load_chc(path, report)
    except _Usage as e:
        return EXIT_USAGE, "", str(e), report
    t0 = time.monotonic()
    rep = check_class(prog, pre_process=pre_process)
    report.stage("check", rep.verdict, t0, clauses=len(rep.records))
    report.verdict = rep.verdict
    text = rep.to_json() + "\n" if as_json else rep.to_text() + "\n"
    return (EXIT_OK if rep.in_class else EXIT_OUT_OF_CLASS), text, "", report


def cmd_check(args) -> int:
    results = _fan_out(_check_one, [(p, args.pre_process == "on", args.json) for p in args.chc], args.jobs)
    return _collect(args, results)


def _transform_one(path: str, algorithm: str, max_iterations: int, max_definitions: int, max_body_atoms: int,
                   pre_process: bool, trace: Optional[str], out: Optional[str]) -> tuple:
    report = RunReport(path)
    try:
        prog = _load_chc(path, report)
    except _Usage as e:
        return EXIT_USAGE, "", str(e), report
    if pre_process:
        t0 = time.monotonic()
        prog = rewrite_constrained_facts(prog)
        report.stage("pre-process", "ok", t0, clauses=len(prog.clauses))
    cfg = AlgorithmConfig(variant=algorithm.upper(), max_iterations=max_iterations,
                          max_definitions=max_definitions, max_body_atoms=max_body_atoms)
    header = [f"# algorithm: {algorithm.lower()}", f"# pre-process: {'on' if pre_process else 'off'}"]
    t0 = time.monotonic()
    try:
        res = run(prog, cfg)
    except DivergenceError as e:
        report.stage("transform", "diverged", t0, iterations=e.iterations, definitions=len(e.state.defs))
        report.verdict = "diverged"
        if trace:
            lines = header + e.state.trace_lines(()) + [f"# diverged: {e}"]
            Path(trace).write_text("\n".join(lines) + "\n", encoding="utf-8")
        return EXIT_DIVERGED, "", f"{path}: diverged: {e}\n{e.diagnostic}", report
    report.stage("transform", "ok", t0, iterations=res.iterations, definitions=len(res.state.defs),
                 output_clauses=len(res.clauses))
    report.verdict = "ok"
    text = format_program(res.program)
    if trace:
        Path(trace).write_text("\n".join(header + res.trace_lines()) + "\n", encoding="utf-8")
    if out is not None and out != "-":
        Path(out).write_text(text, encoding="utf-8")
        text = ""
    return EXIT_OK, text, "", report


def _per_file(path: str, target: Optional[str], suffix: str, many: bool) -> Optional[str]:
    if target is None or not many:
        return target
    os.makedirs(target, exist_ok=True)
    return str(Path(target) / (Path(path).stem + suffix))


def cmd_transform(args) -> int:
    many = len(args.chc) > 1
    jobs = [
        (p, args.algorithm, args.max_iterations, args.max_definitions, args.max_body_atoms, args.pre_process == "on",
         _per_file(p, args.trace, ".trace", many), _per_file(p, args.out, ".out.chc", many))
        for p in args.chc
    ]
    return _collect(args, _fan_out(_transform_one, jobs, args.jobs))


def cmd_solve(args) -> int:
    report = RunReport(args.chc)
    try:
        prog = _load_chc(args.chc, report)
    except _Usage as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    if args.transform_first != "off":
        prog = rewrite_constrained_facts(prog)
        t0 = time.monotonic()
        try:
            res = run(prog, AlgorithmConfig(variant=args.transform_first.upper()))
        except DivergenceError as e:
            report.stage("transform", "diverged", t0, iterations=e.iterations)
            report.verdict = "diverged"
            _emit_report(args, report)
            print(f"diverged: {e}", file=sys.stderr)
            return EXIT_DIVERGED
        report.stage("transform", "ok", t0, iterations=res.iterations, definitions=len(res.state.defs),
                     output_clauses=len(res.clauses))
        prog = res.program
    t0 = time.monotonic()
    text = emit_solver_exchange(prog, datatypes=args.transform_first == "off")
    verdict = solve_external(text, args.solver_cmd, args.timeout)
    report.stage("solve", verdict.status, t0, wall_time=round(verdict.wall_time, 6))
    report.verdict = verdict.status
    print(f"{verdict.status} {verdict.wall_time:.3f}s")
    if verdict.detail:
        print(verdict.detail, file=sys.stderr)
    _emit_report(args, report)
    return {"sat": EXIT_OK, "unsat": EXIT_UNSAT}.get(verdict.status, EXIT_SOLVER)


def cmd_replay(args) -> int:
    report = RunReport(args.chc)
    try:
        prog = _load_chc(args.chc, report)
        lines = _read(args.trace).splitlines()
    except _Usage as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    if "# pre-process: on" in lines:
        prog = rewrite_constrained_facts(prog)
    t0 = time.monotonic()
    try:
        clauses = replay(prog, lines)
    except (ValueError, KeyError) as e:
        report.stage("replay", "error", t0, message=str(e))
        print(f"replay failed: {e}", file=sys.stderr)
        return EXIT_USAGE
    report.stage("replay", "ok", t0, output_clauses=len(clauses))
    report.verdict = "ok"
    _write(args.out, "".join(f"{tidy(c)}\n" for c in clauses))
    _emit_report(args, report)
    return EXIT_OK


def cmd_simplify(args) -> int:
    report = RunReport(args.chc)
    try:
        prog = _load_chc(args.chc, report)
    except _Usage as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    _write(args.out, format_program(prog.with_clauses(simplify(prog.clauses))))
    return EXIT_OK


# ---------------------------------------------------------------- plumbing


def _fan_out(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def _collect(args, results: list) -> int:
    code = EXIT_OK
    for status, out, err, report in results:
        if out:
            sys.stdout.write(out)
        if err:
            print(err, file=sys.stderr)
        code = max(code, status)
    if getattr(args, "report", None):
        reports = [r for _, _, _, r in results]
        doc = reports[0].to_json() if len(reports) == 1 else json.dumps([asdict(r) for r in reports], indent=2)
        Path(args.report).write_text(doc + "\n", encoding="utf-8")
    return code


def _emit_report(args, report: RunReport) -> None:
    if getattr(args, "report", None):
        Path(args.report).write_text(report.to_json() + "\n", encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chcelim", description="Eliminate data structures from constrained Horn clauses.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--report", help="write a JSON run report here")

    p = sub.add_parser("translate", help="translate a functional program and property into CHCs")
    p.add_argument("source")
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("check", help="check membership in the termination class")
    p.add_argument("chc", nargs="+")
    p.add_argument("--pre-process", choices=("on", "off"), default="on")
    p.add_argument("--json", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("transform", help="run Algorithm E or EC")
    p.add_argument("chc", nargs="+")
    p.add_argument("--algorithm", choices=("e", "ec", "E", "EC"), default="e")
    p.add_argument("--max-iterations", type=int, default=AlgorithmConfig.max_iterations)
    p.add_argument("--max-definitions", type=int, default=AlgorithmConfig.max_definitions)
    p.add_argument("--max-body-atoms", type=int, default=AlgorithmConfig.max_body_atoms)
    p.add_argument("--pre-process", choices=("on", "off"), default="on")
    p.add_argument("--trace", help="trace log path (a directory when several inputs are given)")
    p.add_argument("--out", help="output path (a directory when several inputs are given)")
    p.add_argument("--jobs", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("solve", help="submit clauses to an external Horn solver")
    p.add_argument("chc")
    p.add_argument("--solver-cmd", default=None, help="defaults to $CHCELIM_SOLVER or z3")
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--transform-first", choices=("e", "ec", "off"), default="ec")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("replay", help="re-execute a trace log and print the output clauses")
    p.add_argument("chc")
    p.add_argument("trace")
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("simplify", help="drop clauses with unsatisfiable constraints")
    p.add_argument("chc")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simplify)
    return ap


def main(argv: Optional[list] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except _Usage as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
