"""Survey the fixture corpus: class verdict, E/EC outcome, oracle agreement and solver verdict."""

import argparse
import shutil
import time
from pathlib import Path

from chcelim.analysis import check_class, rewrite_constrained_facts
from chcelim.io import emit_solver_exchange, parse_chc, solve_external
from chcelim.oracle import OracleOverflow, bounded_derives_false
from chcelim.strategy import AlgorithmConfig, DivergenceError, run

ROOT = Path(__file__).resolve().parents[1]


def oracle(p, depth, bound):
    try:
        return str(bounded_derives_false(p, depth=depth, bound=bound))
    except OracleOverflow:
        return "overflow"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("files", nargs="*", type=Path)
    ap.add_argument("--depth", type=int, default=4)
    ap.add_argument("--bound", type=int, default=4)
    ap.add_argument("--solver", action="store_true", help="also submit each output to z3")
    args = ap.parse_args()
    files = args.files or sorted((ROOT / "tests" / "fixtures").glob("*.chc"))
    use_solver = args.solver and shutil.which("z3")
    print(f"{'fixture':28} {'class':13} {'E':9} {'EC':9} {'oracle in/out':15} solver")
    for f in files:
        p = parse_chc(f.read_text(encoding="utf-8"))
        pre = rewrite_constrained_facts(p)
        cols, out = [], None
        for variant in ("E", "EC"):
            t0 = time.monotonic()
            try:
                res = run(pre, AlgorithmConfig(variant))
                cols.append(f"{time.monotonic() - t0:.2f}s")
                out = out or res.program
            except DivergenceError:
                cols.append("diverged")
        agree = "-"
        if out is not None:
            agree = f"{oracle(p, args.depth, args.bound)}/{oracle(out, args.depth, args.bound)}"
        verdict = solve_external(emit_solver_exchange(out), timeout=10).status if use_solver and out else "-"
        print(f"{f.name:28} {check_class(p).verdict:13} {cols[0]:9} {cols[1]:9} {agree:15} {verdict}")


if __name__ == "__main__":
    main()
