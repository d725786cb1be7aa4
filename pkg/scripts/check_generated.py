"""Run both algorithms on generated in-class programs and compare solver verdicts before and after.

The input is submitted with datatype declarations, the output without. A timeout on either
side is reported but not counted as a disagreement.
"""

import argparse
import collections
import random
import sys
from pathlib import Path

from chcelim.analysis import check_class
from chcelim.io import emit_solver_exchange, solve_external
from chcelim.strategy import AlgorithmConfig, run

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from generators import random_class_program  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--timeout", type=float, default=10.0)
    args = ap.parse_args()
    tally = collections.Counter()
    disagreements = 0
    for seed in range(args.seeds):
        p = random_class_program(random.Random(seed))
        if check_class(p, pre_process=False).verdict != "in-class":
            print(f"seed {seed}: out of class")
            disagreements += 1
            continue
        before = solve_external(emit_solver_exchange(p, datatypes=True), timeout=args.timeout).status
        for variant in ("E", "EC"):
            out = run(p, AlgorithmConfig(variant)).program
            after = solve_external(emit_solver_exchange(out), timeout=args.timeout).status
            tally[(variant, before, after)] += 1
            decided = {before, after} <= {"sat", "unsat"}
            if decided and before != after:
                print(f"seed {seed} {variant}: input {before}, output {after}")
                disagreements += 1
    for (variant, before, after), n in sorted(tally.items()):
        print(f"{variant:2} input={before:12} output={after:12} {n}")
    sys.exit(1 if disagreements else 0)


if __name__ == "__main__":
    main()
