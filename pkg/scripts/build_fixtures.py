"""Regenerate tests/fixtures/*.chc from the functional sources in tests/fixtures/src."""

import argparse
from pathlib import Path

from chcelim.frontend import parse_fun, translate
from chcelim.io import format_program

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--src", default=ROOT / "tests" / "fixtures" / "src", type=Path)
    ap.add_argument("--dst", default=ROOT / "tests" / "fixtures", type=Path)
    args = ap.parse_args()
    for src in sorted(args.src.glob("*.ml")):
        text = src.read_text(encoding="utf-8")
        header = text.splitlines()[0]
        comment = header[2:-2].strip() if header.startswith("(*") else src.stem
        prog = translate(parse_fun(text))
        out = args.dst / (src.stem + ".chc")
        out.write_text(f"% {comment}\n% generated from src/{src.name} by scripts/build_fixtures.py\n"
                       + format_program(prog), encoding="utf-8")
        print(f"{out.relative_to(ROOT)}: {len(prog.clauses)} clauses")


if __name__ == "__main__":
    main()
