"""Shared helpers for the test modules."""

import shutil
from pathlib import Path

import pytest

from chcelim.io import parse_chc, read_chc

FIXTURES = Path(__file__).resolve().parent / "fixtures"


def load(name: str):
    return read_chc(str(FIXTURES / name))


def con(text: str):
    """A constraint written in clause-body syntax, e.g. ``"X =< Y, Y = 3"``."""
    if not text.strip():
        from chcelim.constraints import TRUE

        return TRUE
    return parse_chc(f"false :- {text}.").clauses[0].constraint


def fixture_names(pattern: str = "*.chc") -> list:
    return sorted(p.name for p in FIXTURES.glob(pattern))


def have_solver() -> bool:
    return shutil.which("z3") is not None


needs_solver = pytest.mark.skipif(not have_solver(), reason="no z3 binary on PATH")
