import pytest

from chcelim.core import Program
from chcelim.io import (
    ExchangeError,
    ParseError,
    emit_solver_exchange,
    format_program,
    parse_chc,
    solve_external,
)
from chcelim.strategy import AlgorithmConfig, run
from helpers import FIXTURES, fixture_names, load, needs_solver


@pytest.mark.parametrize("name", fixture_names() + ["golden/tree_processing_e.chc"])
def test_print_parse_round_trip(name):
    p = load(name)
    text = format_program(p)
    again = parse_chc(text)
    assert again == p
    assert format_program(again) == text


def test_tree_processing_has_eight_clauses(tree_processing):
    assert len(tree_processing.clauses) == 8
    assert len(tree_processing.goals) == 1
    assert [td.name for td in tree_processing.type_defs] == ["tree"]
    assert set(tree_processing.annotation_map) == {"min", "minleaf", "leftdrop"}


def test_empty_file():
    assert parse_chc("") == Program()
    assert parse_chc("% only a comment\n") == Program()


def test_undeclared_predicate_is_named():
    with pytest.raises(ParseError, match="undeclared_p"):
        parse_chc("false :- undeclared_p(X).\n")


def test_syntax_error_reports_line():
    with pytest.raises(ParseError) as e:
        parse_chc(":- pred p(int).\n\np(X) :- X = .\n")
    assert "3" in str(e.value)


def test_list_sugar(take_drop):
    append = take_drop.clauses[1]
    assert str(append.head) == "append([X | Xs], Ys, [Z | Zs])"


# ---------------------------------------------------------------- solver exchange


def test_emit_empty_program():
    assert emit_solver_exchange(Program()) == "(set-logic HORN)\n(check-sat)\n"


def test_emit_transformed_tree_processing():
    golden = load("golden/tree_processing_e.chc")
    text = emit_solver_exchange(golden)
    decls = [ln for ln in text.splitlines() if ln.startswith("(declare-fun")]
    assert [d.split()[1] for d in decls] == ["|min|", "|new1|", "|new2|"]
    assert all("Int" in d and "tree" not in d for d in decls)
    assert text.count("(assert ") == len(golden.clauses) == 8


def test_emit_refuses_data_without_flag(tree_processing):
    with pytest.raises(ExchangeError):
        emit_solver_exchange(tree_processing)
    text = emit_solver_exchange(tree_processing, datatypes=True)
    assert "(declare-datatypes ((|tree| 0))" in text
    assert "(|node| (|node_1| Int) (|node_2| |tree|) (|node_3| |tree|))" in text


@pytest.mark.parametrize("name", fixture_names())
def test_emit_is_deterministic(name):
    a = emit_solver_exchange(load(name), datatypes=True)
    b = emit_solver_exchange(load(name), datatypes=True)
    assert a == b
    assert a.encode() == b.encode()


# ---------------------------------------------------------------- solver client


def test_missing_binary_is_a_solver_error():
    v = solve_external("(check-sat)\n", solver_cmd="/nonexistent/solver-binary")
    assert v.status == "solver-error"
    assert "cannot start" in v.detail


def test_verdict_parsing_with_stub_solvers():
    assert solve_external("", solver_cmd="sh -c 'echo; echo \"; note\"; echo sat'").status == "sat"
    assert solve_external("", solver_cmd="sh -c 'echo unsat'").status == "unsat"
    assert solve_external("", solver_cmd="sh -c 'echo garbage'").status == "solver-error"
    assert solve_external("", solver_cmd="sh -c 'true'").status == "solver-error"


def test_timeout_reports_wall_time():
    v = solve_external("", solver_cmd="sh -c 'sleep 5'", timeout=0.3)
    assert v.status == "timeout"
    assert v.wall_time >= 0.3


@needs_solver
def test_solver_proves_transformed_tree_processing(tree_processing):
    out = run(tree_processing, AlgorithmConfig("E")).program
    v = solve_external(emit_solver_exchange(out), timeout=10)
    assert v.status == "sat"


@needs_solver
def test_solver_does_not_refute_the_original(tree_processing):
    v = solve_external(emit_solver_exchange(tree_processing, datatypes=True), timeout=5)
    assert v.status in ("sat", "unknown", "timeout")


@needs_solver
def test_solver_parses_datatype_emission():
    for name in ("tree_processing.chc", "take_drop.chc"):
        v = solve_external(emit_solver_exchange(load(name), datatypes=True), timeout=2)
        assert v.status != "solver-error", v.detail


def test_fixture_directory_exists():
    assert (FIXTURES / "tree_processing.chc").exists()
