import pytest

from chcelim.analysis import has_sharing_cycle, rewrite_constrained_facts
from chcelim.constraints import simplify
from chcelim.core import iter_vars
from chcelim.frontend import (
    FunSyntaxError,
    FunTypeError,
    NonExhaustiveMatch,
    UnsupportedProperty,
    parse_fun,
    translate,
    translate_program,
    translate_property,
)
from chcelim.io import format_program, parse_chc
from helpers import FIXTURES, load
from normalize import same_clause_sets

SOURCES = sorted((FIXTURES / "src").glob("*.ml")) + [FIXTURES / "tree_processing.ml", FIXTURES / "take_drop.ml"]


def source(name):
    return (FIXTURES / name).read_text()


def test_tree_processing_parses():
    fp = parse_fun(source("tree_processing.ml"))
    assert [td.name for td in fp.type_defs] == ["tree"]
    assert [f.name for f in fp.functions] == ["min", "minleaf", "leftdrop"]
    assert [f.recursive for f in fp.functions] == [False, True, True]
    assert fp.property is not None
    assert fp.type_map()["tree"] is fp.type_defs[0]


def test_tree_processing_translates_to_the_fixture():
    out = translate(parse_fun(source("tree_processing.ml")))
    expected = load("tree_processing.chc")
    assert same_clause_sets(out.clauses, expected.clauses, fixed=expected.predicates()) == {}
    assert out.annotation_map == expected.annotation_map


def test_min_translates_to_two_clauses():
    out = translate_program(parse_fun("let min x y = if x < y then x else y;;"))
    expected = parse_chc(
        ":- pred min(int, int, int).\n"
        "min(X, Y, Z) :- X < Y, Z = X.\n"
        "min(X, Y, Z) :- X >= Y, Z = Y.\n"
    )
    assert same_clause_sets(out.clauses, expected.clauses, fixed={"min"}) == {}


def test_constant_function():
    out = translate_program(parse_fun("let f () = 0;;"))
    (c,) = out.clauses
    assert c.head.pred == "f" and not c.body
    assert str(c) == "f(R) :- R = 0."
    assert out.annotation_map["f"].outputs == (0,)


def test_empty_source():
    fp = parse_fun("")
    assert fp.type_defs == () and fp.functions == () and fp.property is None
    assert translate(fp).clauses == ()


def test_missing_case_is_reported():
    src = "type tree = Leaf | Node of int * tree * tree;;\nlet f t = match t with | Node(x, l, r) -> 1;;"
    with pytest.raises(NonExhaustiveMatch, match="Leaf"):
        parse_fun(src)


def test_type_and_syntax_errors_carry_positions():
    with pytest.raises(FunTypeError) as e:
        parse_fun("let f x = x + true;;")
    assert str(e.value).startswith("1:")
    with pytest.raises(FunSyntaxError):
        parse_fun("let f x = x +;;")


def test_trivial_property_goal_is_dropped_by_simplify():
    goals = translate_property(parse_fun("property forall n. n >= 0 => n >= 0;;"))
    assert len(goals) == 1
    assert simplify(goals) == []


def test_property_becomes_the_goal():
    out = translate(parse_fun(source("tree_processing.ml")))
    (goal,) = out.goals
    assert sorted(a.pred for a in goal.body) == ["leftdrop", "minleaf", "minleaf"]


def test_take_drop_property_shape():
    out = translate(parse_fun(source("take_drop.ml")))
    (goal,) = out.goals
    assert [a.pred for a in goal.body] == ["take", "drop", "append", "difflist"]
    assert has_sharing_cycle(goal) is not None


def test_conjunctive_conclusion_gives_one_goal_per_conjunct():
    src = "let inc x = x + 1;;\nproperty forall x. x >= 0 => inc x > x && inc x >= 1;;"
    assert len(translate_property(parse_fun(src))) == 2


def test_data_comparison_in_conclusion_is_unsupported():
    src = "let id xs = match xs with | [] -> [] | x :: ys -> x :: ys;;\nproperty forall xs. id xs = xs;;"
    with pytest.raises(UnsupportedProperty):
        translate(parse_fun(src))


@pytest.mark.parametrize("path", SOURCES, ids=lambda p: p.name)
def test_predicate_arity_is_function_arity_plus_one(path):
    fp = parse_fun(path.read_text())
    out = translate_program(fp)
    sigs = out.signature_map
    for f in fp.functions:
        assert len(sigs[f.name]) == f.arity + 1


@pytest.mark.parametrize("path", SOURCES, ids=lambda p: p.name)
def test_heads_are_linear_after_rewrite(path):
    out = rewrite_constrained_facts(translate(parse_fun(path.read_text())))
    for c in out.clauses:
        if c.head is None:
            continue
        names = [v.name for t in c.head.nbargs for v in iter_vars(t)]
        assert len(names) == len(set(names)), str(c)


@pytest.mark.parametrize("path", SOURCES, ids=lambda p: p.name)
def test_generated_programs_round_trip(path):
    out = translate(parse_fun(path.read_text()))
    assert parse_chc(format_program(out)) == out


@pytest.mark.parametrize("path", sorted((FIXTURES / "src").glob("*.ml")), ids=lambda p: p.name)
def test_checked_in_fixtures_are_current(path):
    generated = format_program(translate(parse_fun(path.read_text())))
    stored = (FIXTURES / (path.stem + ".chc")).read_text()
    body = "\n".join(ln for ln in stored.splitlines() if not ln.startswith("% "))
    assert body.strip() == generated.strip()
