import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chcelim.analysis import (
    check_class,
    find_slice_decomposition,
    has_sharing_cycle,
    rewrite_constrained_facts,
    sharing_blocks,
    strictly_maximal,
)
from chcelim.core import INT, Atom, Clause, Ctor, Var
from chcelim.io import parse_chc
from chcelim.oracle import bounded_derives_false
from generators import LIST
from helpers import fixture_names, load
from normalize import clauses_equivalent

TREE_DECLS = """
:- type tree = leaf | node(int, tree, tree).
:- pred min(int, int, int).
:- pred minleaf(tree, int).
:- pred leftdrop(int, tree, tree).
:- pred eq_tree(tree, tree).
:- pred new1(int, int, int).
"""


def tree_clause(text):
    return parse_chc(TREE_DECLS + text).clauses[0]


# ---------------------------------------------------------------- sharing blocks


def test_goal_body_is_one_block(tree_processing):
    blocks = sharing_blocks(tree_processing.clauses[-1].body)
    assert [b.positions for b in blocks] == [(0, 1, 2)]


def test_independent_atoms_form_separate_blocks():
    c = tree_clause("new1(N, M, K) :- N =< 0, minleaf(L, M1), minleaf(R, M2), min(M1, M2, M3).")
    blocks = sharing_blocks(c.body)
    assert [b.positions for b in blocks] == [(0,), (1,), (2,)]
    assert blocks[2].is_basic and not blocks[0].is_basic


def test_empty_body_has_no_blocks():
    assert sharing_blocks(()) == []


POOL = [Var(n, LIST) for n in ("A", "B", "C", "D", "E")] + [Var("N", INT)]

random_atoms = st.builds(
    lambda p, vs: Atom(p, tuple(vs)),
    st.sampled_from(["p", "q", "r"]),
    st.lists(st.sampled_from(POOL), min_size=1, max_size=3),
)
random_bodies = st.lists(random_atoms, min_size=0, max_size=7)


def naive_blocks(body):
    n = len(body)
    reach = [[i == j or bool(set(body[i].nbvars) & set(body[j].nbvars)) for j in range(n)] for i in range(n)]
    for k, i, j in itertools.product(range(n), repeat=3):
        if reach[i][k] and reach[k][j]:
            reach[i][j] = True
    return sorted({tuple(j for j in range(n) if reach[i][j]) for i in range(n)})


@settings(max_examples=200, deadline=None)
@given(random_bodies)
def test_sharing_blocks_partition_matches_naive_closure(body):
    blocks = sharing_blocks(body)
    positions = [p for b in blocks for p in b.positions]
    assert sorted(positions) == list(range(len(body)))
    assert sorted(b.positions for b in blocks) == naive_blocks(body)


# ---------------------------------------------------------------- strictly maximal


def test_strictly_maximal_list_example():
    X, Y, Ys = Var("X", INT), Var("Y", INT), Var("Ys", LIST)
    nil = Ctor("nil", (), LIST)
    p = Atom("p", (Ctor("cons", (X, nil), LIST), Ys))
    q = Atom("q", (Ctor("cons", (Y, Ys), LIST), nil))
    assert strictly_maximal(q, [p, q])
    assert not strictly_maximal(p, [p, q])


def test_strictly_maximal_after_unfolding_leftdrop():
    c = tree_clause("new1(N, M, K) :- N >= 1, N1 = N - 1, leftdrop(N1, L, U), minleaf(U, M), minleaf(node(X, L, R), K).")
    assert strictly_maximal(c.body[2], c.body)
    assert not strictly_maximal(c.body[0], c.body)
    assert not strictly_maximal(c.body[1], c.body)


def test_single_atom_is_not_strictly_maximal():
    c = tree_clause("new1(N, M, K) :- minleaf(T, M).")
    assert not strictly_maximal(c.body[0], c.body)


# ---------------------------------------------------------------- slices


def test_slices_of_the_minleaf_clause(tree_processing):
    dec = find_slice_decomposition(tree_processing.clauses[3])
    assert dec.disjoint and dec.quasi_descending
    assert len(dec.slices) == 1
    assert dec.slices[0]["minleaf"] == 1 and dec.slices[0]["min"] == 0


def test_slices_of_the_recursive_leftdrop_clause(tree_processing):
    dec = find_slice_decomposition(tree_processing.clauses[6])
    assert dec.disjoint and dec.quasi_descending
    assert sorted(s["leftdrop"] for s in dec.slices) == [2, 3]


def test_repeated_head_variables_block_disjointness(tree_processing):
    dec = find_slice_decomposition(tree_processing.clauses[5])
    assert dec is not None and dec.quasi_descending and not dec.disjoint


def test_growing_recursion_has_no_decomposition():
    p = parse_chc(
        ":- type list = nil | cons(int, list).\n:- pred grow(list).\n"
        "grow(Xs) :- grow([X | Xs]).\nfalse :- grow(Xs).\n"
    )
    assert find_slice_decomposition(p.clauses[0]) is None


# ---------------------------------------------------------------- sharing cycles


def test_goal_without_cycle(tree_processing):
    assert has_sharing_cycle(tree_processing.clauses[-1]) is None


def test_take_drop_goal_cycle(take_drop):
    goal = take_drop.clauses[-1]
    cyc = has_sharing_cycle(goal)
    assert cyc is not None
    assert sorted(goal.body[i].pred for i in cyc.positions) == ["append", "drop", "take"]
    assert sorted(cyc.variables) == ["Xs", "Ys", "Zs"]
    assert "take" in cyc.describe(goal.body)


def test_two_atoms_sharing_two_variables_form_a_cycle():
    A, B = Var("A", LIST), Var("B", LIST)
    goal = Clause(None, body=(Atom("p", (A, B)), Atom("q", (A, B))))
    assert has_sharing_cycle(goal) is not None
    single = Clause(None, body=(Atom("p", (A, B)), Atom("q", (A, Var("C", LIST)))))
    assert has_sharing_cycle(single) is None


@settings(max_examples=150, deadline=None)
@given(random_bodies.filter(lambda b: len(b) >= 1), st.randoms(use_true_random=False))
def test_sharing_cycle_invariant_under_reordering_and_renaming(body, rnd):
    goal = Clause(None, body=tuple(body))
    perm = list(body)
    rnd.shuffle(perm)
    names = [v.name for v in POOL]
    shuffled = names[:]
    rnd.shuffle(shuffled)
    ren = dict(zip(names, [n + "_r" for n in shuffled]))
    moved = tuple(Atom(a.pred, tuple(Var(ren[v.name], v.type) for v in a.args)) for a in perm)
    assert (has_sharing_cycle(goal) is None) == (has_sharing_cycle(Clause(None, body=moved)) is None)


# ---------------------------------------------------------------- head linearization


def test_rewrite_linearizes_the_leftdrop_fact(tree_processing):
    out = rewrite_constrained_facts(tree_processing)
    expected = parse_chc(
        TREE_DECLS
        + """
        leftdrop(N, node(X, L, R), node(X1, L1, R1)) :- N =< 0, X = X1, eq_tree(L, L1), eq_tree(R, R1).
        eq_tree(leaf, leaf).
        eq_tree(node(X1, X2, X3), node(Y1, Y2, Y3)) :- X1 = Y1, eq_tree(X2, Y2), eq_tree(X3, Y3).
        """
    ).clauses
    assert clauses_equivalent(out.clauses[5], expected[0])
    eq = [c for c in out.clauses if c.head is not None and c.head.pred == "eq_tree"]
    assert len(eq) == 2
    assert all(any(clauses_equivalent(c, e) for c in eq) for e in expected[1:])
    assert out.annotation_map["eq_tree"].inputs == (0,)


def test_rewrite_leaves_linear_programs_alone():
    p = load("count_positive.chc")
    assert rewrite_constrained_facts(p) is p


def test_rewrite_list_fact():
    p = parse_chc(
        ":- type list = nil | cons(int, list).\n:- pred append(list, list, list).\n"
        "append([], Ys, Ys).\n"
        "append([X | Xs], Ys, [X | Zs]) :- append(Xs, Ys, Zs).\n"
        "false :- append(Xs, Ys, Zs), append(Xs, Ys, [X | Zs]).\n"
    )
    out = rewrite_constrained_facts(p)
    fact = out.clauses[0]
    assert [a.pred for a in fact.body] == ["eq_list"]
    assert len({v.name for v in fact.head.variables}) == 2
    heads = [c.head.pred for c in out.clauses if c.head is not None]
    assert heads.count("eq_list") == 2
    # append is functional, so Zs = [X | Zs] is impossible on both sides
    assert bounded_derives_false(p) is False
    assert bounded_derives_false(out) is False


@pytest.mark.parametrize("name", fixture_names())
def test_rewrite_preserves_oracle_verdict(name):
    p = load(name)
    out = rewrite_constrained_facts(p)
    if out is p:
        return
    assert bounded_derives_false(p) == bounded_derives_false(out)


# ---------------------------------------------------------------- class check


def test_class_check_tree_processing(tree_processing):
    before = check_class(tree_processing, pre_process=False)
    assert before.verdict == "out-of-class"
    assert [r.clause for r in before.failures()] == [6]
    assert check_class(tree_processing).verdict == "in-class"


def test_class_check_take_drop(take_drop):
    rep = check_class(take_drop)
    assert rep.verdict == "out-of-class"
    assert any("sharing cycle" in r.reason for r in rep.failures())


def test_goal_with_constructor_argument_is_out_of_class():
    rep = check_class(load("list_max.chc"))
    assert rep.verdict == "out-of-class"
    assert any("non-variable" in r.reason for r in rep.failures())


def test_class_report_renders(tree_processing):
    import json

    rep = check_class(tree_processing)
    doc = json.loads(rep.to_json())
    assert doc["verdict"] == "in-class" and len(doc["clauses"]) == len(rep.records)
    assert rep.to_text().startswith("verdict: in-class")
