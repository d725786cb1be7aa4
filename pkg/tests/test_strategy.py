import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chcelim.analysis import check_class, rewrite_constrained_facts, sharing_blocks
from chcelim.constraints import DBM, YES, entails, equivalent
from chcelim.io import parse_chc
from chcelim.kernel import TransformState, rule_define
from chcelim.oracle import bounded_derives_false
from chcelim.strategy import (
    AlgorithmConfig,
    DivergenceError,
    _variant_renaming,
    basic_closed_predicates,
    block_head_vars,
    gen,
    run,
    run_algorithm_e,
    run_algorithm_ec,
    select_atom,
)
from generators import random_class_program
from helpers import con, fixture_names, load
from normalize import same_clause_sets

# programs on which both variants are expected to succeed
TRANSFORMABLE = [n for n in fixture_names() if n not in ("take_drop.chc", "tree_flatten.chc")]


def new_preds(program, result):
    return {c.head.pred for c in result.clauses if c.head is not None} - set(program.predicates())


# ---------------------------------------------------------------- golden runs


def test_e_on_tree_processing_matches_golden(tree_processing):
    result = run(tree_processing, AlgorithmConfig("E"))
    golden = load("golden/tree_processing_e.chc")
    assert same_clause_sets(result.clauses, golden.clauses, fixed={"min"}) is not None
    assert result.summary["definitions"] == 2


def test_e_diverges_on_take_drop(take_drop):
    # the acceptance suite uses the full budget of 500 definitions
    with pytest.raises(DivergenceError) as e:
        run(take_drop, AlgorithmConfig("E", max_definitions=60))
    assert "budget" in str(e.value)
    assert e.value.diagnostic.startswith("61 definitions")
    assert e.value.state.defs


def test_ec_on_take_drop_has_no_constrained_facts(take_drop):
    result = run(take_drop, AlgorithmConfig("EC"))
    fresh = new_preds(take_drop, result)
    assert fresh
    for c in result.clauses:
        if c.head is not None and c.head.pred in fresh:
            assert c.body, f"constrained fact {c}"
    assert all(c.has_basic_types for c in result.clauses)


def test_ec_keeps_the_goal_guard(take_drop):
    result = run(take_drop, AlgorithmConfig("EC"))
    first = result.state.defs[0]
    names = [v.name for v in first.head_vars]
    assert entails(first.guard, con(f"{names[0]} = {names[1]}")) == YES


def test_helpers_pick_the_variant(tree_processing):
    assert run_algorithm_e(tree_processing).summary["variant"] == "E"
    assert run_algorithm_ec(tree_processing).summary["variant"] == "EC"


def test_config_validation():
    with pytest.raises(ValueError):
        AlgorithmConfig("F")
    with pytest.raises(ValueError):
        AlgorithmConfig("E", max_definitions=0)


@pytest.mark.parametrize("name", TRANSFORMABLE)
@pytest.mark.parametrize("variant", ["E", "EC"])
def test_outputs_have_basic_types(name, variant):
    p = load(name)
    result = run(p, AlgorithmConfig(variant))
    assert result.clauses
    assert all(c.has_basic_types for c in result.clauses)
    assert not result.program.type_defs


@pytest.mark.parametrize("variant", ["E", "EC"])
def test_pre_processed_tree_processing(tree_processing, variant):
    out = run(rewrite_constrained_facts(tree_processing), AlgorithmConfig(variant))
    assert all(c.has_basic_types for c in out.clauses)
    assert bounded_derives_false(out.program) is False


@pytest.mark.parametrize("name", ["tree_processing.chc", "take_drop.chc", "count_positive.chc"])
def test_runs_are_deterministic(name):
    p = load(name)
    a = run(p, AlgorithmConfig("EC"))
    b = run(p, AlgorithmConfig("EC"))
    assert a.trace_lines() == b.trace_lines()
    assert [str(c) for c in a.clauses] == [str(c) for c in b.clauses]


def test_budgets_raise_divergence():
    p = load("tree_flatten.chc")
    for variant in ("E", "EC"):
        with pytest.raises(DivergenceError):
            run(p, AlgorithmConfig(variant))


def test_basic_closed_predicates(tree_processing, take_drop):
    assert basic_closed_predicates(tree_processing) == {"min"}
    assert basic_closed_predicates(take_drop) == set()


# ---------------------------------------------------------------- selection


def test_select_atom_prefers_marked_strictly_maximal(tree_processing):
    c = parse_chc(
        ":- type tree = leaf | node(int, tree, tree).\n:- pred minleaf(tree, int).\n"
        ":- pred leftdrop(int, tree, tree).\n"
        "false :- leftdrop(N1, L, U), minleaf(U, M), minleaf(node(X, L, R), K).\n"
    ).clauses[0]
    assert select_atom(c.body, [True, True, True]) == 2
    assert select_atom(c.body, [True, True, False]) is None
    # nothing strictly maximal and everything marked: leftmost
    flat = tree_processing.clauses[-1]
    assert select_atom(flat.body, [True, True, True]) == 0
    assert select_atom(flat.body, [False, True, True]) is None


# ---------------------------------------------------------------- generalization


def _block(clause):
    (b,) = [b for b in sharing_blocks(clause.body) if not b.is_basic]
    return b


def test_gen_without_match_keeps_difference_bounds(take_drop):
    goal = take_drop.clauses[-1]
    guard, head, matched, dbm = gen(goal.constraint, _block(goal), [])
    assert matched is None and dbm is not None
    assert equivalent(guard, con("M = N"))
    assert [v.name for v in head] == ["M", "N"]


def test_gen_reuses_a_definition_whose_guard_is_implied(take_drop):
    goal = take_drop.clauses[-1]
    state = TransformState(take_drop)
    block = _block(goal)
    d = rule_define(state, con("M = N"), block.atoms, block_head_vars(block.atoms))
    d.dbm = DBM.from_constraint(d.guard, ["M", "N"])
    renamed = goal.constraint.conj(con("M >= 3"))
    guard, _, matched, dbm = gen(renamed, block, state.defs)
    assert matched is d and dbm is None
    assert equivalent(guard, con("M = N"))


def test_gen_widens_an_unstable_bound():
    p = parse_chc(
        ":- type list = nil | cons(int, list).\n:- pred len(list, int).\n"
        "len([], N) :- N = 0.\nlen([X | Xs], N) :- N = M + 1, len(Xs, M).\n"
        "false :- N = 0, len(Xs, N).\n"
    )
    goal = p.clauses[-1]
    state = TransformState(p)
    block = _block(goal)
    d = rule_define(state, con("N = 0"), block.atoms, block_head_vars(block.atoms))
    d.dbm = DBM.from_constraint(con("N = 0"), ["N"])
    guard, _, matched, dbm = gen(con("N = 1"), block, state.defs)
    assert matched is d and dbm is not None
    assert equivalent(guard, con("N >= 0"))
    assert entails(con("N = 1"), guard) == YES and entails(con("N = 0"), guard) == YES


@pytest.mark.parametrize("name", TRANSFORMABLE + ["take_drop.chc"])
def test_ec_guard_family_is_finite(name):
    p = load(name)
    result = run(p, AlgorithmConfig("EC"))
    defs = result.state.defs
    families = []
    for d in defs:
        for fam in families:
            if _variant_renaming(fam[0].body, d.body) is not None:
                fam.append(d)
                break
        else:
            families.append([d])
    for fam in families:
        n = len(fam[0].head_vars) + 1
        # each re-definition drops at least one finite bound
        assert len(fam) <= 1 + n * (n - 1)


# ---------------------------------------------------------------- termination class


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_random_class_programs_terminate(seed):
    p = random_class_program(random.Random(seed))
    assert len(p.clauses) <= 8
    assert max(len(sig) for _, sig in p.signatures) <= 4
    assert check_class(p, pre_process=False).verdict == "in-class"
    result = run(p, AlgorithmConfig("E"))
    assert all(c.has_basic_types for c in result.clauses)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_random_class_programs_keep_refutations(seed):
    # a bounded refutation of the input survives; the converse may need
    # terms beyond the oracle's caps
    p = random_class_program(random.Random(seed))
    out = run(p, AlgorithmConfig("E")).program
    if bounded_derives_false(p, depth=3, bound=2):
        assert bounded_derives_false(out, depth=3, bound=2)
