import itertools

from hypothesis import given, settings
from hypothesis import strategies as st

from chcelim.constraints import (
    DBM,
    INF,
    NO,
    SAT,
    TRUE,
    UNSAT,
    YES,
    LinearAtom,
    atoms_constraint,
    eliminate_exact,
    entails,
    equivalent,
    find_model,
    is_satisfiable,
    project,
    simplify,
)
from chcelim.core import Clause
from chcelim.oracle import bounded_derives_false
from helpers import con, fixture_names, load


def holds(c, model):
    return all(a.evaluate(model) for a in c.linear)


def box_models(c, names, lo=-10, hi=10):
    for vals in itertools.product(range(lo, hi + 1), repeat=len(names)):
        m = dict(zip(names, vals))
        if holds(c, m):
            yield m


# ---------------------------------------------------------------- examples


def test_satisfiability_examples():
    assert is_satisfiable(con("N >= 1, N =< 0")) == UNSAT
    assert is_satisfiable(con("M = N")) == SAT
    assert is_satisfiable(TRUE) == SAT


def test_integer_reasoning_not_rational():
    # 2X = 1 has a rational solution only
    assert is_satisfiable(con("2*X = 1")) == UNSAT
    assert is_satisfiable(con("X + Y = 1, X - Y = 0")) == UNSAT


def test_entailment_examples():
    assert entails(con("M = N"), con("M =< N")) == YES
    assert entails(con("M =< N"), con("M = N")) == NO
    assert entails(con("X = 0, Y = X + 1"), con("Y >= 1")) == YES


def test_entailment_example_by_enumeration():
    c, d = con("X = 0, Y = X + 1"), con("Y >= 1")
    assert all(holds(d, m) for m in box_models(c, ["X", "Y"], -3, 3))


def test_projection_examples():
    assert equivalent(project(con("M = N, K = M + 1"), ["M", "N"]), con("M = N"))
    assert equivalent(project(con("X =< Y, Y =< 3"), ["X"]), con("X =< 3"))


def test_projection_example_by_enumeration():
    c = con("X =< Y, Y =< 3")
    xs = {m["X"] for m in box_models(c, ["X", "Y"], -5, 5)}
    assert xs == {x for x in range(-5, 6) if x <= 3}


def test_eliminate_exact_removes_unit_equalities():
    out = eliminate_exact(con("K = M + 1, M = N"), {"K", "N"})
    assert set(out.variables()) <= {"K", "N"}
    assert equivalent(out, con("K = N + 1"))


def test_duplicates_collapse_on_construction():
    assert con("N >= 1, N >= 1") == con("N >= 1")
    assert con("X =< 3, X =< 5") == con("X =< 3")


def test_find_model_satisfies():
    c = con("X + Y = 7, X - Y >= 3, Y >= 0")
    m = find_model(c)
    assert m is not None and holds(c, m)


def test_simplify_drops_unsat_and_keeps_the_rest(tree_processing):
    goal = tree_processing.clauses[-1]
    dead = Clause(goal.head, con("N >= 1, N =< 0"), goal.body)
    plain = Clause(goal.head, TRUE, goal.body)
    assert simplify([dead, plain, goal]) == [plain, goal]


def test_simplify_preserves_oracle_verdicts():
    for name in ("tree_processing.chc", "tree_processing_bad.chc", "append_length_bad.chc"):
        p = load(name)
        extra = Clause(p.clauses[-1].head, con("X >= 1, X =< 0"), p.clauses[-1].body)
        noisy = p.with_clauses(list(p.clauses) + [extra])
        cleaned = noisy.with_clauses(simplify(noisy.clauses))
        assert len(cleaned.clauses) == len(p.clauses)
        assert bounded_derives_false(cleaned) == bounded_derives_false(p)


# ---------------------------------------------------------------- properties

NAMES = ["A", "B", "C", "D"]


@st.composite
def difference_conjunctions(draw, max_vars=4):
    names = NAMES[: draw(st.integers(1, max_vars))]
    atoms = []
    for _ in range(draw(st.integers(1, 4))):
        x = draw(st.sampled_from(names))
        y = draw(st.sampled_from([None] + names))
        coeffs = {x: 1}
        if y is not None and y != x:
            coeffs[y] = -1
        rel = draw(st.sampled_from(["<=", "=", "!=", ">="]))
        atoms.append(LinearAtom.make(coeffs, rel, draw(st.integers(-4, 4))))
    return atoms_constraint(atoms), names


@st.composite
def linear_conjunctions(draw, max_vars=3):
    names = NAMES[:max_vars]
    atoms = []
    for _ in range(draw(st.integers(1, 4))):
        coeffs = {v: draw(st.integers(-2, 2)) for v in names}
        rel = draw(st.sampled_from(["<=", "=", ">="]))
        atoms.append(LinearAtom.make(coeffs, rel, draw(st.integers(-4, 4))))
    return atoms_constraint(atoms), names


@settings(max_examples=80, deadline=None)
@given(difference_conjunctions())
def test_satisfiability_agrees_with_enumeration(cn):
    c, names = cn
    verdict = is_satisfiable(c)
    in_box = next(box_models(c, names), None)
    if in_box is not None:
        assert verdict == SAT
    if verdict == SAT:
        m = find_model(c)
        assert m is not None and holds(c, {v: m.get(v, 0) for v in names})
    if verdict == UNSAT:
        assert in_box is None


@settings(max_examples=80, deadline=None)
@given(linear_conjunctions())
def test_general_satisfiability_agrees_with_enumeration(cn):
    c, names = cn
    verdict = is_satisfiable(c)
    if next(box_models(c, names), None) is not None:
        assert verdict == SAT
    elif verdict == SAT:
        assert holds(c, find_model(c))


@settings(max_examples=80, deadline=None)
@given(linear_conjunctions(), st.integers(1, 2))
def test_project_never_strengthens(cn, k):
    c, names = cn
    keep = names[:k]
    p = project(c, keep)
    assert set(p.variables()) <= set(keep)
    assert entails(c, p) == YES


@settings(max_examples=60, deadline=None)
@given(difference_conjunctions(max_vars=3))
def test_project_is_exact_on_difference_constraints(cn):
    c, names = cn
    keep = names[:1]
    p = project(c, keep)
    shadow = {tuple(m[v] for v in keep) for m in box_models(c, names, -6, 6)}
    for vals in shadow:
        assert holds(p, dict(zip(keep, vals)))


@settings(max_examples=60, deadline=None)
@given(difference_conjunctions(max_vars=3), difference_conjunctions(max_vars=3))
def test_entails_agrees_with_enumeration(cn1, cn2):
    (c, n1), (d, n2) = cn1, cn2
    names = sorted(set(n1) | set(n2))
    verdict = entails(c, d)
    counter = next((m for m in box_models(c, names, -6, 6) if not holds(d, m)), None)
    if counter is not None:
        assert verdict == NO


# ---------------------------------------------------------------- DBM


def dbm(text, names):
    return DBM.from_constraint(con(text), names).close()


def test_widen_drops_unstable_bounds():
    a = dbm("X >= 0, X =< 1", ["X"])
    b = dbm("X >= 0, X =< 2", ["X"])
    w = a.widen(a.join(b))
    assert equivalent(w.to_constraint(), con("X >= 0"))


def test_widen_keeps_stable_differences():
    a = dbm("M = N", ["M", "N"])
    assert a.widen(a.join(a)) == a
    b = dbm("M = N, M >= 3", ["M", "N"])
    w = a.widen(a.join(b))
    assert equivalent(w.to_constraint(), con("M = N"))


def test_dbm_index_mismatch_is_rejected():
    import pytest

    with pytest.raises(ValueError):
        dbm("X >= 0", ["X"]).join(dbm("Y >= 0", ["Y"]))


def test_dbm_negative_cycle_is_empty():
    assert dbm("X - Y =< -1, Y - X =< -1", ["X", "Y"]).empty


@st.composite
def dbms(draw, names=("A", "B", "C")):
    c, _ = draw(difference_conjunctions(max_vars=3))
    return DBM.from_constraint(c, list(names)).close()


@settings(max_examples=100, deadline=None)
@given(dbms(), dbms())
def test_widen_is_an_upper_bound(a, b):
    w = a.widen(b)
    if not a.empty:
        assert a.leq(w)
    if not b.empty and not a.empty:
        for r_b, r_w in zip(b.matrix, w.matrix):
            assert all(x <= y for x, y in zip(r_b, r_w))


@settings(max_examples=60, deadline=None)
@given(dbms(), st.lists(dbms(), min_size=1, max_size=12))
def test_widening_chain_stabilizes(start, inputs):
    cur = start
    changes = 0
    for d in inputs:
        nxt = cur.widen(cur.join(d))
        if nxt != cur:
            changes += 1
        cur = nxt
    # an empty start may change once into a nonempty matrix
    bound = (start.size ** 2) + (1 if start.empty else 0)
    assert changes <= bound
    if not start.empty:
        assert changes <= start.finite_entries()


def test_to_constraint_of_top_is_true():
    assert DBM.top(["X", "Y"]).to_constraint() == TRUE
    assert DBM.top(["X"]).matrix[1][0] == INF
