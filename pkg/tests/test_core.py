import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chcelim.core import (
    INT,
    Atom,
    Ctor,
    IntLit,
    TypeDef,
    TypeExpr,
    TypeMismatch,
    Var,
    apply,
    atom_prec,
    atom_preceq,
    height,
    iter_vars,
    named,
    unify,
)
from generators import LIST, TREE, list_terms, tree_terms

NIL = Ctor("nil", (), LIST)
LEAF = Ctor("leaf", (), TREE)


def cons(h, t):
    return Ctor("cons", (h, t), LIST)


def node(x, l, r):
    return Ctor("node", (x, l, r), TREE)


def V(name, t=INT):
    return Var(name, t)


# ---------------------------------------------------------------- unify


def test_unify_decomposes_structurally():
    s = unify(node(V("X"), V("L", TREE), V("R", TREE)), node(IntLit(0), LEAF, LEAF))
    assert s == {"X": IntLit(0), "L": LEAF, "R": LEAF}


def test_unify_constructor_clash():
    assert unify(LEAF, node(V("X"), V("L", TREE), V("R", TREE))) is None


def test_unify_identical_variables_is_empty():
    assert unify(V("X"), V("X")) == {}


def test_unify_occurs_check():
    xs = V("Xs", LIST)
    assert unify(xs, cons(V("X"), xs)) is None


def test_unify_type_mismatch_is_an_error():
    with pytest.raises(TypeMismatch):
        unify(V("X"), LEAF)


def test_unify_result_is_idempotent():
    xs, ys = V("Xs", LIST), V("Ys", LIST)
    s = unify(cons(V("X"), xs), cons(IntLit(1), ys))
    t = cons(V("X"), xs)
    assert apply(apply(t, s), s) == apply(t, s)


@settings(max_examples=200, deadline=None)
@given(list_terms(), list_terms())
def test_unify_symmetric_and_most_general(t1, t2):
    s12 = unify(t1, t2)
    s21 = unify(t2, t1)
    assert (s12 is None) == (s21 is None)
    if s12 is None:
        return
    u1, u2 = apply(t1, s12), apply(t2, s21)
    assert apply(t1, s12) == apply(t2, s12)
    assert apply(t1, s21) == apply(t2, s21)
    # the two unifiers agree up to a variable renaming
    assert unify(u1, u2) is not None
    assert all(isinstance(v, Var) for v in unify(u1, u2).values())


@settings(max_examples=200, deadline=None)
@given(tree_terms(), tree_terms())
def test_substitution_preserves_types(t1, t2):
    s = unify(t1, t2)
    if s is None:
        return
    for name, term in s.items():
        for v in list(iter_vars(t1)) + list(iter_vars(t2)):
            if v.name == name:
                assert v.type == term.type
    assert apply(t1, s).type == t1.type


# ---------------------------------------------------------------- atom order


def test_atom_prec_examples():
    x, y = V("X"), V("Y")
    ys = V("Ys", LIST)
    a = Atom("p", (cons(x, NIL), ys))
    b = Atom("q", (cons(y, ys), NIL))
    assert atom_prec(a, b)
    assert not atom_prec(b, a)
    assert not atom_prec(a, a)
    assert atom_preceq(a, a)


def test_atom_prec_ignores_basic_arguments():
    a = Atom("p", (V("N"), V("T", TREE)))
    b = Atom("q", (V("N"), node(V("X"), V("T", TREE), LEAF)))
    assert atom_prec(a, b)
    assert not atom_prec(Atom("r", (V("N"),)), b)


linear_atoms = st.builds(
    lambda p, args: Atom(p, tuple(args)),
    st.sampled_from(["p", "q"]),
    st.lists(st.one_of(list_terms(depth=2), tree_terms(depth=2)), min_size=1, max_size=2),
)


@settings(max_examples=200, deadline=None)
@given(linear_atoms, linear_atoms)
def test_atom_prec_irreflexive_and_asymmetric(a, b):
    def linear(atom):
        vs = [v.name for t in atom.args for v in iter_vars(t)]
        return len(vs) == len(set(vs))

    if linear(a):
        assert not atom_prec(a, a)
    if linear(a) and linear(b):
        assert not (atom_prec(a, b) and atom_prec(b, a))


# ---------------------------------------------------------------- height and types


def test_height():
    assert height(LEAF) == 0
    assert height(node(V("X"), LEAF, LEAF)) == 1
    assert height(node(V("X"), node(V("Y"), LEAF, LEAF), LEAF)) == 2
    assert height(V("T", TREE)) == 0


def test_tuple_types_need_two_components():
    with pytest.raises(ValueError):
        TypeExpr("tuple", items=(INT,))


def test_typedef_without_base_case_warns():
    with pytest.warns(UserWarning):
        TypeDef("stream", (("scons", (INT, named("stream"))),))
