"""Random programs in the termination class, and small hypothesis strategies."""

from __future__ import annotations

import random

from hypothesis import strategies as st

from chcelim.constraints import LinearAtom, atoms_constraint
from chcelim.core import (
    INT,
    Atom,
    Clause,
    Ctor,
    FunctionalAnnotation,
    IntLit,
    Program,
    TypeDef,
    Var,
    named,
)

LIST = named("list")
TREE = named("tree")
TYPE_DEFS = (
    TypeDef("list", (("nil", ()), ("cons", (INT, LIST)))),
    TypeDef("tree", (("leaf", ()), ("node", (INT, TREE, TREE)))),
)
CTORS = {
    "list": [("nil", ()), ("cons", (INT, LIST))],
    "tree": [("leaf", ()), ("node", (INT, TREE, TREE))],
}


def _random_guard(rng: random.Random, names: list, n_atoms: int):
    atoms = []
    for _ in range(n_atoms):
        if not names:
            break
        vs = rng.sample(names, k=min(len(names), rng.randint(1, 2)))
        coeffs = {v: rng.choice((-1, 1)) for v in vs}
        atoms.append(LinearAtom.make(coeffs, rng.choice(("=", "<=", ">=")), rng.randint(-2, 2)))
    return atoms


def _definition(rng: random.Random, out: str, names: list):
    """``out = (+-)v1 + ... + k`` over a random subset of ``names``."""
    picked = rng.sample(names, k=rng.randint(0, min(2, len(names))))
    coeffs = {v: rng.choice((-1, 1)) for v in picked}
    coeffs[out] = coeffs.get(out, 0) - 1
    return LinearAtom.make(coeffs, "=", -rng.randint(-1, 2))


def random_class_program(rng: random.Random) -> Program:
    """At most 8 clauses, arity at most 3.

    Every predicate ``p(D, O)`` or ``p(D, O, P)`` has one data argument, an
    integer output ``O`` fixed by an equation in each clause and possibly an
    integer input ``P``.  Clauses recurse structurally: each body atom takes a
    distinct pattern variable of the head as data argument, so the clause
    admits a disjoint, quasi-descending slice decomposition.  Goal atoms have
    variable arguments and one data variable each, so goals have no sharing
    cycle.
    """
    preds = []
    for k in range(rng.randint(1, 3)):
        preds.append((f"p{k}", rng.choice(("list", "tree")), rng.randint(1, 2)))
    by_type = {}
    for p in preds:
        by_type.setdefault(p[1], []).append(p)

    clauses = []
    budget = 7  # leave room for the goal
    for name, ty, n_int in preds:
        for ctor, args in CTORS[ty]:
            if budget == 0:
                break
            if clauses and rng.random() < 0.15:
                continue
            budget -= 1
            pattern = [Var(f"S{i}" if a != INT else f"X{i}", a) for i, a in enumerate(args)]
            head_ints = [Var("O", INT)] + ([Var("P", INT)] if n_int == 2 else [])
            inputs = [v.name for v in head_ints[1:]] + [v.name for v in pattern if v.type == INT]
            body, outs, atoms = [], [], []
            for s in pattern:
                if s.type == INT or rng.random() < 0.2:
                    continue
                callee = rng.choice(by_type[s.type.name])
                o = Var(f"O{len(body)}", INT)
                extra = ()
                if callee[2] == 2:
                    q = Var(f"P{len(body)}", INT)
                    extra = (q,)
                    atoms.append(LinearAtom.make({q.name: 1} | ({"P": -1} if n_int == 2 else {}), "=", rng.randint(-1, 1)))
                body.append(Atom(callee[0], (s, o) + extra))
                outs.append(o.name)
            atoms.append(_definition(rng, "O", inputs + outs))
            atoms += _random_guard(rng, inputs + outs, rng.randint(0, 1))
            head = Atom(name, (Ctor(ctor, tuple(pattern), named(ty)),) + tuple(head_ints))
            clauses.append(Clause(head, atoms_constraint(atoms), tuple(body)))

    goal_atoms, data_vars, ints = [], [], []
    for j in range(rng.randint(1, 3)):
        name, ty, n_int = rng.choice(preds)
        same = [d for d in data_vars if d.type == named(ty)]
        d = rng.choice(same) if same and rng.random() < 0.6 else Var(f"D{j}", named(ty))
        if d not in data_vars:
            data_vars.append(d)
        args = [Var(f"G{j}", INT)] + ([Var(f"Q{j}", INT)] if n_int == 2 else [])
        ints += [v.name for v in args]
        goal_atoms.append(Atom(name, (d,) + tuple(args)))
    goal = atoms_constraint(_random_guard(rng, ints, rng.randint(1, 2)))
    clauses.append(Clause(None, goal, tuple(goal_atoms)))

    sigs = tuple((name, (named(ty),) + (INT,) * n) for name, ty, n in preds)
    tds = tuple(td for td in TYPE_DEFS if td.name in {ty for _, ty, _ in preds})
    defined = {c.head.pred for c in clauses if c.head is not None}
    anns = tuple(
        FunctionalAnnotation(name, (0,) + ((2,) if n == 2 else ()), (1,))
        for name, _, n in preds
        if name in defined
    )
    return Program(tds, tuple(clauses), anns, sigs)


# ---------------------------------------------------------------- strategies

var_names = st.sampled_from(["X", "Y", "Z", "W"])


@st.composite
def list_terms(draw, depth=3):
    """Terms of type list built from variables, nil and cons."""
    if depth == 0 or draw(st.booleans()):
        if draw(st.booleans()):
            return Var(draw(var_names) + "s", LIST)
        return Ctor("nil", (), LIST)
    head = draw(st.one_of(st.builds(lambda n: Var(n, INT), var_names), st.builds(IntLit, st.integers(-2, 2))))
    return Ctor("cons", (head, draw(list_terms(depth=depth - 1))), LIST)


@st.composite
def tree_terms(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        if draw(st.booleans()):
            return Var(draw(var_names) + "t", TREE)
        return Ctor("leaf", (), TREE)
    label = Var(draw(var_names), INT)
    return Ctor("node", (label, draw(tree_terms(depth=depth - 1)), draw(tree_terms(depth=depth - 1))), TREE)
