"""LIA and boolean constraints: representation, decision procedures, widening."""

from .dbm import DBM, INF
from .linear import (
    EQ,
    FALSE,
    LE,
    NE,
    TRUE,
    Constraint,
    LinearAtom,
    LinExpr,
    atoms_constraint,
    compare,
)
from .solver import (
    NO,
    SAT,
    UNKNOWN,
    UNSAT,
    YES,
    eliminate_exact,
    entails,
    equivalent,
    find_model,
    is_satisfiable,
    project,
)


def simplify(clauses):
    """Drop clauses with unsatisfiable constraints; keep the rest unchanged.

    Constraints are canonical on construction, so normalization (duplicate
    removal, constant folding, atom ordering) has already happened.  An
    ``unknown`` verdict keeps the clause.
    """
    out = []
    for cl in clauses:
        if is_satisfiable(cl.constraint) == UNSAT:
            continue
        out.append(cl)
    return out


def widen(d1: DBM, d2: DBM) -> DBM:
    return d1.widen(d2)


__all__ = [
    "DBM", "INF", "EQ", "LE", "NE", "TRUE", "FALSE", "Constraint", "LinearAtom",
    "LinExpr", "atoms_constraint", "compare", "SAT", "UNSAT", "UNKNOWN", "YES", "NO",
    "eliminate_exact", "entails", "equivalent", "find_model", "is_satisfiable", "project", "simplify",
    "widen",
]
