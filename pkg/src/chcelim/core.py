"""Typed terms, atoms, clauses, substitutions and unification.

Terms carry their own type, so a :class:`Var` is identified by its name and
the type is there for checking.  Variables are scoped by clause; anything
that combines two clauses renames one of them apart first.
"""

from __future__ import annotations

import itertools
import re
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, Optional, Sequence, Union

from .constraints import TRUE, Constraint, atoms_constraint
from .constraints.linear import LinearAtom


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class TypeExpr:
    kind: str  # "int" | "bool" | "named" | "tuple"
    name: str = ""
    items: tuple = ()

    def __post_init__(self):
        if self.kind == "tuple" and len(self.items) < 2:
            raise ValueError("tuple types need at least two components")

    @property
    def is_basic(self) -> bool:
        return self.kind in ("int", "bool")

    def __str__(self) -> str:
        if self.kind == "named":
            return self.name
        if self.kind == "tuple":
            return " * ".join(str(t) for t in self.items)
        return self.kind


INT = TypeExpr("int")
BOOL = TypeExpr("bool")


def named(name: str) -> TypeExpr:
    return TypeExpr("named", name)


def flatten_type(t: TypeExpr) -> list[TypeExpr]:
    if t.kind == "tuple":
        return [x for item in t.items for x in flatten_type(item)]
    return [t]


@dataclass(frozen=True)
class TypeDef:
    name: str
    constructors: tuple  # ((ctor name, (TypeExpr, ...)), ...)

    def __post_init__(self):
        flat = tuple((c, tuple(x for a in args for x in flatten_type(a))) for c, args in self.constructors)
        object.__setattr__(self, "constructors", flat)
        if not any(all(a != named(self.name) for a in args) for _, args in flat):
            warnings.warn(f"type {self.name} has no non-recursive constructor", stacklevel=2)

    @property
    def type(self) -> TypeExpr:
        return named(self.name)


# ---------------------------------------------------------------- terms


@dataclass(frozen=True)
class Var:
    name: str
    type: TypeExpr

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class IntLit:
    value: int

    @property
    def type(self) -> TypeExpr:
        return INT

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class BoolLit:
    value: bool

    @property
    def type(self) -> TypeExpr:
        return BOOL

    def __str__(self):
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Ctor:
    name: str
    args: tuple
    type: TypeExpr

    def __str__(self):
        return format_term(self)


Term = Union[Var, IntLit, BoolLit, Ctor]
Substitution = Dict[str, Term]


def format_term(t: Term) -> str:
    if isinstance(t, Ctor):
        if t.name == "nil" and not t.args:
            return "[]"
        if t.name == "cons" and len(t.args) == 2:
            items = []
            cur: Term = t
            while isinstance(cur, Ctor) and cur.name == "cons" and len(cur.args) == 2:
                items.append(format_term(cur.args[0]))
                cur = cur.args[1]
            if isinstance(cur, Ctor) and cur.name == "nil" and not cur.args:
                return "[" + ", ".join(items) + "]"
            return "[" + ", ".join(items) + " | " + format_term(cur) + "]"
        if not t.args:
            return t.name
        return f"{t.name}({', '.join(format_term(a) for a in t.args)})"
    return str(t)


def iter_vars(t: Term) -> Iterator[Var]:
    if isinstance(t, Var):
        yield t
    elif isinstance(t, Ctor):
        for a in t.args:
            yield from iter_vars(a)


def term_vars(t: Term) -> list[Var]:
    """Variables of t in first-occurrence order, without duplicates."""
    return list(dict.fromkeys(iter_vars(t)))


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, Ctor):
        for a in t.args:
            yield from subterms(a)


def is_strict_subterm(s: Term, t: Term) -> bool:
    if not isinstance(t, Ctor):
        return False
    return any(s == a or is_strict_subterm(s, a) for a in t.args)


def height(t: Term) -> int:
    """0 for variables, literals and nullary constructors; 1 + max child otherwise."""
    if isinstance(t, Ctor) and t.args:
        return 1 + max(height(a) for a in t.args)
    return 0


def apply(t: Term, s: Substitution) -> Term:
    if isinstance(t, Var):
        return s.get(t.name, t)
    if isinstance(t, Ctor) and t.args:
        return Ctor(t.name, tuple(apply(a, s) for a in t.args), t.type)
    return t


# ---------------------------------------------------------------- unification


class TypeMismatch(TypeError):
    """Raised when unify is asked to relate terms of different types."""


def _walk(t: Term, s: dict) -> Term:
    while isinstance(t, Var) and t.name in s:
        t = s[t.name]
    return t


def _occurs(name: str, t: Term, s: dict) -> bool:
    t = _walk(t, s)
    if isinstance(t, Var):
        return t.name == name
    if isinstance(t, Ctor):
        return any(_occurs(name, a, s) for a in t.args)
    return False


def _resolve(t: Term, s: dict) -> Term:
    t = _walk(t, s)
    if isinstance(t, Ctor) and t.args:
        return Ctor(t.name, tuple(_resolve(a, s) for a in t.args), t.type)
    return t


def _unify_into(t1: Term, t2: Term, s: dict) -> bool:
    stack = [(t1, t2)]
    while stack:
        a, b = stack.pop()
        if a.type != b.type:
            raise TypeMismatch(f"cannot unify {a} : {a.type} with {b} : {b.type}")
        a, b = _walk(a, s), _walk(b, s)
        if a == b:
            continue
        if isinstance(a, Var):
            if _occurs(a.name, b, s):
                return False
            s[a.name] = b
        elif isinstance(b, Var):
            if _occurs(b.name, a, s):
                return False
            s[b.name] = a
        elif isinstance(a, Ctor) and isinstance(b, Ctor):
            if a.name != b.name or len(a.args) != len(b.args):
                return False
            stack.extend(reversed(list(zip(a.args, b.args))))
        else:
            return False
    return True


def unify_all(pairs: Iterable[tuple[Term, Term]]) -> Optional[Substitution]:
    """Most general unifier of all pairs, idempotent, or None."""
    s: dict = {}
    for a, b in pairs:
        if not _unify_into(a, b, s):
            return None
    return {k: _resolve(v, s) for k, v in s.items()}


def unify(t1: Term, t2: Term) -> Optional[Substitution]:
    """Idempotent mgu of t1 and t2, or None on clash or occurs-check failure.

    When both sides are distinct variables the variable of t1 is bound.
    Raises :class:`TypeMismatch` if the two terms have different types.
    """
    return unify_all([(t1, t2)])


def match(pattern: Term, target: Term, s: Optional[dict] = None) -> Optional[dict]:
    """One-way matching: extend s so that apply(pattern, s) == target."""
    s = dict(s or {})
    stack = [(pattern, target)]
    while stack:
        p, t = stack.pop()
        if p.type != t.type:
            return None
        if isinstance(p, Var):
            bound = s.get(p.name)
            if bound is None:
                s[p.name] = t
            elif bound != t:
                return None
        elif isinstance(p, Ctor):
            if not isinstance(t, Ctor) or p.name != t.name or len(p.args) != len(t.args):
                return None
            stack.extend(zip(p.args, t.args))
        elif p != t:
            return None
    return s


# ---------------------------------------------------------------- atoms and clauses


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple

    @property
    def nbargs(self) -> tuple:
        return tuple(a for a in self.args if not a.type.is_basic)

    @property
    def nbvars(self) -> list[Var]:
        return list(dict.fromkeys(v for a in self.nbargs for v in iter_vars(a)))

    @property
    def variables(self) -> list[Var]:
        return list(dict.fromkeys(v for a in self.args for v in iter_vars(a)))

    @property
    def is_basic(self) -> bool:
        return all(a.type.is_basic for a in self.args)

    def apply(self, s: Substitution) -> "Atom":
        if not s:
            return self
        return Atom(self.pred, tuple(apply(a, s) for a in self.args))

    def __str__(self):
        return format_atom(self)


def format_atom(a: Atom) -> str:
    if not a.args:
        return a.pred
    return f"{a.pred}({', '.join(format_term(t) for t in a.args)})"


def atom_prec(a1: Atom, a2: Atom) -> bool:
    """a1 strictly below a2: some non-basic argument of a1 shares a variable
    with, and is a strict subterm of, some non-basic argument of a2."""
    return _atom_order(a1, a2, strict=True)


def atom_preceq(a1: Atom, a2: Atom) -> bool:
    return _atom_order(a1, a2, strict=False)


def _atom_order(a1: Atom, a2: Atom, strict: bool) -> bool:
    for t1 in a1.nbargs:
        v1 = set(iter_vars(t1))
        if not v1:
            continue
        for t2 in a2.nbargs:
            if v1.isdisjoint(iter_vars(t2)):
                continue
            if is_strict_subterm(t1, t2) or (not strict and t1 == t2):
                return True
    return False


@dataclass(frozen=True)
class Clause:
    """``head <- constraint, body``; a goal has ``head`` None."""

    head: Optional[Atom]
    constraint: Constraint = TRUE
    body: tuple = ()
    origin: str = field(default="input", compare=False)

    @property
    def is_goal(self) -> bool:
        return self.head is None

    @property
    def is_fact(self) -> bool:
        return not self.body

    def atoms(self) -> list[Atom]:
        return ([self.head] if self.head is not None else []) + list(self.body)

    def variables(self) -> list[Var]:
        """Typed variables of head and body, in first-occurrence order."""
        seen: dict = {}
        for a in self.atoms():
            for v in a.variables:
                seen.setdefault(v.name, v)
        return list(seen.values())

    def var_names(self) -> list[str]:
        names = dict.fromkeys(v.name for v in self.variables())
        for v in self.constraint.variables():
            names.setdefault(v, None)
        return list(names)

    def apply(self, s: Substitution) -> "Clause":
        if not s:
            return self
        head = self.head.apply(s) if self.head is not None else None
        body = tuple(a.apply(s) for a in self.body)
        return Clause(head, substitute_constraint(self.constraint, s), body, self.origin)

    @property
    def has_basic_types(self) -> bool:
        return all(a.is_basic for a in self.atoms())

    def __str__(self):
        return format_clause(self)


def substitute_constraint(c: Constraint, s: Substitution) -> Constraint:
    """Push a term substitution into a constraint (basic bindings only)."""
    mapping: dict = {}
    for name, t in s.items():
        if isinstance(t, Var):
            mapping[name] = t.name
        elif isinstance(t, IntLit):
            mapping[name] = t.value
        elif isinstance(t, BoolLit):
            mapping[name] = t.value
    used = set(c.variables())
    mapping = {k: v for k, v in mapping.items() if k in used}
    return c.substitute(mapping) if mapping else c


def format_clause(c: Clause) -> str:
    head = "false" if c.head is None else format_atom(c.head)
    parts = []
    if not c.constraint.is_true:
        parts.append(str(c.constraint))
    parts.extend(format_atom(a) for a in c.body)
    if not parts:
        return f"{head}."
    return f"{head} :- {', '.join(parts)}."


# ---------------------------------------------------------------- renaming


_FRESH_RE = re.compile(r"^(.*?)__\d+$")


def base_name(name: str) -> str:
    m = _FRESH_RE.match(name)
    return m.group(1) if m else name


class VarSupply:
    """Deterministic fresh variable names of the form ``Base__k``."""

    def __init__(self, start: int = 0):
        self.counter = start

    def fresh(self, base: str) -> str:
        self.counter += 1
        return f"{base_name(base)}__{self.counter}"


def rename_apart(c: Clause, supply: VarSupply) -> Clause:
    """A variant of c whose variables are all fresh."""
    s: dict = {}
    names: dict = {}
    for v in c.variables():
        new = supply.fresh(v.name)
        names[v.name] = new
        s[v.name] = Var(new, v.type)
    for v in c.constraint.variables():
        if v not in names:
            names[v] = supply.fresh(v)
    head = c.head.apply(s) if c.head is not None else None
    body = tuple(a.apply(s) for a in c.body)
    return Clause(head, c.constraint.substitute(names), body, c.origin)


def tidy(c: Clause) -> Clause:
    """Rename fresh ``Base__k`` variables back to short readable names.

    Deterministic: names are handed out in first-occurrence order, the bare
    base name first and ``Base1``, ``Base2``, ... on collision.
    """
    order = c.var_names()
    taken = {n for n in order if base_name(n) == n}
    mapping: dict = {}
    for n in order:
        if base_name(n) == n:
            continue
        b = base_name(n)
        cand, k = b, 0
        while cand in taken:
            k += 1
            cand = f"{b}{k}"
        taken.add(cand)
        mapping[n] = cand
    if not mapping:
        return c
    typed = {v.name: v.type for v in c.variables()}
    s = {n: Var(m, typed[n]) for n, m in mapping.items() if n in typed}
    head = c.head.apply(s) if c.head is not None else None
    body = tuple(a.apply(s) for a in c.body)
    return Clause(head, c.constraint.substitute(mapping), body, c.origin)


def lift_literals(c: Clause, supply: VarSupply) -> Clause:
    """Replace int/bool literals inside atoms by fresh variables plus equalities."""
    extra: list = []
    bools: list = []

    def lift(t: Term) -> Term:
        if isinstance(t, IntLit):
            v = supply.fresh("V")
            extra.append(LinearAtom.make({v: 1}, "=", t.value))
            return Var(v, INT)
        if isinstance(t, BoolLit):
            v = supply.fresh("B")
            bools.append((v, t.value))
            return Var(v, BOOL)
        if isinstance(t, Ctor) and t.args:
            return Ctor(t.name, tuple(lift(a) for a in t.args), t.type)
        return t

    head = Atom(c.head.pred, tuple(lift(a) for a in c.head.args)) if c.head is not None else None
    body = tuple(Atom(a.pred, tuple(lift(x) for x in a.args)) for a in c.body)
    if not extra and not bools:
        return c
    con = c.constraint.conj(atoms_constraint(extra, bools))
    return Clause(head, con, body, c.origin)


# ---------------------------------------------------------------- programs


@dataclass(frozen=True)
class FunctionalAnnotation:
    """Declares that ``pred``'s outputs are determined by its inputs (0-based)."""

    pred: str
    inputs: tuple
    outputs: tuple


@dataclass(frozen=True)
class Program:
    type_defs: tuple = ()
    clauses: tuple = ()
    annotations: tuple = ()  # FunctionalAnnotation, ...
    signatures: tuple = ()  # ((pred, (TypeExpr, ...)), ...)

    @property
    def signature_map(self) -> dict:
        return dict(self.signatures)

    @property
    def annotation_map(self) -> dict:
        return {a.pred: a for a in self.annotations}

    @property
    def ctor_map(self) -> dict:
        """constructor name -> (TypeExpr of the result, argument types)"""
        return {c: (td.type, args) for td in self.type_defs for c, args in td.constructors}

    @property
    def definite(self) -> list[Clause]:
        return [c for c in self.clauses if c.head is not None]

    @property
    def goals(self) -> list[Clause]:
        return [c for c in self.clauses if c.head is None]

    def predicates(self) -> list[str]:
        seen: dict = {}
        for p, _ in self.signatures:
            seen[p] = None
        for c in self.clauses:
            for a in c.atoms():
                seen[a.pred] = None
        return list(seen)

    def clauses_for(self, pred: str) -> list[Clause]:
        return [c for c in self.clauses if c.head is not None and c.head.pred == pred]

    def with_clauses(self, clauses: Iterable[Clause], **changes) -> "Program":
        from dataclasses import replace

        return replace(self, clauses=tuple(clauses), **changes)

    def check(self) -> None:
        """Raise ValueError on ill-typed terms or bad declarations."""
        ctors = {}
        for td in self.type_defs:
            for c, args in td.constructors:
                if c in ctors:
                    raise ValueError(f"constructor {c} declared twice")
                ctors[c] = (td.type, args)
        types = {td.name for td in self.type_defs}
        sigs = self.signature_map

        def check_term(t: Term):
            if t.type.kind == "named" and t.type.name not in types:
                raise ValueError(f"unknown type {t.type.name}")
            if isinstance(t, Ctor):
                if t.name not in ctors:
                    raise ValueError(f"unknown constructor {t.name}")
                ty, args = ctors[t.name]
                if ty != t.type or len(args) != len(t.args):
                    raise ValueError(f"ill-typed constructor application {format_term(t)}")
                for a, at in zip(t.args, args):
                    if a.type != at:
                        raise ValueError(f"ill-typed argument {format_term(a)} of {t.name}")
                    check_term(a)

        for cl in self.clauses:
            vtypes: dict = {}
            for a in cl.atoms():
                sig = sigs.get(a.pred)
                if sig is not None and tuple(t.type for t in a.args) != tuple(sig):
                    raise ValueError(f"atom {a} does not match signature of {a.pred}")
                for t in a.args:
                    check_term(t)
                    for v in iter_vars(t):
                        if vtypes.setdefault(v.name, v.type) != v.type:
                            raise ValueError(f"variable {v.name} used at two types in {cl}")
        heads = {c.head.pred for c in self.clauses if c.head is not None}
        for ann in self.annotations:
            if ann.pred not in heads and self.clauses:
                raise ValueError(f"functional annotation for {ann.pred}, which has no clauses")


def clause_key(c: Clause) -> tuple:
    """Sort key that is stable across runs (no hashing)."""
    return (format_clause(c),)


def fresh_names(prefix: str, avoid: Iterable[str]) -> Iterator[str]:
    avoid = set(avoid)
    for k in itertools.count(1):
        name = f"{prefix}{k}"
        if name not in avoid:
            yield name

