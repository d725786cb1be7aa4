"""Linear integer atoms and conjunctive LIA/Bool constraints.

A :class:`Constraint` is always kept in a canonical form: atoms over the same
linear form are merged into at most one lower bound, one upper bound, an
equality, and a set of disequalities; duplicates vanish and contradictions
collapse to :data:`FALSE`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd
from typing import Iterable, Mapping, Union

LE, EQ, NE = "<=", "=", "!="
_REL_ORDER = {EQ: 0, LE: 1, NE: 2}

Coeffs = tuple  # tuple[tuple[str, int], ...], sorted by variable name


def _floor_div(a: int, b: int) -> int:
    return a // b


@dataclass(frozen=True, order=True)
class LinearAtom:
    """``sum(c * x for x, c in coeffs) rel const`` with rel in {<=, =, !=}."""

    coeffs: Coeffs
    rel: str
    const: int

    @staticmethod
    def make(coeffs: Mapping[str, int], rel: str, const: int) -> Union["LinearAtom", bool]:
        """Build a normalized atom; trivial atoms come back as ``True``/``False``.

        ``rel`` may also be ``<``, ``>=`` or ``>``; these are rewritten over the
        integers (``x < c`` becomes ``x <= c - 1``).
        """
        items = {v: c for v, c in coeffs.items() if c != 0}
        if rel == "<":
            rel, const = LE, const - 1
        elif rel in (">=", ">"):
            items = {v: -c for v, c in items.items()}
            const = -const - (1 if rel == ">" else 0)
            rel = LE
        if rel not in _REL_ORDER:
            raise ValueError(f"unknown relation {rel!r}")
        if not items:
            if rel == LE:
                return 0 <= const
            if rel == EQ:
                return const == 0
            return const != 0
        g = 0
        for c in items.values():
            g = gcd(g, abs(c))
        if rel == LE:
            const = _floor_div(const, g)
        elif const % g:
            # no integer solution to the equality; disequality always holds
            return rel == NE
        else:
            const //= g
        items = {v: c // g for v, c in items.items()}
        if rel != LE and items[min(items)] < 0:
            items = {v: -c for v, c in items.items()}
            const = -const
        return LinearAtom(tuple(sorted(items.items())), rel, const)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.coeffs)

    def evaluate(self, model: Mapping[str, int]) -> bool:
        total = sum(c * model[v] for v, c in self.coeffs)
        if self.rel == LE:
            return total <= self.const
        if self.rel == EQ:
            return total == self.const
        return total != self.const

    def negate(self) -> list["LinearAtom | bool"]:
        """Atoms whose disjunction is the negation (a single atom here)."""
        d = dict(self.coeffs)
        if self.rel == LE:
            return [LinearAtom.make(d, ">", self.const)]
        if self.rel == EQ:
            return [LinearAtom.make(d, NE, self.const)]
        return [LinearAtom.make(d, EQ, self.const)]

    def __str__(self) -> str:
        return _format_atom(self)


FALSE_ATOM = LinearAtom((), LE, -1)


def _format_sum(terms: list[tuple[str, int]], const: int) -> str:
    parts: list[str] = []
    for v, c in terms:
        mag = abs(c)
        body = v if mag == 1 else f"{mag}*{v}"
        if not parts:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append(f"+ {body}" if c > 0 else f"- {body}")
    if const or not parts:
        if not parts:
            parts.append(str(const))
        else:
            parts.append(f"+ {const}" if const > 0 else f"- {-const}")
    return " ".join(parts)


def _format_atom(a: LinearAtom) -> str:
    if not a.coeffs:
        return "1 =< 0" if a.rel == LE else "0 = 1"
    pos = [(v, c) for v, c in a.coeffs if c > 0]
    neg = [(v, -c) for v, c in a.coeffs if c < 0]
    op = {LE: "=<", EQ: "=", NE: "!="}[a.rel]
    if not pos:
        # -F rel k  ->  F rel' -k
        flipped = {LE: ">=", EQ: "=", NE: "!="}[a.rel]
        return f"{_format_sum(neg, 0)} {flipped} {-a.const}"
    if not neg:
        return f"{_format_sum(pos, 0)} {op} {a.const}"
    return f"{_format_sum(pos, 0)} {op} {_format_sum(neg, a.const)}"


@dataclass
class LinExpr:
    """Mutable affine expression used by parsers and translators."""

    coeffs: dict = field(default_factory=dict)
    const: int = 0

    @staticmethod
    def var(name: str) -> "LinExpr":
        return LinExpr({name: 1}, 0)

    @staticmethod
    def constant(k: int) -> "LinExpr":
        return LinExpr({}, k)

    def __add__(self, other: "LinExpr") -> "LinExpr":
        out = dict(self.coeffs)
        for v, c in other.coeffs.items():
            out[v] = out.get(v, 0) + c
        return LinExpr(out, self.const + other.const)

    def __neg__(self) -> "LinExpr":
        return LinExpr({v: -c for v, c in self.coeffs.items()}, -self.const)

    def __sub__(self, other: "LinExpr") -> "LinExpr":
        return self + (-other)

    def scale(self, k: int) -> "LinExpr":
        return LinExpr({v: c * k for v, c in self.coeffs.items()}, self.const * k)

    @property
    def is_constant(self) -> bool:
        return not any(self.coeffs.values())


def compare(lhs: LinExpr, op: str, rhs: LinExpr) -> "Constraint":
    """The constraint ``lhs op rhs``; op is one of = != < <= > >=."""
    diff = lhs - rhs
    atom = LinearAtom.make(diff.coeffs, op, -diff.const)
    if atom is True:
        return TRUE
    if atom is False:
        return FALSE
    return Constraint((atom,))


@dataclass(frozen=True)
class Constraint:
    """Conjunction of linear atoms and boolean literals in canonical form."""

    linear: tuple = ()
    booleans: tuple = ()  # tuple[tuple[str, bool], ...]

    def __post_init__(self):
        lin, bools = _canonical(self.linear, self.booleans)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "booleans", bools)

    @property
    def is_false(self) -> bool:
        return self.linear == (FALSE_ATOM,)

    @property
    def is_true(self) -> bool:
        return not self.linear and not self.booleans

    def variables(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for a in self.linear:
            for v in a.variables:
                seen[v] = None
        for v, _ in self.booleans:
            seen[v] = None
        return tuple(seen)

    def conj(self, *others: "Constraint") -> "Constraint":
        lin = list(self.linear)
        bools = list(self.booleans)
        for o in others:
            lin.extend(o.linear)
            bools.extend(o.booleans)
        return Constraint(tuple(lin), tuple(bools))

    __and__ = conj

    def substitute(self, mapping: Mapping[str, Union[int, bool, str]]) -> "Constraint":
        """Apply a variable mapping: names rename, ints/bools instantiate."""
        if not mapping:
            return self
        lin = []
        for a in self.linear:
            coeffs: dict[str, int] = {}
            const = a.const
            for v, c in a.coeffs:
                tgt = mapping.get(v, v)
                if isinstance(tgt, str):
                    coeffs[tgt] = coeffs.get(tgt, 0) + c
                else:
                    const -= c * int(tgt)
            atom = LinearAtom.make(coeffs, a.rel, const)
            if atom is False:
                return FALSE
            if atom is not True:
                lin.append(atom)
        bools = []
        for v, pol in self.booleans:
            tgt = mapping.get(v, v)
            if isinstance(tgt, str):
                bools.append((tgt, pol))
            elif bool(tgt) != pol:
                return FALSE
        return Constraint(tuple(lin), tuple(bools))

    def __str__(self) -> str:
        if self.is_false:
            return "false"
        parts = [str(a) for a in self.linear]
        parts += [f"{v} = {'true' if p else 'false'}" for v, p in self.booleans]
        return ", ".join(parts) if parts else "true"


def _canonical(atoms: Iterable, bools: Iterable) -> tuple[tuple, tuple]:
    false = ((FALSE_ATOM,), ())
    lits: dict[str, bool] = {}
    for v, pol in bools:
        if lits.get(v, pol) != pol:
            return false
        lits[v] = pol
    # form -> [lower, upper, eq, set of disequalities]
    forms: dict[Coeffs, list] = {}
    for a in atoms:
        if a is False or a == FALSE_ATOM:
            return false
        if a is True:
            continue
        if not a.coeffs:
            if LinearAtom.make({}, a.rel, a.const) is False:
                return false
            continue
        sign = 1 if a.coeffs[0][1] > 0 else -1
        form = a.coeffs if sign > 0 else tuple((v, -c) for v, c in a.coeffs)
        slot = forms.setdefault(form, [None, None, None, set()])
        if a.rel == LE:
            if sign > 0:
                slot[1] = a.const if slot[1] is None else min(slot[1], a.const)
            else:
                slot[0] = -a.const if slot[0] is None else max(slot[0], -a.const)
        elif a.rel == EQ:
            val = a.const * sign
            if slot[2] is not None and slot[2] != val:
                return false
            slot[2] = val
        else:
            slot[3].add(a.const * sign)
    out: list[LinearAtom] = []
    for form, (lo, hi, eq, neqs) in forms.items():
        neg_form = tuple((v, -c) for v, c in form)
        if eq is not None:
            if (lo is not None and eq < lo) or (hi is not None and eq > hi) or eq in neqs:
                return false
            out.append(LinearAtom(form, EQ, eq))
            continue
        while hi is not None and hi in neqs:
            neqs.discard(hi)
            hi -= 1
        while lo is not None and lo in neqs:
            neqs.discard(lo)
            lo += 1
        if lo is not None and hi is not None:
            if lo > hi:
                return false
            if lo == hi:
                out.append(LinearAtom(form, EQ, lo))
                continue
        if hi is not None:
            out.append(LinearAtom(form, LE, hi))
        if lo is not None:
            out.append(LinearAtom(neg_form, LE, -lo))
        for k in sorted(neqs):
            if (lo is None or k >= lo) and (hi is None or k <= hi):
                out.append(LinearAtom(form, NE, k))
    out.sort(key=lambda a: (tuple(v for v, _ in a.coeffs), _REL_ORDER[a.rel], a.coeffs, a.const))
    return tuple(out), tuple(sorted(lits.items()))


TRUE = Constraint()
FALSE = Constraint((FALSE_ATOM,))


def atoms_constraint(atoms: Iterable[Union[LinearAtom, bool]], bools: Iterable = ()) -> Constraint:
    """Conjunction of atoms as returned by :meth:`LinearAtom.make`."""
    lin = []
    for a in atoms:
        if a is False:
            return FALSE
        if a is not True:
            lin.append(a)
    return Constraint(tuple(lin), tuple(bools))
