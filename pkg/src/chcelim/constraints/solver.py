"""Integer satisfiability, entailment and projection for :class:`Constraint`.

Satisfiability uses an exact rational simplex (the bounded-variable variant
used in SMT solvers) with branch-and-bound for integrality and lazy case
splitting for disequalities.  Both searches are budgeted, so every call is
bounded and may answer ``"unknown"``.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import ceil, floor
from typing import Iterable, Optional

from .linear import EQ, FALSE, LE, NE, TRUE, Constraint, LinearAtom

SAT, UNSAT, UNKNOWN = "sat", "unsat", "unknown"
YES, NO = "yes", "no"

BB_NODE_BUDGET = 500
NE_SPLIT_DEPTH = 8


class _Unknown(Exception):
    pass


class _Simplex:
    """Bounded-variable simplex over the rationals.

    Every multi-variable linear form gets a slack variable; bounds then live
    on single variables only.  ``check`` uses Bland's rule, so it terminates.
    """

    def __init__(self, atoms: Iterable[LinearAtom]):
        self.lo: dict = {}
        self.hi: dict = {}
        self.rows: dict = {}  # basic var -> {nonbasic var: coeff}
        self.value: dict = {}
        self.order: dict = {}  # var -> index, for Bland's rule
        self.originals: list = []
        forms: dict = {}
        for a in atoms:
            for v, _ in a.coeffs:
                self._add_var(v, original=True)
            if len(a.coeffs) == 1:
                (v, c), = a.coeffs
                self._bound(v, a.rel, Fraction(a.const, c), c > 0)
            else:
                key = a.coeffs
                if key not in forms:
                    s = ("#s", len(forms))
                    forms[key] = s
                    self._add_var(s, original=False)
                    self.rows[s] = {v: Fraction(c) for v, c in key}
                self._bound(forms[key], a.rel, Fraction(a.const), True)
        for v in self.order:
            if v not in self.rows:
                self.value[v] = self._clip(v, Fraction(0))
        for s, row in self.rows.items():
            self.value[s] = sum(c * self.value[v] for v, c in row.items())

    def _add_var(self, v, original: bool):
        if v not in self.order:
            self.order[v] = len(self.order)
            if original:
                self.originals.append(v)

    def _bound(self, v, rel: str, k: Fraction, positive: bool):
        if rel == EQ:
            self._set_lo(v, k)
            self._set_hi(v, k)
        elif positive:
            self._set_hi(v, k)
        else:
            self._set_lo(v, k)

    def _set_lo(self, v, k):
        if v not in self.lo or k > self.lo[v]:
            self.lo[v] = k

    def _set_hi(self, v, k):
        if v not in self.hi or k < self.hi[v]:
            self.hi[v] = k

    def _clip(self, v, x):
        if v in self.lo and x < self.lo[v]:
            return self.lo[v]
        if v in self.hi and x > self.hi[v]:
            return self.hi[v]
        return x

    def _pivot(self, basic, nonbasic):
        row = self.rows.pop(basic)
        a = row.pop(nonbasic)
        new_row = {v: -c / a for v, c in row.items()}
        new_row[basic] = 1 / a
        for r in self.rows.values():
            c = r.pop(nonbasic, None)
            if c is None:
                continue
            for v, d in new_row.items():
                nv = r.get(v, 0) + c * d
                if nv:
                    r[v] = nv
                else:
                    r.pop(v, None)
        self.rows[nonbasic] = new_row

    def check(self) -> bool:
        for v in self.order:
            if v in self.lo and v in self.hi and self.lo[v] > self.hi[v]:
                return False
        while True:
            bad = None
            for b in sorted(self.rows, key=self.order.__getitem__):
                x = self.value[b]
                if (b in self.lo and x < self.lo[b]) or (b in self.hi and x > self.hi[b]):
                    bad = b
                    break
            if bad is None:
                return True
            row = self.rows[bad]
            x = self.value[bad]
            increase = bad in self.lo and x < self.lo[bad]
            target = self.lo[bad] if increase else self.hi[bad]
            pick = None
            for n in sorted(row, key=self.order.__getitem__):
                c = row[n]
                up = (c > 0) == increase
                if up and (n not in self.hi or self.value[n] < self.hi[n]):
                    pick = n
                    break
                if not up and (n not in self.lo or self.value[n] > self.lo[n]):
                    pick = n
                    break
            if pick is None:
                return False
            c = row[pick]
            delta = (target - x) / c
            self.value[pick] += delta
            self.value[bad] = target
            for b, r in self.rows.items():
                if b != bad and pick in r:
                    self.value[b] += r[pick] * delta
            self._pivot(bad, pick)


def _integer_model(atoms: tuple, budget: list) -> Optional[dict]:
    """Integer model of LE/EQ atoms by branch-and-bound, or None if none exists."""
    stack = [()]
    while stack:
        extra = stack.pop()
        budget[0] -= 1
        if budget[0] < 0:
            raise _Unknown
        sx = _Simplex(atoms + extra)
        if not sx.check():
            continue
        frac = None
        for v in sx.originals:
            x = sx.value[v]
            if x.denominator != 1:
                frac = (v, x)
                break
        if frac is None:
            return {v: int(sx.value[v]) for v in sx.originals}
        v, x = frac
        down = LinearAtom(((v, 1),), LE, floor(x))
        up = LinearAtom(((v, -1),), LE, -ceil(x))
        stack.append(extra + (up,))
        stack.append(extra + (down,))
    return None


def _search(atoms: tuple, neqs: tuple, depth: int, budget: list) -> Optional[dict]:
    model = _integer_model(atoms, budget)
    if model is None:
        return None
    for a in neqs:
        if not a.evaluate(_total(model, a)):
            if depth >= NE_SPLIT_DEPTH:
                raise _Unknown
            form = dict(a.coeffs)
            for side in (LinearAtom.make(form, "<", a.const), LinearAtom.make(form, ">", a.const)):
                if side is False:
                    continue
                sub = atoms if side is True else atoms + (side,)
                found = _search(sub, neqs, depth + 1, budget)
                if found is not None:
                    return found
            return None
    return model


def _total(model: dict, a: LinearAtom) -> dict:
    return {v: model.get(v, 0) for v, _ in a.coeffs}


def _substitute(a: LinearAtom, v: str, expr: dict, const: int):
    """``a`` with ``v`` replaced by ``sum(expr) + const``; may fold to a bool."""
    coeffs = dict(a.coeffs)
    k = coeffs.pop(v, 0)
    if not k:
        return a
    for w, c in expr.items():
        coeffs[w] = coeffs.get(w, 0) + k * c
    return LinearAtom.make(coeffs, a.rel, a.const - k * const)


def _eliminate_equalities(atoms: list):
    """Remove all equalities exactly over the integers.

    A unit-coefficient variable is substituted away.  Otherwise the variable
    x with the smallest coefficient m is rewritten as ``t - sum(q_i x_i) + q``
    for a fresh t, where q_i, q are the floor quotients by m; the remaining
    coefficients drop below m, so a unit coefficient appears eventually.
    Returns ``(atoms, back)`` with ``back`` the substitutions in order, or
    None when the equalities have no integer solution.
    """
    back = []
    fresh = 0
    while True:
        eq = next((a for a in atoms if a.rel == EQ), None)
        if eq is None:
            return atoms, back
        coeffs = dict(eq.coeffs)
        x = min(coeffs, key=lambda v: (abs(coeffs[v]), v))
        m = coeffs[x]
        const = eq.const
        if m < 0:
            coeffs = {v: -c for v, c in coeffs.items()}
            m, const = -m, -const
        if m == 1:
            expr = {v: -c for v, c in coeffs.items() if v != x}
            rest, value = [a for a in atoms if a is not eq], const
        else:
            t = f"%t{fresh}"
            fresh += 1
            expr = {v: -(c // m) for v, c in coeffs.items() if v != x}
            expr[t] = 1
            rest, value = atoms, const // m
        back.append((x, expr, value))
        new_atoms = []
        for a in rest:
            b = _substitute(a, x, expr, value)
            if b is False:
                return None
            if b is not True:
                new_atoms.append(b)
        atoms = new_atoms


@lru_cache(maxsize=20000)
def _solve(c: Constraint):
    if c.is_false:
        return UNSAT, None
    reduced = _eliminate_equalities(list(c.linear))
    if reduced is None:
        return UNSAT, None
    rest, back = reduced
    atoms = tuple(a for a in rest if a.rel != NE)
    neqs = tuple(a for a in rest if a.rel == NE)
    try:
        model = _search(atoms, neqs, 0, [BB_NODE_BUDGET])
    except _Unknown:
        return UNKNOWN, None
    if model is None:
        return UNSAT, None
    for x, expr, value in reversed(back):
        model[x] = value + sum(k * model.setdefault(w, 0) for w, k in expr.items())
    model = {v: k for v, k in model.items() if not v.startswith("%")}
    for v in c.variables():
        model.setdefault(v, 0)
    for v, pol in c.booleans:
        model[v] = pol
    return SAT, model


def is_satisfiable(c: Constraint) -> str:
    """``"sat"``, ``"unsat"`` or ``"unknown"`` (budget exhausted)."""
    return _solve(c)[0]


def find_model(c: Constraint) -> Optional[dict]:
    """An integer/boolean model of ``c`` when one was found, else None."""
    status, model = _solve(c)
    return dict(model) if status == SAT else None


def entails(c: Constraint, d: Constraint) -> str:
    """``"yes"`` if every model of c satisfies d, ``"no"`` if not, else ``"unknown"``."""
    if d.is_true:
        return YES
    cs = is_satisfiable(c)
    if cs == UNSAT:
        return YES
    verdict = YES
    lits = dict(c.booleans)
    for v, pol in d.booleans:
        if lits.get(v) != pol:
            # c is satisfiable and leaves v free or forces the other value
            return NO if cs == SAT else UNKNOWN
    for a in d.linear:
        if a in c.linear:
            continue
        for neg in a.negate():
            if neg is False:
                continue
            extra = TRUE if neg is True else Constraint((neg,))
            r = is_satisfiable(c.conj(extra))
            if r == SAT:
                return NO
            if r == UNKNOWN:
                verdict = UNKNOWN
    return verdict


def equivalent(c: Constraint, d: Constraint) -> bool:
    return entails(c, d) == YES and entails(d, c) == YES


PROJECT_ATOM_CAP = 200


def _substitute_unit_equalities(atoms: list, keep: set) -> Optional[list]:
    """Eliminate non-kept variables that have a unit coefficient in some
    equality, by substitution.  Exact over the integers.  None means false."""
    changed = True
    while changed:
        changed = False
        for a in atoms:
            if a.rel != EQ:
                continue
            pivot = next((v for v, k in a.coeffs if v not in keep and abs(k) == 1), None)
            if pivot is None:
                continue
            k = dict(a.coeffs)[pivot]
            # pivot = k * (const - sum(others)) since k is +1 or -1
            rest = {v: -cc * k for v, cc in a.coeffs if v != pivot}
            const = a.const * k
            new_atoms = []
            for b in atoms:
                if b is a:
                    continue
                bc = dict(b.coeffs)
                m = bc.pop(pivot, 0)
                if m:
                    for v, cc in rest.items():
                        bc[v] = bc.get(v, 0) + m * cc
                    nb = LinearAtom.make(bc, b.rel, b.const - m * const)
                else:
                    nb = b
                if nb is False:
                    return None
                if nb is not True:
                    new_atoms.append(nb)
            atoms = new_atoms
            changed = True
            break
    return atoms


def eliminate_exact(c: Constraint, keep: Iterable[str]) -> Constraint:
    """Equivalent of ``exists (vars(c) - keep). c`` as far as unit-coefficient
    equalities allow; variables that cannot be removed exactly stay."""
    if c.is_false:
        return c
    atoms = _substitute_unit_equalities(list(c.linear), set(keep) | {v for v, _ in c.booleans})
    if atoms is None:
        return FALSE
    return Constraint(tuple(atoms), c.booleans)


def project(c: Constraint, keep: Iterable[str]) -> Constraint:
    """Over-approximate ``exists (vars(c) - keep). c`` by a constraint on ``keep``.

    Unit-coefficient equalities are used for exact substitution; the rest is
    Fourier-Motzkin elimination, with disequalities over eliminated variables
    dropped.  The result is always entailed by ``c``.
    """
    keep = set(keep)
    if c.is_false:
        return FALSE
    if is_satisfiable(c) == UNSAT:
        return FALSE
    bools = [(v, p) for v, p in c.booleans if v in keep]
    elim = [v for v in c.variables() if v not in keep and v not in dict(c.booleans)]
    atoms = _substitute_unit_equalities(list(c.linear), keep)
    if atoms is None:
        return FALSE

    les: list = []
    for a in atoms:
        touches = any(v not in keep for v in a.variables)
        if a.rel == NE:
            if not touches:
                les.append(a)
        elif a.rel == EQ and touches:
            d = dict(a.coeffs)
            les.append(LinearAtom.make(d, LE, a.const))
            les.append(LinearAtom.make(d, ">=", a.const))
        else:
            les.append(a)

    remaining = [v for v in elim if any(v in a.variables for a in les)]
    while remaining:
        def cost(v):
            pos = sum(1 for a in les if dict(a.coeffs).get(v, 0) > 0)
            neg = sum(1 for a in les if dict(a.coeffs).get(v, 0) < 0)
            return pos * neg - pos - neg

        v = min(remaining, key=lambda x: (cost(x), x))
        remaining.remove(v)
        pos, neg, rest = [], [], []
        for a in les:
            k = dict(a.coeffs).get(v, 0)
            (pos if k > 0 else neg if k < 0 else rest).append(a)
        combined = []
        for p in pos:
            kp = dict(p.coeffs)[v]
            for n in neg:
                kn = -dict(n.coeffs)[v]
                coeffs: dict = {}
                for x, cc in p.coeffs:
                    coeffs[x] = coeffs.get(x, 0) + kn * cc
                for x, cc in n.coeffs:
                    coeffs[x] = coeffs.get(x, 0) + kp * cc
                coeffs.pop(v, None)
                na = LinearAtom.make(coeffs, LE, kn * p.const + kp * n.const)
                if na is False:
                    return FALSE
                if na is not True:
                    combined.append(na)
        les = rest + combined
        if len(les) > PROJECT_ATOM_CAP:
            # dropping atoms only weakens the result
            les = les[:PROJECT_ATOM_CAP]
    les = [a for a in les if all(v in keep for v in a.variables)]
    return Constraint(tuple(les), tuple(bools))
