"""Difference-bound matrices over a fixed variable index.

Entry ``m[i][j]`` bounds ``x_i - x_j <= m[i][j]``; index 0 is the constant
zero, so ``m[i][0]`` is an upper bound on ``x_i`` and ``m[0][i]`` bounds
``-x_i``.  ``INF`` means no bound.  Matrices are tuples of tuples so that
values are hashable and can be compared entry by entry.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import inf as INF
from typing import Sequence

from .linear import EQ, LE, Constraint, LinearAtom


@dataclass(frozen=True)
class DBM:
    variables: tuple  # names for indices 1..n
    matrix: tuple
    empty: bool = False

    @property
    def size(self) -> int:
        return len(self.variables) + 1

    @staticmethod
    def top(variables: Sequence[str]) -> "DBM":
        n = len(variables) + 1
        m = tuple(tuple(0 if i == j else INF for j in range(n)) for i in range(n))
        return DBM(tuple(variables), m)

    @staticmethod
    def from_constraint(c: Constraint, variables: Sequence[str]) -> "DBM":
        """Keep the unary and difference atoms of ``c`` over ``variables``.

        Anything else is dropped, so the result over-approximates ``c``.
        The matrix is not closed.
        """
        variables = tuple(variables)
        if c.is_false:
            return DBM(variables, DBM.top(variables).matrix, empty=True)
        idx = {v: i + 1 for i, v in enumerate(variables)}
        m = [list(r) for r in DBM.top(variables).matrix]

        def tighten(i, j, k):
            if k < m[i][j]:
                m[i][j] = k

        for a in c.linear:
            if a.rel not in (LE, EQ) or any(v not in idx for v in a.variables):
                continue
            pairs = a.coeffs
            if len(pairs) == 1:
                (v, k), = pairs
                if abs(k) != 1:
                    continue
                i, j = (idx[v], 0) if k > 0 else (0, idx[v])
            elif len(pairs) == 2 and sorted(k for _, k in pairs) == [-1, 1]:
                i = next(idx[v] for v, k in pairs if k > 0)
                j = next(idx[v] for v, k in pairs if k < 0)
            else:
                continue
            tighten(i, j, a.const)
            if a.rel == EQ:
                tighten(j, i, -a.const)
        return DBM(variables, tuple(tuple(r) for r in m))

    def close(self) -> "DBM":
        """Shortest-path closure; a negative cycle marks the DBM empty."""
        if self.empty:
            return self
        n = self.size
        m = [list(r) for r in self.matrix]
        for k in range(n):
            mk = m[k]
            for i in range(n):
                mik = m[i][k]
                if mik == INF:
                    continue
                mi = m[i]
                for j in range(n):
                    s = mik + mk[j]
                    if s < mi[j]:
                        mi[j] = s
        empty = any(m[i][i] < 0 for i in range(n))
        return DBM(self.variables, tuple(tuple(r) for r in m), empty)

    def _check(self, other: "DBM"):
        if self.variables != other.variables:
            raise ValueError(f"DBM index mismatch: {self.variables} vs {other.variables}")

    def join(self, other: "DBM") -> "DBM":
        """Entrywise max: the smallest difference shape containing both."""
        self._check(other)
        if self.empty:
            return other
        if other.empty:
            return self
        m = tuple(tuple(max(a, b) for a, b in zip(r1, r2)) for r1, r2 in zip(self.matrix, other.matrix))
        return DBM(self.variables, m)

    def widen(self, other: "DBM") -> "DBM":
        """Keep the bounds of ``self`` that ``other`` respects; drop the rest."""
        self._check(other)
        if self.empty:
            return other
        if other.empty:
            return self
        m = tuple(
            tuple(a if b <= a else INF for a, b in zip(r1, r2))
            for r1, r2 in zip(self.matrix, other.matrix)
        )
        return DBM(self.variables, m)

    def leq(self, other: "DBM") -> bool:
        """Entrywise inclusion; exact on closed operands."""
        self._check(other)
        if self.empty:
            return True
        if other.empty:
            return False
        return all(a <= b for r1, r2 in zip(self.matrix, other.matrix) for a, b in zip(r1, r2))

    def finite_entries(self) -> int:
        n = self.size
        return sum(1 for i in range(n) for j in range(n) if i != j and self.matrix[i][j] != INF)

    def to_constraint(self) -> Constraint:
        if self.empty:
            return Constraint((LinearAtom((), LE, -1),))
        names = ("",) + self.variables
        atoms = []
        for i in range(self.size):
            for j in range(self.size):
                k = self.matrix[i][j]
                if i == j or k == INF:
                    continue
                coeffs = {}
                if i:
                    coeffs[names[i]] = 1
                if j:
                    coeffs[names[j]] = coeffs.get(names[j], 0) - 1
                atoms.append(LinearAtom.make(coeffs, LE, k))
        if any(a is False for a in atoms):
            return Constraint((LinearAtom((), LE, -1),))
        return Constraint(tuple(a for a in atoms if a is not True))
