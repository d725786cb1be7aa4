"""Bounded bottom-up evaluation used as an independent satisfiability oracle.

The least model is computed over a finite slice of the Herbrand universe:
integers in ``[-bound, bound]`` and data terms of height at most ``depth``,
with a cap on the number of distinct terms per type.  Every fact derived is
a true fact of the unbounded least model, so ``True`` always means the
clause set is unsatisfiable; ``False`` means no refutation was found inside
the bounds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional

from .constraints import EQ, Constraint
from .core import Atom, BoolLit, Clause, IntLit, Program, Term, Var, iter_vars


class OracleOverflow(RuntimeError):
    """A resource cap was hit; the verdict would not be trustworthy."""


@dataclass(frozen=True)
class OracleConfig:
    depth: int = 4
    bound: int = 4
    terms_per_type: int = 24
    max_facts: int = 300_000
    max_rounds: int = 200


class _Node:
    """Interned ground data term; equality is identity."""

    __slots__ = ("name", "args", "type", "height")

    def __init__(self, name, args, type_, h):
        self.name = name
        self.args = args
        self.type = type_
        self.height = h


_MISSING = object()


class _Terms:
    def __init__(self):
        self.table: dict = {}

    def make(self, name, args, type_) -> _Node:
        key = (name, args)
        node = self.table.get(key)
        if node is None:
            h = 1 + max((x.height for x in args if isinstance(x, _Node)), default=0)
            node = self.table[key] = _Node(name, args, type_, h)
        return node


def _bind(pattern: Term, value, env: dict) -> bool:
    """Match a clause term against a ground value (int, bool or node)."""
    if isinstance(pattern, Var):
        cur = env.get(pattern.name, _MISSING)
        if cur is _MISSING:
            env[pattern.name] = value
            return True
        return cur is value or (not isinstance(cur, _Node) and cur == value and type(cur) is type(value))
    if isinstance(pattern, (IntLit, BoolLit)):
        return pattern.value == value and type(pattern.value) is type(value)
    if not isinstance(value, _Node) or value.name != pattern.name or len(value.args) != len(pattern.args):
        return False
    return all(_bind(p, v, env) for p, v in zip(pattern.args, value.args))


def _instantiate(t: Term, env: dict, terms: _Terms):
    if isinstance(t, Var):
        return env[t.name]
    if isinstance(t, (IntLit, BoolLit)):
        return t.value
    return terms.make(t.name, tuple(_instantiate(a, env, terms) for a in t.args), t.type)


class _Evaluator:
    def __init__(self, program: Program, cfg: OracleConfig):
        self.program = program
        self.cfg = cfg
        self.facts: dict = {}
        self.index: dict = {}
        self.count = 0
        self.universe: dict = {}
        self.terms = _Terms()
        for td in program.type_defs:
            u = self.universe.setdefault(td.name, {})
            for c, args in td.constructors:
                if not args:
                    u[self.terms.make(c, (), td.type)] = None
        self.ints = list(range(-cfg.bound, cfg.bound + 1))

    # -- terms -------------------------------------------------------------

    def _admit(self, value) -> bool:
        """Register a ground data term and its subterms; False if out of bounds."""
        if not isinstance(value, _Node):
            if isinstance(value, bool):
                return True
            return -self.cfg.bound <= value <= self.cfg.bound
        if value.height > self.cfg.depth:
            return False
        u = self.universe.setdefault(value.type.name, {})
        if value in u:
            return True
        for a in value.args:
            if not self._admit(a):
                return False
        if len(u) >= self.cfg.terms_per_type:
            return False
        u[value] = None
        return True

    # -- constraint solving over the bounded domain --------------------------

    def _solutions(self, c: Constraint, env: dict, free: list) -> Iterator[dict]:
        ints = {k: v for k, v in env.items() if isinstance(v, int) and not isinstance(v, bool)}
        bools = {k: v for k, v in env.items() if isinstance(v, bool)}
        cc = c.substitute({**ints, **bools}) if (ints or bools) else c
        if cc.is_false:
            return
        env = dict(env)
        # propagate unit equalities
        progress = True
        while progress and not cc.is_false:
            progress = False
            for a in cc.linear:
                if a.rel == EQ and len(a.coeffs) == 1:
                    (v, k), = a.coeffs
                    if a.const % k:
                        return
                    env[v] = a.const // k
                    cc = cc.substitute({v: env[v]})
                    progress = True
                    break
            for v, pol in cc.booleans:
                env[v] = pol
            if cc.booleans:
                cc = cc.substitute({v: p for v, p in cc.booleans})
        if cc.is_false:
            return
        rest_int = [v for v in dict.fromkeys(list(cc.variables()) + free) if v not in env]
        for combo in itertools.product(self.ints, repeat=len(rest_int)):
            model = dict(zip(rest_int, combo))
            if all(a.evaluate(model) for a in cc.linear):
                out = dict(env)
                out.update(model)
                yield out

    # -- clause evaluation ---------------------------------------------------

    def _candidates(self, atom: Atom, env: dict, source: list) -> list:
        """Facts for ``atom`` that can match, using a bound argument if any."""
        index = self.index.get(atom.pred)
        if index is None:
            return []
        for k, t in enumerate(atom.args):
            if isinstance(t, Var) and t.name in env:
                return index[k].get(env[t.name], []) if source is None else [
                    f for f in source if f[k] == env[t.name]]
            if isinstance(t, (IntLit, BoolLit)):
                return index[k].get(t.value, []) if source is None else [f for f in source if f[k] == t.value]
        return self.facts.get(atom.pred, {}) if source is None else source

    def _join(self, body: tuple, env: dict, delta_pos: Optional[int], delta: list) -> Iterator[dict]:
        remaining = list(range(len(body)))
        if delta_pos is not None:
            remaining.remove(delta_pos)
            remaining.insert(0, delta_pos)
        yield from self._join_rest(body, remaining, env, delta_pos, delta)

    def _join_rest(self, body, remaining, env, delta_pos, delta):
        if not remaining:
            yield env
            return
        # next atom: the delta atom first, then the one with most bound variables
        if remaining[0] == delta_pos:
            i = delta_pos
        else:
            i = max(remaining, key=lambda j: sum(1 for v in body[j].variables if v.name in env))
        rest = [j for j in remaining if j != i]
        atom = body[i]
        source = delta if i == delta_pos else None
        for fact in list(self._candidates(atom, env, source)):
            e = dict(env)
            if all(_bind(p, v, e) for p, v in zip(atom.args, fact)):
                yield from self._join_rest(body, rest, e, None if i == delta_pos else delta_pos, delta)

    def _data_products(self, free_data: list, since: Optional[dict]) -> Iterator[tuple]:
        """Assignments of universe terms to ``free_data``; with ``since``, only
        those using at least one term added after the recorded sizes."""
        pools = [list(self.universe.get(v.type.name, {})) for v in free_data]
        if since is None:
            yield from itertools.product(*pools)
            return
        cut = [since.get(v.type.name, 0) for v in free_data]
        for k in range(len(pools)):
            choices = [pool[:c] if j < k else pool[c:] if j == k else pool
                       for j, (pool, c) in enumerate(zip(pools, cut))]
            yield from itertools.product(*choices)

    def _heads(self, clause: Clause, env: dict, since: Optional[dict] = None) -> Iterator[Optional[tuple]]:
        head_vars = [] if clause.head is None else list(dict.fromkeys(
            v for a in clause.head.args for v in iter_vars(a)))
        free_data = [v for v in head_vars if v.name not in env and not v.type.is_basic]
        free_int = [v.name for v in head_vars if v.name not in env and v.type.kind == "int"]
        free_bool = [v.name for v in head_vars if v.name not in env and v.type.kind == "bool"]
        for dvals in self._data_products(free_data, since):
            e0 = dict(env)
            e0.update({v.name: d for v, d in zip(free_data, dvals)})
            for sol in self._solutions(clause.constraint, e0, free_int):
                open_bools = [b for b in free_bool if b not in sol]
                for bvals in itertools.product((False, True), repeat=len(open_bools)):
                    s2 = dict(sol)
                    s2.update(zip(open_bools, bvals))
                    if clause.head is None:
                        yield None
                        return
                    yield tuple(_instantiate(t, s2, self.terms) for t in clause.head.args)

    def _fire(self, clause: Clause, delta: Optional[dict]) -> Iterator[Optional[tuple]]:
        """Heads derivable using at least one fact from ``delta`` (all if None)."""
        if delta is None or not clause.body:
            for env in self._join(clause.body, {}, None, []):
                yield from self._heads(clause, env)
            return
        for k, atom in enumerate(clause.body):
            d = delta.get(atom.pred)
            if not d:
                continue
            for env in self._join(clause.body, {}, k, d):
                yield from self._heads(clause, env)

    def _add(self, pred: str, fact: tuple) -> bool:
        table = self.facts.setdefault(pred, {})
        if fact in table or not all(self._admit(v) for v in fact):
            return False
        table[fact] = None
        idx = self.index.setdefault(pred, [dict() for _ in fact])
        for k, v in enumerate(fact):
            idx[k].setdefault(v, []).append(fact)
        self.count += 1
        if self.count > self.cfg.max_facts:
            raise OracleOverflow(f"more than {self.cfg.max_facts} facts")
        return True

    def _sizes(self) -> dict:
        return {k: len(u) for k, u in self.universe.items()}

    def run(self) -> bool:
        clauses = list(self.program.clauses)
        # clauses that enumerate the (growing) term universe are re-run on it
        open_data = {
            i for i, c in enumerate(clauses)
            if c.head is not None and any(
                not v.type.is_basic and all(v not in b.variables for b in c.body) for v in c.head.variables)
        }
        seen: dict = {}
        delta: Optional[dict] = None
        for _ in range(self.cfg.max_rounds):
            new: list = []
            sizes = self._sizes()
            for i, c in enumerate(clauses):
                if delta is None:
                    stream = self._fire(c, None)
                elif i in open_data and seen[i] != sizes:
                    if c.body:
                        stream = self._fire(c, None)
                    else:
                        stream = self._heads(c, {}, since=seen[i])
                elif c.body:
                    stream = self._fire(c, delta)
                else:
                    continue
                for fact in stream:
                    if fact is None:
                        return True
                    new.append((c.head.pred, fact))
                seen[i] = sizes
            delta = {}
            for pred, fact in new:
                if self._add(pred, fact):
                    delta.setdefault(pred, []).append(fact)
            if not delta and self._sizes() == sizes:
                return False
        raise OracleOverflow(f"no fixpoint after {self.cfg.max_rounds} rounds")


def bounded_derives_false(program: Program, depth: int = 4, bound: int = 4, **kw) -> bool:
    """Whether ``false`` is derivable inside the bounded universe."""
    return _Evaluator(program, OracleConfig(depth=depth, bound=bound, **kw)).run()
