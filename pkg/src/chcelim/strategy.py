"""The elimination strategies: Algorithm E and its generalizing variant EC.

Each iteration runs Define-Fold over the current clauses, unfolds the new
definitions with the input clauses, and merges atoms of functional
predicates.  All clause manipulations go through :mod:`chcelim.kernel`, so
the resulting trace can be replayed.
"""

from __future__ import annotations

import dataclasses
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .analysis import SharingBlock, sharing_blocks, strictly_maximal
from .constraints import DBM, NO, YES, UNSAT, Constraint, TRUE, entails, is_satisfiable, project
from .core import Atom, Clause, Program, Var, iter_vars, tidy
from .kernel import (
    DefinitionRecord,
    KernelRuleError,
    TransformState,
    check_all_definitions_unfolded,
    fold_substitution,
    functional_pair,
    rule_define,
    rule_fold,
    rule_replace_equiv,
    rule_replace_functional,
    rule_unfold,
)


@dataclass(frozen=True)
class AlgorithmConfig:
    variant: str = "E"  # "E" or "EC"
    max_iterations: int = 1000
    max_definitions: int = 500
    max_clauses: int = 20_000  # clauses derived in total; bounds unfolding blow-up
    max_body_atoms: int = 16  # atoms in the body of one definition

    def __post_init__(self):
        if self.variant not in ("E", "EC"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if min(self.max_iterations, self.max_definitions, self.max_clauses, self.max_body_atoms) <= 0:
            raise ValueError("budgets must be positive")


class DivergenceError(RuntimeError):
    """A budget ran out.  Carries the partial state for the trace dump."""

    def __init__(self, message: str, state: TransformState, diagnostic: str, iterations: int):
        super().__init__(message)
        self.state = state
        self.diagnostic = diagnostic
        self.iterations = iterations


@dataclass
class TransformResult:
    program: Program
    state: TransformState
    output_ids: list
    iterations: int
    summary: dict = field(default_factory=dict)

    @property
    def clauses(self) -> list[Clause]:
        return list(self.program.clauses)

    def trace_lines(self) -> list[str]:
        return self.state.trace_lines(self.output_ids)


# ---------------------------------------------------------------- helpers


def basic_closed_predicates(program: Program) -> set:
    """Predicates all of whose (transitively reachable) clauses have basic types."""
    sigs = program.signature_map
    preds = program.predicates()
    closed = set()
    for p in preds:
        sig = sigs.get(p)
        cls = program.clauses_for(p)
        if sig is not None and not all(t.is_basic for t in sig):
            continue
        if all(c.has_basic_types for c in cls):
            closed.add(p)
    changed = True
    while changed:
        changed = False
        for p in sorted(closed):
            if any(a.pred not in closed for c in program.clauses_for(p) for a in c.body):
                closed.discard(p)
                changed = True
    return closed


def block_head_vars(atoms: Sequence[Atom]) -> list[Var]:
    """Basic-typed variables of a block, in first-occurrence order."""
    seen: dict = {}
    for a in atoms:
        for t in a.args:
            for v in iter_vars(t):
                if v.type.is_basic:
                    seen.setdefault(v.name, v)
    return list(seen.values())


def _variant_renaming(pattern: Sequence[Atom], target: Sequence[Atom]) -> Optional[dict]:
    """Bijective variable renaming r with set(pattern r) == set(target)."""
    pattern = list(dict.fromkeys(pattern))
    target = list(dict.fromkeys(target))
    if len(pattern) != len(target):
        return None

    def extend(p, t, r, inv):
        if isinstance(p, Var):
            if not isinstance(t, Var) or p.type != t.type:
                return False
            if p.name in r:
                return r[p.name] == t.name
            if t.name in inv:
                return False
            r[p.name] = t.name
            inv[t.name] = p.name
            return True
        if type(p) is not type(t):
            return False
        if hasattr(p, "args"):
            if p.name != t.name or len(p.args) != len(t.args):
                return False
            return all(extend(a, b, r, inv) for a, b in zip(p.args, t.args))
        return p == t

    def go(i, r, inv, used):
        if i == len(pattern):
            return r
        p = pattern[i]
        for j, t in enumerate(target):
            if j in used or t.pred != p.pred or len(t.args) != len(p.args):
                continue
            r2, inv2 = dict(r), dict(inv)
            if all(extend(a, b, r2, inv2) for a, b in zip(p.args, t.args)):
                found = go(i + 1, r2, inv2, used | {j})
                if found is not None:
                    return found
        return None

    return go(0, {}, {}, frozenset())


def gen(c: Constraint, block: SharingBlock, defs: Sequence[DefinitionRecord]):
    """Generalized guard for a block under constraint ``c``.

    Returns ``(guard, head_vars, matched, dbm)``.  ``guard`` ranges over the
    clause's own variables ``head_vars``.  ``matched`` is the latest
    definition with a variant body, or None.  When ``c`` already entails
    the matched guard the guard is that one and ``dbm`` is None (reuse).
    Otherwise ``dbm`` is the widened matrix for the new definition, indexed
    by position in ``head_vars``.
    """
    matched = None
    rename = None
    for d in reversed(defs):
        r = _variant_renaming(d.body, block.atoms)
        if r is not None:
            matched, rename = d, r
            break
    if matched is None:
        head = block_head_vars(block.atoms)
        names = [v.name for v in head]
        closed = DBM.from_constraint(project(c, names), names).close()
        guard = closed.to_constraint()
        if entails(c, guard) == NO:
            raise AssertionError("generalized guard is not implied by the clause constraint")
        return guard, head, None, closed
    typed = {v.name: v for a in block.atoms for v in a.variables}
    head = [typed[rename[v.name]] for v in matched.head_vars]
    names = [v.name for v in head]
    old_guard = matched.guard.substitute({v.name: n for v, n in zip(matched.head_vars, names)})
    if entails(c, old_guard) == YES:
        return old_guard, head, matched, None
    cur = DBM.from_constraint(project(c, names), names).close()
    prev = dataclasses.replace(matched.dbm, variables=tuple(names))
    widened = prev.widen(prev.join(cur))
    guard = widened.to_constraint()
    if entails(c, guard) == NO or entails(old_guard, guard) == NO:
        raise AssertionError("widened guard is not more general than both inputs")
    return guard, head, matched, widened


# ---------------------------------------------------------------- procedures


def define_fold(
    state: TransformState, in_cls: Sequence[int], config: AlgorithmConfig, basic_closed: set
) -> tuple[list[DefinitionRecord], list[int]]:
    """Introduce or reuse a definition per non-trivial sharing block and fold."""
    new_defs: list[DefinitionRecord] = []
    fld: list[int] = []
    for cid in in_cls:
        clause = state.clauses[cid]
        if clause.is_fact:
            fld.append(cid)
            continue
        plan: list = []
        for block in sharing_blocks(clause.body):
            if all(a.pred in basic_closed for a in block.atoms):
                continue
            if config.variant == "E":
                d = _reusable(state, clause, block)
                if d is None:
                    d = rule_define(state, TRUE, block.atoms, block_head_vars(block.atoms), (cid, block.positions))
                    new_defs.append(d)
            else:
                guard, head, matched, dbm = gen(clause.constraint, block, state.defs)
                if matched is not None and dbm is None:
                    d = matched
                else:
                    d = rule_define(state, guard, block.atoms, head, (cid, block.positions))
                    d.dbm = dbm
                    new_defs.append(d)
            plan.append((list(block.positions), d))
        cur = cid
        for k, (positions, d) in enumerate(plan):
            cur = rule_fold(state, cur, positions, d)
            first = min(positions)
            removed = [p for p in positions if p != first]
            for later in plan[k + 1:]:
                later[0][:] = [p - sum(1 for r in removed if r < p) for p in later[0]]
        out = state.clauses[cur]
        if not out.has_basic_types:
            raise AssertionError(f"folded clause still has non-basic atoms: {out}")
        fld.append(cur)
    return new_defs, fld


def _reusable(state: TransformState, clause: Clause, block: SharingBlock) -> Optional[DefinitionRecord]:
    for d in state.defs:
        try:
            fold_substitution(clause, block.positions, d)
        except KernelRuleError:
            continue
        return d
    return None


def select_atom(body: Sequence[Atom], marks: Sequence[bool]) -> Optional[int]:
    """Position to unfold next, or None when the clause is done.

    First choice: the leftmost marked atom that is strictly maximal.  If no
    atom is strictly maximal and every atom is still marked, the leftmost.
    """
    maximal = [strictly_maximal(a, body) for a in body]
    for i, a in enumerate(body):
        if marks[i] and maximal[i]:
            return i
    if body and all(marks) and not any(maximal):
        return 0
    return None


class ClauseBudgetExceeded(RuntimeError):
    pass


def unfold_procedure(
    state: TransformState, defs: Sequence[DefinitionRecord], max_clauses: Optional[int] = None
) -> list[int]:
    out: list[int] = []
    for d in defs:
        work = [(d.clause_id, [True] * len(d.body))]
        while work:
            cid, marks = work.pop(0)
            body = state.clauses[cid].body
            pos = select_atom(body, marks)
            if pos is None:
                out.append(cid)
                continue
            if max_clauses is not None and state.next_id > max_clauses:
                raise ClauseBudgetExceeded(f"clause budget {max_clauses} exhausted")
            produced = []
            for nid in rule_unfold(state, cid, pos):
                grown = len(state.clauses[nid].body) - len(body) + 1
                produced.append((nid, marks[:pos] + [False] * grown + marks[pos + 1:]))
            work = produced + work
    return out


def replace_procedure(state: TransformState, unf_cls: Sequence[int], annotations: dict) -> list[int]:
    out = []
    for cid in unf_cls:
        cur: Optional[int] = cid
        while cur is not None:
            pair = functional_pair(state.clauses[cur], annotations)
            if pair is None:
                break
            cur = rule_replace_functional(state, cur, annotations, pair)
        if cur is not None:
            cur = rule_replace_equiv(state, cur)
        if cur is not None:
            out.append(cur)
    return out


# ---------------------------------------------------------------- driver


def _diagnostic(state: TransformState) -> str:
    families = Counter(tuple(sorted(a.pred for a in d.body)) for d in state.defs)
    lines = [f"{len(state.defs)} definitions introduced"]
    for fam, n in families.most_common(3):
        lines.append(f"  {n} definitions over body predicates {list(fam)}")
    sizes = [len(d.body) for d in state.defs[-5:]]
    lines.append(f"  body sizes of the last definitions: {sizes}")
    for d in state.defs[-2:]:
        lines.append(f"  latest: {tidy(d.clause)}")
    return "\n".join(lines)


def run(program: Program, config: AlgorithmConfig = AlgorithmConfig()) -> TransformResult:
    """Run Algorithm E (or EC) and return the clause set over basic types.

    Raises :class:`DivergenceError` when a budget is exhausted.
    """
    state = TransformState(program)
    annotations = program.annotation_map
    closed = basic_closed_predicates(program)
    goal_ids = [cid for cid in state.input_ids if state.clauses[cid].is_goal]
    in_cls = [g for g in (rule_replace_equiv(state, cid) for cid in goal_ids) if g is not None]
    transf: list[int] = []
    iterations = 0
    while in_cls:
        iterations += 1
        if iterations > config.max_iterations:
            raise DivergenceError(
                f"iteration budget {config.max_iterations} exhausted", state, _diagnostic(state), iterations - 1
            )
        new_defs, fld = define_fold(state, in_cls, config, closed)
        if len(state.defs) > config.max_definitions:
            raise DivergenceError(
                f"definition budget {config.max_definitions} exhausted", state, _diagnostic(state), iterations
            )
        big = next((d for d in new_defs if len(d.body) > config.max_body_atoms), None)
        if big is not None:
            raise DivergenceError(
                f"definition {big.pred} has {len(big.body)} body atoms (budget {config.max_body_atoms})",
                state, _diagnostic(state), iterations,
            )
        try:
            unf = unfold_procedure(state, new_defs, config.max_clauses)
        except ClauseBudgetExceeded as e:
            raise DivergenceError(str(e), state, _diagnostic(state), iterations) from None
        in_cls = replace_procedure(state, unf, annotations)
        transf.extend(fld)
    if not check_all_definitions_unfolded(state):
        raise AssertionError("some definition was never unfolded")

    # input clauses of basic-closed predicates used by the result
    needed: set = set()
    frontier = [a.pred for cid in transf for a in state.clauses[cid].body if a.pred in closed]
    while frontier:
        p = frontier.pop()
        if p in needed:
            continue
        needed.add(p)
        for c in program.clauses_for(p):
            frontier.extend(a.pred for a in c.body)
    kept_inputs = [cid for cid in state.input_ids
                   if state.clauses[cid].head is not None and state.clauses[cid].head.pred in needed]
    output_ids = kept_inputs + transf
    clauses = [tidy(state.clauses[i]) for i in output_ids]
    for c in clauses:
        if not c.has_basic_types:
            raise AssertionError(f"output clause with non-basic types: {c}")

    sigs = dict(program.signatures)
    for d in state.defs:
        sigs[d.pred] = tuple(v.type for v in d.head_vars)
    used = [p for p in dict.fromkeys(a.pred for c in clauses for a in c.atoms())]
    out = Program(
        type_defs=(),
        clauses=tuple(clauses),
        annotations=tuple(a for a in program.annotations if a.pred in needed),
        signatures=tuple((p, sigs[p]) for p in used if p in sigs),
    )
    summary = {
        "variant": config.variant,
        "iterations": iterations,
        "definitions": len(state.defs),
        "output_clauses": len(clauses),
    }
    return TransformResult(out, state, output_ids, iterations, summary)


def run_algorithm_e(program: Program, **kw) -> TransformResult:
    return run(program, AlgorithmConfig(variant="E", **kw))


def run_algorithm_ec(program: Program, **kw) -> TransformResult:
    return run(program, AlgorithmConfig(variant="EC", **kw))
