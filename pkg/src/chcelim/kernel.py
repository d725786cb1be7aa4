"""Fold/unfold transformation rules with checked side conditions.

Every clause created during a transformation gets an integer id and every
rule application is logged as a :class:`TraceEvent`.  The trace is a
complete, replayable record: :func:`replay` re-executes it against the
input program and must land on the same clauses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .constraints import UNSAT, YES, Constraint, LinearAtom, eliminate_exact, entails, is_satisfiable
from .core import (
    INT,
    Atom,
    Clause,
    Program,
    Var,
    VarSupply,
    fresh_names,
    iter_vars,
    match,
    rename_apart,
    unify_all,
)


class KernelRuleError(ValueError):
    """A rule was applied with a violated side condition.

    ``condition`` names the condition, e.g. ``"R1(iii)"`` or ``"R3(iii.1)"``.
    """

    def __init__(self, condition: str, message: str):
        super().__init__(f"{condition}: {message}")
        self.condition = condition


@dataclass
class DefinitionRecord:
    pred: str
    head_vars: tuple
    guard: Constraint
    body: tuple
    clause_id: int
    unfolded: bool = False
    # EC bookkeeping: the unclosed widened matrix this guard came from
    dbm: object = field(default=None, compare=False, repr=False)

    @property
    def head(self) -> Atom:
        return Atom(self.pred, tuple(self.head_vars))

    @property
    def clause(self) -> Clause:
        return Clause(self.head, self.guard, tuple(self.body), origin="define")


@dataclass(frozen=True)
class TraceEvent:
    rule: str  # define | unfold | fold | replace-equiv | replace-functional
    inputs: tuple
    outputs: tuple
    detail: dict = field(default_factory=dict, hash=False)

    def to_line(self) -> str:
        ins = ",".join(map(str, self.inputs)) or "-"
        outs = ",".join(map(str, self.outputs)) or "-"
        return f"{self.rule} in={ins} out={outs} {json.dumps(self.detail, sort_keys=True)}"

    @staticmethod
    def from_line(line: str) -> "TraceEvent":
        rule, ins, outs, detail = line.split(" ", 3)

        def ids(field_text: str) -> tuple:
            body = field_text.split("=", 1)[1]
            return () if body == "-" else tuple(int(x) for x in body.split(","))

        return TraceEvent(rule, ids(ins), ids(outs), json.loads(detail))


def constraint_to_json(c: Constraint) -> dict:
    return {
        "linear": [[[list(p) for p in a.coeffs], a.rel, a.const] for a in c.linear],
        "booleans": [[v, p] for v, p in c.booleans],
    }


def constraint_from_json(d: dict) -> Constraint:
    lin = tuple(LinearAtom(tuple((v, k) for v, k in co), rel, const) for co, rel, const in d["linear"])
    return Constraint(lin, tuple((v, p) for v, p in d["booleans"]))


class TransformState:
    """Clause store, definitions, fresh-name supplies and the trace."""

    def __init__(self, program: Program):
        self.program = program
        self.clauses: dict[int, Clause] = {}
        self.next_id = 1
        self.defs: list[DefinitionRecord] = []
        self.trace: list[TraceEvent] = []
        self.def_of: dict[int, int] = {}  # clause id -> index into defs
        self.input_preds = set(program.predicates())
        self.supply = VarSupply()
        self._names = fresh_names("new", self.input_preds)
        self.input_ids: list[int] = []
        for c in program.clauses:
            self.input_ids.append(self.add(c))
        self.cls = [c for c in program.clauses if c.head is not None]

    def add(self, c: Clause) -> int:
        cid = self.next_id
        self.next_id += 1
        self.clauses[cid] = c
        return cid

    def definition_for(self, pred: str) -> Optional[DefinitionRecord]:
        for d in self.defs:
            if d.pred == pred:
                return d
        return None

    def trace_lines(self, output_ids: Sequence[int] = ()) -> list[str]:
        lines = [e.to_line() for e in self.trace]
        lines.append("# output: " + ",".join(map(str, output_ids)))
        return lines


# ---------------------------------------------------------------- R1 define


def rule_define(
    state: TransformState,
    guard: Constraint,
    body: Sequence[Atom],
    head_vars: Sequence[Var],
    source: Optional[tuple] = None,
) -> DefinitionRecord:
    """Introduce ``newK(head_vars) <- guard, body`` with a fresh predicate.

    ``source`` is an optional ``(clause id, positions)`` pair recorded in the
    trace so that a replay can rebuild the body.
    """
    body = tuple(body)
    if not body:
        raise KernelRuleError("R1(iii)", "definition body must be a non-empty conjunction")
    for a in body:
        if a.pred not in state.input_preds:
            raise KernelRuleError("R1(ii)", f"body predicate {a.pred} does not occur in the input clauses")
    names = [v.name for v in head_vars]
    if len(set(names)) != len(names):
        raise KernelRuleError("R1(i)", f"head variables are not distinct: {names}")
    available = {v.name for a in body for v in a.variables} | set(guard.variables())
    for n in names:
        if n not in available:
            raise KernelRuleError("R1(i)", f"head variable {n} occurs neither in guard nor body")
    pred = next(state._names)
    rec = DefinitionRecord(pred, tuple(head_vars), guard, body, clause_id=0)
    rec.clause_id = state.add(rec.clause)
    state.def_of[rec.clause_id] = len(state.defs)
    state.defs.append(rec)
    detail = {"pred": pred, "head": names, "guard": constraint_to_json(guard)}
    if source is not None:
        detail["source"] = source[0]
        detail["positions"] = list(source[1])
    else:
        detail["body"] = [str(a) for a in body]
    state.trace.append(TraceEvent("define", () if source is None else (source[0],), (rec.clause_id,), detail))
    return rec


# ---------------------------------------------------------------- R2 unfold


def unfold_clause(
    clause: Clause, pos: int, program_clauses: Iterable[Clause], supply: VarSupply
) -> list[Optional[Clause]]:
    """Resolve body atom ``pos`` against each program clause.

    Returns one entry per program clause: the resolvent, or None when the
    heads do not unify or the combined constraint is unsatisfiable.
    """
    if not 0 <= pos < len(clause.body):
        raise IndexError(f"no body atom at position {pos}")
    atom = clause.body[pos]
    out: list[Optional[Clause]] = []
    for k in program_clauses:
        if k.head is None or k.head.pred != atom.pred or len(k.head.args) != len(atom.args):
            out.append(None)
            continue
        kr = rename_apart(k, supply)
        mgu = unify_all(zip(kr.head.args, atom.args))
        if mgu is None:
            out.append(None)
            continue
        body = clause.body[:pos] + kr.body + clause.body[pos + 1:]
        merged = Clause(clause.head, clause.constraint.conj(kr.constraint), body, "unfold").apply(mgu)
        if is_satisfiable(merged.constraint) == UNSAT:
            out.append(None)
            continue
        out.append(merged)
    return out


def rule_unfold(
    state: TransformState, clause_id: int, pos: int, program_clauses: Optional[Sequence[Clause]] = None
) -> list[int]:
    """Unfold the atom at ``pos`` (0-based) of clause ``clause_id``.

    By default the input definite clauses are used.  Returns the ids of the
    surviving resolvents, in program-clause order.
    """
    clause = state.clauses[clause_id]
    progs = state.cls if program_clauses is None else list(program_clauses)
    results = unfold_clause(clause, pos, progs, state.supply)
    new_ids = []
    origin = state.def_of.get(clause_id)
    for r in results:
        if r is None:
            continue
        cid = state.add(r)
        if origin is not None:
            state.def_of[cid] = origin
        new_ids.append(cid)
    if origin is not None:
        state.defs[origin].unfolded = True
    state.trace.append(TraceEvent("unfold", (clause_id,), tuple(new_ids), {"position": pos}))
    return new_ids


# ---------------------------------------------------------------- R3 fold


def _match_block(pattern: Sequence[Atom], targets: Sequence[Atom]) -> Optional[dict]:
    """A substitution t with set(pattern t) == set(targets), found by backtracking."""
    pattern = list(pattern)
    targets = list(targets)

    def go(i: int, s: dict) -> Optional[dict]:
        if i == len(pattern):
            covered = {a.apply(s) for a in pattern}
            return s if covered == set(targets) else None
        p = pattern[i]
        for t in targets:
            if t.pred != p.pred or len(t.args) != len(p.args):
                continue
            s2 = dict(s)
            ok = True
            for pa, ta in zip(p.args, t.args):
                s2 = match(pa, ta, s2)
                if s2 is None:
                    ok = False
                    break
            if ok:
                found = go(i + 1, s2)
                if found is not None:
                    return found
        return None

    return go(0, {})


def fold_substitution(clause: Clause, positions: Sequence[int], definition: DefinitionRecord) -> dict:
    """The substitution for folding ``positions`` of ``clause`` with ``definition``.

    Raises :class:`KernelRuleError` naming the violated fold condition.
    """
    block = [clause.body[i] for i in positions]
    theta = _match_block(definition.body, block)
    if theta is None:
        raise KernelRuleError("R3(i)", f"block {[str(a) for a in block]} is not an instance of the definition body")
    head_names = {v.name for v in definition.head_vars}
    def_vars = {v.name: v for a in definition.body for v in a.variables}
    for v in definition.guard.variables():
        if v not in def_vars and v not in head_names:
            raise KernelRuleError("R3(iii.1)", f"guard variable {v} is not bound by the block")
    missing = [v.name for v in definition.head_vars if v.name not in theta]
    if missing:
        raise KernelRuleError("R3(i)", f"head variables {missing} not bound by the block")
    guard = _guard_instance(definition.guard, theta)
    if entails(clause.constraint, guard) != YES:
        raise KernelRuleError("R3(ii)", f"constraint {clause.constraint} does not entail {guard}")
    outside = set(positions)
    context_vars = {v.name for v in (clause.head.variables if clause.head is not None else [])}
    context_vars |= set(clause.constraint.variables())
    for i, a in enumerate(clause.body):
        if i not in outside:
            context_vars |= {v.name for v in a.variables}
    local = [n for n in def_vars if n not in head_names]
    for x in local:
        img = theta[x]
        if not isinstance(img, Var):
            raise KernelRuleError("R3(iii.1)", f"{x} is mapped to the non-variable term {img}")
        if img.name in context_vars:
            raise KernelRuleError("R3(iii.1)", f"{x} is mapped to {img.name}, which occurs outside the folded block")
        for y, t in theta.items():
            if y != x and any(v.name == img.name for v in iter_vars(t)):
                raise KernelRuleError("R3(iii.2)", f"{img.name} (image of {x}) also occurs in the image of {y}")
    return theta


def _guard_instance(guard: Constraint, theta: dict) -> Constraint:
    mapping = {}
    for v in guard.variables():
        t = theta.get(v)
        if isinstance(t, Var):
            mapping[v] = t.name
    return guard.substitute(mapping)


def rule_fold(state: TransformState, clause_id: int, positions: Sequence[int], definition: DefinitionRecord) -> int:
    """Replace the atoms at ``positions`` by the definition's head instance.

    The new atom takes the place of the first folded atom; the constraint is
    kept as is.
    """
    clause = state.clauses[clause_id]
    positions = sorted(positions)
    if not positions or any(not 0 <= p < len(clause.body) for p in positions):
        raise KernelRuleError("R3(i)", f"bad block positions {positions}")
    theta = fold_substitution(clause, positions, definition)
    new_atom = definition.head.apply(theta)
    body = []
    for i, a in enumerate(clause.body):
        if i == positions[0]:
            body.append(new_atom)
        elif i not in positions:
            body.append(a)
    out = Clause(clause.head, clause.constraint, tuple(body), "fold")
    cid = state.add(out)
    if clause_id in state.def_of:
        state.def_of[cid] = state.def_of[clause_id]
    state.trace.append(
        TraceEvent("fold", (clause_id,), (cid,), {"positions": positions, "definition": definition.pred})
    )
    return cid


# ---------------------------------------------------------------- R4 / R5 replace


def rule_replace_equiv(state: TransformState, clause_id: int) -> Optional[int]:
    """Replace the constraint by an equivalent one.

    An unsatisfiable constraint deletes the clause (returns None).  Otherwise
    variables that occur only in the constraint are removed where this is
    exact (through unit-coefficient equalities); if nothing changes the
    same id is returned and no event is logged.
    """
    clause = state.clauses[clause_id]
    if is_satisfiable(clause.constraint) == UNSAT:
        state.trace.append(TraceEvent("replace-equiv", (clause_id,), (), {}))
        return None
    keep = {v.name for v in clause.variables()}
    reduced = eliminate_exact(clause.constraint, keep)
    if reduced == clause.constraint:
        return clause_id
    cid = state.add(Clause(clause.head, reduced, clause.body, "replace"))
    if clause_id in state.def_of:
        state.def_of[cid] = state.def_of[clause_id]
    state.trace.append(TraceEvent("replace-equiv", (clause_id,), (cid,), {}))
    return cid


def functional_pair(clause: Clause, annotations: dict) -> Optional[tuple[int, int]]:
    """Leftmost pair (i, j), i < j, of atoms of an annotated predicate with equal inputs."""
    body = clause.body
    for j in range(len(body)):
        ann = annotations.get(body[j].pred)
        if ann is None:
            continue
        for i in range(j):
            if body[i].pred != body[j].pred:
                continue
            if all(body[i].args[k] == body[j].args[k] for k in ann.inputs):
                return i, j
    return None


def rule_replace_functional(
    state: TransformState, clause_id: int, annotations: dict, pair: Optional[tuple[int, int]] = None
) -> Optional[int]:
    """Merge two atoms of a functional predicate with identical inputs.

    For ``p(t, u)`` before ``p(t, w)`` the second atom is removed and the
    clause is instantiated with the mgu of ``w`` and ``u``.  If the outputs
    do not unify the clause is deleted and None is returned.
    """
    clause = state.clauses[clause_id]
    if pair is None:
        pair = functional_pair(clause, annotations)
        if pair is None:
            raise KernelRuleError("R5", "no pair of atoms with identical inputs")
    i, j = pair
    pred = clause.body[i].pred
    ann = annotations.get(pred)
    if ann is None:
        raise KernelRuleError("R5", f"predicate {pred} has no functional annotation")
    a, b = clause.body[i], clause.body[j]
    if a.pred != b.pred or any(a.args[k] != b.args[k] for k in ann.inputs):
        raise KernelRuleError("R5", f"atoms {a} and {b} do not have identical inputs")
    mgu = unify_all((b.args[k], a.args[k]) for k in ann.outputs)
    detail = {"pair": [i, j]}
    if mgu is None:
        state.trace.append(TraceEvent("replace-functional", (clause_id,), (), detail))
        return None
    body = clause.body[:j] + clause.body[j + 1:]
    out = Clause(clause.head, clause.constraint, body, "replace").apply(mgu)
    cid = state.add(out)
    if clause_id in state.def_of:
        state.def_of[cid] = state.def_of[clause_id]
    state.trace.append(TraceEvent("replace-functional", (clause_id,), (cid,), detail))
    return cid


def check_all_definitions_unfolded(state: TransformState) -> bool:
    return all(d.unfolded for d in state.defs)


# ---------------------------------------------------------------- replay


def replay(program: Program, lines: Iterable[str]) -> list[Clause]:
    """Re-run a recorded trace on ``program`` and return the output clauses."""
    state = TransformState(program)
    annotations = program.annotation_map
    output: list[int] = []
    for line in lines:
        line = line.rstrip("\n")
        if not line:
            continue
        if line.startswith("# output:"):
            body = line.split(":", 1)[1].strip()
            output = [int(x) for x in body.split(",")] if body else []
            continue
        if line.startswith("#"):
            continue
        ev = TraceEvent.from_line(line)
        d = ev.detail
        if ev.rule == "define":
            src = state.clauses[d["source"]]
            body = [src.body[p] for p in d["positions"]]
            typed = {v.name: v for a in body for v in a.variables}
            head = [typed.get(n, Var(n, INT)) for n in d["head"]]
            rule_define(state, constraint_from_json(d["guard"]), body, head, (d["source"], d["positions"]))
        elif ev.rule == "unfold":
            rule_unfold(state, ev.inputs[0], d["position"])
        elif ev.rule == "fold":
            definition = state.definition_for(d["definition"])
            if definition is None:
                raise ValueError(f"trace folds with undefined predicate {d['definition']!r}")
            rule_fold(state, ev.inputs[0], d["positions"], definition)
        elif ev.rule == "replace-functional":
            rule_replace_functional(state, ev.inputs[0], annotations, tuple(d["pair"]))
        elif ev.rule == "replace-equiv":
            rule_replace_equiv(state, ev.inputs[0])
        else:
            raise ValueError(f"unknown trace rule {ev.rule!r}")
        produced = state.trace[-1].outputs
        if tuple(produced) != tuple(ev.outputs):
            raise ValueError(f"replay diverged at {line!r}: produced {produced}")
    return [state.clauses[i] for i in output]
