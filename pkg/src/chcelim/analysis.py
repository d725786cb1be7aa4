"""Structural analyses on clauses: sharing blocks, the atom order, slice
decompositions, sharing cycles, head linearization, and the class check for
guaranteed termination of the elimination algorithm."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .constraints import Constraint, LinearAtom
from .core import (
    Atom,
    Clause,
    FunctionalAnnotation,
    Program,
    Term,
    Var,
    atom_prec,
    fresh_names,
    is_strict_subterm,
    iter_vars,
    named,
    Ctor,
)


# ---------------------------------------------------------------- sharing blocks


@dataclass(frozen=True)
class SharingBlock:
    positions: tuple
    atoms: tuple

    @property
    def is_basic(self) -> bool:
        return all(a.is_basic for a in self.atoms)


def sharing_blocks(body: Sequence[Atom]) -> list[SharingBlock]:
    """Partition body atoms by transitive sharing of non-basic variables.

    Blocks are listed by their first position; positions within a block are
    increasing.
    """
    parent = list(range(len(body)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict = {}
    for i, a in enumerate(body):
        for v in a.nbvars:
            if v.name in owner:
                ri, rj = find(i), find(owner[v.name])
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
            else:
                owner[v.name] = i
    groups: dict = {}
    for i in range(len(body)):
        groups.setdefault(find(i), []).append(i)
    blocks = sorted(groups.values(), key=lambda g: g[0])
    return [SharingBlock(tuple(g), tuple(body[i] for i in g)) for g in blocks]


def strictly_maximal(atom: Atom, body: Sequence[Atom]) -> bool:
    """No atom of body is strictly above ``atom`` and some atom is strictly below."""
    if any(atom_prec(atom, b) for b in body):
        return False
    return any(atom_prec(b, atom) for b in body)


# ---------------------------------------------------------------- slices


class SliceBudgetExceeded(RuntimeError):
    pass


SLICE_BUDGET = 10**6


@dataclass(frozen=True)
class Slice:
    """Per-predicate argument choice; 0 selects nothing, i > 0 the i-th argument."""

    assignment: tuple  # ((pred, index), ...) sorted by pred

    def __getitem__(self, pred: str) -> int:
        return dict(self.assignment)[pred]

    def as_dict(self) -> dict:
        return dict(self.assignment)


@dataclass(frozen=True)
class SliceDecomposition:
    slices: tuple
    disjoint: bool
    quasi_descending: bool


def _sliced(atom: Atom, sigma: dict) -> Optional[Term]:
    i = sigma[atom.pred]
    return None if i == 0 else atom.args[i - 1]


def _linear(t: Term) -> bool:
    names = [v.name for v in iter_vars(t)]
    return len(names) == len(set(names))


def _vars(t: Optional[Term]) -> set:
    return set() if t is None else {v.name for v in iter_vars(t)}


def is_quasi_descending(clause: Clause, sigma: dict) -> bool:
    head = _sliced(clause.head, sigma) if clause.head is not None else None
    parts = [_sliced(a, sigma) for a in clause.body]
    for t in [head] + parts:
        if t is not None and not _linear(t):
            return False
    seen: set = set()
    for t in parts:
        vs = _vars(t)
        if vs & seen:
            return False
        seen |= vs
    hv = _vars(head)
    for t in parts:
        vs = _vars(t)
        if vs & hv and not (t == head or is_strict_subterm(t, head)):
            return False
    return True


def _slice_vars(clause: Clause, sigma: dict) -> set:
    out: set = set()
    for a in clause.atoms():
        out |= _vars(_sliced(a, sigma))
    return out


def find_slice_decomposition(clause: Clause, budget: int = SLICE_BUDGET) -> Optional[SliceDecomposition]:
    """Search for a quasi-descending slice decomposition, preferring a disjoint one.

    Returns None when no quasi-descending decomposition exists.  Raises
    :class:`SliceBudgetExceeded` when the candidate space is too large.
    """
    preds: dict = {}
    for a in clause.atoms():
        preds.setdefault(a.pred, a)
    names = sorted(preds)
    options = {
        p: [0] + [i + 1 for i, t in enumerate(preds[p].args) if not t.type.is_basic] for p in names
    }
    required = [(p, i) for p in names for i in options[p][1:]]
    space = 1
    for p in names:
        space *= len(options[p])
    if space > budget:
        raise SliceBudgetExceeded(f"{space} candidate slices")
    candidates = []
    for combo in itertools.product(*(options[p] for p in names)):
        sigma = dict(zip(names, combo))
        if any(combo) and is_quasi_descending(clause, sigma):
            candidates.append((sigma, _slice_vars(clause, sigma)))
    by_req = {r: [k for k, (s, _) in enumerate(candidates) if s[r[0]] == r[1]] for r in required}
    if any(not ks for ks in by_req.values()):
        return None

    steps = [0]

    def cover(chosen: list, used: set) -> Optional[list]:
        steps[0] += 1
        if steps[0] > budget:
            raise SliceBudgetExceeded("cover search")
        open_reqs = [r for r in required if not any(candidates[k][0][r[0]] == r[1] for k in chosen)]
        if not open_reqs:
            return chosen
        r = min(open_reqs, key=lambda r: len(by_req[r]))
        for k in by_req[r]:
            vs = candidates[k][1]
            if vs & used:
                continue
            found = cover(chosen + [k], used | vs)
            if found is not None:
                return found
        return None

    def pack(ks, disjoint):
        slices = tuple(Slice(tuple(sorted(candidates[k][0].items()))) for k in ks)
        return SliceDecomposition(slices, disjoint, True)

    found = cover([], set())
    if found is not None:
        return pack(found, True)
    # a quasi-descending cover exists (every requirement has a candidate)
    greedy: list = []
    for r in required:
        if not any(candidates[k][0][r[0]] == r[1] for k in greedy):
            greedy.append(by_req[r][0])
    return pack(greedy, False)


# ---------------------------------------------------------------- sharing cycles


@dataclass(frozen=True)
class SharingCycle:
    positions: tuple  # goal body positions of the atoms on the cycle
    variables: tuple  # variables[i] is shared by positions[i] and positions[i + 1] (cyclically)

    def describe(self, body: Sequence[Atom]) -> str:
        parts = [f"{body[pos]} -{self.variables[i]}-" for i, pos in enumerate(self.positions)]
        return " ".join(parts) + f" {body[self.positions[0]]}"


def has_sharing_cycle(goal: Clause) -> Optional[SharingCycle]:
    """A cycle through distinct atoms whose edges are distinct shared
    non-basic variables, with at least two edges; None if there is none."""
    body = goal.body
    nb = [[v.name for v in a.nbvars] for a in body]
    edges: list = []
    for i in range(len(body)):
        row = []
        for j in range(len(body)):
            if i != j:
                for x in nb[i]:
                    if x in nb[j]:
                        row.append((j, x))
        edges.append(row)

    def dfs(start, cur, path, labels):
        for nxt, x in edges[cur]:
            if x in labels:
                continue
            if nxt == start and len(labels) + 1 >= 2:
                return path, labels + [x]
            if nxt in path:
                continue
            found = dfs(start, nxt, path + [nxt], labels + [x])
            if found:
                return found
        return None

    for s in range(len(body)):
        found = dfs(s, s, [s], [])
        if found:
            path, labels = found
            return SharingCycle(tuple(path), tuple(labels))
    return None


# ---------------------------------------------------------------- head linearization


def _fresh_var_name(base: str, taken: set) -> str:
    for k in itertools.count(1):
        cand = f"{base}{k}"
        if cand not in taken:
            taken.add(cand)
            return cand
    raise AssertionError


def _needs_linearizing(head: Atom) -> bool:
    names = [v.name for t in head.nbargs for v in iter_vars(t)]
    return len(names) != len(set(names))


def equality_clauses(program: Program, type_name: str, pred_names: dict) -> list[Clause]:
    """Clauses defining structural equality on one declared type.

    Boolean fields are split into one clause per truth value, since boolean
    constraints are literal conjunctions.
    """
    td = next(t for t in program.type_defs if t.name == type_name)
    ty = named(type_name)
    out = []
    for ctor, args in td.constructors:
        xs = [Var(f"X{i + 1}", t) for i, t in enumerate(args)]
        ys = [Var(f"Y{i + 1}", t) for i, t in enumerate(args)]
        lin = []
        body = []
        bool_fields = []
        for x, y in zip(xs, ys):
            if x.type.kind == "int":
                lin.append(LinearAtom.make({x.name: 1, y.name: -1}, "=", 0))
            elif x.type.kind == "bool":
                bool_fields.append((x.name, y.name))
            else:
                body.append(Atom(pred_names[x.type.name], (x, y)))
        head = Atom(pred_names[type_name], (Ctor(ctor, tuple(xs), ty), Ctor(ctor, tuple(ys), ty)))
        for values in itertools.product((False, True), repeat=len(bool_fields)):
            lits = [(n, v) for (a, b), v in zip(bool_fields, values) for n in (a, b)]
            out.append(Clause(head, Constraint(tuple(lin), tuple(lits)), tuple(body), origin="eq"))
    return out


def rewrite_constrained_facts(program: Program) -> Program:
    """Linearize clause heads so that no variable repeats inside non-basic arguments.

    A repeated integer variable X becomes a fresh X1 with X = X1; a repeated
    data variable L becomes L1 with an extra body atom ``eq_<type>(L, L1)``.
    The equality predicates get clauses, signatures and a functional
    annotation (input first, output second).  Programs without repeats are
    returned unchanged.
    """
    if not any(c.head is not None and _needs_linearizing(c.head) for c in program.clauses):
        return program
    used_preds = set(program.predicates())
    eq_names: dict = {}

    def eq_pred(type_name: str) -> str:
        if type_name not in eq_names:
            base = f"eq_{type_name}"
            name = base
            if name in used_preds:
                name = next(fresh_names(base + "_", used_preds))
            used_preds.add(name)
            eq_names[type_name] = name
        return eq_names[type_name]

    new_clauses = []
    for c in program.clauses:
        if c.head is None or not _needs_linearizing(c.head):
            new_clauses.append(c)
            continue
        taken = set(c.var_names())
        seen: set = set()
        extra_lin = []
        extra_atoms = []

        def relabel(t: Term) -> Term:
            if isinstance(t, Var):
                if t.name not in seen:
                    seen.add(t.name)
                    return t
                new = Var(_fresh_var_name(t.name, taken), t.type)
                if t.type.is_basic:
                    extra_lin.append(LinearAtom.make({t.name: 1, new.name: -1}, "=", 0))
                else:
                    extra_atoms.append(Atom(eq_pred(t.type.name), (t, new)))
                return new
            if isinstance(t, Ctor) and t.args:
                return Ctor(t.name, tuple(relabel(a) for a in t.args), t.type)
            return t

        args = tuple(a if a.type.is_basic else relabel(a) for a in c.head.args)
        con = c.constraint.conj(Constraint(tuple(extra_lin)))
        new_clauses.append(
            Clause(Atom(c.head.pred, args), con, tuple(extra_atoms) + c.body, origin="linearized")
        )

    # equality predicates for every type reachable from the ones used
    pending = list(eq_names)
    done: list = []
    while pending:
        tn = pending.pop(0)
        if tn in done:
            continue
        done.append(tn)
        td = next(t for t in program.type_defs if t.name == tn)
        for _, args in td.constructors:
            for a in args:
                if not a.is_basic:
                    eq_pred(a.name)
                    if a.name not in done:
                        pending.append(a.name)
    sigs = list(program.signatures)
    anns = list(program.annotations)
    for tn in done:
        new_clauses.extend(equality_clauses(program, tn, eq_names))
        sigs.append((eq_names[tn], (named(tn), named(tn))))
        anns.append(FunctionalAnnotation(eq_names[tn], (0,), (1,)))
    return program.with_clauses(new_clauses, signatures=tuple(sigs), annotations=tuple(anns))


# ---------------------------------------------------------------- class check


@dataclass
class ClassRecord:
    clause: int  # 1-based position in the checked program
    verdict: str  # ok | fail | unknown
    reason: str


@dataclass
class ClassReport:
    records: list = field(default_factory=list)

    @property
    def verdict(self) -> str:
        if any(r.verdict == "fail" for r in self.records):
            return "out-of-class"
        if any(r.verdict == "unknown" for r in self.records):
            return "unknown"
        return "in-class"

    @property
    def in_class(self) -> bool:
        return self.verdict == "in-class"

    def failures(self) -> list:
        return [r for r in self.records if r.verdict != "ok"]

    def to_json(self) -> str:
        doc = {
            "verdict": self.verdict,
            "clauses": [{"id": r.clause, "verdict": r.verdict, "reason": r.reason} for r in self.records],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [f"verdict: {self.verdict}"]
        for r in self.records:
            lines.append(f"  clause {r.clause}: {r.verdict} ({r.reason})")
        return "\n".join(lines)


def check_goal(goal: Clause) -> tuple[str, str]:
    for a in goal.body:
        if not all(isinstance(t, Var) for t in a.args):
            return "fail", f"atom {a} has a non-variable argument"
        names = [t.name for t in a.args]
        if len(names) != len(set(names)):
            return "fail", f"atom {a} repeats a variable"
    cycle = has_sharing_cycle(goal)
    if cycle is not None:
        return "fail", "sharing cycle: " + cycle.describe(goal.body)
    return "ok", "variable arguments, no sharing cycle"


def check_class(program: Program, pre_process: bool = True) -> ClassReport:
    """Decide the syntactic termination-class hypotheses clause by clause."""
    checked = rewrite_constrained_facts(program) if pre_process else program
    report = ClassReport()
    for k, c in enumerate(checked.clauses, start=1):
        if c.head is None:
            verdict, reason = check_goal(c)
        else:
            try:
                dec = find_slice_decomposition(c)
            except SliceBudgetExceeded as e:
                report.records.append(ClassRecord(k, "unknown", f"slice search budget exceeded ({e})"))
                continue
            if dec is None:
                verdict, reason = "fail", "no quasi-descending slice decomposition"
            elif not dec.disjoint:
                verdict, reason = "fail", "quasi-descending slice decomposition exists but none is disjoint"
            else:
                desc = "; ".join(
                    ",".join(f"{p}:{i}" for p, i in s.assignment) for s in dec.slices
                )
                verdict, reason = "ok", f"disjoint quasi-descending decomposition [{desc}]"
        report.records.append(ClassRecord(k, verdict, reason))
    return report
