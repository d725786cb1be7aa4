"""Translation of source programs and properties into constrained Horn clauses.

A function ``f`` of arity k becomes a predicate ``f`` of arity k+1 whose
last argument is the result.  Every expression is translated into a list
of alternatives; branching constructs (``if``, ``match``, comparisons used
as boolean values) multiply alternatives, and each alternative of a
function body becomes one clause.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..constraints import FALSE, Constraint, LinExpr, atoms_constraint, compare
from ..core import (
    BOOL,
    INT,
    Atom,
    BoolLit,
    Clause,
    Ctor,
    FunctionalAnnotation,
    Program,
    Term,
    TypeExpr,
    Var,
    lift_literals,
    substitute_constraint,
    unify_all,
    VarSupply,
)
from .ast import (
    BoolConst,
    Call,
    CtorApp,
    FunDef,
    FunProgram,
    FunTypeError,
    If,
    Let,
    Match,
    Name,
    Num,
    Prim,
    Property,
    UnsupportedProperty,
)

_NEGATED = {"=": "!=", "!=": "=", "<>": "=", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}


@dataclass(frozen=True)
class _Branch:
    """One path through an expression: constraint, atoms and data equations."""

    constraint: Constraint = Constraint()
    atoms: tuple = ()
    eqs: tuple = ()  # ((Term, Term), ...) solved by unification at the end

    def add(self, c: Constraint) -> "_Branch":
        return _Branch(self.constraint.conj(c), self.atoms, self.eqs)

    def call(self, a: Atom) -> "_Branch":
        return _Branch(self.constraint, self.atoms + (a,), self.eqs)

    def equate(self, s: Term, t: Term) -> "_Branch":
        return _Branch(self.constraint, self.atoms, self.eqs + ((s, t),))


def _var_name(src: str) -> str:
    core = src.lstrip("_").replace("'", "p")
    return core[0].upper() + core[1:] if core else "V"


class _Translator:
    def __init__(self, fp: FunProgram):
        self.fp = fp
        self.sigs = {f.name: (f.param_types, f.result_type) for f in fp.functions}
        self.ctor_names = dict(fp.ctor_names)
        self.ctor_types = {c: fp.ctor_signature(c) for c in self.ctor_names}
        self.used: set = set()
        self.supply = VarSupply()

    # -- naming ------------------------------------------------------------

    def reset(self, reserved=()):
        self.used = set(reserved)

    def name(self, base: str) -> str:
        if base not in self.used:
            self.used.add(base)
            return base
        k = 1
        while f"{base}{k}" in self.used:
            k += 1
        self.used.add(f"{base}{k}")
        return f"{base}{k}"

    def bind(self, src: str) -> str:
        return self.name(_var_name(src))

    # -- values ------------------------------------------------------------
    # ints are LinExpr, bools are BoolLit or a Bool Var, data values are Terms

    def as_term(self, br: _Branch, val, ty: TypeExpr) -> tuple:
        """Place a value in an atom argument, introducing a variable if needed."""
        if ty == INT:
            coeffs = {v: k for v, k in val.coeffs.items() if k}
            if not val.const and len(coeffs) == 1 and next(iter(coeffs.values())) == 1:
                return br, Var(next(iter(coeffs)), INT)
            v = self.name("V")
            return br.add(compare(LinExpr.var(v), "=", val)), Var(v, INT)
        if ty == BOOL and isinstance(val, BoolLit):
            v = self.name("B")
            return br.add(Constraint((), ((v, val.value),))), Var(v, BOOL)
        return br, val

    def split_bool(self, br: _Branch, val) -> list:
        """Alternatives in which the boolean value is a literal."""
        if isinstance(val, BoolLit):
            return [(br, val.value)]
        return [(br.add(Constraint((), ((val.name, b),))), b) for b in (True, False)]

    def type_of(self, e, env: dict) -> TypeExpr:
        """Type of an already type-checked expression."""
        if isinstance(e, Num):
            return INT
        if isinstance(e, BoolConst):
            return BOOL
        if isinstance(e, Name):
            if e.name in env:
                return env[e.name][1]
            return self.sigs[e.name][1]
        if isinstance(e, CtorApp):
            return self.ctor_types[e.ctor][0].type
        if isinstance(e, Call):
            return self.sigs[e.fn][1]
        if isinstance(e, Prim):
            return INT if e.op in ("+", "-", "*", "mod", "neg") else BOOL
        if isinstance(e, If):
            return self.type_of(e.then, env)
        if isinstance(e, Let):
            return self.type_of(e.body, {**env, e.var: (None, self.type_of(e.value, env))})
        if isinstance(e, Match):
            case = next(c for c in e.cases if c.ctor is not None)
            td, args = self.ctor_types[case.ctor]
            cenv = dict(env)
            for v, t in zip(case.vars, args):
                cenv[v] = (None, t)
            return self.type_of(case.body, cenv)
        raise FunTypeError(f"unsupported expression {e!r}")

    def many(self, exprs, env: dict, br: _Branch) -> list:
        """Alternatives for a left-to-right evaluation of several expressions."""
        out = [(br, [])]
        for e in exprs:
            out = [(b2, vals + [v]) for b, vals in out for b2, v in self.value(e, env, b)]
        return out

    def value(self, e, env: dict, br: _Branch) -> list:
        if isinstance(e, Num):
            return [(br, LinExpr.constant(e.value))]
        if isinstance(e, BoolConst):
            return [(br, BoolLit(e.value))]
        if isinstance(e, Name):
            if e.name in env:
                return [(br, env[e.name][0])]
            return self.value(Call(e.name, (), e.pos), env, br)
        if isinstance(e, CtorApp):
            td, argt = self.ctor_types[e.ctor]
            out = []
            for b, vals in self.many(e.args, env, br):
                terms = []
                for v, t in zip(vals, argt):
                    b, term = self.as_term(b, v, t)
                    terms.append(term)
                out.append((b, Ctor(self.ctor_names[e.ctor], tuple(terms), td.type)))
            return out
        if isinstance(e, Call):
            params, res = self.sigs[e.fn]
            out = []
            for b, vals in self.many(e.args, env, br):
                terms = []
                for v, t in zip(vals, params):
                    b, term = self.as_term(b, v, t)
                    terms.append(term)
                r = Var(self.name("R"), res)
                b = b.call(Atom(e.fn, tuple(terms) + (r,)))
                out.append((b, LinExpr.var(r.name) if res == INT else r))
            return out
        if isinstance(e, Prim):
            return self.prim(e, env, br)
        if isinstance(e, If):
            out = []
            for b, c in self.value(e.cond, env, br):
                for b2, truth in self.split_bool(b, c):
                    out.extend(self.value(e.then if truth else e.orelse, env, b2))
            return out
        if isinstance(e, Let):
            ty = self.type_of(e.value, env)
            out = []
            for b, v in self.value(e.value, env, br):
                out.extend(self.value(e.body, {**env, e.var: (v, ty)}, b))
            return out
        if isinstance(e, Match):
            return self.match(e, env, br)
        raise FunTypeError(f"unsupported expression {e!r}")

    def prim(self, e: Prim, env: dict, br: _Branch) -> list:
        op = e.op
        if op in ("+", "-", "neg"):
            out = []
            for b, vals in self.many(e.args, env, br):
                if op == "neg":
                    out.append((b, -vals[0]))
                else:
                    out.append((b, vals[0] + vals[1] if op == "+" else vals[0] - vals[1]))
            return out
        if op == "*":
            out = []
            for b, (x, y) in self.many(e.args, env, br):
                if x.is_constant:
                    out.append((b, y.scale(x.const)))
                elif y.is_constant:
                    out.append((b, x.scale(y.const)))
                else:
                    raise FunTypeError("multiplication of two variables is not linear", e.pos)
            return out
        if op == "mod":
            raise FunTypeError("mod is not supported in linear arithmetic", e.pos)
        if op in ("<", "<=", ">", ">=", "=", "<>", "!="):
            return self.comparison(e, env, br)
        if op == "not":
            return [(b2, BoolLit(not t)) for b, v in self.value(e.args[0], env, br) for b2, t in self.split_bool(b, v)]
        if op in ("&&", "||"):
            out = []
            for b, (x, y) in self.many(e.args, env, br):
                for b1, tx in self.split_bool(b, x):
                    for b2, ty in self.split_bool(b1, y):
                        out.append((b2, BoolLit(tx and ty if op == "&&" else tx or ty)))
            return out
        if op == "=>":
            raise UnsupportedProperty("implication is only allowed at the top of a property", e.pos)
        raise FunTypeError(f"unknown operator {op}", e.pos)

    def comparison(self, e: Prim, env: dict, br: _Branch) -> list:
        op = "!=" if e.op == "<>" else e.op
        ty = self.type_of(e.args[0], env)
        out = []
        for b, (x, y) in self.many(e.args, env, br):
            if ty == INT:
                for truth in (True, False):
                    c = compare(x, op if truth else _NEGATED[op], y)
                    if not c.is_false:
                        out.append((b.add(c), BoolLit(truth)))
            elif ty == BOOL:
                for b1, tx in self.split_bool(b, x):
                    for b2, ty_ in self.split_bool(b1, y):
                        out.append((b2, BoolLit((tx == ty_) == (op == "="))))
            else:
                # only a positive hypothesis can be expressed, by unification
                raise UnsupportedProperty(
                    "comparison of data values is only supported as a property hypothesis; "
                    "define it as a function otherwise", e.pos)
        return out

    def match(self, e: Match, env: dict, br: _Branch) -> list:
        ty = self.type_of(e.scrutinee, env)
        owned = [c for c, (td, _) in self.ctor_types.items() if td.type == ty]
        covered = [c.ctor for c in e.cases if c.ctor is not None]
        out = []
        for b, scrut in self.value(e.scrutinee, env, br):
            for case in e.cases:
                ctors = [case.ctor] if case.ctor is not None else [c for c in owned if c not in covered]
                for ctor in ctors:
                    td, argt = self.ctor_types[ctor]
                    cenv = dict(env)
                    pvars = []
                    for v, t in zip(case.vars or ("_",) * len(argt), argt):
                        pv = Var(self.bind(v) if v != "_" else self.name("U"), t)
                        pvars.append(pv)
                        if v != "_":
                            cenv[v] = (LinExpr.var(pv.name) if t == INT else pv, t)
                    pattern = Ctor(self.ctor_names[ctor], tuple(pvars), ty)
                    out.extend(self.value(case.body, cenv, b.equate(scrut, pattern)))
        return out

    # -- clause assembly -----------------------------------------------------

    def close(self, head: Optional[Atom], br: _Branch) -> Optional[Clause]:
        s = unify_all(br.eqs) if br.eqs else {}
        if s is None:
            return None
        c = substitute_constraint(br.constraint, s) if s else br.constraint
        if c.is_false:
            return None
        clause = Clause(
            head.apply(s) if (head is not None and s) else head,
            c,
            tuple(a.apply(s) for a in br.atoms) if s else br.atoms,
        )
        return lift_literals(clause, self.supply)

    def function(self, f: FunDef) -> list:
        self.reset()
        params = [Var(self.bind(p), t) for p, t in zip(f.params, f.param_types)]
        env = {p: (LinExpr.var(v.name) if v.type == INT else v, v.type) for p, v in zip(f.params, params)}
        clauses = []
        for br, val in self.value(f.body, env, _Branch()):
            if f.result_type == INT:
                r = self.name("R")
                br = br.add(compare(LinExpr.var(r), "=", val))
                result: Term = Var(r, INT)
            elif f.result_type == BOOL and isinstance(val, BoolLit):
                br, result = self.as_term(br, val, BOOL)
            else:
                result = val
            cl = self.close(Atom(f.name, tuple(params) + (result,)), br)
            if cl is not None:
                clauses.append(cl)
        return clauses

    def assume(self, e, env: dict, br: _Branch) -> list:
        """Branches in which the hypothesis conjunct ``e`` holds."""
        if isinstance(e, Prim) and e.op == "=" and self.type_of(e.args[0], env) not in (INT, BOOL):
            # data equality: expressible positively, by unification
            return [b.equate(x, y) for b, (x, y) in self.many(e.args, env, br)]
        return [b2 for b, v in self.value(e, env, br) for b2, t in self.split_bool(b, v) if t]

    def goals(self, prop: Property) -> list:
        self.reset()
        env = {}
        for n, t in prop.vars:
            v = self.bind(n)
            env[n] = (LinExpr.var(v) if t == INT else Var(v, t), t)
        body = prop.body
        if isinstance(body, Prim) and body.op == "=>":
            hyp, concl = body.args
        else:
            hyp, concl = None, body
        conjuncts = []

        def flatten(e):
            if isinstance(e, Prim) and e.op == "&&":
                flatten(e.args[0])
                flatten(e.args[1])
            else:
                conjuncts.append(e)

        flatten(concl)
        hyps = conjuncts[:0]
        if hyp is not None:
            split = conjuncts
            conjuncts = hyps
            flatten(hyp)
            hyps, conjuncts = conjuncts, split
        starts = [_Branch()]
        for h in hyps:
            starts = [b2 for b in starts for b2 in self.assume(h, env, b)]
        out = []
        for conj in conjuncts:
            for start in starts:
                for b, v in self.value(conj, env, start):
                    for b2, truth in self.split_bool(b, v):
                        if not truth:
                            cl = self.close(None, b2)
                            if cl is not None:
                                out.append(cl)
        if not out:
            # every refutation path is contradictory: keep an explicit unsat goal
            out.append(Clause(None, FALSE, ()))
        return out


def translate_program(fp: FunProgram) -> Program:
    """Clauses, signatures and functional annotations for every function."""
    tr = _Translator(fp)
    clauses, sigs, anns = [], [], []
    for f in fp.functions:
        sigs.append((f.name, tuple(f.param_types) + (f.result_type,)))
        anns.append(FunctionalAnnotation(f.name, tuple(range(f.arity)), (f.arity,)))
        clauses.extend(tr.function(f))
    return Program(fp.type_defs, tuple(clauses), tuple(anns), tuple(sigs))


def translate_property(fp: FunProgram, prop: Optional[Property] = None) -> list:
    """Goals whose unsatisfiability refutes the property.

    The hypothesis is kept positively and each conjunct of the conclusion is
    negated, giving one goal per conjunct (and per branch of the conjunct).
    """
    prop = prop if prop is not None else fp.property
    if prop is None:
        return []
    if isinstance(prop.body, Prim) and prop.body.op == "=>":
        _reject_nested_implication(prop.body.args[0])
        _reject_nested_implication(prop.body.args[1])
    else:
        _reject_nested_implication(prop.body)
    return _Translator(fp).goals(prop)


def _reject_nested_implication(e):
    if isinstance(e, Prim):
        if e.op == "=>":
            raise UnsupportedProperty("implication is only allowed at the top of a property", e.pos)
        for a in e.args:
            _reject_nested_implication(a)
    for f in ("cond", "then", "orelse", "value", "body", "scrutinee"):
        if hasattr(e, f):
            _reject_nested_implication(getattr(e, f))
    for f in ("args", "cases"):
        if hasattr(e, f) and not isinstance(e, Prim):
            for a in getattr(e, f):
                _reject_nested_implication(a)


def translate(fp: FunProgram) -> Program:
    """Program clauses followed by the property goals (if any)."""
    prog = translate_program(fp)
    return prog.with_clauses(prog.clauses + tuple(translate_property(fp)))
