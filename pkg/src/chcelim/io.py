"""Text formats: the Prolog-like CHC syntax, SMT-LIB2 Horn output, and the
external solver client.

CHC syntax::

    % comment
    :- type tree = leaf | node(int, tree, tree).
    :- pred minleaf(tree, int).
    %@ functional minleaf(in, out).
    minleaf(node(X, L, R), M) :- M = M3 + 1, minleaf(L, M1), minleaf(R, M2), min(M1, M2, M3).
    false :- N >= 0, M + N < K, leftdrop(N, T, U), minleaf(U, M), minleaf(T, K).

Variables start with an upper-case letter or ``_``.  Lists may be written
``[]`` and ``[H | T]`` when the program declares ``nil`` and ``cons``.
Constraint operators: ``=  \\=  !=  <  =<  <=  >=  >``; boolean variables are
constrained with ``B = true`` / ``B = false``.
"""

from __future__ import annotations

import os
import re
import shlex
import signal
import subprocess
import tempfile
import time
from dataclasses import dataclass
from typing import Optional

from .constraints import EQ, LE, NE, TRUE, Constraint, LinExpr, compare
from .core import (
    BOOL,
    INT,
    Atom,
    BoolLit,
    Clause,
    Ctor,
    FunctionalAnnotation,
    IntLit,
    Program,
    Term,
    TypeDef,
    TypeExpr,
    Var,
    VarSupply,
    format_clause,
    lift_literals,
    named,
    unify_all,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


# ---------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<directive>%@[^\n]*)
  | (?P<comment>%[^\n]*)
  | (?P<num>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>:-|\\=|!=|=<|<=|>=|=|<|>|\+|-|\*|\(|\)|\[|\]|\||,|\.)
    """,
    re.VERBOSE,
)


def _lex(text: str) -> list:
    out = []
    pos = 0
    line = 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line)
        kind = m.lastgroup
        val = m.group()
        if kind not in ("ws", "comment"):
            out.append((kind, val, line))
        line += val.count("\n")
        pos = m.end()
    return out


# ---------------------------------------------------------------- raw syntax


class _Stream:
    def __init__(self, toks: list):
        self.toks = toks
        self.i = 0

    def peek(self, k: int = 0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else ("eof", "", self.toks[-1][2] if self.toks else 0)

    def next(self):
        t = self.peek()
        self.i += 1
        return t

    def expect(self, val: str):
        t = self.next()
        if t[1] != val:
            raise ParseError(f"expected {val!r}, found {t[1]!r}", t[2])
        return t

    def accept(self, val: str) -> bool:
        if self.peek()[1] == val:
            self.i += 1
            return True
        return False


_RELOPS = {"=": "=", "\\=": "!=", "!=": "!=", "<": "<", "=<": "<=", "<=": "<=", ">=": ">=", ">": ">"}


def _is_var_name(s: str) -> bool:
    return s[0].isupper() or s[0] == "_"


def _parse_expr(s: _Stream):
    node = _parse_product(s)
    while s.peek()[1] in ("+", "-"):
        op = s.next()[1]
        node = ("bin", op, node, _parse_product(s))
    return node


def _parse_product(s: _Stream):
    node = _parse_unary(s)
    while s.peek()[1] == "*":
        s.next()
        node = ("bin", "*", node, _parse_unary(s))
    return node


def _parse_unary(s: _Stream):
    if s.accept("-"):
        return ("neg", _parse_unary(s))
    return _parse_primary(s)


def _parse_primary(s: _Stream):
    kind, val, line = s.next()
    if kind == "num":
        return ("int", int(val), line)
    if val == "(":
        e = _parse_expr(s)
        s.expect(")")
        return e
    if val == "[":
        items = []
        tail = None
        if s.accept("]"):
            return ("list", items, tail, line)
        items.append(_parse_expr(s))
        while s.accept(","):
            items.append(_parse_expr(s))
        if s.accept("|"):
            tail = _parse_expr(s)
        s.expect("]")
        return ("list", items, tail, line)
    if kind == "name":
        if _is_var_name(val):
            return ("var", val, line)
        if val in ("true", "false") and s.peek()[1] != "(":
            return ("bool", val == "true", line)
        args = []
        if s.accept("("):
            args.append(_parse_expr(s))
            while s.accept(","):
                args.append(_parse_expr(s))
            s.expect(")")
        return ("app", val, args, line)
    raise ParseError(f"unexpected token {val!r}", line)


def _parse_body_item(s: _Stream):
    left = _parse_expr(s)
    op = s.peek()[1]
    if op in _RELOPS:
        s.next()
        right = _parse_expr(s)
        return ("rel", _RELOPS[op], left, right)
    if left[0] != "app":
        raise ParseError("expected an atom or a comparison", s.peek()[2])
    return ("atom", left)


def _parse_type_expr(s: _Stream) -> TypeExpr:
    kind, val, line = s.next()
    if kind != "name":
        raise ParseError(f"expected a type, found {val!r}", line)
    if val == "int":
        return INT
    if val == "bool":
        return BOOL
    return named(val)


# ---------------------------------------------------------------- typing


class _ClauseBuilder:
    def __init__(self, prog: "_ProgramParser", line: int):
        self.p = prog
        self.line = line
        self.vtypes: dict = {}

    def err(self, msg: str):
        raise ParseError(msg, self.line)

    def _note(self, name: str, ty: TypeExpr):
        cur = self.vtypes.get(name)
        if cur is None:
            self.vtypes[name] = ty
        elif cur != ty:
            self.err(f"variable {name} used at types {cur} and {ty}")

    def infer(self, raw, expected: Optional[TypeExpr]):
        """Record variable types implied by a raw term at an expected type."""
        tag = raw[0]
        if tag == "var":
            if expected is not None:
                self._note(raw[1], expected)
        elif tag == "app":
            ctor = self.p.ctors.get(raw[1])
            if ctor is None:
                self.err(f"unknown constructor {raw[1]}")
            ty, args = ctor
            if len(args) != len(raw[2]):
                self.err(f"constructor {raw[1]} expects {len(args)} arguments")
            for a, t in zip(raw[2], args):
                self.infer(a, t)
        elif tag == "list":
            for it in raw[1]:
                self.infer(it, self.p.list_elem())
            if raw[2] is not None:
                self.infer(raw[2], expected or self.p.list_type())
        elif tag == "bin" or tag == "neg":
            for sub in raw[2:] if tag == "bin" else raw[1:]:
                self.infer(sub, INT)

    def type_of(self, raw) -> Optional[TypeExpr]:
        tag = raw[0]
        if tag == "var":
            return self.vtypes.get(raw[1])
        if tag == "app":
            c = self.p.ctors.get(raw[1])
            return c[0] if c else None
        if tag == "list":
            return self.p.list_type()
        if tag == "bool":
            return BOOL
        return INT

    def term(self, raw, expected: TypeExpr) -> Term:
        tag = raw[0]
        if tag == "var":
            return Var(raw[1], self.vtypes.get(raw[1], expected))
        if tag == "int":
            if expected != INT:
                self.err(f"integer {raw[1]} where {expected} expected")
            return IntLit(raw[1])
        if tag == "bool":
            if expected != BOOL:
                self.err(f"boolean literal where {expected} expected")
            return BoolLit(raw[1])
        if tag == "neg" and raw[1][0] == "int":
            return IntLit(-raw[1][1])
        if tag == "app":
            ty, args = self.p.ctors[raw[1]]
            if ty != expected:
                self.err(f"constructor {raw[1]} builds {ty}, {expected} expected")
            return Ctor(raw[1], tuple(self.term(a, t) for a, t in zip(raw[2], args)), ty)
        if tag == "list":
            lt = self.p.list_type()
            tail = self.term(raw[2], lt) if raw[2] is not None else Ctor("nil", (), lt)
            for it in reversed(raw[1]):
                tail = Ctor("cons", (self.term(it, self.p.list_elem()), tail), lt)
            return tail
        self.err("arithmetic is not allowed inside atom arguments")

    def linexpr(self, raw) -> LinExpr:
        tag = raw[0]
        if tag == "int":
            return LinExpr.constant(raw[1])
        if tag == "var":
            if self.vtypes.get(raw[1], INT) != INT:
                self.err(f"variable {raw[1]} of type {self.vtypes[raw[1]]} in arithmetic")
            return LinExpr.var(raw[1])
        if tag == "neg":
            return -self.linexpr(raw[1])
        if tag == "bin":
            a, b = self.linexpr(raw[2]), self.linexpr(raw[3])
            if raw[1] == "+":
                return a + b
            if raw[1] == "-":
                return a - b
            if a.is_constant:
                return b.scale(a.const)
            if b.is_constant:
                return a.scale(b.const)
            self.err("non-linear product")
        self.err("not an arithmetic expression")


class _ProgramParser:
    def __init__(self):
        self.type_defs: list = []
        self.ctors: dict = {}
        self.sigs: dict = {}
        self.anns: list = []
        self.clauses: list = []
        self.supply = VarSupply()

    def list_type(self) -> TypeExpr:
        if "cons" not in self.ctors:
            raise ParseError("list syntax needs a type with constructors nil and cons")
        return self.ctors["cons"][0]

    def list_elem(self) -> TypeExpr:
        self.list_type()
        return self.ctors["cons"][1][0]

    def directive(self, s: _Stream, line: int):
        kind, word, _ = s.next()
        if word == "type":
            _, name, _ = s.next()
            s.expect("=")
            ctors = []
            while True:
                _, cname, cl = s.next()
                args = []
                if s.accept("("):
                    args.append(_parse_type_expr(s))
                    while s.accept(","):
                        args.append(_parse_type_expr(s))
                    s.expect(")")
                ctors.append((cname, tuple(args)))
                if not s.accept("|"):
                    break
            s.expect(".")
            td = TypeDef(name, tuple(ctors))
            for c, args in td.constructors:
                if c in self.ctors:
                    raise ParseError(f"constructor {c} declared twice", line)
                self.ctors[c] = (td.type, args)
            self.type_defs.append(td)
        elif word == "pred":
            _, name, _ = s.next()
            args = []
            if s.accept("("):
                args.append(_parse_type_expr(s))
                while s.accept(","):
                    args.append(_parse_type_expr(s))
                s.expect(")")
            s.expect(".")
            self.sigs[name] = tuple(args)
        else:
            raise ParseError(f"unknown directive {word!r}", line)

    def functional(self, text: str, line: int):
        m = re.match(r"%@\s*functional\s+([a-z][A-Za-z0-9_']*)\s*\(([^)]*)\)\s*\.?\s*$", text)
        if not m:
            if text.strip() == "%@":
                return
            raise ParseError(f"bad annotation {text!r}", line)
        modes = [x.strip() for x in m.group(2).split(",")] if m.group(2).strip() else []
        if any(x not in ("in", "out") for x in modes):
            raise ParseError("functional modes must be 'in' or 'out'", line)
        ins = tuple(i for i, x in enumerate(modes) if x == "in")
        outs = tuple(i for i, x in enumerate(modes) if x == "out")
        self.anns.append(FunctionalAnnotation(m.group(1), ins, outs))

    def clause(self, s: _Stream, line: int):
        head_raw = _parse_primary(s)
        items = []
        if s.accept(":-"):
            items.append(_parse_body_item(s))
            while s.accept(","):
                items.append(_parse_body_item(s))
        s.expect(".")
        b = _ClauseBuilder(self, line)
        goal = head_raw[0] == "bool" and head_raw[1] is False
        if not goal and head_raw[0] != "app":
            raise ParseError("clause head must be an atom or false", line)
        atoms_raw = ([] if goal else [head_raw]) + [it[1] for it in items if it[0] == "atom"]
        for a in atoms_raw:
            sig = self.sigs.get(a[1])
            if sig is None:
                raise ParseError(f"undeclared predicate {a[1]}", line)
            if len(sig) != len(a[2]):
                raise ParseError(f"predicate {a[1]} expects {len(sig)} arguments", line)
            for arg, t in zip(a[2], sig):
                b.infer(arg, t)
        rels = [it for it in items if it[0] == "rel"]
        # propagate types through equalities until stable
        for _ in range(len(rels) + 1):
            for _, op, l, r in rels:
                lt, rt = b.type_of(l), b.type_of(r)
                if op in ("=", "!="):
                    if lt is None and rt is not None:
                        b.infer(l, rt)
                    elif rt is None and lt is not None:
                        b.infer(r, lt)
                else:
                    b.infer(l, INT)
                    b.infer(r, INT)
        for _, op, l, r in rels:
            for side in (l, r):
                b.infer(side, b.type_of(side) or INT)

        def atom(raw) -> Atom:
            sig = self.sigs[raw[1]]
            return Atom(raw[1], tuple(b.term(x, t) for x, t in zip(raw[2], sig)))

        head = None if goal else atom(head_raw)
        body = [atom(it[1]) for it in items if it[0] == "atom"]
        con = TRUE
        data_eqs = []
        bools = []
        for _, op, l, r in rels:
            ty = b.type_of(l) or b.type_of(r) or INT
            if ty == INT:
                con = con.conj(compare(b.linexpr(l), op, b.linexpr(r)))
            elif ty == BOOL:
                lt, rt = b.term(l, BOOL), b.term(r, BOOL)
                if isinstance(rt, Var) and isinstance(lt, BoolLit):
                    lt, rt = rt, lt
                if not (isinstance(lt, Var) and isinstance(rt, BoolLit)) or op not in ("=", "!="):
                    raise ParseError("boolean constraints must compare a variable with true/false", line)
                bools.append((lt.name, rt.value if op == "=" else not rt.value))
            else:
                if op != "=":
                    raise ParseError(f"only equality is allowed on type {ty}", line)
                data_eqs.append((b.term(l, ty), b.term(r, ty)))
        con = con.conj(Constraint((), tuple(bools)))
        cl = Clause(head, con, tuple(body))
        if data_eqs:
            mgu = unify_all(data_eqs)
            if mgu is None:
                return  # the clause body is unsatisfiable
            cl = cl.apply(mgu)
        self.clauses.append(lift_literals(cl, self.supply))

    def parse(self, text: str) -> Program:
        toks = _lex(text)
        s = _Stream([t for t in toks if t[0] != "directive"])
        for kind, val, line in toks:
            if kind == "directive":
                self.functional(val, line)
        while s.peek()[0] != "eof":
            line = s.peek()[2]
            if s.accept(":-"):
                self.directive(s, line)
            else:
                self.clause(s, line)
        prog = Program(tuple(self.type_defs), tuple(self.clauses), tuple(self.anns), tuple(self.sigs.items()))
        try:
            prog.check()
        except ValueError as e:
            raise ParseError(str(e)) from e
        return prog


def parse_chc(text: str) -> Program:
    """Parse the CHC text format into a typed :class:`Program`."""
    return _ProgramParser().parse(text)


def read_chc(path: str) -> Program:
    with open(path, encoding="utf-8") as f:
        return parse_chc(f.read())


# ---------------------------------------------------------------- printer


def _format_type(t: TypeExpr) -> str:
    return str(t)


def format_program(p: Program) -> str:
    lines = []
    for td in p.type_defs:
        cs = []
        for c, args in td.constructors:
            cs.append(c if not args else f"{c}({', '.join(_format_type(a) for a in args)})")
        lines.append(f":- type {td.name} = {' | '.join(cs)}.")
    for pred, sig in p.signatures:
        if sig:
            lines.append(f":- pred {pred}({', '.join(_format_type(t) for t in sig)}).")
        else:
            lines.append(f":- pred {pred}.")
    for ann in p.annotations:
        n = len(p.signature_map.get(ann.pred, ())) or (max(ann.inputs + ann.outputs, default=-1) + 1)
        modes = ["out" if i in ann.outputs else "in" for i in range(n)]
        lines.append(f"%@ functional {ann.pred}({', '.join(modes)}).")
    if lines:
        lines.append("")
    lines.extend(format_clause(c) for c in p.clauses)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- SMT-LIB2


class ExchangeError(ValueError):
    pass


def _q(name: str) -> str:
    return f"|{name}|"


def _smt_sort(t: TypeExpr) -> str:
    if t.kind == "int":
        return "Int"
    if t.kind == "bool":
        return "Bool"
    return _q(t.name)


def _smt_int(k: int) -> str:
    return str(k) if k >= 0 else f"(- {-k})"


def _smt_term(t: Term) -> str:
    if isinstance(t, Var):
        return _q(t.name)
    if isinstance(t, IntLit):
        return _smt_int(t.value)
    if isinstance(t, BoolLit):
        return "true" if t.value else "false"
    if not t.args:
        return _q(t.name)
    return f"({_q(t.name)} {' '.join(_smt_term(a) for a in t.args)})"


def _smt_constraint(c: Constraint) -> list[str]:
    out = []
    for a in c.linear:
        terms = [f"(* {_smt_int(k)} {_q(v)})" if k != 1 else _q(v) for v, k in a.coeffs]
        lhs = terms[0] if len(terms) == 1 else f"(+ {' '.join(terms)})"
        if not a.coeffs:
            lhs = "0"
        if a.rel == LE:
            out.append(f"(<= {lhs} {_smt_int(a.const)})")
        elif a.rel == EQ:
            out.append(f"(= {lhs} {_smt_int(a.const)})")
        else:
            out.append(f"(not (= {lhs} {_smt_int(a.const)}))")
    for v, pol in c.booleans:
        out.append(_q(v) if pol else f"(not {_q(v)})")
    return out


def emit_solver_exchange(p: Program, datatypes: bool = False) -> str:
    """SMT-LIB2 HORN problem for ``p``; byte-stable for equal programs.

    Data types are refused unless ``datatypes`` is set.
    """
    sigs = dict(p.signatures)
    for c in p.clauses:
        for a in c.atoms():
            sigs.setdefault(a.pred, tuple(t.type for t in a.args))
    needs_dt = any(not t.is_basic for sig in sigs.values() for t in sig)
    if needs_dt and not datatypes:
        raise ExchangeError("program has non-basic predicate arguments; enable datatype emission")
    lines = ["(set-logic HORN)"]
    if datatypes and p.type_defs:
        heads = " ".join(f"({_q(td.name)} 0)" for td in p.type_defs)
        bodies = []
        for td in p.type_defs:
            cs = []
            for c, args in td.constructors:
                sels = "".join(f" ({_q(f'{c}_{i + 1}')} {_smt_sort(t)})" for i, t in enumerate(args))
                cs.append(f"({_q(c)}{sels})")
            bodies.append(f"({' '.join(cs)})")
        lines.append(f"(declare-datatypes ({heads}) ({' '.join(bodies)}))")
    for pred in sorted(sigs):
        lines.append(f"(declare-fun {_q(pred)} ({' '.join(_smt_sort(t) for t in sigs[pred])}) Bool)")
    for c in p.clauses:
        typed: dict = {}
        for v in c.variables():
            typed[v.name] = v.type
        bool_vars = {v for v, _ in c.constraint.booleans}
        for v in c.constraint.variables():
            typed.setdefault(v, BOOL if v in bool_vars else INT)
        conj = _smt_constraint(c.constraint)
        conj += [_smt_atom(a) for a in c.body]
        if not conj:
            premise = "true"
        elif len(conj) == 1:
            premise = conj[0]
        else:
            premise = f"(and {' '.join(conj)})"
        concl = "false" if c.head is None else _smt_atom(c.head)
        body = f"(=> {premise} {concl})"
        if typed:
            binders = " ".join(f"({_q(n)} {_smt_sort(t)})" for n, t in typed.items())
            body = f"(forall ({binders}) {body})"
        lines.append(f"(assert {body})")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


def _smt_atom(a: Atom) -> str:
    if not a.args:
        return _q(a.pred)
    return f"({_q(a.pred)} {' '.join(_smt_term(t) for t in a.args)})"


# ---------------------------------------------------------------- solver client


@dataclass(frozen=True)
class SolverVerdict:
    status: str  # sat | unsat | unknown | timeout | solver-error
    wall_time: float
    detail: str = ""


DEFAULT_SOLVER_ENV = "CHCELIM_SOLVER"


def default_solver_command() -> str:
    return os.environ.get(DEFAULT_SOLVER_ENV, "z3")


def solve_external(text: str, solver_cmd: Optional[str] = None, timeout: float = 10.0) -> SolverVerdict:
    """Run a Horn solver on ``text`` (passed as a temporary file argument)."""
    cmd = shlex.split(solver_cmd or default_solver_command())
    with tempfile.NamedTemporaryFile("w", suffix=".smt2", delete=False, encoding="utf-8") as f:
        f.write(text)
        path = f.name
    start = time.monotonic()
    try:
        try:
            proc = subprocess.Popen(
                cmd + [path], stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True, start_new_session=True
            )
        except OSError as e:
            return SolverVerdict("solver-error", time.monotonic() - start, f"cannot start {cmd[0]}: {e}")
        try:
            out, err = proc.communicate(timeout=timeout)
        except subprocess.TimeoutExpired:
            try:
                os.killpg(proc.pid, signal.SIGKILL)
            except ProcessLookupError:
                pass
            proc.communicate()
            return SolverVerdict("timeout", time.monotonic() - start)
        wall = time.monotonic() - start
        for line in out.splitlines():
            tok = line.strip()
            if not tok or tok.startswith(";"):
                continue
            if tok in ("sat", "unsat", "unknown"):
                return SolverVerdict(tok, wall)
            if tok == "timeout":
                return SolverVerdict("timeout", wall)
            return SolverVerdict("solver-error", wall, (out + err).strip()[:2000])
        return SolverVerdict("solver-error", wall, (err or "no output").strip()[:2000])
    finally:
        os.unlink(path)
