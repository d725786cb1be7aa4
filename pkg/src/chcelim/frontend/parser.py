"""Lexer, recursive-descent parser and monomorphic type checker for the
source language.

Example::

    type tree = Leaf | Node of int * tree * tree;;
    let min x y = if x < y then x else y;;
    let rec minleaf t = match t with
      | Leaf -> 0
      | Node(x, l, r) -> 1 + min (minleaf l) (minleaf r);;
    property forall n t. n >= 0 => minleaf (leftdrop n t) + n >= minleaf t;;

Lists of integers are built in: ``[]``, ``x :: xs``, ``[1; 2]`` and the type
``int list``.  Comments are ``(* ... *)`` and nest.
"""

from __future__ import annotations

import re
from dataclasses import replace
from typing import Optional

from ..core import BOOL, INT, TypeDef, TypeExpr, named
from .ast import (
    BoolConst,
    Call,
    Case,
    CtorApp,
    FunDef,
    FunProgram,
    FunSyntaxError,
    FunTypeError,
    If,
    Let,
    Match,
    Name,
    NonExhaustiveMatch,
    Num,
    Prim,
    Property,
    UnsupportedProperty,
)

LIST_TYPE = "list"
NIL, CONS = "[]", "::"

KEYWORDS = {
    "type", "of", "let", "rec", "in", "match", "with", "if", "then", "else",
    "true", "false", "not", "property", "forall", "mod",
}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>;;|->|=>|::|<>|!=|<=|>=|&&|\|\||[-+*=<>|()\[\];,.:])
    """,
    re.VERBOSE,
)


def _lex(text: str) -> list:
    toks = []
    i, line, col = 0, 1, 1

    def advance(chunk: str):
        nonlocal line, col
        for ch in chunk:
            if ch == "\n":
                line, col = line + 1, 1
            else:
                col += 1

    while i < len(text):
        if text.startswith("(*", i):
            depth, j, start = 0, i, (line, col)
            while j < len(text):
                if text.startswith("(*", j):
                    depth, j = depth + 1, j + 2
                elif text.startswith("*)", j):
                    depth, j = depth - 1, j + 2
                    if depth == 0:
                        break
                else:
                    j += 1
            if depth:
                raise FunSyntaxError("unterminated comment", start)
            advance(text[i:j])
            i = j
            continue
        m = _TOKEN.match(text, i)
        if not m:
            raise FunSyntaxError(f"unexpected character {text[i]!r}", (line, col))
        kind, val = m.lastgroup, m.group()
        if kind != "ws":
            if kind == "ident" and val in KEYWORDS:
                kind = "kw"
            toks.append((kind, val, (line, col)))
        advance(val)
        i = m.end()
    toks.append(("eof", "", (line, col)))
    return toks


# ---------------------------------------------------------------- parser


class _Parser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.i = 0

    # token helpers
    def peek(self, k: int = 0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, val: str, k: int = 0) -> bool:
        kind, v, _ = self.peek(k)
        return v == val and kind in ("op", "kw")

    def pos(self):
        return self.peek()[2]

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, val: str):
        kind, v, pos = self.next()
        if v != val or kind not in ("op", "kw"):
            raise FunSyntaxError(f"expected {val!r}, found {v or 'end of input'!r}", pos)
        return pos

    def accept(self, val: str) -> bool:
        if self.at(val):
            self.i += 1
            return True
        return False

    def ident(self, upper: Optional[bool] = None) -> str:
        kind, v, pos = self.next()
        if kind != "ident":
            raise FunSyntaxError(f"expected an identifier, found {v or 'end of input'!r}", pos)
        if upper is not None and v[0].isupper() != upper:
            what = "constructor" if upper else "lower-case identifier"
            raise FunSyntaxError(f"expected a {what}, found {v!r}", pos)
        return v

    # top level
    def program(self):
        types, funs, prop = [], [], None
        while self.peek()[0] != "eof":
            if self.accept(";;"):
                continue
            if self.at("type"):
                types.append(self.typedef())
            elif self.at("let"):
                funs.append(self.fundef())
            elif self.at("property"):
                if prop is not None:
                    raise FunSyntaxError("only one property per program", self.pos())
                prop = self.property()
            else:
                kind, v, pos = self.peek()
                raise FunSyntaxError(f"expected 'type', 'let' or 'property', found {v!r}", pos)
        return types, funs, prop

    def typedef(self):
        pos = self.expect("type")
        name = self.ident(upper=False)
        self.expect("=")
        self.accept("|")
        ctors = []
        while True:
            cpos = self.pos()
            c = self.ident(upper=True)
            args = []
            if self.accept("of"):
                args.append(self.type_atom())
                while self.accept("*"):
                    args.append(self.type_atom())
            ctors.append((c, tuple(args), cpos))
            if not self.accept("|"):
                break
        return name, tuple(ctors), pos

    def type_atom(self):
        if self.accept("("):
            t = self.type_atom()
            self.expect(")")
        else:
            pos = self.pos()
            name = self.ident(upper=False)
            t = ("name", name, pos)
        while self.at("list", 0) or (self.peek()[0] == "ident" and self.peek()[1] == "list"):
            pos = self.pos()
            self.next()
            t = ("list", t, pos)
        return t

    def fundef(self):
        pos = self.expect("let")
        rec = self.accept("rec")
        name = self.ident(upper=False)
        params = []
        while not self.at("="):
            if self.accept("("):
                if self.accept(")"):
                    continue  # unit parameter
                pname = self.ident(upper=False)
                self.expect(":")
                ann = self.type_atom()
                self.expect(")")
                params.append((pname, ann))
            else:
                params.append((self.ident(upper=False), None))
        self.expect("=")
        body = self.expr()
        self.accept(";;")
        return name, tuple(params), body, rec, pos

    def property(self):
        pos = self.expect("property")
        self.expect("forall")
        names = []
        while not self.at("."):
            names.append(self.ident(upper=False))
        self.expect(".")
        body = self.implication()
        self.accept(";;")
        return Property(tuple((n, None) for n in names), body, pos)

    # expressions, lowest precedence first
    def implication(self):
        lhs = self.expr()
        if self.at("=>"):
            pos = self.next()[2]
            rhs = self.expr()
            if self.at("=>"):
                raise UnsupportedProperty("chained implications", self.pos())
            return Prim("=>", (lhs, rhs), pos)
        return lhs

    def expr(self):
        pos = self.pos()
        if self.accept("if"):
            c = self.expr()
            self.expect("then")
            t = self.expr()
            self.expect("else")
            e = self.expr()
            return If(c, t, e, pos)
        if self.accept("let"):
            if self.at("rec"):
                raise FunSyntaxError("local recursive definitions are not supported", self.pos())
            v = self.ident(upper=False)
            if not self.at("="):
                raise FunTypeError("local function definitions are not supported", self.pos())
            self.expect("=")
            val = self.expr()
            self.expect("in")
            return Let(v, val, self.expr(), pos)
        if self.accept("match"):
            scrut = self.expr()
            self.expect("with")
            self.accept("|")
            cases = [self.case()]
            while self.accept("|"):
                cases.append(self.case())
            return Match(scrut, tuple(cases), pos)
        return self.disj()

    def case(self):
        pos = self.pos()
        if self.accept("["):
            self.expect("]")
            ctor, vs = NIL, ()
        elif self.peek()[0] == "ident" and self.peek()[1][0].isupper():
            ctor = self.ident(upper=True)
            vs = []
            if self.accept("("):
                vs.append(self.ident(upper=False))
                while self.accept(","):
                    vs.append(self.ident(upper=False))
                self.expect(")")
            elif self.peek()[0] == "ident" and not self.peek()[1][0].isupper():
                vs.append(self.ident(upper=False))
            vs = tuple(vs)
        else:
            head = self.ident(upper=False)
            if self.accept("::"):
                ctor, vs = CONS, (head, self.ident(upper=False))
            elif head == "_":
                ctor, vs = None, ()
            else:
                raise FunSyntaxError("patterns must be constructor applications", pos)
        self.expect("->")
        return Case(ctor, vs, self.expr(), pos)

    def _binary(self, ops, sub, assoc="left"):
        lhs = sub()
        while any(self.at(o) for o in ops):
            kind, op, pos = self.next()
            rhs = sub()
            lhs = Prim(op, (lhs, rhs), pos)
            if assoc == "none" and any(self.at(o) for o in ops):
                raise FunSyntaxError("comparison operators do not associate", self.pos())
        return lhs

    def disj(self):
        return self._binary(("||",), self.conj)

    def conj(self):
        return self._binary(("&&",), self.comparison)

    def comparison(self):
        return self._binary(("=", "<>", "!=", "<", "<=", ">", ">="), self.cons, assoc="none")

    def cons(self):
        head = self.additive()
        if self.at("::"):
            pos = self.next()[2]
            return CtorApp(CONS, (head, self.cons()), pos)
        return head

    def additive(self):
        return self._binary(("+", "-"), self.multiplicative)

    def multiplicative(self):
        return self._binary(("*", "mod"), self.unary)

    def unary(self):
        pos = self.pos()
        if self.accept("-"):
            return Prim("neg", (self.unary(),), pos)
        if self.accept("not"):
            return Prim("not", (self.unary(),), pos)
        return self.application()

    def _starts_atom(self) -> bool:
        kind, v, _ = self.peek()
        if kind in ("num", "ident"):
            return True
        return (kind == "kw" and v in ("true", "false")) or (kind == "op" and v in ("(", "["))

    def application(self):
        kind, v, pos = self.peek()
        if kind == "ident" and v[0].isupper():
            self.next()
            if self.at("("):
                self.next()
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                return CtorApp(v, tuple(args), pos)
            if self._starts_atom() and not (self.peek()[0] == "ident" and self.peek()[1][0].isupper()):
                return CtorApp(v, (self.atom(),), pos)
            return CtorApp(v, (), pos)
        if kind == "ident" and self._arg_follows(1):
            self.next()
            args = []
            while self._starts_atom():
                if self.at("(") and self.at(")", 1):
                    self.i += 2
                    continue  # unit argument
                args.append(self.atom())
            return Call(v, tuple(args), pos)
        return self.atom()

    def _arg_follows(self, k: int) -> bool:
        kind, v, _ = self.peek(k)
        if kind in ("num", "ident"):
            return True
        return (kind == "kw" and v in ("true", "false")) or (kind == "op" and v in ("(", "["))

    def atom(self):
        kind, v, pos = self.next()
        if kind == "num":
            return Num(int(v), pos)
        if kind == "kw" and v in ("true", "false"):
            return BoolConst(v == "true", pos)
        if kind == "ident":
            if v[0].isupper():
                return CtorApp(v, (), pos)
            return Name(v, pos)
        if v == "(":
            if self.accept(")"):
                raise FunTypeError("unit values are only allowed as arguments of nullary functions", pos)
            e = self.implication_or_expr()
            self.expect(")")
            return e
        if v == "[":
            items = []
            if not self.at("]"):
                items.append(self.expr())
                while self.accept(";"):
                    items.append(self.expr())
            self.expect("]")
            out = CtorApp(NIL, (), pos)
            for it in reversed(items):
                out = CtorApp(CONS, (it, out), pos)
            return out
        raise FunSyntaxError(f"unexpected {v or 'end of input'!r}", pos)

    def implication_or_expr(self):
        return self.implication()


# ---------------------------------------------------------------- types


class _TVar:
    __slots__ = ("id",)

    def __init__(self, ident: int):
        self.id = ident

    def __repr__(self):
        return f"'t{self.id}"


class _Checker:
    def __init__(self, typedefs: list, ctor_of: dict):
        self.typedefs = typedefs
        self.ctor_of = ctor_of  # source ctor -> (TypeExpr, (arg types))
        self.subst: dict = {}
        self.count = 0
        self.sigs: dict = {}  # function -> (param types, result type)

    def fresh(self) -> _TVar:
        self.count += 1
        return _TVar(self.count)

    def resolve(self, t):
        while isinstance(t, _TVar) and t.id in self.subst:
            t = self.subst[t.id]
        return t

    def unify(self, a, b, pos, what="expression"):
        a, b = self.resolve(a), self.resolve(b)
        if isinstance(a, _TVar):
            if not (isinstance(b, _TVar) and b.id == a.id):
                self.subst[a.id] = b
            return
        if isinstance(b, _TVar):
            self.subst[b.id] = a
            return
        if a != b:
            raise FunTypeError(f"{what} has type {b}, expected {a}", pos)

    def final(self, t) -> TypeExpr:
        t = self.resolve(t)
        return INT if isinstance(t, _TVar) else t

    def infer(self, e, env: dict):
        if isinstance(e, Num):
            return INT
        if isinstance(e, BoolConst):
            return BOOL
        if isinstance(e, Name):
            if e.name in env:
                return env[e.name]
            if e.name in self.sigs:
                params, res = self.sigs[e.name]
                if params:
                    raise FunTypeError(f"function {e.name} used as a value (higher-order use)", e.pos)
                return res
            raise FunTypeError(f"unbound variable {e.name}", e.pos)
        if isinstance(e, CtorApp):
            if e.ctor not in self.ctor_of:
                raise FunTypeError(f"unknown constructor {e.ctor}", e.pos)
            ty, args = self.ctor_of[e.ctor]
            if len(args) != len(e.args):
                raise FunTypeError(f"constructor {e.ctor} expects {len(args)} arguments, got {len(e.args)}", e.pos)
            for a, t in zip(e.args, args):
                self.unify(t, self.infer(a, env), getattr(a, "pos", e.pos), f"argument of {e.ctor}")
            return ty
        if isinstance(e, Call):
            if e.fn in env:
                raise FunTypeError(f"{e.fn} is a variable, not a function (higher-order use)", e.pos)
            if e.fn not in self.sigs:
                raise FunTypeError(f"unknown function {e.fn}", e.pos)
            params, res = self.sigs[e.fn]
            if len(params) != len(e.args):
                raise FunTypeError(
                    f"{e.fn} expects {len(params)} arguments, got {len(e.args)} (partial application is higher-order)",
                    e.pos,
                )
            for a, t in zip(e.args, params):
                self.unify(t, self.infer(a, env), getattr(a, "pos", e.pos), f"argument of {e.fn}")
            return res
        if isinstance(e, Prim):
            return self._prim(e, env)
        if isinstance(e, If):
            self.unify(BOOL, self.infer(e.cond, env), e.pos, "condition")
            t = self.infer(e.then, env)
            self.unify(t, self.infer(e.orelse, env), e.pos, "else branch")
            return t
        if isinstance(e, Let):
            t = self.infer(e.value, env)
            return self.infer(e.body, {**env, e.var: t})
        if isinstance(e, Match):
            return self._match(e, env)
        raise FunTypeError(f"unsupported expression {e!r}")

    def _prim(self, e: Prim, env: dict):
        op = e.op
        if op in ("+", "-", "*", "mod", "neg"):
            for a in e.args:
                self.unify(INT, self.infer(a, env), getattr(a, "pos", e.pos), f"operand of {op}")
            return INT
        if op in ("<", "<=", ">", ">="):
            for a in e.args:
                self.unify(INT, self.infer(a, env), getattr(a, "pos", e.pos), f"operand of {op}")
            return BOOL
        if op in ("=", "<>", "!="):
            t = self.infer(e.args[0], env)
            self.unify(t, self.infer(e.args[1], env), e.pos, f"right operand of {op}")
            return BOOL
        if op in ("&&", "||", "not", "=>"):
            for a in e.args:
                self.unify(BOOL, self.infer(a, env), getattr(a, "pos", e.pos), f"operand of {op}")
            return BOOL
        raise FunTypeError(f"unknown operator {op}", e.pos)

    def _match(self, e: Match, env: dict):
        st = self.infer(e.scrutinee, env)
        first = next((c for c in e.cases if c.ctor is not None), None)
        if first is None:
            raise FunTypeError("match needs at least one constructor pattern", e.pos)
        if first.ctor not in self.ctor_of:
            raise FunTypeError(f"unknown constructor {first.ctor}", first.pos)
        ty = self.ctor_of[first.ctor][0]
        self.unify(ty, st, e.pos, "matched expression")
        td = next(td for td in self.typedefs if td.type == ty)
        owned = [c for c, t in self.ctor_of.items() if t[0] == ty]
        seen: list = []
        result = self.fresh()
        wildcard = False
        for case in e.cases:
            if wildcard:
                raise FunTypeError("case after a wildcard is unreachable", case.pos)
            cenv = dict(env)
            if case.ctor is None:
                wildcard = True
                if len(seen) == len(owned):
                    raise FunTypeError("wildcard case is unreachable", case.pos)
            else:
                if case.ctor not in self.ctor_of or self.ctor_of[case.ctor][0] != ty:
                    raise FunTypeError(f"constructor {case.ctor} does not belong to type {td.name}", case.pos)
                if case.ctor in seen:
                    raise FunTypeError(f"patterns overlap: {case.ctor} matched twice", case.pos)
                seen.append(case.ctor)
                args = self.ctor_of[case.ctor][1]
                if len(args) != len(case.vars):
                    raise FunTypeError(f"pattern {case.ctor} needs {len(args)} variables", case.pos)
                names = [v for v in case.vars if v != "_"]
                if len(set(names)) != len(names):
                    raise FunTypeError("pattern variables must be distinct", case.pos)
                for v, t in zip(case.vars, args):
                    if v != "_":
                        cenv[v] = t
            self.unify(result, self.infer(case.body, cenv), case.pos, "case body")
        missing = [c for c in owned if c not in seen]
        if missing and not wildcard:
            raise NonExhaustiveMatch(f"cases {', '.join(missing)} of type {td.name} are not covered", e.pos)
        return result


# ---------------------------------------------------------------- entry point


def _chc_ctor_name(src: str) -> str:
    if src == NIL:
        return "nil"
    if src == CONS:
        return "cons"
    return src[0].lower() + src[1:]


def _uses_lists(node) -> bool:
    if isinstance(node, CtorApp) and node.ctor in (NIL, CONS):
        return True
    if isinstance(node, Case) and node.ctor in (NIL, CONS):
        return True
    if isinstance(node, tuple):
        return any(_uses_lists(x) for x in node)
    if hasattr(node, "__dataclass_fields__"):
        return any(_uses_lists(getattr(node, f)) for f in node.__dataclass_fields__ if f != "pos")
    return False


def parse_fun(text: str) -> FunProgram:
    """Parse and type-check a source program."""
    p = _Parser(text)
    raw_types, raw_funs, prop = p.program()

    # type definitions
    names = [n for n, _, _ in raw_types]
    typedefs: list = []
    ctor_of: dict = {}
    ctor_names: dict = {}

    def resolve_type(t) -> TypeExpr:
        if t[0] == "list":
            inner = resolve_type(t[1])
            if inner != INT:
                raise FunTypeError("only int list is built in; declare other list types explicitly", t[2])
            need_list[0] = True
            return named(LIST_TYPE)
        n = t[1]
        if n == "int":
            return INT
        if n == "bool":
            return BOOL
        if n not in names:
            raise FunTypeError(f"unknown type {n}", t[2])
        return named(n)

    need_list = [any(_uses_lists(f) for f in raw_funs) or _uses_lists(prop)]
    for name, ctors, pos in raw_types:
        if name in ("int", "bool", LIST_TYPE):
            raise FunTypeError(f"type name {name} is reserved", pos)
        if names.count(name) > 1:
            raise FunTypeError(f"type {name} defined twice", pos)
        cs = []
        for c, args, cpos in ctors:
            if c in ctor_of:
                raise FunTypeError(f"constructor {c} defined twice", cpos)
            chc = _chc_ctor_name(c)
            if chc in ctor_names.values():
                raise FunTypeError(f"constructor {c} clashes with another after lower-casing", cpos)
            argt = tuple(resolve_type(a) for a in args)
            ctor_of[c] = (named(name), argt)
            ctor_names[c] = chc
            cs.append((chc, argt))
        typedefs.append(TypeDef(name, tuple(cs)))
    for name, params, _, _, _ in raw_funs:
        for _, ann in params:
            if ann is not None:
                resolve_type(ann)
    if need_list[0]:
        lt = named(LIST_TYPE)
        typedefs.append(TypeDef(LIST_TYPE, (("nil", ()), ("cons", (INT, lt)))))
        ctor_of[NIL] = (lt, ())
        ctor_of[CONS] = (lt, (INT, lt))
        ctor_names[NIL], ctor_names[CONS] = "nil", "cons"

    chk = _Checker(typedefs, ctor_of)
    funs = []
    for name, params, body, rec, pos in raw_funs:
        if name in chk.sigs:
            raise FunTypeError(f"function {name} defined twice", pos)
        pnames = [n for n, _ in params]
        if len(set(pnames)) != len(pnames):
            raise FunTypeError(f"repeated parameter in {name}", pos)
        ptypes = [resolve_type(a) if a is not None else chk.fresh() for _, a in params]
        res = chk.fresh()
        if rec:
            chk.sigs[name] = (ptypes, res)
        chk.unify(res, chk.infer(body, dict(zip(pnames, ptypes))), pos, f"body of {name}")
        final_p = tuple(chk.final(t) for t in ptypes)
        final_r = chk.final(res)
        chk.sigs[name] = (list(final_p), final_r)
        funs.append(FunDef(name, tuple(pnames), body, rec, final_p, final_r, pos))

    if prop is not None:
        vtypes = {n: chk.fresh() for n, _ in prop.vars}
        if len(vtypes) != len(prop.vars):
            raise FunTypeError("repeated variable in property", prop.pos)
        chk.unify(BOOL, chk.infer(prop.body, dict(vtypes)), prop.pos, "property")
        prop = replace(prop, vars=tuple((n, chk.final(vtypes[n])) for n, _ in prop.vars))

    return FunProgram(tuple(typedefs), tuple(funs), prop, tuple(ctor_names.items()))
