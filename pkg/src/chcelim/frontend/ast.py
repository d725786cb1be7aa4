"""Abstract syntax of the first-order functional source language."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..core import TypeDef, TypeExpr

Pos = tuple  # (line, column), both 1-based


class FrontendError(ValueError):
    """Base class; carries the source position of the offending construct."""

    kind = "error"

    def __init__(self, message: str, pos: Optional[Pos] = None):
        where = f"{pos[0]}:{pos[1]}: " if pos else ""
        super().__init__(f"{where}{self.kind}: {message}")
        self.message = message
        self.pos = pos


class FunSyntaxError(FrontendError):
    kind = "syntax error"


class FunTypeError(FrontendError):
    kind = "type error"


class NonExhaustiveMatch(FunTypeError):
    kind = "non-exhaustive match"


class UnsupportedProperty(FrontendError):
    kind = "unsupported property"


# ---------------------------------------------------------------- expressions


@dataclass(frozen=True)
class Num:
    value: int
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class BoolConst:
    value: bool
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Name:
    name: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class CtorApp:
    ctor: str
    args: tuple
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Prim:
    """Primitive operator: + - * neg, comparisons, && || not =>."""

    op: str
    args: tuple
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class If:
    cond: object
    then: object
    orelse: object
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Let:
    var: str
    value: object
    body: object
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Case:
    ctor: Optional[str]  # None for a wildcard case
    vars: tuple  # pattern variables; "_" is anonymous
    body: object
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Match:
    scrutinee: object
    cases: tuple
    pos: Pos = field(default=(0, 0), compare=False)


Expr = object


# ---------------------------------------------------------------- top level


@dataclass(frozen=True)
class FunDef:
    name: str
    params: tuple
    body: Expr
    recursive: bool
    param_types: tuple = ()
    result_type: Optional[TypeExpr] = None
    pos: Pos = field(default=(0, 0), compare=False)

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class Property:
    """``forall vars. body``; variable types are filled in by type checking."""

    vars: tuple  # ((name, TypeExpr | None), ...)
    body: Expr
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class FunProgram:
    type_defs: tuple = ()
    functions: tuple = ()
    property: Optional[Property] = None
    # source constructor name -> CHC constructor name
    ctor_names: tuple = ()

    def function(self, name: str) -> FunDef:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def type_map(self) -> dict:
        return {td.name: td for td in self.type_defs}

    def ctor_signature(self, ctor: str) -> tuple:
        """(TypeDef, argument types) of a source constructor."""
        target = dict(self.ctor_names)[ctor]
        for td in self.type_defs:
            for c, args in td.constructors:
                if c == target:
                    return td, args
        raise KeyError(ctor)


def is_typedef_recursive(td: TypeDef) -> bool:
    return any(a == td.type for _, args in td.constructors for a in args)
