"""Source language front end: parsing, type checking and translation to CHCs."""

from .ast import (
    FrontendError,
    FunDef,
    FunProgram,
    FunSyntaxError,
    FunTypeError,
    NonExhaustiveMatch,
    Property,
    UnsupportedProperty,
)
from .parser import parse_fun
from .translate import translate, translate_program, translate_property

__all__ = [
    "FrontendError",
    "FunDef",
    "FunProgram",
    "FunSyntaxError",
    "FunTypeError",
    "NonExhaustiveMatch",
    "Property",
    "UnsupportedProperty",
    "parse_fun",
    "translate",
    "translate_program",
    "translate_property",
]
