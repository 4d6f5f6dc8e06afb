"""MiniCUDA frontend: lexer, AST, parser and source renderer."""
from __future__ import annotations

from .lexer import Token, tokenize
from .parser import parse_program, parse_source
from .pretty import render_expr, render_program

__all__ = [
    "Token",
    "tokenize",
    "parse_program",
    "parse_source",
    "render_expr",
    "render_program",
]
