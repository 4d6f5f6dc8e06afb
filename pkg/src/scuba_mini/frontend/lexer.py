"""Tokenizer for MiniCUDA source files.

Longest-match lexing over a fixed punctuation table; the launch chevrons
``<<<`` / ``>>>`` are single tokens so the parser never has to glue
comparison operators back together.
"""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import LexError
from ..source import SourceLocation

# ===== token kinds ==========================================================

IDENT = "IDENT"
INT = "INT"
EOF = "EOF"

# Keywords lex to a kind equal to their own spelling.
KEYWORDS = frozenset(
    {
        "__global__",
        "__shared__",
        "__input",
        "extern",
        "void",
        "int",
        "double",
        "float",
        "for",
        "if",
        "else",
        "return",
        "assert",
        "cudaMalloc",
        "cudaFree",
        "dim3",
        "atomicMin",
        "atomicMax",
        "atomicAdd",
    }
)

# Ordered longest-first so maximal munch is a plain linear scan.
_PUNCT = [
    ("<<<", "LAUNCH_OPEN"),
    (">>>", "LAUNCH_CLOSE"),
    ("<=", "LE"),
    (">=", "GE"),
    ("==", "EQEQ"),
    ("++", "PLUSPLUS"),
    ("<", "LT"),
    (">", "GT"),
    ("=", "ASSIGN"),
    ("+", "PLUS"),
    ("-", "MINUS"),
    ("*", "STAR"),
    ("/", "SLASH"),
    ("%", "PERCENT"),
    ("&", "AMP"),
    (".", "DOT"),
    (",", "COMMA"),
    (";", "SEMI"),
    ("(", "LPAREN"),
    (")", "RPAREN"),
    ("{", "LBRACE"),
    ("}", "RBRACE"),
    ("[", "LBRACKET"),
    ("]", "RBRACKET"),
]


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    loc: SourceLocation

    def __repr__(self) -> str:  # compact, test-friendly
        return f"Token({self.kind}, {self.text!r}, {self.loc.line}:{self.loc.column})"


def tokenize(source: str, filename: str = "<input>") -> list[Token]:
    """Tokenize ``source`` into a Token list terminated by an EOF token.

    Comments (``//`` and ``/* */``) and whitespace are discarded.  Raises
    LexError with the exact location of the first illegal character or an
    unterminated block comment.
    """
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(source)

    def loc() -> SourceLocation:
        return SourceLocation(filename, line, col)

    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        if source.startswith("/*", i):
            start = loc()
            end = source.find("*/", i + 2)
            if end < 0:
                raise LexError("unterminated block comment", start)
            for c in source[i : end + 2]:
                if c == "\n":
                    line += 1
                    col = 1
                else:
                    col += 1
            i = end + 2
            continue
        if ch.isdigit():
            start = loc()
            j = i
            while j < n and source[j].isdigit():
                j += 1
            tokens.append(Token(INT, source[i:j], start))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            start = loc()
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            kind = text if text in KEYWORDS else IDENT
            tokens.append(Token(kind, text, start))
            col += j - i
            i = j
            continue
        for lit, kind in _PUNCT:
            if source.startswith(lit, i):
                tokens.append(Token(kind, lit, loc()))
                col += len(lit)
                i += len(lit)
                break
        else:
            raise LexError(f"illegal character {ch!r}", loc())

    tokens.append(Token(EOF, "", loc()))
    return tokens
