"""Exception hierarchy for the MiniCUDA toolchain.

Frontend errors (lexing, parsing, name resolution) map to CLI exit code 2;
anything else escaping the pipeline is an internal error (exit code 3).
"""
from __future__ import annotations

from .source import SourceLocation


class MiniCudaError(Exception):
    """Base class; optionally carries the source location of the offender."""

    def __init__(self, message: str, location: SourceLocation | None = None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)


class LexError(MiniCudaError):
    pass


class ParseError(MiniCudaError):
    pass


class ResolutionError(ParseError):
    """Undefined names, arity mismatches, reassignment, bad launch args."""


class LoweringError(MiniCudaError):
    pass


class EtError(MiniCudaError):
    """Expression-tree construction hit an unsupported defining statement."""


class EtOverflowError(EtError):
    """Constant folding exceeded the solver bound."""


class AnalysisError(MiniCudaError):
    pass


class InterpreterError(MiniCudaError):
    """Oracle misuse: missing inputs, infeasible enumeration, etc."""
