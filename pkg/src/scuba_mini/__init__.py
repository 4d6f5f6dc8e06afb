"""Static out-of-bounds and use-after-free detection for MiniCUDA programs.

The pipeline: parse the source into an AST, lower it to a flat SSA-style
IR, extract per-value expression trees, summarize host allocations and
kernel memory accesses, generate bounded-integer constraint systems for
every access/launch pair, and decide them with an interval-propagation
solver.  A reference interpreter executes programs concretely so every
verdict can be cross-checked against real behavior.
"""
from __future__ import annotations

from .analyzer import (
    AnalysisResult,
    AnalyzerConfig,
    analyze_program,
    analyze_source,
)
from .errors import (
    AnalysisError,
    EtError,
    EtOverflowError,
    InterpreterError,
    LexError,
    LoweringError,
    MiniCudaError,
    ParseError,
    ResolutionError,
)
from .expr_trees import (
    BinOp,
    Builtin,
    Const,
    EtBuilder,
    LoopVar,
    Unknown,
    canonicalize,
    render_et,
)
from .frontend import parse_program, parse_source, render_program, tokenize
from .ir import IrModule, IrStatement, ValueId, lower
from .oracle import (
    ExecutionTrace,
    brute_force_all,
    brute_force_verdict,
    compile_program,
    interpret,
    replay_witness,
)
from .report import BUG_KINDS, Diagnostic, sort_diagnostics
from .solver import Constraint, Sat, SolverVar, Timeout, Unsat, solve
from .source import SourceLocation

__version__ = "0.1.0"

__all__ = [
    "AnalysisResult",
    "AnalyzerConfig",
    "analyze_program",
    "analyze_source",
    "AnalysisError",
    "EtError",
    "EtOverflowError",
    "InterpreterError",
    "LexError",
    "LoweringError",
    "MiniCudaError",
    "ParseError",
    "ResolutionError",
    "BinOp",
    "Builtin",
    "Const",
    "EtBuilder",
    "LoopVar",
    "Unknown",
    "canonicalize",
    "render_et",
    "parse_program",
    "parse_source",
    "render_program",
    "tokenize",
    "IrModule",
    "IrStatement",
    "ValueId",
    "lower",
    "ExecutionTrace",
    "brute_force_all",
    "brute_force_verdict",
    "compile_program",
    "interpret",
    "replay_witness",
    "BUG_KINDS",
    "Diagnostic",
    "sort_diagnostics",
    "Constraint",
    "Sat",
    "SolverVar",
    "Timeout",
    "Unsat",
    "solve",
    "SourceLocation",
    "__version__",
]
