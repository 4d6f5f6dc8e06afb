"""MiniCUDA abstract syntax tree.

Every node carries the SourceLocation of its introducing token; memory
accesses keep the location of the subscripted identifier so diagnostics,
lowered IR and interpreter traces all point at the same spot.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from ..source import SourceLocation

# Element types a pointer/array may carry.
ELEM_TYPES = ("int", "double", "float")

# Builtin identifier groups usable (only) inside kernels.
BUILTIN_GROUPS = ("threadIdx", "blockIdx", "blockDim", "gridDim")
AXES = ("x", "y", "z")

COMPARISON_RELS = ("<", "<=", ">", ">=", "==")


# ===== expressions ==========================================================


@dataclass
class IntLit:
    value: int
    loc: SourceLocation


@dataclass
class Ident:
    name: str
    loc: SourceLocation


@dataclass
class InputCall:
    """``__input()`` — one external integer; ``site`` numbers call sites in
    program (parse) order and is shared with the oracle's input provider."""

    site: int
    loc: SourceLocation


@dataclass
class BuiltinRef:
    group: str  # threadIdx | blockIdx | blockDim | gridDim
    axis: str  # x | y | z
    loc: SourceLocation


@dataclass
class BinaryOp:
    op: str  # + - * / %
    left: "Expr"
    right: "Expr"
    loc: SourceLocation


@dataclass
class IndexExpr:
    """Array load appearing inside an expression: ``a[i]`` or ``a[i][j]``."""

    base: str
    indices: list["Expr"]
    loc: SourceLocation


Expr = Union[IntLit, Ident, InputCall, BuiltinRef, BinaryOp, IndexExpr]


@dataclass
class Comparison:
    rel: str  # < <= > >= ==
    left: Expr
    right: Expr
    loc: SourceLocation


# ===== statements ===========================================================


@dataclass
class AssignStmt:
    """Scalar definition ``x = e;`` (or pointer alias when ``value`` is a
    bare Ident naming a pointer).  Single assignment: ``x`` must be fresh."""

    name: str
    value: Expr
    decl_type: Optional[str]
    loc: SourceLocation


@dataclass
class MallocStmt:
    name: str
    size: Expr
    elem_type: str
    loc: SourceLocation


@dataclass
class FreeStmt:
    name: str
    loc: SourceLocation


@dataclass
class Dim3Arg:
    """Launch dimension: 1-3 axis expressions; missing axes default to 1."""

    axes: list[Expr]
    loc: SourceLocation


@dataclass
class LaunchStmt:
    kernel: str
    grid: Dim3Arg
    block: Dim3Arg
    shm: Optional[Expr]
    args: list[Expr]
    loc: SourceLocation


@dataclass
class AssertStmt:
    cond: Comparison
    loc: SourceLocation


@dataclass
class ForStmt:
    """Counted loop ``for (i = lo; i < hi; i = i + 1) { ... }``."""

    var: str
    lower: Expr
    upper: Expr
    body: list["Stmt"]
    loc: SourceLocation


@dataclass
class IfStmt:
    cond: Comparison
    then_body: list["Stmt"]
    else_body: Optional[list["Stmt"]]
    loc: SourceLocation


@dataclass
class StoreStmt:
    """Array store ``a[i] = e;`` / ``a[i][j] = e;`` — loc is the base ident."""

    target: str
    indices: list[Expr]
    value: Expr
    loc: SourceLocation


@dataclass
class AtomicStmt:
    """``atomicMin(&a[i], e);`` and friends — one read-write access."""

    op: str  # atomicMin | atomicMax | atomicAdd
    target: str
    index: Expr
    value: Expr
    loc: SourceLocation


@dataclass
class ReturnStmt:
    loc: SourceLocation


@dataclass
class ExternSharedDecl:
    """``extern __shared__ int smem[];`` — the dynamic shared base."""

    name: str
    elem_type: str
    loc: SourceLocation


@dataclass
class SharedArrayDecl:
    """``__shared__ int tile[N];`` or 2-D ``tile[R][C]``."""

    name: str
    elem_type: str
    dims: list[Expr]
    loc: SourceLocation


@dataclass
class LocalArrayDecl:
    """Per-thread array ``int buf[N];`` (1-D or 2-D)."""

    name: str
    elem_type: str
    dims: list[Expr]
    loc: SourceLocation


@dataclass
class PartitionStmt:
    """``p = &base[e];`` — names a sub-region of a shared base or pointer."""

    name: str
    base: str
    offset: Expr
    decl_type: Optional[str]
    loc: SourceLocation


Stmt = Union[
    AssignStmt,
    MallocStmt,
    FreeStmt,
    LaunchStmt,
    AssertStmt,
    ForStmt,
    IfStmt,
    StoreStmt,
    AtomicStmt,
    ReturnStmt,
    ExternSharedDecl,
    SharedArrayDecl,
    LocalArrayDecl,
    PartitionStmt,
]


# ===== top level ============================================================


@dataclass
class Param:
    name: str
    elem_type: str
    is_pointer: bool
    loc: SourceLocation


@dataclass
class KernelDef:
    name: str
    params: list[Param]
    body: list[Stmt]
    loc: SourceLocation


@dataclass
class Program:
    kernels: list[KernelDef] = field(default_factory=list)
    host_main: list[Stmt] = field(default_factory=list)
    filename: str = "<input>"


def walk_statements(stmts: list[Stmt]):
    """Yield every statement, descending into loop/branch bodies."""
    for st in stmts:
        yield st
        if isinstance(st, ForStmt):
            yield from walk_statements(st.body)
        elif isinstance(st, IfStmt):
            yield from walk_statements(st.then_body)
            if st.else_body is not None:
                yield from walk_statements(st.else_body)


def walk_expressions(stmts: list[Stmt]):
    """Yield every expression (including nested subexpressions)."""

    def from_expr(e: Expr):
        yield e
        if isinstance(e, BinaryOp):
            yield from from_expr(e.left)
            yield from from_expr(e.right)
        elif isinstance(e, IndexExpr):
            for ix in e.indices:
                yield from from_expr(ix)

    for st in walk_statements(stmts):
        if isinstance(st, AssignStmt):
            yield from from_expr(st.value)
        elif isinstance(st, MallocStmt):
            yield from from_expr(st.size)
        elif isinstance(st, LaunchStmt):
            for d in (st.grid, st.block):
                for ax in d.axes:
                    yield from from_expr(ax)
            if st.shm is not None:
                yield from from_expr(st.shm)
            for a in st.args:
                yield from from_expr(a)
        elif isinstance(st, (AssertStmt, IfStmt)):
            yield from from_expr(st.cond.left)
            yield from from_expr(st.cond.right)
        elif isinstance(st, ForStmt):
            yield from from_expr(st.lower)
            yield from from_expr(st.upper)
        elif isinstance(st, StoreStmt):
            for ix in st.indices:
                yield from from_expr(ix)
            yield from from_expr(st.value)
        elif isinstance(st, AtomicStmt):
            yield from from_expr(st.index)
            yield from from_expr(st.value)
        elif isinstance(st, (SharedArrayDecl, LocalArrayDecl)):
            for d in st.dims:
                yield from from_expr(d)
        elif isinstance(st, PartitionStmt):
            yield from from_expr(st.offset)
