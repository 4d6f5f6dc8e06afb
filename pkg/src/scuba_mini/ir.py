"""SSA-style intermediate representation and AST lowering.

Each scalar definition produces a fresh ValueId; names from the source are
kept on the ValueId for diagnostics but ignored for identity.  Control flow
stays structured: loops and branches lower to bracketed statement regions
(LoopBegin/LoopEnd, BranchBegin/BranchElse/BranchEnd) rather than a CFG,
which keeps path-guard collection a simple stack walk.

Statement kinds and operand layouts (fixed; tests pin these):

==============  =============================================  ==========
kind            operands                                       result
==============  =============================================  ==========
ConstDef        [int]                                          value
InputDef        [site_index]                                   value
BinOpDef        [op, lhs, rhs]                                 value
BuiltinDef      [axis]  (TidX .. GDimZ)                        value
HostAlloc       [size, elem_type]                              pointer
HostFree        [ptr]                                          --
Launch          [kernel, [gdx,gdy,gdz,bdx,bdy,bdz],
                 [args...], shm-or-None]                       --
Assert          [rel, lhs, rhs]                                --
StaticAlloca    [size, elem_type, space, row_len-or-None]      base
DynShmAlloca    [elem_type]                                    base
SubIndex        [base, offset]                                 pointer
MemAccess       [target, offset, access_kind]                  --
LoadValueDef    [target, offset]                               value
LoopBegin       [lower, upper]                                 induction
LoopEnd         []                                             --
BranchBegin     [rel, lhs, rhs]                                --
BranchElse      []                                             --
BranchEnd       []                                             --
==============  =============================================  ==========

Every array load emits a MemAccess (kind "read") immediately followed by the
LoadValueDef producing the loaded scalar, so subscripts in the source and
MemAccess statements stay in bijection.  Scalar copies lower to ``x + 0``;
pointer aliases do not lower at all -- the alias name binds to the aliased
ValueId.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .errors import LoweringError
from .frontend import ast as A
from .source import SourceLocation

# Access kinds on MemAccess statements.
READ = "read"
WRITE = "write"
READ_WRITE = "read-write"

# Memory spaces recorded on StaticAlloca.
SPACE_SHARED = "shared-static"
SPACE_LOCAL = "local"

# Builtin axes in IR order; the first six double as the launch-dimension
# order used by Launch operands ([gdx, gdy, gdz, bdx, bdy, bdz]).
GRID_AXES = ("GDimX", "GDimY", "GDimZ", "BDimX", "BDimY", "BDimZ")
THREAD_AXES = ("TidX", "TidY", "TidZ", "BidX", "BidY", "BidZ")
ALL_AXES = THREAD_AXES + GRID_AXES

_BUILTIN_AXIS = {
    ("threadIdx", "x"): "TidX",
    ("threadIdx", "y"): "TidY",
    ("threadIdx", "z"): "TidZ",
    ("blockIdx", "x"): "BidX",
    ("blockIdx", "y"): "BidY",
    ("blockIdx", "z"): "BidZ",
    ("blockDim", "x"): "BDimX",
    ("blockDim", "y"): "BDimY",
    ("blockDim", "z"): "BDimZ",
    ("gridDim", "x"): "GDimX",
    ("gridDim", "y"): "GDimY",
    ("gridDim", "z"): "GDimZ",
}


@dataclass(frozen=True)
class ValueId:
    """SSA value handle; identity is the numeric id only."""

    id: int
    name: Optional[str] = field(default=None, compare=False)

    def __repr__(self) -> str:
        if self.name:
            return f"%{self.id}:{self.name}"
        return f"%{self.id}"

    def __hash__(self) -> int:
        return hash(self.id)


Operand = Union[ValueId, int, str, None, list]


@dataclass
class IrStatement:
    kind: str
    operands: list[Operand]
    result: Optional[ValueId]
    location: SourceLocation


@dataclass
class KernelParam:
    name: str
    elem_type: str
    is_pointer: bool
    vid: ValueId


@dataclass
class KernelIr:
    name: str
    params: list[KernelParam]
    body: list[IrStatement]
    location: SourceLocation


@dataclass
class IrModule:
    filename: str
    host: list[IrStatement] = field(default_factory=list)
    kernels: dict[str, KernelIr] = field(default_factory=dict)
    next_id: int = 0

    def __post_init__(self) -> None:
        self._defs: Optional[dict[ValueId, IrStatement]] = None
        self._params: Optional[dict[ValueId, KernelParam]] = None

    # ----- indexes ----------------------------------------------------------

    @property
    def defs(self) -> dict[ValueId, IrStatement]:
        """ValueId -> defining statement, across host and all kernels."""
        if self._defs is None:
            index: dict[ValueId, IrStatement] = {}
            for st in self.all_statements():
                if st.result is not None:
                    index[st.result] = st
            self._defs = index
        return self._defs

    @property
    def params(self) -> dict[ValueId, KernelParam]:
        if self._params is None:
            index: dict[ValueId, KernelParam] = {}
            for k in self.kernels.values():
                for p in k.params:
                    index[p.vid] = p
            self._params = index
        return self._params

    def all_statements(self):
        for k in self.kernels.values():
            yield from k.body
        yield from self.host

    def element_type_of(self, vid: ValueId) -> str:
        """Element type of an allocation/pointer value."""
        seen = 0
        while seen < 1000:
            seen += 1
            st = self.defs.get(vid)
            if st is None:
                param = self.params.get(vid)
                if param is not None:
                    return param.elem_type
                raise LoweringError(f"{vid!r} has no element type", None)
            if st.kind == "HostAlloc":
                return st.operands[1]
            if st.kind == "StaticAlloca":
                return st.operands[1]
            if st.kind == "DynShmAlloca":
                return st.operands[0]
            if st.kind == "SubIndex":
                vid = st.operands[0]
                continue
            raise LoweringError(f"{vid!r} is not a pointer value", st.location)
        raise LoweringError("SubIndex chain too deep", None)

    # ----- rendering --------------------------------------------------------

    def dump(self) -> str:
        out: list[str] = []
        for k in self.kernels.values():
            sig = ", ".join(
                f"{p.name}: {p.elem_type}{'*' if p.is_pointer else ''} {p.vid!r}"
                for p in k.params
            )
            out.append(f"kernel {k.name}({sig}):")
            _dump_body(k.body, out)
        out.append("host:")
        _dump_body(self.host, out)
        return "\n".join(out) + "\n"


def _fmt_operand(op: Operand) -> str:
    if isinstance(op, ValueId):
        return repr(op)
    if isinstance(op, list):
        return "[" + ", ".join(_fmt_operand(o) for o in op) + "]"
    return repr(op)


def _dump_body(body: list[IrStatement], out: list[str]) -> None:
    depth = 1
    for st in body:
        if st.kind in ("LoopEnd", "BranchEnd", "BranchElse"):
            depth -= 1
        pad = "  " * depth
        ops = " ".join(_fmt_operand(o) for o in st.operands)
        head = f"{st.result!r} = {st.kind}" if st.result is not None else st.kind
        line = f"{pad}{head} {ops}".rstrip()
        out.append(f"{line:<58}; {st.location}")
        if st.kind in ("LoopBegin", "BranchBegin", "BranchElse"):
            depth += 1


# ===== lowering =============================================================


class _Env:
    """Name -> ValueId scopes mirroring the resolver's block structure."""

    def __init__(self, parent: Optional["_Env"] = None):
        self.parent = parent
        self.table: dict[str, ValueId] = {}

    def lookup(self, name: str) -> ValueId:
        env: Optional[_Env] = self
        while env is not None:
            if name in env.table:
                return env.table[name]
            env = env.parent
        raise LoweringError(f"unbound name {name!r}", None)

    def bind(self, name: str, vid: ValueId) -> None:
        self.table[name] = vid


class _Lowerer:
    def __init__(self, program: A.Program):
        self.program = program
        self.module = IrModule(filename=program.filename)
        self.body: list[IrStatement] = []
        # StaticAlloca vid -> row-length vid for 2-D linearization.
        self.row_lens: dict[ValueId, Optional[ValueId]] = {}
        # vid -> defining statement kind (for alias detection).
        self.def_kinds: dict[ValueId, str] = {}

    def fresh(self, name: Optional[str] = None) -> ValueId:
        vid = ValueId(self.module.next_id, name)
        self.module.next_id += 1
        return vid

    def emit(
        self,
        kind: str,
        operands: list[Operand],
        loc: SourceLocation,
        result_name: Optional[str] = None,
        result: bool = True,
    ) -> Optional[ValueId]:
        vid = self.fresh(result_name) if result else None
        self.body.append(IrStatement(kind, operands, vid, loc))
        if vid is not None:
            self.def_kinds[vid] = kind
        return vid

    # ----- expressions ------------------------------------------------------

    def lower_expr(
        self, e: A.Expr, env: _Env, name: Optional[str] = None
    ) -> ValueId:
        """Lower an expression; ``name`` labels the final produced value."""
        if isinstance(e, A.IntLit):
            return self.emit("ConstDef", [e.value], e.loc, name)
        if isinstance(e, A.Ident):
            return env.lookup(e.name)
        if isinstance(e, A.InputCall):
            return self.emit("InputDef", [e.site], e.loc, name)
        if isinstance(e, A.BuiltinRef):
            axis = _BUILTIN_AXIS[(e.group, e.axis)]
            return self.emit("BuiltinDef", [axis], e.loc, name)
        if isinstance(e, A.BinaryOp):
            lhs = self.lower_expr(e.left, env)
            rhs = self.lower_expr(e.right, env)
            return self.emit("BinOpDef", [e.op, lhs, rhs], e.loc, name)
        if isinstance(e, A.IndexExpr):
            target, offset = self.lower_access(e.base, e.indices, e.loc, env)
            self.emit(
                "MemAccess", [target, offset, READ], e.loc, result=False
            )
            return self.emit("LoadValueDef", [target, offset], e.loc, name)
        raise LoweringError(f"unhandled expression {type(e).__name__}", e.loc)

    def lower_access(
        self,
        base_name: str,
        indices: list[A.Expr],
        loc: SourceLocation,
        env: _Env,
    ) -> tuple[ValueId, ValueId]:
        """Lower subscripts to (target, linearized offset)."""
        target = env.lookup(base_name)
        if len(indices) == 1:
            return target, self.lower_expr(indices[0], env)
        row_len = self.row_lens.get(target)
        if row_len is None:
            raise LoweringError(
                f"{base_name!r} is not a 2-D array", loc
            )
        i = self.lower_expr(indices[0], env)
        j = self.lower_expr(indices[1], env)
        scaled = self.emit("BinOpDef", ["*", i, row_len], loc)
        return target, self.emit("BinOpDef", ["+", scaled, j], loc)

    def lower_comparison(self, c: A.Comparison, env: _Env) -> list[Operand]:
        lhs = self.lower_expr(c.left, env)
        rhs = self.lower_expr(c.right, env)
        return [c.rel, lhs, rhs]

    # ----- statements -------------------------------------------------------

    def lower_block(self, stmts: list[A.Stmt], env: _Env) -> None:
        for st in stmts:
            self.lower_stmt(st, env)

    def lower_stmt(self, st: A.Stmt, env: _Env) -> None:
        if isinstance(st, A.AssignStmt):
            if isinstance(st.value, A.Ident):
                src = env.lookup(st.value.name)
                if self._is_pointerish(src):
                    # Pointer aliases bind the same value; no new statement.
                    env.bind(st.name, src)
                    return
                # Scalar copy: a fresh value that evaluates to the source.
                zero = self.emit("ConstDef", [0], st.loc)
                copied = self.emit(
                    "BinOpDef", ["+", src, zero], st.loc, st.name
                )
                env.bind(st.name, copied)
                return
            env.bind(st.name, self.lower_expr(st.value, env, st.name))
        elif isinstance(st, A.MallocStmt):
            size = self.lower_expr(st.size, env)
            vid = self.emit("HostAlloc", [size, st.elem_type], st.loc, st.name)
            env.bind(st.name, vid)
        elif isinstance(st, A.FreeStmt):
            self.emit("HostFree", [env.lookup(st.name)], st.loc, result=False)
        elif isinstance(st, A.LaunchStmt):
            self.lower_launch(st, env)
        elif isinstance(st, A.AssertStmt):
            ops = self.lower_comparison(st.cond, env)
            self.emit("Assert", ops, st.loc, result=False)
        elif isinstance(st, A.ForStmt):
            lower = self.lower_expr(st.lower, env)
            upper = self.lower_expr(st.upper, env)
            induction = self.emit("LoopBegin", [lower, upper], st.loc, st.var)
            body_env = _Env(env)
            body_env.bind(st.var, induction)
            self.lower_block(st.body, body_env)
            self.emit("LoopEnd", [], st.loc, result=False)
        elif isinstance(st, A.IfStmt):
            ops = self.lower_comparison(st.cond, env)
            self.emit("BranchBegin", ops, st.loc, result=False)
            self.lower_block(st.then_body, _Env(env))
            if st.else_body is not None:
                self.emit("BranchElse", [], st.loc, result=False)
                self.lower_block(st.else_body, _Env(env))
            self.emit("BranchEnd", [], st.loc, result=False)
        elif isinstance(st, A.StoreStmt):
            target, offset = self.lower_access(
                st.target, st.indices, st.loc, env
            )
            self.lower_expr(st.value, env)
            self.emit("MemAccess", [target, offset, WRITE], st.loc, result=False)
        elif isinstance(st, A.AtomicStmt):
            target = env.lookup(st.target)
            offset = self.lower_expr(st.index, env)
            self.lower_expr(st.value, env)
            self.emit(
                "MemAccess", [target, offset, READ_WRITE], st.loc, result=False
            )
        elif isinstance(st, A.ReturnStmt):
            pass  # no effect on the extracted summaries
        elif isinstance(st, A.ExternSharedDecl):
            vid = self.emit("DynShmAlloca", [st.elem_type], st.loc, st.name)
            env.bind(st.name, vid)
        elif isinstance(st, (A.SharedArrayDecl, A.LocalArrayDecl)):
            space = (
                SPACE_SHARED if isinstance(st, A.SharedArrayDecl) else SPACE_LOCAL
            )
            dims = [self.lower_expr(d, env) for d in st.dims]
            row_len: Optional[ValueId] = None
            size = dims[0]
            if len(dims) == 2:
                row_len = dims[1]
                size = self.emit("BinOpDef", ["*", dims[0], dims[1]], st.loc)
            vid = self.emit(
                "StaticAlloca", [size, st.elem_type, space, row_len],
                st.loc, st.name,
            )
            self.row_lens[vid] = row_len
            env.bind(st.name, vid)
        elif isinstance(st, A.PartitionStmt):
            base = env.lookup(st.base)
            offset = self.lower_expr(st.offset, env)
            vid = self.emit("SubIndex", [base, offset], st.loc, st.name)
            env.bind(st.name, vid)
        else:  # pragma: no cover - resolver is exhaustive
            raise LoweringError(f"unhandled statement {type(st).__name__}", st.loc)

    def _is_pointerish(self, vid: ValueId) -> bool:
        kind = self.def_kinds.get(vid)
        if kind is not None:
            return kind in (
                "HostAlloc", "DynShmAlloca", "StaticAlloca", "SubIndex"
            )
        # Not defined by a statement: kernel parameter.
        param = self._param_index.get(vid)
        return param is not None and param.is_pointer

    def lower_launch(self, st: A.LaunchStmt, env: _Env) -> None:
        def dim_vids(d: A.Dim3Arg) -> list[ValueId]:
            vids = [self.lower_expr(a, env) for a in d.axes]
            while len(vids) < 3:
                vids.append(self.emit("ConstDef", [1], d.loc))
            return vids

        grid = dim_vids(st.grid)
        block = dim_vids(st.block)
        shm = self.lower_expr(st.shm, env) if st.shm is not None else None
        args = [self.lower_expr(a, env) for a in st.args]
        self.emit(
            "Launch", [st.kernel, grid + block, args, shm], st.loc, result=False
        )

    # ----- top level --------------------------------------------------------

    def run(self) -> IrModule:
        self._param_index: dict[ValueId, KernelParam] = {}
        for k in self.program.kernels:
            params = []
            env = _Env()
            for p in k.params:
                vid = self.fresh(p.name)
                kp = KernelParam(p.name, p.elem_type, p.is_pointer, vid)
                params.append(kp)
                self._param_index[vid] = kp
                env.bind(p.name, vid)
            self.body = []
            self.lower_block(k.body, env)
            self.module.kernels[k.name] = KernelIr(
                k.name, params, self.body, k.loc
            )
        self.body = []
        self.lower_block(self.program.host_main, _Env())
        self.module.host = self.body
        return self.module


def lower(program: A.Program) -> IrModule:
    """Lower a resolved Program to its IR module."""
    return _Lowerer(program).run()
