"""Reference interpreter and brute-force checker.

This module executes MiniCUDA programs directly from the AST -- it shares
no code with the IR, the expression trees or the solver, so it can serve as
an independent oracle in differential tests.  Programs are compiled once
into Python closures and then run per input tuple, which keeps exhaustive
input sweeps affordable.

Execution model
---------------
* Threads run sequentially and deterministically: blocks in z-, y-, x-order
  with x fastest, then threads within the block the same way.
* Cells start at 0; out-of-bounds reads yield 0; writes outside the backing
  storage are discarded.  Bounds violations are recorded as *events*, not
  crashes.
* Partition views follow creation order: creating a partition ends the
  previously created partition on the same backing storage at the new start
  offset; the last partition extends to the end of the storage.
* An execution *halts* (and all its events are disregarded by the
  brute-force verdicts) when an assert fails, a division/modulo by zero is
  evaluated, or a value escapes the modelled non-negative domain at a
  checkpoint: allocation sizes, launch dimensions, the dynamic shared-memory
  extent, scalar kernel arguments, and stored values must not be negative.
  Scalar variables themselves may hold intermediate negative values.

``brute_force_all`` sweeps every input tuple in ``[0, B]^k``, growing ``k``
on demand as executions consume more ``__input()`` sites (at most
``MAX_INPUT_SITES``), and reports which access sites ever produced a
violation in a legal execution.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import InterpreterError
from .frontend import ast as A
from .solver import tdiv, tmod

MAX_INPUT_SITES = 5

# Event / violation labels (oracle-local; report.py has the analyzer's).
V_UPPER = "oob-upper"
V_UNDER = "oob-underflow"
V_UAF = "uaf"
V_DOUBLE_FREE = "double-free"


class HaltExecution(Exception):
    """Legality violation: the execution (and its events) do not count."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class NeedMoreInput(Exception):
    """An ``__input()`` site beyond the provided tuple was evaluated."""

    def __init__(self, site: int):
        super().__init__(f"input site {site} not provided")
        self.site = site


class _ThreadReturn(Exception):
    pass


@dataclass(slots=True)
class AccessEvent:
    line: int
    column: int
    target: str
    kind: str  # read | write | read-write | free
    offset: int
    extent: int
    violation: Optional[str]  # None | oob-upper | oob-underflow | uaf | ...


@dataclass
class ExecutionTrace:
    events: list[AccessEvent] = field(default_factory=list)
    halted: bool = False
    halt_reason: Optional[str] = None

    @property
    def violations(self) -> list[AccessEvent]:
        return [e for e in self.events if e.violation is not None]


class Storage:
    __slots__ = ("size", "cells", "freed", "name")

    def __init__(self, size: int, name: str):
        self.size = size
        self.cells: dict[int, int] = {}
        self.freed = False
        self.name = name


class View:
    """A window [start, end) into a Storage; ``end`` moves when a later
    partition is carved from the same storage."""

    __slots__ = ("storage", "start", "end", "row_len", "name")

    def __init__(
        self,
        storage: Storage,
        start: int,
        end: int,
        row_len: Optional[int],
        name: str,
    ):
        self.storage = storage
        self.start = start
        self.end = end
        self.row_len = row_len
        self.name = name


class _Ctx:
    """Mutable per-execution state shared by the compiled closures."""

    __slots__ = (
        "inputs",
        "events",
        "violations_only",
        "tidx",
        "tidy",
        "tidz",
        "bidx",
        "bidy",
        "bidz",
        "bdx",
        "bdy",
        "bdz",
        "gdx",
        "gdy",
        "gdz",
        "dyn_shm_size",
        "block_shared",
        "thread_last_partition",
    )

    def __init__(self, inputs: list[int], violations_only: bool):
        self.inputs = inputs
        self.events: list[AccessEvent] = []
        self.violations_only = violations_only
        self.dyn_shm_size = 0
        self.block_shared: dict[int, Storage] = {}
        self.thread_last_partition: dict[int, View] = {}

    def input(self, site: int) -> int:
        if site >= len(self.inputs):
            raise NeedMoreInput(site)
        return self.inputs[site]

    # ----- memory operations ------------------------------------------------

    def access_view(
        self, view: View, offset: int, kind: str, line: int, col: int, value
    ):
        storage = view.storage
        extent = view.end - view.start
        if storage.freed:
            violation = V_UAF
        elif offset < 0:
            violation = V_UNDER
        elif offset >= extent:
            violation = V_UPPER
        else:
            violation = None
        if violation is not None or not self.violations_only:
            self.events.append(
                AccessEvent(
                    line, col, view.name, kind, offset, extent, violation
                )
            )
        absolute = view.start + offset
        in_storage = 0 <= absolute < storage.size and not storage.freed
        if kind == "read":
            return storage.cells.get(absolute, 0) if in_storage else 0
        if kind == "write":
            if value < 0:
                raise HaltExecution("negative stored value")
            if in_storage:
                storage.cells[absolute] = value
            return 0
        # read-write (atomics); value is (op, operand)
        op, operand = value
        if operand < 0:
            raise HaltExecution("negative stored value")
        if in_storage:
            old = storage.cells.get(absolute, 0)
            if op == "atomicAdd":
                new = old + operand
            elif op == "atomicMin":
                new = min(old, operand)
            else:
                new = max(old, operand)
            storage.cells[absolute] = new
        return 0


def _binop(op: str) -> Callable[[int, int], int]:
    if op == "+":
        return lambda a, b: a + b
    if op == "-":
        return lambda a, b: a - b
    if op == "*":
        return lambda a, b: a * b
    if op == "/":

        def div(a: int, b: int) -> int:
            if b == 0:
                raise HaltExecution("division by zero")
            return tdiv(a, b)

        return div
    if op == "%":

        def mod(a: int, b: int) -> int:
            if b == 0:
                raise HaltExecution("division by zero")
            return tmod(a, b)

        return mod
    raise InterpreterError(f"unknown operator {op!r}", None)


_REL_FN = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
}

_BUILTIN_ATTR = {
    ("threadIdx", "x"): "tidx",
    ("threadIdx", "y"): "tidy",
    ("threadIdx", "z"): "tidz",
    ("blockIdx", "x"): "bidx",
    ("blockIdx", "y"): "bidy",
    ("blockIdx", "z"): "bidz",
    ("blockDim", "x"): "bdx",
    ("blockDim", "y"): "bdy",
    ("blockDim", "z"): "bdz",
    ("gridDim", "x"): "gdx",
    ("gridDim", "y"): "gdy",
    ("gridDim", "z"): "gdz",
}


# ===== compilation ==========================================================


class _Compiler:
    """AST -> closures.  ``env`` maps names to ints, Storage (host
    allocations) or View (kernel-side pointers)."""

    def __init__(self, program: A.Program):
        self.program = program
        self.kernels = {k.name: k for k in program.kernels}
        self.compiled_kernels: dict[str, tuple[list[A.Param], list]] = {}
        for k in program.kernels:
            self.compiled_kernels[k.name] = (
                k.params,
                [self.stmt(s, in_kernel=True) for s in k.body],
            )
        self.host_body = [self.stmt(s, in_kernel=False) for s in program.host_main]

    # ----- expressions ------------------------------------------------------

    def expr(self, e: A.Expr) -> Callable:
        if isinstance(e, A.IntLit):
            v = e.value
            return lambda ctx, env: v
        if isinstance(e, A.Ident):
            name = e.name
            return lambda ctx, env: env[name]
        if isinstance(e, A.InputCall):
            site = e.site
            return lambda ctx, env: ctx.input(site)
        if isinstance(e, A.BuiltinRef):
            attr = _BUILTIN_ATTR[(e.group, e.axis)]
            return lambda ctx, env: getattr(ctx, attr)
        if isinstance(e, A.BinaryOp):
            fn = _binop(e.op)
            left = self.expr(e.left)
            right = self.expr(e.right)
            return lambda ctx, env: fn(left(ctx, env), right(ctx, env))
        if isinstance(e, A.IndexExpr):
            name = e.base
            line, col = e.loc.line, e.loc.column
            if len(e.indices) == 1:
                index = self.expr(e.indices[0])

                def load1(ctx, env):
                    view = _as_view(env[name])
                    return ctx.access_view(
                        view, index(ctx, env), "read", line, col, None
                    )

                return load1
            i_fn = self.expr(e.indices[0])
            j_fn = self.expr(e.indices[1])

            def load2(ctx, env):
                view = _as_view(env[name])
                offset = i_fn(ctx, env) * view.row_len + j_fn(ctx, env)
                return ctx.access_view(view, offset, "read", line, col, None)

            return load2
        raise InterpreterError(f"unhandled expression {type(e).__name__}", e.loc)

    def comparison(self, c: A.Comparison) -> Callable:
        rel = _REL_FN[c.rel]
        left = self.expr(c.left)
        right = self.expr(c.right)
        return lambda ctx, env: rel(left(ctx, env), right(ctx, env))

    # ----- statements -------------------------------------------------------

    def stmt(self, st: A.Stmt, in_kernel: bool) -> Callable:
        if isinstance(st, A.AssignStmt):
            name = st.name
            value = self.expr(st.value)

            def assign(ctx, env):
                env[name] = value(ctx, env)

            return assign
        if isinstance(st, A.MallocStmt):
            name = st.name
            size_fn = self.expr(st.size)

            def malloc(ctx, env):
                size = size_fn(ctx, env)
                if size < 0:
                    raise HaltExecution("negative allocation size")
                env[name] = Storage(size, name)

            return malloc
        if isinstance(st, A.FreeStmt):
            name = st.name
            line, col = st.loc.line, st.loc.column

            def free(ctx, env):
                storage = env[name]
                if storage.freed:
                    ctx.events.append(
                        AccessEvent(
                            line, col, name, "free", 0, storage.size,
                            V_DOUBLE_FREE,
                        )
                    )
                storage.freed = True

            return free
        if isinstance(st, A.LaunchStmt):
            return self.launch(st)
        if isinstance(st, A.AssertStmt):
            cond = self.comparison(st.cond)

            def do_assert(ctx, env):
                if not cond(ctx, env):
                    raise HaltExecution("assert failed")

            return do_assert
        if isinstance(st, A.ForStmt):
            var = st.var
            lower = self.expr(st.lower)
            upper = self.expr(st.upper)
            body = [self.stmt(s, in_kernel) for s in st.body]

            def loop(ctx, env):
                lo = lower(ctx, env)
                hi = upper(ctx, env)
                for i in range(lo, hi):
                    env[var] = i
                    for fn in body:
                        fn(ctx, env)

            return loop
        if isinstance(st, A.IfStmt):
            cond = self.comparison(st.cond)
            then_body = [self.stmt(s, in_kernel) for s in st.then_body]
            else_body = [
                self.stmt(s, in_kernel) for s in (st.else_body or [])
            ]

            def branch(ctx, env):
                for fn in then_body if cond(ctx, env) else else_body:
                    fn(ctx, env)

            return branch
        if isinstance(st, A.StoreStmt):
            return self.store(st, in_kernel)
        if isinstance(st, A.AtomicStmt):
            name = st.target
            op = st.op
            index = self.expr(st.index)
            value = self.expr(st.value)
            line, col = st.loc.line, st.loc.column

            def atomic(ctx, env):
                view = _as_view(env[name])
                ctx.access_view(
                    view,
                    index(ctx, env),
                    "read-write",
                    line,
                    col,
                    (op, value(ctx, env)),
                )

            return atomic
        if isinstance(st, A.ReturnStmt):

            def do_return(ctx, env):
                raise _ThreadReturn()

            return do_return
        if isinstance(st, A.ExternSharedDecl):
            name = st.name
            key = id(st)

            def extern_shared(ctx, env):
                storage = ctx.block_shared.get(key)
                if storage is None:
                    storage = Storage(ctx.dyn_shm_size, name)
                    ctx.block_shared[key] = storage
                env[name] = View(storage, 0, storage.size, None, name)

            return extern_shared
        if isinstance(st, (A.SharedArrayDecl, A.LocalArrayDecl)):
            return self.array_decl(st)
        if isinstance(st, A.PartitionStmt):
            name = st.name
            base = st.base
            offset = self.expr(st.offset)

            def partition(ctx, env):
                base_view = _as_view(env[base])
                storage = base_view.storage
                start = base_view.start + offset(ctx, env)
                view = View(storage, start, storage.size, None, name)
                prev = ctx.thread_last_partition.get(id(storage))
                if prev is not None:
                    prev.end = start
                ctx.thread_last_partition[id(storage)] = view
                env[name] = view

            return partition
        raise InterpreterError(
            f"unhandled statement {type(st).__name__}", st.loc
        )

    def store(self, st: A.StoreStmt, in_kernel: bool) -> Callable:
        name = st.target
        value = self.expr(st.value)
        line, col = st.loc.line, st.loc.column
        if len(st.indices) == 1:
            index = self.expr(st.indices[0])

            def store1(ctx, env):
                view = _as_view(env[name])
                ctx.access_view(
                    view, index(ctx, env), "write", line, col, value(ctx, env)
                )

            return store1
        i_fn = self.expr(st.indices[0])
        j_fn = self.expr(st.indices[1])

        def store2(ctx, env):
            view = _as_view(env[name])
            offset = i_fn(ctx, env) * view.row_len + j_fn(ctx, env)
            ctx.access_view(view, offset, "write", line, col, value(ctx, env))

        return store2

    def array_decl(self, st) -> Callable:
        name = st.name
        dims = [self.expr(d) for d in st.dims]
        shared = isinstance(st, A.SharedArrayDecl)
        key = id(st)

        def decl(ctx, env):
            sizes = [fn(ctx, env) for fn in dims]
            for s in sizes:
                if s < 0:
                    raise HaltExecution("negative allocation size")
            total = sizes[0] * sizes[1] if len(sizes) == 2 else sizes[0]
            row_len = sizes[1] if len(sizes) == 2 else None
            if shared:
                storage = ctx.block_shared.get(key)
                if storage is None:
                    storage = Storage(total, name)
                    ctx.block_shared[key] = storage
            else:
                storage = Storage(total, name)
            env[name] = View(storage, 0, total, row_len, name)

        return decl

    # ----- launches ---------------------------------------------------------

    def launch(self, st: A.LaunchStmt) -> Callable:
        kernel_name = st.kernel
        grid_fns = [self.expr(a) for a in st.grid.axes]
        block_fns = [self.expr(a) for a in st.block.axes]
        shm_fn = self.expr(st.shm) if st.shm is not None else None
        params, body = self.compiled_kernels[kernel_name]
        arg_fns: list = []
        for param, arg in zip(params, st.args):
            if param.is_pointer:
                arg_fns.append(("pointer", arg.name))
            else:
                arg_fns.append(("scalar", self.expr(arg)))

        def run_launch(ctx, env):
            def dims(fns):
                values = [fn(ctx, env) for fn in fns]
                while len(values) < 3:
                    values.append(1)
                return values

            gx, gy, gz = dims(grid_fns)
            bx, by, bz = dims(block_fns)
            for d in (gx, gy, gz, bx, by, bz):
                if d < 0:
                    raise HaltExecution("negative launch dimension")
            shm = shm_fn(ctx, env) if shm_fn is not None else 0
            if shm < 0:
                raise HaltExecution("negative dynamic shared size")
            base_env: dict = {}
            for param, spec in zip(params, arg_fns):
                if spec[0] == "pointer":
                    storage = env[spec[1]]
                    base_env[param.name] = View(
                        storage, 0, storage.size, None, param.name
                    )
                else:
                    value = spec[1](ctx, env)
                    if value < 0:
                        raise HaltExecution("negative scalar argument")
                    base_env[param.name] = value
            ctx.gdx, ctx.gdy, ctx.gdz = gx, gy, gz
            ctx.bdx, ctx.bdy, ctx.bdz = bx, by, bz
            ctx.dyn_shm_size = shm
            for bz_i in range(gz):
                for by_i in range(gy):
                    for bx_i in range(gx):
                        ctx.bidx, ctx.bidy, ctx.bidz = bx_i, by_i, bz_i
                        ctx.block_shared = {}
                        for tz_i in range(bz):
                            for ty_i in range(by):
                                for tx_i in range(bx):
                                    ctx.tidx = tx_i
                                    ctx.tidy = ty_i
                                    ctx.tidz = tz_i
                                    ctx.thread_last_partition = {}
                                    thread_env = dict(base_env)
                                    try:
                                        for fn in body:
                                            fn(ctx, thread_env)
                                    except _ThreadReturn:
                                        pass

        return run_launch


def _as_view(value) -> View:
    if isinstance(value, Storage):
        return View(value, 0, value.size, None, value.name)
    return value


# ===== public API ===========================================================


class CompiledProgram:
    def __init__(self, program: A.Program):
        self.program = program
        self._compiler = _Compiler(program)

    def run(self, inputs: list[int], violations_only: bool = False
            ) -> ExecutionTrace:
        ctx = _Ctx(list(inputs), violations_only)
        trace = ExecutionTrace(events=ctx.events)
        try:
            env: dict = {}
            for fn in self._compiler.host_body:
                fn(ctx, env)
        except HaltExecution as halt:
            trace.halted = True
            trace.halt_reason = halt.reason
        return trace


def compile_program(program: A.Program) -> CompiledProgram:
    return CompiledProgram(program)


def interpret(program: A.Program, inputs: list[int]) -> ExecutionTrace:
    """Execute once with the given input tuple (full event trace)."""
    return compile_program(program).run(inputs)


def count_input_sites(program: A.Program) -> int:
    sites = [
        e.site
        for e in A.walk_expressions(program.host_main)
        if isinstance(e, A.InputCall)
    ]
    return max(sites) + 1 if sites else 0


@dataclass
class SweepResult:
    """Violations observed across all legal executions of a sweep."""

    bound: int
    input_arity: int
    executions: int
    halted_executions: int
    # (line, column) -> set of violation labels seen there.
    violations: dict[tuple[int, int], set[str]] = field(default_factory=dict)

    def has_violation(self, line: int, column: int) -> bool:
        return (line, column) in self.violations


def brute_force_all(
    program: A.Program,
    bound: int,
    stop_when_violated: Optional[set[tuple[int, int]]] = None,
) -> SweepResult:
    """Run every input tuple in [0, bound]^k and collect violations.

    The arity ``k`` starts at the number of syntactic input sites and grows
    if an execution consumes more (inputs inside host branches); above
    MAX_INPUT_SITES the sweep is refused.  When ``stop_when_violated`` is
    given, the sweep ends early once every listed site has a violation.
    """
    compiled = compile_program(program)
    arity = count_input_sites(program)
    while True:
        if arity > MAX_INPUT_SITES:
            raise InterpreterError(
                f"programs with more than {MAX_INPUT_SITES} input sites "
                "cannot be brute-forced",
                None,
            )
        result = SweepResult(bound, arity, 0, 0)
        try:
            for combo in itertools.product(range(bound + 1), repeat=arity):
                result.executions += 1
                trace = compiled.run(list(combo), violations_only=True)
                if trace.halted:
                    result.halted_executions += 1
                    continue
                for event in trace.events:
                    if event.violation is not None:
                        key = (event.line, event.column)
                        result.violations.setdefault(key, set()).add(
                            event.violation
                        )
                if stop_when_violated is not None and all(
                    key in result.violations for key in stop_when_violated
                ):
                    return result
            return result
        except NeedMoreInput as need:
            arity = max(arity + 1, need.site + 1)


def brute_force_verdict(
    program: A.Program, line: int, column: int, bound: int
) -> bool:
    """True when some legal execution violates bounds at (line, column)."""
    result = brute_force_all(
        program, bound, stop_when_violated={(line, column)}
    )
    return result.has_violation(line, column)


def replay_witness(
    program: A.Program,
    input_values: dict[int, int],
    default_value: int,
    line: int,
    column: int,
) -> tuple[bool, ExecutionTrace]:
    """Re-run with the model's input values; free sites get the default.

    Returns (reproduced, trace): whether a violation occurred at the given
    source position in a legal execution.
    """
    arity = count_input_sites(program)
    arity = max([arity] + [site + 1 for site in input_values])
    inputs = [input_values.get(site, default_value) for site in range(arity)]
    compiled = compile_program(program)
    while True:
        try:
            trace = compiled.run(inputs)
            break
        except NeedMoreInput as need:
            inputs = inputs + [default_value] * (need.site + 1 - len(inputs))
    if trace.halted:
        return False, trace
    hit = any(
        e.violation is not None and e.line == line and e.column == column
        for e in trace.events
    )
    return hit, trace
