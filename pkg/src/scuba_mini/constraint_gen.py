"""Constraint generation: one bounded-integer system per access and check.

For a memory access inside a launched kernel, the generated conjunction has
three layers:

1. **launch geometry** -- the twelve builtin variables (``solTidX`` ...
   ``solGDimZ``) with their range constraints (``0 <= tid < bdim`` etc. on
   every axis), plus six equations binding the dimension variables to the
   host-side launch expressions;
2. **the check** -- ``solOffset >= solSize`` for the upper check or
   ``solOffset < 0`` for the underflow check, together with the equations
   defining ``solOffset`` (the subscript ET) and ``solSize`` (the extent of
   the accessed region: a static array size, a derived partition size, the
   dynamic shared extent, or the backing host allocation of a pointer
   argument);
3. **context** -- equalities binding kernel scalar parameters to the actual
   launch arguments, host asserts, kernel asserts on a dominating path,
   branch guards along the access path (``!=`` guards are dropped: they
   carry almost no pruning power and only arise from negated equalities),
   and bound constraints for every loop variable that appears.

A satisfying model is a concrete bad execution; ``Unsat`` proves the access
safe for every input within the modelled domain.  When the extent cannot be
named (a kernel reads ``extern __shared__`` memory but the launch passes no
dynamic size) the access is marked size-unknown and reported unverifiable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import AnalysisError
from .expr_trees import (
    ARITH_OPS,
    BinOp,
    Builtin,
    COMPARISON_OPS,
    Const,
    Et,
    LoopVar,
    Unknown,
    canonicalize,
)
from .host_pass import HostSummary, KernelLaunchRecord
from .ir import ALL_AXES, GRID_AXES, IrModule, KernelIr, ValueId
from .kernel_pass import (
    KernelSummary,
    MemoryAccessRecord,
    PartitionRecord,
    derive_partition_sizes,
)
from .solver import BinE, Constraint, Lit, SExpr, SolverVar, VarRef

OFFSET_VAR = "solOffset"
SIZE_VAR = "solSize"

_ET_REL_TO_SOLVER = {"<": "<", "<=": "<=", ">": ">", ">=": ">=", "==": "="}


def builtin_var(axis: str) -> str:
    return f"sol{axis}"


@dataclass
class ConstraintSet:
    variables: list[SolverVar]
    constraints: list[Constraint]
    check: str  # "upper" | "lower" | "layout"
    # Solver variable -> display name for witness reporting (unknown leaves
    # only; builtins and loop variables are internal).
    witness_leaves: dict[str, str] = field(default_factory=dict)
    # Solver variable -> __input() site index, for witness replay.
    input_leaves: dict[str, int] = field(default_factory=dict)


@dataclass
class AccessSets:
    access: MemoryAccessRecord
    launch: KernelLaunchRecord
    size_unknown: bool
    sets: list[ConstraintSet] = field(default_factory=list)


class _SetBuilder:
    """Accumulates variables/constraints for one solver call."""

    def __init__(self, module: IrModule, max_domain: int):
        self.module = module
        self.max_domain = max_domain
        self.variables: dict[str, SolverVar] = {}
        self.constraints: list[Constraint] = []
        self.witness_leaves: dict[str, str] = {}
        self.input_leaves: dict[str, int] = {}
        self._loop_seen: set[ValueId] = set()

    # ----- variables --------------------------------------------------------

    def var(self, name: str, lo: int = 0, hi: Optional[int] = None) -> VarRef:
        if name not in self.variables:
            self.variables[name] = SolverVar(
                name, lo, self.max_domain if hi is None else hi
            )
        return VarRef(name)

    def declare_geometry(self, launch: KernelLaunchRecord) -> None:
        for axis in ALL_AXES:
            self.var(builtin_var(axis))
        for idx_axis, dim_axis in (
            ("TidX", "BDimX"),
            ("TidY", "BDimY"),
            ("TidZ", "BDimZ"),
            ("BidX", "GDimX"),
            ("BidY", "GDimY"),
            ("BidZ", "GDimZ"),
        ):
            idx = VarRef(builtin_var(idx_axis))
            self.constraints.append(Constraint(">=", idx, Lit(0)))
            self.constraints.append(
                Constraint("<", idx, VarRef(builtin_var(dim_axis)))
            )
        for axis, et in zip(GRID_AXES, launch.grid_ets):
            self.constraints.append(
                Constraint("=", VarRef(builtin_var(axis)), self.translate(et))
            )

    # ----- ET translation ---------------------------------------------------

    def _unknown_name(self, tag: ValueId) -> tuple[str, str]:
        """(solver variable, display name) for an Unknown leaf."""
        st = self.module.defs.get(tag)
        if tag.name:
            display = tag.name
        elif st is not None and st.kind == "InputDef":
            display = f"input:{st.operands[0]}"
        elif st is not None and st.kind == "LoadValueDef":
            display = f"load:{st.location.line}:{st.location.column}"
        else:
            display = f"v{tag.id}"
        base = tag.name if tag.name else display.replace(":", "_")
        return f"sol_{base}_v{tag.id}", display

    def translate(self, et: Et) -> SExpr:
        if isinstance(et, Const):
            return Lit(et.value)
        if isinstance(et, Builtin):
            return self.var(builtin_var(et.axis))
        if isinstance(et, Unknown):
            name, display = self._unknown_name(et.tag)
            self.var(name)
            self.witness_leaves.setdefault(name, display)
            st = self.module.defs.get(et.tag)
            if st is not None and st.kind == "InputDef":
                self.input_leaves.setdefault(name, st.operands[0])
            return VarRef(name)
        if isinstance(et, LoopVar):
            name = f"sol_{et.tag.name or 'loop'}_v{et.tag.id}"
            ref = self.var(name)
            if et.tag not in self._loop_seen:
                self._loop_seen.add(et.tag)
                lower = self.translate(et.lower)
                upper = self.translate(et.upper)
                self.constraints.append(Constraint(">=", ref, lower))
                self.constraints.append(Constraint("<", ref, upper))
            return ref
        if isinstance(et, BinOp):
            if et.op in COMPARISON_OPS:
                raise AnalysisError(
                    "comparison in arithmetic position", None
                )
            if et.op not in ARITH_OPS:
                raise AnalysisError(f"unknown operator {et.op!r}", None)
            return BinE(et.op, self.translate(et.left), self.translate(et.right))
        raise AnalysisError(f"unhandled ET node {type(et).__name__}", None)

    def add_comparison(self, et: BinOp) -> None:
        """Add a comparison-rooted ET as a constraint; drops ``!=`` roots."""
        if et.op == "!=":
            return
        rel = _ET_REL_TO_SOLVER.get(et.op)
        if rel is None:
            raise AnalysisError(f"not a comparison root: {et.op!r}", None)
        self.constraints.append(
            Constraint(rel, self.translate(et.left), self.translate(et.right))
        )

    def add_context(
        self,
        kernel: KernelIr,
        launch: KernelLaunchRecord,
        host_summary: HostSummary,
        ksum: KernelSummary,
        guards: list[BinOp],
    ) -> None:
        for param, arg in zip(kernel.params, launch.args):
            if not param.is_pointer:
                name, display = self._unknown_name(param.vid)
                self.var(name)
                self.witness_leaves.setdefault(name, display)
                self.constraints.append(
                    Constraint("=", VarRef(name), self.translate(arg.value_et))
                )
        for cond in host_summary.asserts:
            self.add_comparison(cond)
        for ka in ksum.asserts:
            if _is_prefix(ka.path_guards, guards):
                self.add_comparison(ka.cond_et)
        for guard in guards:
            self.add_comparison(guard)

    def finish(self, check: str) -> ConstraintSet:
        return ConstraintSet(
            variables=list(self.variables.values()),
            constraints=self.constraints,
            check=check,
            witness_leaves=self.witness_leaves,
            input_leaves=self.input_leaves,
        )


def _is_prefix(prefix: list, full: list) -> bool:
    return len(prefix) <= len(full) and full[: len(prefix)] == prefix


# ===== extent resolution ====================================================


def base_total_et(
    base: ValueId,
    kernel: KernelIr,
    ksum: KernelSummary,
    launch: KernelLaunchRecord,
) -> Optional[Et]:
    """Total extent of an access base, or None when it cannot be named."""
    if base in ksum.k_allocs:
        return ksum.k_allocs[base]
    if ksum.dyn_shm_vid is not None and base == ksum.dyn_shm_vid:
        return launch.dyn_shm_et  # may be None: size unknown
    for param, arg in zip(kernel.params, launch.args):
        if param.vid == base:
            if arg.allocation is None:
                return None
            return arg.allocation.size_et
    return None


def target_size_et(
    access: MemoryAccessRecord,
    kernel: KernelIr,
    ksum: KernelSummary,
    launch: KernelLaunchRecord,
    bound: int,
) -> Optional[Et]:
    """Extent the subscript is checked against (partition-aware)."""
    if not access.is_partition:
        return base_total_et(access.base, kernel, ksum, launch)
    records = ksum.partitions.get(access.base)
    if records is None:
        raise AnalysisError(
            f"partition target {access.target!r} has no partition table",
            access.location,
        )
    total = base_total_et(access.base, kernel, ksum, launch)
    if total is None:
        return None
    sizes = derive_partition_sizes(records, total, bound)
    for rec, size in zip(records, sizes):
        if rec.vid == access.target:
            return size
    raise AnalysisError(
        f"partition target {access.target!r} missing from table",
        access.location,
    )


# ===== public generators ====================================================


def constraint_sets_for_access(
    module: IrModule,
    kernel: KernelIr,
    ksum: KernelSummary,
    host_summary: HostSummary,
    launch: KernelLaunchRecord,
    access: MemoryAccessRecord,
    max_domain: int,
    bound: int,
    check_underflow: bool = True,
) -> AccessSets:
    size_et = target_size_et(access, kernel, ksum, launch, bound)
    if size_et is None:
        return AccessSets(access, launch, size_unknown=True)
    result = AccessSets(access, launch, size_unknown=False)
    checks = ("upper", "lower") if check_underflow else ("upper",)
    for check in checks:
        b = _SetBuilder(module, max_domain)
        b.declare_geometry(launch)
        offset = b.var(OFFSET_VAR, -max_domain, max_domain)
        size = b.var(SIZE_VAR, 0, max_domain)
        if check == "upper":
            b.constraints.append(Constraint(">=", offset, size))
        else:
            b.constraints.append(Constraint("<", offset, Lit(0)))
        b.constraints.append(
            Constraint("=", offset, b.translate(access.offset_et))
        )
        b.constraints.append(Constraint("=", size, b.translate(size_et)))
        b.add_context(kernel, launch, host_summary, ksum, access.path_guards)
        result.sets.append(b.finish(check))
    return result


@dataclass
class LayoutCheck:
    base: ValueId
    earlier: PartitionRecord
    later: PartitionRecord
    cset: ConstraintSet


def layout_check_sets(
    module: IrModule,
    kernel: KernelIr,
    ksum: KernelSummary,
    host_summary: HostSummary,
    launch: KernelLaunchRecord,
    max_domain: int,
) -> list[LayoutCheck]:
    """One satisfiability question per consecutive partition pair: can the
    later partition start before the earlier one?  Sat means the derived
    layout (and so any intra-allocation verdicts on it) is suspect."""
    checks: list[LayoutCheck] = []
    for base, records in ksum.partitions.items():
        for earlier, later in zip(records, records[1:]):
            b = _SetBuilder(module, max_domain)
            b.declare_geometry(launch)
            b.constraints.append(
                Constraint(
                    "<",
                    b.translate(later.offset_et),
                    b.translate(earlier.offset_et),
                )
            )
            b.add_context(kernel, launch, host_summary, ksum, [])
            checks.append(LayoutCheck(base, earlier, later, b.finish("layout")))
    return checks


# ===== rendering (--dump-constraints) =======================================


def render_sexpr(e: SExpr) -> str:
    if isinstance(e, Lit):
        return str(e.value)
    if isinstance(e, VarRef):
        return e.name
    return f"({e.op} {render_sexpr(e.left)} {render_sexpr(e.right)})"


def render_constraint(c: Constraint) -> str:
    return f"({c.rel} {render_sexpr(c.lhs)} {render_sexpr(c.rhs)})"


def render_constraint_set(cs: ConstraintSet) -> str:
    lines = [f"check {cs.check}:"]
    for v in cs.variables:
        lines.append(f"  var {v.name} in [{v.lo}, {v.hi}]")
    for c in cs.constraints:
        lines.append(f"  {render_constraint(c)}")
    return "\n".join(lines)
