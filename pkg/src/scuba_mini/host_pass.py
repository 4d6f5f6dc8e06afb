"""Host-side extraction: allocations, launches, asserts and frees.

Walks the lowered host statement list once and summarizes everything the
per-launch analysis needs: the size ET of every allocation, the six launch
dimensions (grid then block, missing axes filled with 1), the argument
bindings of each launch, the dynamic shared-memory extent, and every host
assert as a comparison-rooted ET (in program order, including asserts inside
host branches).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import AnalysisError
from .expr_trees import BinOp, Et, EtBuilder, canonicalize
from .ir import IrModule, ValueId
from .source import SourceLocation


@dataclass
class AllocationRecord:
    alloc_value: ValueId
    size_et: Et
    elem_type: str
    location: SourceLocation

    @property
    def name(self) -> str:
        return self.alloc_value.name or f"v{self.alloc_value.id}"


@dataclass
class LaunchArg:
    kind: str  # "pointer" | "scalar"
    param_name: str
    allocation: Optional[AllocationRecord] = None  # pointer args
    value_et: Optional[Et] = None  # scalar args


@dataclass
class KernelLaunchRecord:
    kernel_name: str
    # ETs ordered GDimX, GDimY, GDimZ, BDimX, BDimY, BDimZ.
    grid_ets: list[Et]
    args: list[LaunchArg]
    dyn_shm_et: Optional[Et]
    location: SourceLocation


@dataclass
class HostSummary:
    allocations: dict[ValueId, AllocationRecord] = field(default_factory=dict)
    launches: list[KernelLaunchRecord] = field(default_factory=list)
    asserts: list[BinOp] = field(default_factory=list)
    frees: list[tuple[ValueId, SourceLocation]] = field(default_factory=list)


def host_pass(
    module: IrModule, builder: EtBuilder, bound: int
) -> HostSummary:
    summary = HostSummary()
    for st in module.host:
        if st.kind == "HostAlloc":
            size = canonicalize(builder.create_et(st.operands[0]), bound)
            summary.allocations[st.result] = AllocationRecord(
                st.result, size, st.operands[1], st.location
            )
        elif st.kind == "Assert":
            rel, lhs, rhs = st.operands
            et = canonicalize(builder.comparison_et(rel, lhs, rhs), bound)
            summary.asserts.append(et)
        elif st.kind == "HostFree":
            summary.frees.append((st.operands[0], st.location))
        elif st.kind == "Launch":
            summary.launches.append(
                _launch_record(module, builder, bound, st, summary)
            )
    return summary


def _launch_record(module, builder, bound, st, summary) -> KernelLaunchRecord:
    name, dims, arg_vids, shm = st.operands
    kernel = module.kernels.get(name)
    if kernel is None:
        raise AnalysisError(f"launch of unknown kernel {name!r}", st.location)
    grid_ets = [canonicalize(builder.create_et(d), bound) for d in dims]
    args: list[LaunchArg] = []
    for param, vid in zip(kernel.params, arg_vids):
        if param.is_pointer:
            record = summary.allocations.get(vid)
            if record is None:
                raise AnalysisError(
                    f"pointer argument for {param.name!r} is not a host "
                    "allocation",
                    st.location,
                )
            args.append(LaunchArg("pointer", param.name, allocation=record))
        else:
            et = canonicalize(builder.create_et(vid), bound)
            args.append(LaunchArg("scalar", param.name, value_et=et))
    dyn_shm = (
        canonicalize(builder.create_et(shm), bound) if shm is not None else None
    )
    return KernelLaunchRecord(name, grid_ets, args, dyn_shm, st.location)
