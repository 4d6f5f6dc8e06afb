"""Kernel-side extraction: allocations, partitions and memory accesses.

One linear walk over a kernel body collects

* **k_allocs** -- static shared / local array extents (size ETs);
* **partitions** -- per ultimate base (dynamic shared memory or a pointer
  parameter), the ordered list of named sub-regions created by
  ``p = &base[e];``.  The base itself is seeded at offset 0; nested
  partitions accumulate absolute offsets.  ``derive_partition_sizes`` turns
  the offset list plus the base's total extent into per-partition sizes
  (next offset minus own offset; the last one ends at the total extent);
* **accesses** -- every MemAccess with its offset ET, the guard ETs of the
  enclosing branch arms (innermost last, else-arms pre-negated), and the
  resolved target/base information the checker needs;
* **asserts** -- kernel-side assert conditions with their own guard stacks.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import AnalysisError
from .expr_trees import (
    BinOp,
    Const,
    Et,
    EtBuilder,
    canonicalize,
    negate_comparison,
)
from .ir import SPACE_LOCAL, SPACE_SHARED, IrModule, KernelIr, ValueId
from .source import SourceLocation

# Diagnostic memory-space labels.
SPACE_GLOBAL = "global"
SPACE_DYN_PARTITION = "shared-dynamic-partition"


@dataclass
class PartitionRecord:
    vid: ValueId
    offset_et: Et  # absolute offset from the ultimate base
    location: SourceLocation

    @property
    def name(self) -> str:
        return self.vid.name or f"v{self.vid.id}"


@dataclass
class MemoryAccessRecord:
    target: ValueId
    target_name: str
    base: ValueId  # ultimate base (== target unless partition-born)
    base_offset_et: Et  # absolute offset of target within base
    offset_et: Et  # subscript ET relative to target
    kind: str  # read | write | read-write
    space: str  # global | shared-static | shared-dynamic-partition | local
    is_partition: bool  # target came from a SubIndex chain
    path_guards: list[BinOp]  # innermost-last; else arms pre-negated
    location: SourceLocation


@dataclass
class KernelAssert:
    cond_et: BinOp
    path_guards: list[BinOp]
    location: SourceLocation


@dataclass
class KernelSummary:
    kernel_name: str
    k_allocs: dict[ValueId, Et] = field(default_factory=dict)
    spaces: dict[ValueId, str] = field(default_factory=dict)
    partitions: dict[ValueId, list[PartitionRecord]] = field(
        default_factory=dict
    )
    accesses: list[MemoryAccessRecord] = field(default_factory=list)
    asserts: list[KernelAssert] = field(default_factory=list)
    uses_dyn_shm: bool = False
    dyn_shm_vid: ValueId | None = None


def kernel_pass(
    module: IrModule, kernel: KernelIr, builder: EtBuilder, bound: int
) -> KernelSummary:
    summary = KernelSummary(kernel.name)
    param_by_vid = {p.vid: p for p in kernel.params}
    # vid -> (ultimate base, absolute offset ET) for partition-born values.
    chain: dict[ValueId, tuple[ValueId, Et]] = {}
    guards: list[BinOp] = []

    def base_space(vid: ValueId) -> str:
        if vid in param_by_vid:
            return SPACE_GLOBAL
        return summary.spaces.get(vid, SPACE_GLOBAL)

    for st in kernel.body:
        if st.kind == "StaticAlloca":
            size = canonicalize(builder.create_et(st.operands[0]), bound)
            summary.k_allocs[st.result] = size
            summary.spaces[st.result] = st.operands[2]
        elif st.kind == "DynShmAlloca":
            summary.uses_dyn_shm = True
            summary.dyn_shm_vid = st.result
            summary.spaces[st.result] = SPACE_DYN_PARTITION
            summary.partitions[st.result] = [
                PartitionRecord(st.result, Const(0), st.location)
            ]
        elif st.kind == "SubIndex":
            base_vid, offset_vid = st.operands
            offset = canonicalize(builder.create_et(offset_vid), bound)
            if base_vid in chain:
                ultimate, base_off = chain[base_vid]
                offset = canonicalize(BinOp("+", base_off, offset), bound)
            else:
                ultimate = base_vid
                if ultimate not in summary.partitions:
                    # First partition of a pointer parameter: seed the base.
                    summary.partitions[ultimate] = [
                        PartitionRecord(ultimate, Const(0), st.location)
                    ]
            chain[st.result] = (ultimate, offset)
            summary.partitions[ultimate].append(
                PartitionRecord(st.result, offset, st.location)
            )
        elif st.kind == "MemAccess":
            target, offset_vid, kind = st.operands
            offset = canonicalize(builder.create_et(offset_vid), bound)
            if target in chain:
                base, base_off = chain[target]
                is_partition = True
            else:
                base, base_off = target, Const(0)
                is_partition = False
            if base in param_by_vid:
                space = SPACE_GLOBAL
            elif base in summary.spaces:
                space = summary.spaces[base]
            else:
                raise AnalysisError(
                    f"access target {target!r} has no known space", st.location
                )
            summary.accesses.append(
                MemoryAccessRecord(
                    target=target,
                    target_name=target.name or f"v{target.id}",
                    base=base,
                    base_offset_et=base_off,
                    offset_et=offset,
                    kind=kind,
                    space=space,
                    is_partition=is_partition,
                    path_guards=list(guards),
                    location=st.location,
                )
            )
        elif st.kind == "Assert":
            rel, lhs, rhs = st.operands
            et = canonicalize(builder.comparison_et(rel, lhs, rhs), bound)
            summary.asserts.append(KernelAssert(et, list(guards), st.location))
        elif st.kind == "BranchBegin":
            rel, lhs, rhs = st.operands
            et = canonicalize(builder.comparison_et(rel, lhs, rhs), bound)
            guards.append(et)
        elif st.kind == "BranchElse":
            cond = guards.pop()
            guards.append(negate_comparison(cond))
        elif st.kind == "BranchEnd":
            guards.pop()
    if guards:
        raise AnalysisError(
            f"unbalanced branch regions in kernel {kernel.name!r}", kernel.location
        )
    return summary


def derive_partition_sizes(
    records: list[PartitionRecord], total_et: Et, bound: int
) -> list[Et]:
    """Size ET for each partition record, given the base's total extent.

    Partition ``i`` extends to the next recorded offset; the last partition
    extends to the end of the base allocation.  (Partitions are expected in
    increasing-offset creation order; the layout pre-check reports cases
    where that fails.)
    """
    sizes: list[Et] = []
    for i, rec in enumerate(records):
        if i + 1 < len(records):
            end: Et = records[i + 1].offset_et
        else:
            end = total_et
        sizes.append(canonicalize(BinOp("-", end, rec.offset_et), bound))
    return sizes
