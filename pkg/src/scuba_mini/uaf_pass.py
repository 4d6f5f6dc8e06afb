"""Use-after-free and double-free detection over the host IR.

A forward walk maintains the set of live allocations.  ``cudaFree`` of a
non-live allocation is a double free; a launch that passes a dead
allocation is a use-after-free, reported both at the launch site and at
every kernel access that provably touches the dead pointer (traced through
the parameter position and any partition chains).  Branch arms are walked
independently and joined by intersection (an allocation freed on *either*
arm is treated as dead afterwards); loop bodies are walked twice so a free
in iteration *i* is seen by uses in iteration *i + 1*.
"""
from __future__ import annotations

from dataclasses import dataclass

from .ir import IrModule, IrStatement, KernelIr, ValueId
from .report import DOUBLE_FREE, UAF, Diagnostic
from .source import SourceLocation


@dataclass
class _Walker:
    module: IrModule
    live: set[ValueId]
    ever_allocated: set[ValueId]
    findings: list[Diagnostic]
    seen: set[tuple]

    def report(
        self,
        kind: str,
        loc: SourceLocation,
        target: str,
        message: str,
    ) -> None:
        key = (loc.file, loc.line, loc.column, kind, target)
        if key in self.seen:
            return
        self.seen.add(key)
        self.findings.append(
            Diagnostic(kind, loc, target, "global", message, witness=None)
        )

    # ----- statement walk ---------------------------------------------------

    def walk(self, body: list[IrStatement], start: int, end: int) -> int:
        """Walk body[start:end); returns the index after the region."""
        i = start
        while i < end:
            st = body[i]
            if st.kind == "HostAlloc":
                self.live.add(st.result)
                self.ever_allocated.add(st.result)
            elif st.kind == "HostFree":
                ptr = st.operands[0]
                name = ptr.name or f"v{ptr.id}"
                if ptr not in self.live:
                    self.report(
                        DOUBLE_FREE,
                        st.location,
                        name,
                        f"cudaFree of {name!r}, which is not live here",
                    )
                else:
                    self.live.discard(ptr)
            elif st.kind == "Launch":
                self._check_launch(st)
            elif st.kind == "BranchBegin":
                i = self._walk_branch(body, i)
                continue
            elif st.kind == "LoopBegin":
                i = self._walk_loop(body, i)
                continue
            i += 1
        return end

    def _find_region_end(self, body: list[IrStatement], start: int):
        """For the region opener at ``start``, locate else/end indexes."""
        depth = 0
        else_at = None
        for i in range(start, len(body)):
            kind = body[i].kind
            if kind in ("BranchBegin", "LoopBegin"):
                depth += 1
            elif kind in ("BranchEnd", "LoopEnd"):
                depth -= 1
                if depth == 0:
                    return else_at, i
            elif kind == "BranchElse" and depth == 1:
                else_at = i
        raise ValueError("unbalanced region in host IR")

    def _walk_branch(self, body: list[IrStatement], begin: int) -> int:
        else_at, end = self._find_region_end(body, begin)
        base_live = set(self.live)
        self.walk(body, begin + 1, else_at if else_at is not None else end)
        then_live = self.live
        self.live = set(base_live)
        if else_at is not None:
            self.walk(body, else_at + 1, end)
        # Join: only allocations surviving both arms stay live.
        self.live = then_live & self.live
        return end + 1

    def _walk_loop(self, body: list[IrStatement], begin: int) -> int:
        _, end = self._find_region_end(body, begin)
        # Two passes expose frees from one iteration to uses in the next.
        self.walk(body, begin + 1, end)
        self.walk(body, begin + 1, end)
        return end + 1

    # ----- launch handling --------------------------------------------------

    def _check_launch(self, st: IrStatement) -> None:
        name, _dims, arg_vids, _shm = st.operands
        kernel = self.module.kernels.get(name)
        if kernel is None:
            return
        dead_params: list[str] = []
        for param, vid in zip(kernel.params, arg_vids):
            if not param.is_pointer:
                continue
            if vid in self.live or vid not in self.ever_allocated:
                continue
            alloc_name = vid.name or f"v{vid.id}"
            dead_params.append(param.name)
            self.report(
                UAF,
                st.location,
                alloc_name,
                f"launch of {name!r} passes freed allocation {alloc_name!r} "
                f"for parameter {param.name!r}",
            )
            self._report_kernel_uses(kernel, param.vid, alloc_name)

    def _report_kernel_uses(
        self, kernel: KernelIr, param_vid: ValueId, alloc_name: str
    ) -> None:
        # Collect the parameter value plus everything partitioned from it.
        tainted = {param_vid}
        changed = True
        while changed:
            changed = False
            for st in kernel.body:
                if (
                    st.kind == "SubIndex"
                    and st.operands[0] in tainted
                    and st.result not in tainted
                ):
                    tainted.add(st.result)
                    changed = True
        for st in kernel.body:
            if st.kind == "MemAccess" and st.operands[0] in tainted:
                target = st.operands[0]
                self.report(
                    UAF,
                    st.location,
                    target.name or f"v{target.id}",
                    f"kernel {kernel.name!r} accesses freed allocation "
                    f"{alloc_name!r} here",
                )


def uaf_pass(module: IrModule) -> list[Diagnostic]:
    walker = _Walker(
        module=module,
        live=set(),
        ever_allocated=set(),
        findings=[],
        seen=set(),
    )
    walker.walk(module.host, 0, len(module.host))
    return walker.findings
