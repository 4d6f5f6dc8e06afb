"""Top-level analysis driver.

``analyze_program`` lowers the AST, extracts host/kernel summaries, runs
the use-after-free pass, and then asks the solver one satisfiability
question per access and check (plus the partition-layout pre-checks).  A
``Sat`` verdict becomes a diagnostic whose witness holds the model values
of every program-level unknown involved; ``Timeout`` becomes an
``unverifiable`` diagnostic; accesses whose extent cannot be named (extern
shared memory with no dynamic size at the launch) are unverifiable without
calling the solver.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import report
from .constraint_gen import (
    AccessSets,
    ConstraintSet,
    OFFSET_VAR,
    SIZE_VAR,
    constraint_sets_for_access,
    layout_check_sets,
)
from .expr_trees import EtBuilder, DEFAULT_FOLD_BOUND
from .frontend import ast as A, parse_source
from .host_pass import HostSummary, KernelLaunchRecord, host_pass
from .ir import IrModule, lower
from .kernel_pass import KernelSummary, MemoryAccessRecord, kernel_pass
from .report import Diagnostic
from .solver import Sat, Timeout, Unsat, Verdict, solve
from .uaf_pass import uaf_pass

CHECK_MODES = ("oob", "uaf", "all")


@dataclass
class AnalyzerConfig:
    check: str = "all"
    max_domain: int = 2**20
    solver_timeout: float = 30.0
    check_underflow: bool = True


@dataclass
class CheckOutcome:
    check: str  # "upper" | "lower"
    verdict: Verdict
    witness: Optional[dict[str, int]] = None
    witness_inputs: Optional[dict[int, int]] = None


@dataclass
class AccessCheckResult:
    kernel_name: str
    launch: KernelLaunchRecord
    access: MemoryAccessRecord
    size_unknown: bool
    sets: Optional[AccessSets] = None
    outcomes: list[CheckOutcome] = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return self.size_unknown or any(
            isinstance(o.verdict, Sat) for o in self.outcomes
        )


@dataclass
class AnalysisResult:
    program: A.Program
    module: IrModule
    builder: EtBuilder
    host_summary: HostSummary
    kernel_summaries: dict[str, KernelSummary]
    access_results: list[AccessCheckResult] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def diagnostics_of_kind(self, *kinds: str) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.kind in kinds]


def _classify(access: MemoryAccessRecord, check: str) -> str:
    if access.is_partition:
        return report.INTRA_OOB
    return report.OOB_UPPER if check == "upper" else report.OOB_UNDERFLOW


def _witness_from_model(cset: ConstraintSet, model: dict[str, int]):
    witness = {
        display: model[var]
        for var, display in cset.witness_leaves.items()
        if var in model
    }
    inputs = {
        site: model[var]
        for var, site in cset.input_leaves.items()
        if var in model
    }
    return witness, inputs


def _access_message(
    access: MemoryAccessRecord, check: str, kind: str, model: dict[str, int]
) -> str:
    offset = model.get(OFFSET_VAR)
    size = model.get(SIZE_VAR)
    name = access.target_name
    if kind == report.INTRA_OOB:
        return (
            f"offset {offset} escapes partition {name!r} of extent {size} "
            f"({access.space})"
        )
    if check == "upper":
        return (
            f"offset {offset} reaches past the extent {size} of {name!r} "
            f"({access.space})"
        )
    return f"offset {offset} is below the start of {name!r} ({access.space})"


def analyze_program(
    program: A.Program, config: Optional[AnalyzerConfig] = None
) -> AnalysisResult:
    config = config or AnalyzerConfig()
    module = lower(program)
    builder = EtBuilder(module)
    bound = max(config.max_domain, DEFAULT_FOLD_BOUND)
    host_summary = host_pass(module, builder, bound)
    kernel_summaries = {
        name: kernel_pass(module, kernel, builder, bound)
        for name, kernel in module.kernels.items()
    }
    result = AnalysisResult(
        program, module, builder, host_summary, kernel_summaries
    )
    diagnostics: list[Diagnostic] = []
    if config.check in ("uaf", "all"):
        diagnostics.extend(uaf_pass(module))
    if config.check in ("oob", "all"):
        for launch in host_summary.launches:
            _check_launch(
                result, launch, config, bound, diagnostics
            )
    result.diagnostics = report.sort_diagnostics(_dedup(diagnostics))
    return result


def _check_launch(
    result: AnalysisResult,
    launch: KernelLaunchRecord,
    config: AnalyzerConfig,
    bound: int,
    diagnostics: list[Diagnostic],
) -> None:
    module = result.module
    kernel = module.kernels[launch.kernel_name]
    ksum = result.kernel_summaries[launch.kernel_name]
    for check in layout_check_sets(
        module, kernel, ksum, result.host_summary, launch, config.max_domain
    ):
        verdict = solve(
            check.cset.variables, check.cset.constraints, config.solver_timeout
        )
        if isinstance(verdict, Sat):
            witness, _ = _witness_from_model(check.cset, verdict.model)
            base_name = check.base.name or f"v{check.base.id}"
            diagnostics.append(
                Diagnostic(
                    report.SUSPICIOUS_LAYOUT,
                    check.later.location,
                    check.later.name,
                    ksum.spaces.get(check.base, "global"),
                    f"partition {check.later.name!r} can start before "
                    f"{check.earlier.name!r} on base {base_name!r}; derived "
                    "extents may be wrong",
                    witness=witness,
                )
            )
    for access in ksum.accesses:
        sets = constraint_sets_for_access(
            module,
            kernel,
            ksum,
            result.host_summary,
            launch,
            access,
            config.max_domain,
            bound,
            config.check_underflow,
        )
        acr = AccessCheckResult(
            kernel.name, launch, access, sets.size_unknown, sets
        )
        if sets.size_unknown:
            diagnostics.append(
                Diagnostic(
                    report.UNVERIFIABLE,
                    access.location,
                    access.target_name,
                    access.space,
                    f"extent of {access.target_name!r} is unknown at this "
                    "launch; access not verifiable",
                    witness=None,
                )
            )
            result.access_results.append(acr)
            continue
        for cset in sets.sets:
            verdict = solve(
                cset.variables, cset.constraints, config.solver_timeout
            )
            outcome = CheckOutcome(cset.check, verdict)
            if isinstance(verdict, Sat):
                witness, inputs = _witness_from_model(cset, verdict.model)
                outcome.witness = witness
                outcome.witness_inputs = inputs
                kind = _classify(access, cset.check)
                diagnostics.append(
                    Diagnostic(
                        kind,
                        access.location,
                        access.target_name,
                        access.space,
                        _access_message(access, cset.check, kind, verdict.model),
                        witness=witness,
                    )
                )
            elif isinstance(verdict, Timeout):
                diagnostics.append(
                    Diagnostic(
                        report.UNVERIFIABLE,
                        access.location,
                        access.target_name,
                        access.space,
                        f"solver timed out; access to {access.target_name!r} "
                        "not verified",
                        witness=None,
                    )
                )
            acr.outcomes.append(outcome)
        result.access_results.append(acr)


def _dedup(diagnostics: list[Diagnostic]) -> list[Diagnostic]:
    seen: set[tuple] = set()
    unique: list[Diagnostic] = []
    for d in diagnostics:
        key = (
            d.kind,
            d.location.file,
            d.location.line,
            d.location.column,
            d.target,
        )
        if key not in seen:
            seen.add(key)
            unique.append(d)
    return unique


def analyze_source(
    text: str, filename: str = "<input>",
    config: Optional[AnalyzerConfig] = None,
) -> AnalysisResult:
    return analyze_program(parse_source(text, filename), config)
