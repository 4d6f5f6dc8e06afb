"""Command-line interface.

``scuba-mini analyze FILE`` (the subcommand may be omitted) runs the static
checks and reports diagnostics -- human-readable text on stderr or JSON
lines on stdout.  ``scuba-mini exec FILE --inputs 3,5`` interprets the
program once with the given ``__input()`` values and emits the memory-event
trace as JSON lines.

Exit codes: 0 no findings, 1 definite bugs (``unverifiable`` joins them
under ``--strict-unverifiable``; the partition-layout warning never does),
2 file/parse errors, 3 internal errors, 64 usage errors.

Output for a fixed input file and configuration is byte-identical across
runs.  The ``SCUBA_MINI_SEED`` environment variable is accepted for
compatibility with fuzzing drivers but has no effect: nothing in the
analysis is randomized.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .analyzer import AnalyzerConfig, AnalysisResult, analyze_program
from .constraint_gen import render_constraint_set
from .errors import MiniCudaError
from .expr_trees import render_et
from .frontend import parse_source
from .ir import GRID_AXES
from .oracle import NeedMoreInput, interpret
from .report import (
    BUG_KINDS,
    UNVERIFIABLE,
    render_json_lines,
    render_text_lines,
)

EXIT_CLEAN = 0
EXIT_BUGS = 1
EXIT_INPUT_ERROR = 2
EXIT_INTERNAL = 3
EXIT_USAGE = 64

_SUBCOMMANDS = ("analyze", "exec")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems exit 64, not 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="scuba-mini", description=__doc__)
    parser.add_argument(
        "--version", action="version", version=f"scuba-mini {__version__}"
    )
    sub = parser.add_subparsers(
        dest="command", required=True, parser_class=_Parser
    )

    analyze = sub.add_parser(
        "analyze", help="statically check a MiniCUDA program"
    )
    analyze.add_argument("file", help="MiniCUDA source file")
    analyze.add_argument(
        "--check",
        choices=("oob", "uaf", "all"),
        default="all",
        help="which checkers to run (default: all)",
    )
    analyze.add_argument(
        "--max-domain",
        type=int,
        default=2**20,
        metavar="N",
        help="solver variable domain bound (default: 2**20)",
    )
    analyze.add_argument(
        "--solver-timeout",
        type=float,
        default=30.0,
        metavar="SECONDS",
        help="per-query solver budget (default: 30)",
    )
    analyze.add_argument(
        "--no-underflow",
        action="store_true",
        help="skip the negative-offset checks",
    )
    analyze.add_argument(
        "--format",
        choices=("text", "json"),
        default="text",
        help="diagnostic output format (default: text)",
    )
    analyze.add_argument(
        "--strict-unverifiable",
        action="store_true",
        help="count unverifiable accesses as failures for the exit code",
    )
    for flag, help_text in (
        ("--dump-ir", "print the lowered IR"),
        ("--dump-ets", "print extracted expression trees"),
        ("--dump-host-summary", "print allocations, launches and asserts"),
        ("--dump-kernel-summary", "print per-kernel accesses and partitions"),
        ("--dump-constraints", "print the generated constraint systems"),
    ):
        analyze.add_argument(flag, action="store_true", help=help_text)

    exec_cmd = sub.add_parser(
        "exec", help="interpret a program once and trace its accesses"
    )
    exec_cmd.add_argument("file", help="MiniCUDA source file")
    exec_cmd.add_argument(
        "--inputs",
        default="",
        metavar="N,N,...",
        help="comma-separated values for the __input() sites (in site order)",
    )
    return parser


def _read_program(path_text: str):
    path = Path(path_text)
    try:
        source = path.read_text()
    except OSError as exc:
        print(f"scuba-mini: cannot read {path_text}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT_ERROR)
    return parse_source(source, path_text)


# ===== analyze ==============================================================


def _run_analyze(args) -> int:
    program = _read_program(args.file)
    config = AnalyzerConfig(
        check=args.check,
        max_domain=args.max_domain,
        solver_timeout=args.solver_timeout,
        check_underflow=not args.no_underflow,
    )
    result = analyze_program(program, config)
    if args.dump_ir:
        print(result.module.dump(), end="")
    if args.dump_ets:
        _dump_ets(result)
    if args.dump_host_summary:
        _dump_host_summary(result)
    if args.dump_kernel_summary:
        _dump_kernel_summary(result)
    if args.dump_constraints:
        _dump_constraints(result)
    if args.format == "json":
        sys.stdout.write(render_json_lines(result.diagnostics))
    else:
        sys.stderr.write(render_text_lines(result.diagnostics))
        if not result.diagnostics:
            print("no issues found.", file=sys.stderr)
    failing = set(BUG_KINDS)
    if args.strict_unverifiable:
        failing.add(UNVERIFIABLE)
    if any(d.kind in failing for d in result.diagnostics):
        return EXIT_BUGS
    return EXIT_CLEAN


def _dump_ets(result: AnalysisResult) -> None:
    print("expression trees:")
    for vid, record in result.host_summary.allocations.items():
        print(f"  alloc {record.name}: size {render_et(record.size_et)}")
    for launch in result.host_summary.launches:
        dims = " ".join(
            f"{axis}={render_et(et)}"
            for axis, et in zip(GRID_AXES, launch.grid_ets)
        )
        print(f"  launch {launch.kernel_name}: {dims}")
        if launch.dyn_shm_et is not None:
            print(f"    dyn-shm {render_et(launch.dyn_shm_et)}")
    for cond in result.host_summary.asserts:
        print(f"  assert {render_et(cond)}")
    for name, ksum in result.kernel_summaries.items():
        print(f"  kernel {name}:")
        for vid, size in ksum.k_allocs.items():
            print(f"    alloc {vid.name or vid.id}: size {render_et(size)}")
        for base, records in ksum.partitions.items():
            for rec in records:
                print(
                    f"    partition {rec.name}: offset "
                    f"{render_et(rec.offset_et)}"
                )
        for access in ksum.accesses:
            print(
                f"    access {access.target_name} [{access.kind}] "
                f"offset {render_et(access.offset_et)} at {access.location}"
            )
            for guard in access.path_guards:
                print(f"      guard {render_et(guard)}")


def _dump_host_summary(result: AnalysisResult) -> None:
    summary = result.host_summary
    print("host summary:")
    for record in summary.allocations.values():
        print(
            f"  alloc {record.name} ({record.elem_type}) "
            f"size {render_et(record.size_et)} at {record.location}"
        )
    for launch in summary.launches:
        args = []
        for arg in launch.args:
            if arg.kind == "pointer":
                args.append(f"{arg.param_name}<-{arg.allocation.name}")
            else:
                args.append(f"{arg.param_name}={render_et(arg.value_et)}")
        print(
            f"  launch {launch.kernel_name}({', '.join(args)}) "
            f"at {launch.location}"
        )
    for cond in summary.asserts:
        print(f"  assert {render_et(cond)}")
    for vid, loc in summary.frees:
        print(f"  free {vid.name or vid.id} at {loc}")


def _dump_kernel_summary(result: AnalysisResult) -> None:
    for name, ksum in result.kernel_summaries.items():
        print(f"kernel summary {name}:")
        for vid, size in ksum.k_allocs.items():
            space = ksum.spaces.get(vid, "?")
            print(
                f"  alloc {vid.name or vid.id} [{space}] "
                f"size {render_et(size)}"
            )
        for base, records in ksum.partitions.items():
            base_name = base.name or f"v{base.id}"
            chain = ", ".join(
                f"{r.name}@{render_et(r.offset_et)}" for r in records
            )
            print(f"  partitions of {base_name}: {chain}")
        for access in ksum.accesses:
            print(
                f"  {access.kind} {access.target_name} [{access.space}] "
                f"offset {render_et(access.offset_et)} at {access.location}"
            )


def _dump_constraints(result: AnalysisResult) -> None:
    for acr in result.access_results:
        print(
            f"constraints for {acr.access.target_name} at "
            f"{acr.access.location} (launch at {acr.launch.location}):"
        )
        if acr.size_unknown:
            print("  extent unknown; no constraint system generated")
            continue
        for cset in acr.sets.sets:
            print(render_constraint_set(cset))


# ===== exec =================================================================


def _run_exec(args) -> int:
    program = _read_program(args.file)
    inputs: list[int] = []
    if args.inputs.strip():
        try:
            inputs = [int(part) for part in args.inputs.split(",")]
        except ValueError:
            print(
                f"scuba-mini: --inputs expects integers, got {args.inputs!r}",
                file=sys.stderr,
            )
            return EXIT_USAGE
    try:
        trace = interpret(program, inputs)
    except NeedMoreInput as need:
        print(
            f"scuba-mini: program reads input site {need.site}; "
            f"pass at least {need.site + 1} values via --inputs",
            file=sys.stderr,
        )
        return EXIT_INPUT_ERROR
    for event in trace.events:
        print(
            json.dumps(
                {
                    "event": "access" if event.kind != "free" else "free",
                    "line": event.line,
                    "column": event.column,
                    "target": event.target,
                    "kind": event.kind,
                    "offset": event.offset,
                    "extent": event.extent,
                    "violation": event.violation,
                }
            )
        )
    print(
        json.dumps(
            {
                "event": "end",
                "halted": trace.halted,
                "halt_reason": trace.halt_reason,
                "events": len(trace.events),
            }
        )
    )
    if any(event.violation is not None for event in trace.events):
        return EXIT_BUGS
    return EXIT_CLEAN


# ===== entry point ==========================================================


def main(argv=None) -> int:
    args_in = list(sys.argv[1:] if argv is None else argv)
    if args_in and args_in[0] not in _SUBCOMMANDS and args_in[0] not in (
        "-h", "--help", "--version"
    ):
        args_in.insert(0, "analyze")
    parser = _build_parser()
    args = parser.parse_args(args_in)
    try:
        if args.command == "analyze":
            return _run_analyze(args)
        return _run_exec(args)
    except MiniCudaError as exc:
        print(f"scuba-mini: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except BrokenPipeError:
        # Reader went away (e.g. piped into head); suppress the shutdown
        # complaint from the unflushed stdout buffer.
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return EXIT_CLEAN
    except SystemExit:
        raise
    except Exception as exc:  # pragma: no cover - defensive
        print(f"scuba-mini: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
