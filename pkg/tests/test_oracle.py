"""Reference interpreter: event traces, halting rules, sweeps, replay."""
from __future__ import annotations

import pytest

from scuba_mini.frontend import parse_source
from scuba_mini.oracle import (
    NeedMoreInput,
    brute_force_all,
    brute_force_verdict,
    compile_program,
    count_input_sites,
    interpret,
    replay_witness,
)


def program(src: str):
    return parse_source(src, "t.mcu")


def run(src: str, inputs=()):
    return interpret(program(src), list(inputs))


# ===== event capture ========================================================


def test_in_bounds_accesses_record_clean_events():
    trace = run("""\
__global__ void k(int* data, int n) {
    data[n] = 5;
    int x = data[n];
}

void main() {
    int* data = cudaMalloc(4);
    k<<<1, 1>>>(data, 2);
}
""")
    assert not trace.halted
    assert [(e.kind, e.target, e.offset, e.extent, e.violation)
            for e in trace.events] == [
        ("write", "data", 2, 4, None),
        ("read", "data", 2, 4, None),
    ]
    write = trace.events[0]
    assert (write.line, write.column) == (2, 5)


def test_threads_execute_in_order_within_grid():
    trace = run("""\
__global__ void k(int* data) {
    data[threadIdx.x + blockIdx.x * 2] = 1;
}

void main() {
    int* data = cudaMalloc(4);
    k<<<2, 2>>>(data);
}
""")
    assert [e.offset for e in trace.events] == [0, 1, 2, 3]


def test_out_of_bounds_read_is_flagged_and_yields_zero():
    # the flagged read's value (0) is then used as the next index
    trace = run("""\
__global__ void k(int* data) {
    int x = data[9];
    data[x] = 1;
}

void main() {
    int* data = cudaMalloc(2);
    k<<<1, 1>>>(data);
}
""")
    read, write = trace.events
    assert read.violation == "oob-upper"
    assert (write.offset, write.violation) == (0, None)


def test_negative_offset_is_underflow():
    trace = run("""\
__global__ void k(int* data, int n) {
    data[n - 3] = 1;
}

void main() {
    int* data = cudaMalloc(4);
    k<<<1, 1>>>(data, 1);
}
""")
    (event,) = trace.events
    assert event.violation == "oob-underflow"
    assert event.offset == -2


def test_partition_write_within_backing_storage_is_visible():
    # p's window shrinks to [0, 4) when q is carved; p[5] overflows the
    # window but still lands in the backing storage and is readable there.
    trace = run("""\
__global__ void k() {
    extern __shared__ int smem[];
    int* p = &smem[0];
    int* q = &smem[4];
    p[5] = 7;
    int x = smem[5];
    q[x] = 1;
}

void main() {
    k<<<1, 1, 8>>>();
}
""")
    oob_write, base_read, q_write = trace.events
    assert (oob_write.target, oob_write.offset, oob_write.extent) == ("p", 5, 4)
    assert oob_write.violation == "oob-upper"
    assert (base_read.target, base_read.extent, base_read.violation) == (
        "smem", 8, None,
    )
    # q[7] proves the read saw the earlier out-of-window write
    assert (q_write.offset, q_write.extent) == (7, 4)
    assert q_write.violation == "oob-upper"


def test_static_shared_memory_resets_per_block():
    trace = run("""\
__global__ void k(int* data) {
    __shared__ int tile[2];
    if (blockIdx.x == 0) {
        tile[0] = 1;
    }
    data[tile[0]] = 7;
}

void main() {
    int* data = cudaMalloc(2);
    k<<<2, 1>>>(data);
}
""")
    data_offsets = [e.offset for e in trace.events if e.target == "data"]
    # block 0 reads its own write (1); block 1 starts from zeroed memory
    assert data_offsets == [1, 0]


# ===== legality halts =======================================================

HALTS = [
    # negative allocation size
    ("""\
void main() {
    int n = __input();
    int* data = cudaMalloc(n - 5);
}
""", [2], "negative allocation size"),
    # assert failed
    ("""\
void main() {
    int n = __input();
    assert(n <= 3);
}
""", [4], "assert failed"),
    # division by zero
    ("""\
void main() {
    int n = __input();
    int q = 6 / n;
}
""", [0], "division by zero"),
    # negative stored value
    ("""\
__global__ void k(int* data, int n) {
    data[0] = n - 9;
}

void main() {
    int n = __input();
    int* data = cudaMalloc(1);
    k<<<1, 1>>>(data, n);
}
""", [2], "negative stored value"),
    # negative launch dimension
    ("""\
__global__ void k() {
}

void main() {
    int n = __input();
    k<<<n - 4, 1>>>();
}
""", [1], "negative launch dimension"),
    # negative dynamic shared size
    ("""\
__global__ void k() {
    extern __shared__ int smem[];
    smem[0] = 1;
}

void main() {
    int n = __input();
    k<<<1, 1, n - 2>>>();
}
""", [0], "negative dynamic shared size"),
    # negative scalar argument
    ("""\
__global__ void k(int n) {
    int x = n;
}

void main() {
    int n = __input();
    k<<<1, 1>>>(n - 7);
}
""", [3], "negative scalar argument"),
]


@pytest.mark.parametrize("src,inputs,reason", HALTS,
                         ids=[h[2].replace(" ", "-") for h in HALTS])
def test_legality_halts(src, inputs, reason):
    trace = run(src, inputs)
    assert trace.halted
    assert trace.halt_reason == reason


def test_halted_executions_keep_events_before_the_halt():
    trace = run("""\
__global__ void k(int* data, int n) {
    data[5] = 1;
    data[0] = n - 9;
}

void main() {
    int n = __input();
    int* data = cudaMalloc(2);
    k<<<1, 1>>>(data, n);
}
""", [1])
    assert trace.halted
    assert trace.events[0].violation == "oob-upper"


# ===== use after free =======================================================


def test_kernel_access_after_free_is_uaf():
    trace = run("""\
__global__ void k(int* data) {
    data[0] = 1;
}

void main() {
    int* data = cudaMalloc(4);
    cudaFree(data);
    k<<<1, 1>>>(data);
}
""")
    (event,) = trace.events
    assert event.violation == "uaf"
    assert event.kind == "write"


def test_double_free_emits_free_event():
    trace = run("""\
void main() {
    int* data = cudaMalloc(4);
    cudaFree(data);
    cudaFree(data);
}
""")
    (event,) = trace.events
    assert (event.kind, event.violation) == ("free", "double-free")
    assert (event.line, event.column) == (4, 5)


def test_single_free_emits_no_event():
    trace = run("""\
void main() {
    int* data = cudaMalloc(4);
    cudaFree(data);
}
""")
    assert trace.events == []


# ===== inputs ===============================================================

INPUT_SRC = """\
__global__ void k(int* data, int n) {
    data[n] = 1;
}

void main() {
    int n = __input();
    assert(n <= 3);
    int* data = cudaMalloc(3);
    k<<<1, 1>>>(data, n);
}
"""


def test_count_input_sites_counts_syntactic_sites():
    assert count_input_sites(program(INPUT_SRC)) == 1
    two = INPUT_SRC.replace(
        "int n = __input();", "int n = __input();\n    int m = __input();"
    )
    assert count_input_sites(program(two)) == 2


def test_missing_inputs_raise_need_more_input():
    with pytest.raises(NeedMoreInput) as exc:
        run(INPUT_SRC, [])
    assert exc.value.site == 0


# ===== sweeping and replay ==================================================


def test_brute_force_counts_and_violations():
    sweep = brute_force_all(program(INPUT_SRC), 8)
    assert sweep.input_arity == 1
    assert sweep.executions == 9
    # n in 4..8 fail the assert
    assert sweep.halted_executions == 5
    assert sweep.violations == {(2, 5): {"oob-upper"}}
    assert sweep.has_violation(2, 5)
    assert not sweep.has_violation(9, 1)


def test_brute_force_verdict_per_site():
    prog = program(INPUT_SRC)
    assert brute_force_verdict(prog, 2, 5, 8)
    assert not brute_force_verdict(prog, 2, 5, 2)  # n <= 2 never overflows


def test_violations_only_mode_drops_clean_events():
    compiled = compile_program(program(INPUT_SRC))
    full = compiled.run([1])
    lean = compiled.run([1], violations_only=True)
    assert len(full.events) == 1
    assert lean.events == []


def test_replay_witness_reproduces_and_rejects():
    prog = program(INPUT_SRC)
    hit, trace = replay_witness(prog, {0: 3}, 64, 2, 5)
    assert hit and not trace.halted
    # a legal but harmless input does not reproduce
    hit, _ = replay_witness(prog, {0: 2}, 64, 2, 5)
    assert not hit
    # an illegal input halts: not a reproduction
    hit, trace = replay_witness(prog, {0: 7}, 64, 2, 5)
    assert not hit and trace.halted


def test_replay_witness_fills_unconstrained_sites_with_default():
    src = """\
__global__ void k(int* data, int n) {
    data[n] = 1;
}

void main() {
    int a = __input();
    int n = __input();
    assert(n <= 3);
    int* data = cudaMalloc(4);
    k<<<1, 1>>>(data, n);
}
"""
    # site 0 is unconstrained; default 2 keeps the run legal
    hit, trace = replay_witness(program(src), {1: 3}, 2, 2, 5)
    assert not hit and not trace.halted
