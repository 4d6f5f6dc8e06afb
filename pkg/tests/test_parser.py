"""Parser and resolver: structure, round-tripping, rejection table."""
from __future__ import annotations

import pytest

from scuba_mini.errors import ParseError, ResolutionError
from scuba_mini.frontend import ast as A
from scuba_mini.frontend import parse_source, render_program

from conftest import corpus_paths

# ===== structure ============================================================

SAXPY_LIKE = """\
__global__ void saxpy(int* array, int n) {
    int index = threadIdx.x + blockDim.x * blockIdx.x;
    if (index < n) {
        array[index] = index;
    }
}

void main() {
    int multiples = __input();
    int* array = cudaMalloc(multiples * 512);
    saxpy<<<multiples, 512>>>(array, multiples * 512);
}
"""


def test_program_shape():
    prog = parse_source(SAXPY_LIKE, "s.mcu")
    assert [k.name for k in prog.kernels] == ["saxpy"]
    kernel = prog.kernels[0]
    assert [(p.name, p.is_pointer) for p in kernel.params] == [
        ("array", True), ("n", False),
    ]
    assert isinstance(kernel.body[0], A.AssignStmt)
    guard = kernel.body[1]
    assert isinstance(guard, A.IfStmt) and guard.cond.rel == "<"
    assert isinstance(guard.then_body[0], A.StoreStmt)

    host = prog.host_main
    assert isinstance(host[0], A.AssignStmt)
    assert isinstance(host[1], A.MallocStmt)
    launch = host[2]
    assert isinstance(launch, A.LaunchStmt)
    assert launch.kernel == "saxpy"
    assert len(launch.grid.axes) == 1  # bare expression form
    assert launch.shm is None
    assert len(launch.args) == 2


def test_input_sites_number_in_source_order():
    src = """\
void main() {
    int a = __input();
    int b = __input() + __input();
}
"""
    prog = parse_source(src, "t.mcu")
    sites = [
        e.site
        for e in A.walk_expressions(prog.host_main)
        if isinstance(e, A.InputCall)
    ]
    assert sites == [0, 1, 2]


def test_builtin_axes_parse_inside_kernel():
    src = "__global__ void k(int* a) { a[threadIdx.y + gridDim.z] = 1; }"
    prog = parse_source(src, "t.mcu")
    store = prog.kernels[0].body[0]
    refs = [
        (e.group, e.axis)
        for e in A.walk_expressions([store])
        if isinstance(e, A.BuiltinRef)
    ]
    assert refs == [("threadIdx", "y"), ("gridDim", "z")]


def test_dim3_forms():
    src = """\
__global__ void k(int* a) { a[0] = 1; }

void main() {
    int* p = cudaMalloc(4);
    k<<<dim3(2, 3, 4), dim3(5, 6)>>>(p);
}
"""
    launch = parse_source(src, "t.mcu").host_main[1]
    assert [e.value for e in launch.grid.axes] == [2, 3, 4]
    assert [e.value for e in launch.block.axes] == [5, 6]


def test_partition_and_alias_statements():
    src = """\
__global__ void k(int sections) {
    extern __shared__ int smem[];
    int* s_out = smem;
    int* s_zi = &s_out[sections];
    s_zi[0] = 1;
}
"""
    body = parse_source(src, "t.mcu").kernels[0].body
    assert isinstance(body[0], A.ExternSharedDecl)
    alias = body[1]
    assert isinstance(alias, A.AssignStmt) and isinstance(alias.value, A.Ident)
    part = body[2]
    assert isinstance(part, A.PartitionStmt)
    assert (part.name, part.base) == ("s_zi", "s_out")


def test_atomic_statement():
    src = "__global__ void k(int* a) { atomicMin(&a[threadIdx.x], 7); }"
    stmt = parse_source(src, "t.mcu").kernels[0].body[0]
    assert isinstance(stmt, A.AtomicStmt)
    assert stmt.op == "atomicMin" and stmt.target == "a"


def test_expression_precedence_shape():
    src = "void main() { int x = 1 + 2 * 3 - 4 / 2; }"
    value = parse_source(src, "t.mcu").host_main[0].value
    # ((1 + (2*3)) - (4/2))
    assert value.op == "-"
    assert value.left.op == "+" and value.left.right.op == "*"
    assert value.right.op == "/"


# ===== render round-trip ====================================================


def test_corpus_round_trips_through_renderer():
    for path in corpus_paths():
        source = path.read_text()
        prog = parse_source(source, path.name)
        rendered = render_program(prog)
        reparsed = parse_source(rendered, path.name)
        assert render_program(reparsed) == rendered, path.name


# ===== rejection table ======================================================

BAD_PROGRAMS = [
    ("void main() { int* p = 5; }",
     ParseError, "must be initialized with cudaMalloc"),
    ("void main() { int* a = cudaMalloc(4); int* b = a; }",
     ParseError, "must be initialized with cudaMalloc"),
    ("void main() { int x = 1; x = 2; }",
     ResolutionError, "single-assignment"),
    ("void main() { int x = y + 1; }",
     ResolutionError, "undefined name 'y'"),
    ("__global__ void k() { int x = __input(); }",
     ParseError, "__input() is host-only"),
    ("void main() { int x = threadIdx.x; }",
     ParseError, "expected SEMI"),
    ("__global__ void k(int* a) { a[threadIdx] = 1; }",
     ParseError, '".x/.y/.z"'),
    ("__global__ void k() { extern __shared__ int a[];"
     " extern __shared__ int b[]; }",
     ResolutionError, "only one extern __shared__"),
    ("__global__ void k(int* a) { a[0] = 1; }"
     " void main() { int* p = cudaMalloc(4); k<<<1, 1>>>(p + 1); }",
     ResolutionError, "needs a bare allocation name"),
    ("__global__ void k(int* a) { a[0] = 1; }"
     " void main() { int n = 3; k<<<1, 1>>>(n); }",
     ResolutionError, "is not a device allocation"),
    ("__global__ void k(int* a) { a[0] = 1; }"
     " void main() { int* p = cudaMalloc(4); k<<<1, 1>>>(p, 2); }",
     ResolutionError, "takes 1 argument(s), launch passes 2"),
    ("__global__ void k() { int buf[threadIdx.x]; buf[0] = 1; }",
     ResolutionError, "launch-uniform"),
    ("__global__ void k(int* a) { int m = a[0]; int buf[m]; buf[0] = 1; }",
     ResolutionError, "launch-uniform"),
    ("__global__ void k(int* a) {"
     " for (int i = 0; i < 4; i = i + 2) { a[i] = 1; } }",
     ResolutionError, "unit-stride"),
    ("__global__ void k(int* a) {"
     " for (int i = 0; j < 4; i++) { a[i] = 1; } }",
     ResolutionError, "loop condition must test 'i'"),
    ("__global__ void k() { int threadIdx = 1; }",
     ResolutionError, "reserved in kernels"),
    ("void main() { k<<<1, 1>>>(); }",
     ResolutionError, "launch of undefined kernel 'k'"),
    ("void main() { int x = 1 < 2; }",
     ParseError, "expected SEMI"),
    ("void main() { int x = 1; x[0] = 2; }",
     ResolutionError, "'x' is not indexable"),
    ("void main() { int x = 1; cudaFree(x); }",
     ResolutionError, "is not an allocation"),
    ("__global__ void", ParseError, "expected kernel name"),
    ("void main() { int x = ; }", ParseError, "expected expression"),
]


def test_bad_programs_rejected_with_stable_messages():
    for source, err_type, fragment in BAD_PROGRAMS:
        with pytest.raises(err_type) as err:
            parse_source(source, "t.mcu")
        assert fragment in str(err.value), source


def test_errors_carry_source_locations():
    with pytest.raises(ResolutionError) as err:
        parse_source("void main() {\n  int x = y;\n}", "f.mcu")
    assert "f.mcu:2:11" in str(err.value)
