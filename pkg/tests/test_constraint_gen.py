"""Constraint generation: geometry, check shape, context, layout checks."""
from __future__ import annotations

import re

from scuba_mini.expr_trees import EtBuilder, render_et
from scuba_mini.frontend import parse_source
from scuba_mini.host_pass import host_pass
from scuba_mini.ir import lower
from scuba_mini.kernel_pass import kernel_pass
from scuba_mini.constraint_gen import (
    constraint_sets_for_access,
    layout_check_sets,
    render_constraint,
    render_constraint_set,
)
from scuba_mini.solver import Sat, Unsat, solve

BOUND = 2**20
MAX_DOMAIN = 2**20


def build(src: str, kernel: str = "k"):
    module = lower(parse_source(src, "t.mcu"))
    builder = EtBuilder(module)
    hsum = host_pass(module, builder, BOUND)
    kir = module.kernels[kernel]
    ksum = kernel_pass(module, kir, builder, BOUND)
    launch = next(l for l in hsum.launches if l.kernel_name == kernel)
    return module, kir, ksum, hsum, launch


def sets_for(src: str, access_index: int = 0, **kw):
    module, kir, ksum, hsum, launch = build(src)
    access = ksum.accesses[access_index]
    return constraint_sets_for_access(
        module, kir, ksum, hsum, launch, access, MAX_DOMAIN, BOUND, **kw
    )


def normalized(constraints) -> list[str]:
    """Rendered constraints with value-id suffixes stripped for stability."""
    return [
        re.sub(r"_v\d+", "", render_constraint(c)) for c in constraints
    ]


GUARDED = """\
__global__ void k(int* data, int n) {
    int i = threadIdx.x;
    if (i < n) {
        data[i] = 1;
    }
}

void main() {
    int n = __input();
    assert(n <= 8);
    int* data = cudaMalloc(n);
    k<<<1, 4>>>(data, n);
}
"""


def test_upper_check_full_constraint_sequence():
    result = sets_for(GUARDED)
    assert not result.size_unknown
    upper, lower = result.sets
    assert (upper.check, lower.check) == ("upper", "lower")
    assert normalized(upper.constraints) == [
        # geometry: every index axis in [0, dim)
        "(>= solTidX 0)", "(< solTidX solBDimX)",
        "(>= solTidY 0)", "(< solTidY solBDimY)",
        "(>= solTidZ 0)", "(< solTidZ solBDimZ)",
        "(>= solBidX 0)", "(< solBidX solGDimX)",
        "(>= solBidY 0)", "(< solBidY solGDimY)",
        "(>= solBidZ 0)", "(< solBidZ solGDimZ)",
        # geometry: dims bound to the launch expressions
        "(= solGDimX 1)", "(= solGDimY 1)", "(= solGDimZ 1)",
        "(= solBDimX 4)", "(= solBDimY 1)", "(= solBDimZ 1)",
        # the check, then offset/size definitions
        "(>= solOffset solSize)",
        "(= solOffset solTidX)",
        "(= solSize sol_n)",
        # context: scalar params, host asserts, guards
        "(= sol_n sol_n)",
        "(<= sol_n 8)",
        "(< solTidX sol_n)",
    ]
    # the two sol_n variables are distinct (kernel param vs host input)
    n_vars = [v.name for v in upper.variables if "sol_n" in v.name]
    assert len(set(n_vars)) == 2


def test_lower_check_swaps_only_the_check_constraint():
    result = sets_for(GUARDED)
    upper, lower = result.sets
    up = normalized(upper.constraints)
    lo = normalized(lower.constraints)
    assert up.index("(>= solOffset solSize)") == lo.index("(< solOffset 0)")
    up.remove("(>= solOffset solSize)")
    lo.remove("(< solOffset 0)")
    assert up == lo


def test_underflow_can_be_disabled():
    result = sets_for(GUARDED, check_underflow=False)
    assert [cs.check for cs in result.sets] == ["upper"]


def test_witness_and_input_leaves_describe_unknowns():
    result = sets_for(GUARDED)
    upper = result.sets[0]
    assert sorted(upper.witness_leaves.values()) == ["n", "n"]
    # exactly one of the two is the host-side __input() (site 0)
    assert list(upper.input_leaves.values()) == [0]
    assert set(upper.input_leaves) <= set(upper.witness_leaves)


def test_solver_verdicts_on_generated_sets():
    # guard i < n with size n: the guarded access cannot overflow
    result = sets_for(GUARDED)
    upper, lower = result.sets
    assert isinstance(solve(upper.variables, upper.constraints), Unsat)
    assert isinstance(solve(lower.variables, lower.constraints), Unsat)

    unguarded = GUARDED.replace("""\
    if (i < n) {
        data[i] = 1;
    }
""", "    data[i] = 1;\n")
    result = sets_for(unguarded)
    verdict = solve(result.sets[0].variables, result.sets[0].constraints)
    assert isinstance(verdict, Sat)
    # witness respects launch geometry: tid in [0, 4)
    assert 0 <= verdict.model["solTidX"] < 4


def test_kernel_assert_requires_dominating_path():
    src = """\
__global__ void k(int* data, int n) {
    int i = threadIdx.x;
    assert(n <= 2);
    if (i < 8) {
        data[i] = 1;
    }
    if (i >= 8) {
        assert(n <= 1);
    }
    data[n] = 2;
}

void main() {
    int n = __input();
    assert(n <= 8);
    int* data = cudaMalloc(n + 1);
    k<<<1, 16>>>(data, n);
}
"""
    guarded = sets_for(src, access_index=0)
    texts = normalized(guarded.sets[0].constraints)
    # top-level assert dominates the guarded access ...
    assert "(<= sol_n 2)" in texts
    # ... but the assert inside the sibling branch does not
    assert "(<= sol_n 1)" not in texts

    # the final access is dominated by the top-level assert only
    last = sets_for(src, access_index=1)
    texts = normalized(last.sets[0].constraints)
    assert "(<= sol_n 2)" in texts
    assert "(<= sol_n 1)" not in texts


def test_disequality_guards_are_dropped():
    # != has no source form; it arises as the negated else-arm of ==
    src = """\
__global__ void k(int* data, int n) {
    int i = threadIdx.x;
    if (i == n) {
        data[0] = 1;
    } else {
        data[i] = 1;
    }
}

void main() {
    int n = __input();
    assert(n <= 4);
    int* data = cudaMalloc(8);
    k<<<1, 8>>>(data, n);
}
"""
    result = sets_for(src, access_index=1)
    assert [render_et(g) for g in result.access.path_guards] == [
        "(!= tidX unknown:n)"
    ]
    texts = normalized(result.sets[0].constraints)
    assert not any("!=" in t for t in texts)


def test_loop_variable_gets_bound_constraints_once():
    src = """\
__global__ void k(int* data, int n) {
    for (int i = 0; i < n; i = i + 1) {
        data[i + i] = 1;
    }
}

void main() {
    int n = __input();
    assert(n <= 8);
    int* data = cudaMalloc(n * 2);
    k<<<1, 1>>>(data, n);
}
"""
    result = sets_for(src)
    texts = normalized(result.sets[0].constraints)
    assert texts.count("(>= sol_i 0)") == 1
    assert texts.count("(< sol_i sol_n)") == 1
    assert "(= solOffset (+ sol_i sol_i))" in texts


def test_missing_dynamic_extent_marks_size_unknown():
    src = """\
__global__ void k() {
    extern __shared__ int smem[];
    smem[0] = 1;
}

void main() {
    k<<<1, 1>>>();
}
"""
    result = sets_for(src)
    assert result.size_unknown
    assert result.sets == []


def test_partition_access_checked_against_derived_size():
    src = """\
__global__ void k(int n) {
    extern __shared__ int smem[];
    int* tail = &smem[n];
    tail[0] = 1;
}

void main() {
    int n = __input();
    assert(n <= 4);
    k<<<1, 1, n + 2>>>(n);
}
"""
    result = sets_for(src)
    texts = normalized(result.sets[0].constraints)
    # partition size = total - offset = (n + 2) - n
    assert "(= solSize (- (+ sol_n 2) sol_n))" in texts


def test_layout_checks_compare_consecutive_partitions():
    src = """\
__global__ void k(int a, int b) {
    extern __shared__ int smem[];
    int* p = &smem[a];
    int* q = &smem[a + b];
    p[0] = 1;
    q[0] = 2;
}

void main() {
    int a = __input();
    int b = __input();
    assert(a <= 4);
    assert(b <= 4);
    k<<<1, 1, a + b + 1>>>(a, b);
}
"""
    module, kir, ksum, hsum, launch = build(src)
    checks = layout_check_sets(module, kir, ksum, hsum, launch, MAX_DOMAIN)
    pairs = [(c.earlier.name, c.later.name) for c in checks]
    assert pairs == [("smem", "p"), ("p", "q")]
    # base at 0 <= a is never violated; a + b < a means b < 0: also settled
    for check in checks:
        texts = normalized(check.cset.constraints)
        assert any(t.startswith("(< ") for t in texts)
        assert check.cset.check == "layout"


def test_rendered_set_is_deterministic():
    a = render_constraint_set(sets_for(GUARDED).sets[0])
    b = render_constraint_set(sets_for(GUARDED).sets[0])
    assert a == b
    assert a.startswith("check upper:")
    assert "var solOffset in [-1048576, 1048576]" in a
