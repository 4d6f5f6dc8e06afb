"""Bounded integer constraint solver.

Decides satisfiability of a conjunction of arithmetic comparisons over
integer variables with finite domains.  The algorithm is interval
propagation (forward evaluation plus backward narrowing, run to a fixpoint)
inside a depth-first search that splits the smallest unresolved domain at
its midpoint.  Division and modulo follow C semantics (truncation toward
zero); division by zero falsifies the constraint containing it, and for
every non-constant divisor a ``divisor >= 1`` side constraint is added so
models never trap.

The solver is fully deterministic: variable order is declaration order,
splits always explore the lower half first, and no randomness is involved.
Three verdicts are possible: ``Sat`` (with a complete model), ``Unsat``,
and ``Timeout`` once the deadline passes.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Union

_INF = 10**18
_PASS_CAP = 10_000

RELS = ("<", "<=", "=", ">=", ">")


# ===== terms ================================================================


@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class BinE:
    op: str  # + - * / %
    left: "SExpr"
    right: "SExpr"


SExpr = Union[Lit, VarRef, BinE]


@dataclass(frozen=True)
class Constraint:
    rel: str  # < <= = >= >
    lhs: SExpr
    rhs: SExpr


@dataclass(frozen=True)
class SolverVar:
    name: str
    lo: int
    hi: int


# ===== verdicts =============================================================


@dataclass
class Sat:
    model: dict[str, int]


@dataclass
class Unsat:
    pass


@dataclass
class Timeout:
    elapsed: float


Verdict = Union[Sat, Unsat, Timeout]


class _Deadline(Exception):
    pass


# ===== integer helpers (C-style truncating division) ========================


def tdiv(a: int, b: int) -> int:
    """Truncating division, rounding toward zero like C's ``/``."""
    q = abs(a) // abs(b)
    return -q if (a < 0) != (b < 0) else q


def tmod(a: int, b: int) -> int:
    """C-style remainder: ``a - b * tdiv(a, b)``; sign follows ``a``."""
    return a - b * tdiv(a, b)


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


# ===== interval arithmetic ==================================================


def _eval_iv(e: SExpr, env: dict[str, tuple[int, int]]):
    """Forward interval evaluation; None means no non-trapping value."""
    if isinstance(e, Lit):
        return (e.value, e.value)
    if isinstance(e, VarRef):
        lo, hi = env[e.name]
        return None if lo > hi else (lo, hi)
    l = _eval_iv(e.left, env)
    r = _eval_iv(e.right, env)
    if l is None or r is None:
        return None
    l0, l1 = l
    r0, r1 = r
    op = e.op
    if op == "+":
        return (l0 + r0, l1 + r1)
    if op == "-":
        return (l0 - r1, l1 - r0)
    if op == "*":
        corners = (l0 * r0, l0 * r1, l1 * r0, l1 * r1)
        return (min(corners), max(corners))
    # Division / modulo: only divisor values >= 1 avoid trapping, so the
    # interval may soundly assume that (a side constraint enforces it for
    # non-literal divisors; an impossible divisor empties the interval).
    d0, d1 = max(r0, 1), r1
    if d0 > d1:
        return None
    if op == "/":
        corners = (tdiv(l0, d0), tdiv(l0, d1), tdiv(l1, d0), tdiv(l1, d1))
        return (min(corners), max(corners))
    if op == "%":
        m = d1 - 1
        if l0 >= 0:
            return (0, min(l1, m))
        if l1 <= 0:
            return (max(l0, -m), 0)
        return (max(l0, -m), min(l1, m))
    raise ValueError(f"unknown operator {op!r}")


class _Narrower:
    """Backward narrowing of variable domains against required ranges."""

    def __init__(self, env: dict[str, tuple[int, int]]):
        self.env = env
        self.changed = False

    def narrow(self, e: SExpr, t0: int, t1: int) -> bool:
        """Require ``e`` in [t0, t1]; False signals a contradiction."""
        if t0 > t1:
            return False
        if isinstance(e, Lit):
            return t0 <= e.value <= t1
        if isinstance(e, VarRef):
            lo, hi = self.env[e.name]
            nlo, nhi = max(lo, t0), min(hi, t1)
            if nlo > nhi:
                return False
            if (nlo, nhi) != (lo, hi):
                self.env[e.name] = (nlo, nhi)
                self.changed = True
            return True
        l = _eval_iv(e.left, self.env)
        r = _eval_iv(e.right, self.env)
        if l is None or r is None:
            return False
        l0, l1 = l
        r0, r1 = r
        op = e.op
        if op == "+":
            return (
                self.narrow(e.left, t0 - r1, t1 - r0)
                and self.narrow(e.right, t0 - l1, t1 - l0)
            )
        if op == "-":
            return (
                self.narrow(e.left, t0 + r0, t1 + r1)
                and self.narrow(e.right, l0 - t1, l1 - t0)
            )
        if op == "*":
            # Backward rule only for the non-negative case (all products
            # the analysis builds are non-negative apart from raw offsets,
            # which only feed the top-level relation).
            if l0 < 0 or r0 < 0:
                return True
            if t1 < 0:
                return False
            t0n = max(t0, 0)
            ok = True
            for child, other_lo, other_hi in (
                (e.left, r0, r1),
                (e.right, l0, l1),
            ):
                lo_req = -_INF
                hi_req = _INF
                if t0n > 0:
                    if other_hi == 0:
                        return False
                    lo_req = _ceil_div(t0n, other_hi)
                if other_lo > 0:
                    hi_req = t1 // other_lo
                ok = ok and self.narrow(child, lo_req, hi_req)
                if not ok:
                    return False
            return True
        if op == "/":
            if isinstance(e.right, Lit) and e.right.value >= 1:
                c = e.right.value
                lo_req = t0 * c if t0 > 0 else t0 * c - (c - 1)
                hi_req = t1 * c + (c - 1) if t1 >= 0 else t1 * c
                return self.narrow(e.left, lo_req, hi_req)
            return True
        if op == "%":
            return True  # forward-only
        raise ValueError(f"unknown operator {op!r}")


def _propagate_constraint(
    c: Constraint, narrower: _Narrower
) -> bool:
    env = narrower.env
    l = _eval_iv(c.lhs, env)
    r = _eval_iv(c.rhs, env)
    if l is None or r is None:
        return False
    l0, l1 = l
    r0, r1 = r
    rel = c.rel
    if rel == "<":
        return narrower.narrow(c.lhs, -_INF, r1 - 1) and narrower.narrow(
            c.rhs, l0 + 1, _INF
        )
    if rel == "<=":
        return narrower.narrow(c.lhs, -_INF, r1) and narrower.narrow(
            c.rhs, l0, _INF
        )
    if rel == "=":
        lo, hi = max(l0, r0), min(l1, r1)
        return narrower.narrow(c.lhs, lo, hi) and narrower.narrow(
            c.rhs, lo, hi
        )
    if rel == ">=":
        return narrower.narrow(c.lhs, r0, _INF) and narrower.narrow(
            c.rhs, -_INF, l1
        )
    if rel == ">":
        return narrower.narrow(c.lhs, r0 + 1, _INF) and narrower.narrow(
            c.rhs, -_INF, l1 - 1
        )
    raise ValueError(f"unknown relation {rel!r}")


def propagate(
    domains: dict[str, tuple[int, int]],
    constraints: list[Constraint],
    deadline: Optional[float] = None,
) -> Optional[dict[str, tuple[int, int]]]:
    """Narrow ``domains`` to a propagation fixpoint; None on contradiction."""
    env = dict(domains)
    for _ in range(_PASS_CAP):
        if deadline is not None and time.monotonic() > deadline:
            raise _Deadline()
        narrower = _Narrower(env)
        for c in constraints:
            if not _propagate_constraint(c, narrower):
                return None
        if not narrower.changed:
            break
    return env


# ===== exact checking =======================================================


def _eval_exact(e: SExpr, model: dict[str, int]) -> Optional[int]:
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, VarRef):
        return model[e.name]
    a = _eval_exact(e.left, model)
    b = _eval_exact(e.right, model)
    if a is None or b is None:
        return None
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if b == 0:
        return None  # trapping division/modulo falsifies the constraint
    if e.op == "/":
        return tdiv(a, b)
    if e.op == "%":
        return tmod(a, b)
    raise ValueError(f"unknown operator {e.op!r}")


_REL_FN = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    "=": lambda a, b: a == b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
}


def check_model(constraints: list[Constraint], model: dict[str, int]) -> bool:
    """Exact evaluation of the conjunction under a complete assignment."""
    for c in constraints:
        a = _eval_exact(c.lhs, model)
        b = _eval_exact(c.rhs, model)
        if a is None or b is None:
            return False
        if not _REL_FN[c.rel](a, b):
            return False
    return True


# ===== side constraints =====================================================


def _collect_divisors(e: SExpr, out: list[SExpr]) -> None:
    if isinstance(e, BinE):
        if e.op in ("/", "%") and not (
            isinstance(e.right, Lit) and e.right.value >= 1
        ):
            if e.right not in out:
                out.append(e.right)
        _collect_divisors(e.left, out)
        _collect_divisors(e.right, out)


def divisor_side_constraints(constraints: list[Constraint]) -> list[Constraint]:
    """``divisor >= 1`` for every division whose divisor is not a positive
    literal (a literal-zero divisor is left alone; it falsifies its
    constraint by itself)."""
    divisors: list[SExpr] = []
    for c in constraints:
        _collect_divisors(c.lhs, divisors)
        _collect_divisors(c.rhs, divisors)
    return [
        Constraint(">=", d, Lit(1))
        for d in divisors
        if not isinstance(d, Lit)
    ]


# ===== search ===============================================================


def solve(
    variables: list[SolverVar],
    constraints: list[Constraint],
    timeout_s: float = 30.0,
) -> Verdict:
    """Decide the conjunction over the given finite domains."""
    start = time.monotonic()
    deadline = start + timeout_s
    all_constraints = list(constraints) + divisor_side_constraints(constraints)
    order = [v.name for v in variables]
    env = {v.name: (v.lo, v.hi) for v in variables}
    if any(v.lo > v.hi for v in variables):
        return Unsat()
    try:
        model = _search(env, all_constraints, order, deadline)
    except _Deadline:
        return Timeout(time.monotonic() - start)
    if model is None:
        return Unsat()
    return Sat(model)


def _search(
    env: dict[str, tuple[int, int]],
    constraints: list[Constraint],
    order: list[str],
    deadline: float,
) -> Optional[dict[str, int]]:
    if time.monotonic() > deadline:
        raise _Deadline()
    narrowed = propagate(env, constraints, deadline)
    if narrowed is None:
        return None
    # Pick the smallest unresolved domain (ties: declaration order).
    pick = None
    pick_size = None
    for name in order:
        lo, hi = narrowed[name]
        if lo < hi:
            size = hi - lo + 1
            if pick_size is None or size < pick_size:
                pick, pick_size = name, size
    if pick is None:
        model = {name: narrowed[name][0] for name in order}
        return model if check_model(constraints, model) else None
    lo, hi = narrowed[pick]
    mid = (lo + hi) // 2
    for half in ((lo, mid), (mid + 1, hi)):
        child = dict(narrowed)
        child[pick] = half
        found = _search(child, constraints, order, deadline)
        if found is not None:
            return found
    return None
