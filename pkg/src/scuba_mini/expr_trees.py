"""Expression trees extracted from the IR.

An expression tree (ET) describes a scalar value symbolically, in terms of
the quantities the analyzer reasons about:

* ``Const``     -- a non-negative integer literal;
* ``Unknown``   -- an externally supplied or loaded value (``__input()``,
  array loads, kernel scalar parameters), tagged by its defining ValueId;
* ``Builtin``   -- one of the twelve launch-geometry builtins;
* ``LoopVar``   -- a loop induction variable with its bound ETs attached;
* ``BinOp``     -- ``+ - * / %`` over sub-trees (integer, C-style truncation),
  or a comparison ``< <= > >= == !=`` at the root of assert/guard trees.

``EtBuilder`` memoizes construction per ValueId, so shared sub-values produce
shared sub-trees.  ``canonicalize`` folds constant arithmetic (rejecting
folds that leave the representable range) and applies the neutral-element
identities; it is idempotent.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .errors import EtError, EtOverflowError
from .ir import ALL_AXES, IrModule, ValueId

ARITH_OPS = ("+", "-", "*", "/", "%")
COMPARISON_OPS = ("<", "<=", ">", ">=", "==", "!=")

DEFAULT_FOLD_BOUND = 2**20


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Unknown:
    tag: ValueId


@dataclass(frozen=True)
class Builtin:
    axis: str  # TidX TidY TidZ BidX BidY BidZ BDimX BDimY BDimZ GDimX..Z


@dataclass(frozen=True)
class LoopVar:
    tag: ValueId
    lower: "Et"
    upper: "Et"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Et"
    right: "Et"


Et = Union[Const, Unknown, Builtin, LoopVar, BinOp]


# ===== construction =========================================================


class EtBuilder:
    """Builds ETs for IR values; one builder per IrModule."""

    def __init__(self, module: IrModule):
        self.module = module
        self._memo: dict[ValueId, Et] = {}

    def create_et(self, vid: ValueId) -> Et:
        cached = self._memo.get(vid)
        if cached is not None:
            return cached
        st = self.module.defs.get(vid)
        if st is None:
            param = self.module.params.get(vid)
            if param is None:
                raise EtError(f"{vid!r} has no definition", None)
            if param.is_pointer:
                raise EtError(
                    f"pointer parameter {param.name!r} used as a scalar", None
                )
            et: Et = Unknown(vid)
        elif st.kind == "ConstDef":
            et = Const(st.operands[0])
        elif st.kind in ("InputDef", "LoadValueDef"):
            et = Unknown(vid)
        elif st.kind == "BuiltinDef":
            axis = st.operands[0]
            if axis not in ALL_AXES:
                raise EtError(f"unknown builtin axis {axis!r}", st.location)
            et = Builtin(axis)
        elif st.kind == "BinOpDef":
            op, lhs, rhs = st.operands
            et = BinOp(op, self.create_et(lhs), self.create_et(rhs))
        elif st.kind == "LoopBegin":
            lower, upper = st.operands
            et = LoopVar(vid, self.create_et(lower), self.create_et(upper))
        else:
            raise EtError(
                f"{st.kind} value {vid!r} is not a scalar expression",
                st.location,
            )
        self._memo[vid] = et
        return et

    def comparison_et(self, rel: str, lhs: ValueId, rhs: ValueId) -> BinOp:
        """ET for an assert/branch condition; comparison at the root."""
        if rel not in COMPARISON_OPS:
            raise EtError(f"unknown comparison {rel!r}", None)
        return BinOp(rel, self.create_et(lhs), self.create_et(rhs))


_NEGATED = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "==": "!=", "!=": "=="}


def negate_comparison(et: BinOp) -> BinOp:
    """Logical negation of a comparison-rooted ET (for else-arm guards)."""
    if not isinstance(et, BinOp) or et.op not in COMPARISON_OPS:
        raise EtError("can only negate comparison-rooted trees", None)
    return BinOp(_NEGATED[et.op], et.left, et.right)


# ===== canonicalization =====================================================


def canonicalize(et: Et, bound: int = DEFAULT_FOLD_BOUND) -> Et:
    """Fold constant arithmetic and drop neutral elements.

    Folding is conservative: a fold only happens when the exact result is a
    representable constant in ``[0, bound]``.  Negative intermediate results
    and divisions by a literal zero are left symbolic for the solver (where
    they falsify the enclosing constraint); results above ``bound`` raise
    EtOverflowError.  Idempotent by construction.
    """
    if isinstance(et, BinOp):
        left = canonicalize(et.left, bound)
        right = canonicalize(et.right, bound)
        op = et.op
        if op in COMPARISON_OPS:
            return BinOp(op, left, right)
        if isinstance(left, Const) and isinstance(right, Const):
            folded = _fold(op, left.value, right.value, bound)
            if folded is not None:
                return folded
        if op == "*":
            if isinstance(left, Const) and left.value == 1:
                return right
            if isinstance(right, Const) and right.value == 1:
                return left
        elif op == "+":
            if isinstance(left, Const) and left.value == 0:
                return right
            if isinstance(right, Const) and right.value == 0:
                return left
        elif op == "-":
            if isinstance(right, Const) and right.value == 0:
                return left
        elif op == "/":
            if isinstance(right, Const) and right.value == 1:
                return left
        return BinOp(op, left, right)
    if isinstance(et, LoopVar):
        return LoopVar(
            et.tag, canonicalize(et.lower, bound), canonicalize(et.upper, bound)
        )
    return et


def _fold(op: str, a: int, b: int, bound: int) -> Const | None:
    if op == "+":
        value = a + b
    elif op == "-":
        value = a - b
        if value < 0:
            return None
    elif op == "*":
        value = a * b
    elif op == "/":
        if b == 0:
            return None
        value = a // b  # non-negative operands: truncation == floor
    elif op == "%":
        if b == 0:
            return None
        value = a % b
    else:
        raise EtError(f"unknown operator {op!r}", None)
    if value > bound:
        raise EtOverflowError(
            f"constant {value} exceeds the representable bound {bound}", None
        )
    return Const(value)


# ===== traversal and rendering ==============================================


def iter_leaves(et: Et):
    """Yield every Const/Unknown/Builtin/LoopVar leaf (LoopVar bounds too)."""
    if isinstance(et, BinOp):
        yield from iter_leaves(et.left)
        yield from iter_leaves(et.right)
    elif isinstance(et, LoopVar):
        yield et
        yield from iter_leaves(et.lower)
        yield from iter_leaves(et.upper)
    else:
        yield et


def collect_unknowns(et: Et) -> list[Unknown]:
    seen: list[Unknown] = []
    for leaf in iter_leaves(et):
        if isinstance(leaf, Unknown) and leaf not in seen:
            seen.append(leaf)
    return seen


def collect_loopvars(et: Et) -> list[LoopVar]:
    seen: list[LoopVar] = []
    for leaf in iter_leaves(et):
        if isinstance(leaf, LoopVar) and leaf not in seen:
            seen.append(leaf)
    return seen


def _leaf_name(tag: ValueId) -> str:
    return tag.name if tag.name else f"v{tag.id}"


def render_et(et: Et) -> str:
    """Deterministic prefix rendering, e.g. ``(* unknown:multiples 512)``."""
    if isinstance(et, Const):
        return str(et.value)
    if isinstance(et, Unknown):
        return f"unknown:{_leaf_name(et.tag)}"
    if isinstance(et, Builtin):
        return et.axis[0].lower() + et.axis[1:]
    if isinstance(et, LoopVar):
        return (
            f"(loop {_leaf_name(et.tag)} "
            f"{render_et(et.lower)} {render_et(et.upper)})"
        )
    if isinstance(et, BinOp):
        return f"({et.op} {render_et(et.left)} {render_et(et.right)})"
    raise EtError(f"unhandled node {type(et).__name__}", None)
