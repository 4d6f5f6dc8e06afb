"""Source renderer for parsed MiniCUDA programs.

``render_program(parse_source(text))`` produces text that parses back to an
equivalent tree (used by the round-trip tests); parenthesization is driven
by operator precedence, so only necessary parens are emitted.
"""
from __future__ import annotations

from . import ast as A

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "%": 2}
_INDENT = "    "


def render_expr(e: A.Expr, parent_prec: int = 0, right_side: bool = False) -> str:
    if isinstance(e, A.IntLit):
        return str(e.value)
    if isinstance(e, A.Ident):
        return e.name
    if isinstance(e, A.InputCall):
        return "__input()"
    if isinstance(e, A.BuiltinRef):
        return f"{e.group}.{e.axis}"
    if isinstance(e, A.IndexExpr):
        subs = "".join(f"[{render_expr(ix)}]" for ix in e.indices)
        return f"{e.base}{subs}"
    if isinstance(e, A.BinaryOp):
        prec = _PRECEDENCE[e.op]
        text = (
            f"{render_expr(e.left, prec, False)} {e.op} "
            f"{render_expr(e.right, prec, True)}"
        )
        # All MiniCUDA binary ops are left-associative, so a right child at
        # equal precedence needs parens; a parent of higher precedence does too.
        if prec < parent_prec or (prec == parent_prec and right_side):
            return f"({text})"
        return text
    raise TypeError(f"unhandled expression {type(e).__name__}")


def render_comparison(c: A.Comparison) -> str:
    return f"{render_expr(c.left)} {c.rel} {render_expr(c.right)}"


def _render_dim3(d: A.Dim3Arg) -> str:
    if len(d.axes) == 1:
        return render_expr(d.axes[0])
    return "dim3(" + ", ".join(render_expr(a) for a in d.axes) + ")"


def _render_stmt(st: A.Stmt, out: list[str], depth: int) -> None:
    pad = _INDENT * depth
    if isinstance(st, A.AssignStmt):
        prefix = f"{st.decl_type} " if st.decl_type else ""
        out.append(f"{pad}{prefix}{st.name} = {render_expr(st.value)};")
    elif isinstance(st, A.MallocStmt):
        out.append(
            f"{pad}{st.elem_type}* {st.name} = "
            f"cudaMalloc({render_expr(st.size)});"
        )
    elif isinstance(st, A.FreeStmt):
        out.append(f"{pad}cudaFree({st.name});")
    elif isinstance(st, A.LaunchStmt):
        dims = f"{_render_dim3(st.grid)}, {_render_dim3(st.block)}"
        if st.shm is not None:
            dims += f", {render_expr(st.shm)}"
        args = ", ".join(render_expr(a) for a in st.args)
        out.append(f"{pad}{st.kernel}<<<{dims}>>>({args});")
    elif isinstance(st, A.AssertStmt):
        out.append(f"{pad}assert({render_comparison(st.cond)});")
    elif isinstance(st, A.ForStmt):
        out.append(
            f"{pad}for (int {st.var} = {render_expr(st.lower)}; "
            f"{st.var} < {render_expr(st.upper)}; {st.var}++) {{"
        )
        for inner in st.body:
            _render_stmt(inner, out, depth + 1)
        out.append(f"{pad}}}")
    elif isinstance(st, A.IfStmt):
        out.append(f"{pad}if ({render_comparison(st.cond)}) {{")
        for inner in st.then_body:
            _render_stmt(inner, out, depth + 1)
        if st.else_body is not None:
            out.append(f"{pad}}} else {{")
            for inner in st.else_body:
                _render_stmt(inner, out, depth + 1)
        out.append(f"{pad}}}")
    elif isinstance(st, A.StoreStmt):
        subs = "".join(f"[{render_expr(ix)}]" for ix in st.indices)
        out.append(f"{pad}{st.target}{subs} = {render_expr(st.value)};")
    elif isinstance(st, A.AtomicStmt):
        out.append(
            f"{pad}{st.op}(&{st.target}[{render_expr(st.index)}], "
            f"{render_expr(st.value)});"
        )
    elif isinstance(st, A.ReturnStmt):
        out.append(f"{pad}return;")
    elif isinstance(st, A.ExternSharedDecl):
        out.append(f"{pad}extern __shared__ {st.elem_type} {st.name}[];")
    elif isinstance(st, (A.SharedArrayDecl, A.LocalArrayDecl)):
        marker = "__shared__ " if isinstance(st, A.SharedArrayDecl) else ""
        dims = "".join(f"[{render_expr(d)}]" for d in st.dims)
        out.append(f"{pad}{marker}{st.elem_type} {st.name}{dims};")
    elif isinstance(st, A.PartitionStmt):
        prefix = f"{st.decl_type}* " if st.decl_type else ""
        out.append(
            f"{pad}{prefix}{st.name} = &{st.base}[{render_expr(st.offset)}];"
        )
    else:  # pragma: no cover - exhaustive
        raise TypeError(f"unhandled statement {type(st).__name__}")


def render_program(program: A.Program) -> str:
    out: list[str] = []
    for k in program.kernels:
        params = ", ".join(
            f"{p.elem_type}{'*' if p.is_pointer else ''} {p.name}"
            for p in k.params
        )
        out.append(f"__global__ void {k.name}({params}) {{")
        for st in k.body:
            _render_stmt(st, out, 1)
        out.append("}")
        out.append("")
    if program.host_main or not program.kernels:
        out.append("void main() {")
        for st in program.host_main:
            _render_stmt(st, out, 1)
        out.append("}")
    return "\n".join(out).rstrip() + "\n"
