"""Recursive-descent parser and name resolution for MiniCUDA.

``parse_program(tokens)`` returns a resolved Program or raises
ParseError/ResolutionError with the offending location.  Resolution enforces:

* every identifier use resolves to a declaration in scope;
* single assignment — reassigning a name is rejected (loop induction
  variables only advance through the ``for`` header);
* launches reference defined kernels with matching arity and argument kinds
  (bare pointer identifiers in pointer positions, scalar expressions in
  scalar positions);
* builtins (``threadIdx.x`` ...) appear only in kernels, ``__input()`` and
  allocation statements only in host code;
* array/partition subscript arity matches the declaration;
* static shared / local array sizes are launch-uniform expressions (no
  builtins, loads or loop variables).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..errors import ParseError, ResolutionError
from . import ast as A
from .lexer import EOF, IDENT, INT, Token, tokenize

_ATOMIC_KINDS = ("atomicMin", "atomicMax", "atomicAdd")
_TYPE_KINDS = ("int", "double", "float")
_REL_BY_KIND = {"LT": "<", "LE": "<=", "GT": ">", "GE": ">=", "EQEQ": "=="}


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.in_kernel = False
        self.input_sites = 0

    # ----- token plumbing ---------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        i = min(self.pos + ahead, len(self.tokens) - 1)
        return self.tokens[i]

    def at(self, kind: str) -> bool:
        return self.peek().kind == kind

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != EOF:
            self.pos += 1
        return tok

    def expect(self, kind: str, what: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            want = what or kind
            found = tok.text or "end of file"
            raise ParseError(f"expected {want}, found {found!r}", tok.loc)
        return self.advance()

    def accept(self, kind: str) -> Optional[Token]:
        if self.at(kind):
            return self.advance()
        return None

    # ----- program structure ------------------------------------------------

    def parse_program(self, filename: str) -> A.Program:
        kernels: list[A.KernelDef] = []
        while self.at("__global__"):
            kernels.append(self.parse_kernel())
        host: list[A.Stmt] = []
        if not self.at(EOF):
            self.expect("void", '"void main()"')
            name = self.expect(IDENT, "function name")
            if name.text != "main":
                raise ParseError('host entry point must be named "main"', name.loc)
            self.expect("LPAREN")
            self.expect("RPAREN")
            host = self.parse_block()
        self.expect(EOF, "end of file")
        return A.Program(kernels=kernels, host_main=host, filename=filename)

    def parse_kernel(self) -> A.KernelDef:
        start = self.expect("__global__")
        self.expect("void")
        name = self.expect(IDENT, "kernel name")
        self.expect("LPAREN")
        params: list[A.Param] = []
        if not self.at("RPAREN"):
            while True:
                params.append(self.parse_param())
                if not self.accept("COMMA"):
                    break
        self.expect("RPAREN")
        self.in_kernel = True
        body = self.parse_block()
        self.in_kernel = False
        return A.KernelDef(name.text, params, body, start.loc)

    def parse_param(self) -> A.Param:
        ty = self.peek()
        if ty.kind not in _TYPE_KINDS:
            raise ParseError(f"expected parameter type, found {ty.text!r}", ty.loc)
        self.advance()
        is_ptr = self.accept("STAR") is not None
        name = self.expect(IDENT, "parameter name")
        return A.Param(name.text, ty.text, is_ptr, name.loc)

    def parse_block(self) -> list[A.Stmt]:
        self.expect("LBRACE")
        stmts: list[A.Stmt] = []
        while not self.at("RBRACE"):
            if self.at(EOF):
                raise ParseError("unterminated block", self.peek().loc)
            stmts.append(self.parse_stmt())
        self.expect("RBRACE")
        return stmts

    # ----- statements -------------------------------------------------------

    def parse_stmt(self) -> A.Stmt:
        tok = self.peek()
        if tok.kind == "for":
            return self.parse_for()
        if tok.kind == "if":
            return self.parse_if()
        if tok.kind == "assert":
            return self.parse_assert()
        if tok.kind == "return":
            self.advance()
            self.expect("SEMI")
            return A.ReturnStmt(tok.loc)
        if self.in_kernel:
            return self.parse_kernel_stmt(tok)
        return self.parse_host_stmt(tok)

    def parse_host_stmt(self, tok: Token) -> A.Stmt:
        if tok.kind == "cudaFree":
            self.advance()
            self.expect("LPAREN")
            name = self.expect(IDENT, "pointer name")
            self.expect("RPAREN")
            self.expect("SEMI")
            return A.FreeStmt(name.text, tok.loc)
        decl_type: Optional[str] = None
        is_ptr_decl = False
        if tok.kind in _TYPE_KINDS:
            decl_type = self.advance().text
            is_ptr_decl = self.accept("STAR") is not None
        name = self.expect(IDENT, "statement")
        nxt = self.peek()
        if nxt.kind == "LAUNCH_OPEN" and decl_type is None:
            return self.parse_launch(name)
        if nxt.kind == "LBRACKET" and decl_type is None:
            return self.parse_store(name)
        self.expect("ASSIGN", '"="')
        if self.at("cudaMalloc"):
            self.advance()
            self.expect("LPAREN")
            size = self.parse_expr()
            self.expect("RPAREN")
            self.expect("SEMI")
            elem = decl_type if decl_type is not None else "int"
            return A.MallocStmt(name.text, size, elem, name.loc)
        if is_ptr_decl:
            raise ParseError(
                "host pointer declarations must be initialized with cudaMalloc",
                name.loc,
            )
        value = self.parse_expr()
        self.expect("SEMI")
        return A.AssignStmt(name.text, value, decl_type, name.loc)

    def parse_kernel_stmt(self, tok: Token) -> A.Stmt:
        if tok.kind == "extern":
            self.advance()
            self.expect("__shared__")
            ty = self.peek()
            if ty.kind not in _TYPE_KINDS:
                raise ParseError(f"expected element type, found {ty.text!r}", ty.loc)
            self.advance()
            name = self.expect(IDENT, "array name")
            self.expect("LBRACKET")
            self.expect("RBRACKET")
            self.expect("SEMI")
            return A.ExternSharedDecl(name.text, ty.text, tok.loc)
        if tok.kind == "__shared__":
            self.advance()
            ty = self.peek()
            if ty.kind not in _TYPE_KINDS:
                raise ParseError(f"expected element type, found {ty.text!r}", ty.loc)
            self.advance()
            name = self.expect(IDENT, "array name")
            dims = self.parse_array_dims()
            self.expect("SEMI")
            return A.SharedArrayDecl(name.text, ty.text, dims, tok.loc)
        if tok.kind in _ATOMIC_KINDS:
            return self.parse_atomic(tok)
        decl_type: Optional[str] = None
        is_ptr_decl = False
        if tok.kind in _TYPE_KINDS:
            decl_type = self.advance().text
            is_ptr_decl = self.accept("STAR") is not None
        name = self.expect(IDENT, "statement")
        nxt = self.peek()
        if nxt.kind == "LBRACKET" and not is_ptr_decl:
            if decl_type is not None:
                dims = self.parse_array_dims()
                self.expect("SEMI")
                return A.LocalArrayDecl(name.text, decl_type, dims, name.loc)
            return self.parse_store(name)
        self.expect("ASSIGN", '"="')
        if self.accept("AMP"):
            base = self.expect(IDENT, "partition base")
            self.expect("LBRACKET")
            offset = self.parse_expr()
            self.expect("RBRACKET")
            self.expect("SEMI")
            return A.PartitionStmt(name.text, base.text, offset, decl_type, name.loc)
        value = self.parse_expr()
        self.expect("SEMI")
        return A.AssignStmt(name.text, value, decl_type, name.loc)

    def parse_array_dims(self) -> list[A.Expr]:
        dims: list[A.Expr] = []
        self.expect("LBRACKET")
        dims.append(self.parse_expr())
        self.expect("RBRACKET")
        if self.accept("LBRACKET"):
            dims.append(self.parse_expr())
            self.expect("RBRACKET")
        return dims

    def parse_store(self, name: Token) -> A.StoreStmt:
        indices = [self._subscript()]
        if self.at("LBRACKET"):
            indices.append(self._subscript())
        self.expect("ASSIGN", '"="')
        value = self.parse_expr()
        self.expect("SEMI")
        return A.StoreStmt(name.text, indices, value, name.loc)

    def _subscript(self) -> A.Expr:
        self.expect("LBRACKET")
        e = self.parse_expr()
        self.expect("RBRACKET")
        return e

    def parse_atomic(self, tok: Token) -> A.AtomicStmt:
        self.advance()
        self.expect("LPAREN")
        self.expect("AMP", '"&"')
        target = self.expect(IDENT, "atomic target")
        index = self._subscript()
        self.expect("COMMA")
        value = self.parse_expr()
        self.expect("RPAREN")
        self.expect("SEMI")
        return A.AtomicStmt(tok.text, target.text, index, value, tok.loc)

    def parse_launch(self, name: Token) -> A.LaunchStmt:
        self.expect("LAUNCH_OPEN")
        grid = self.parse_dim3()
        self.expect("COMMA")
        block = self.parse_dim3()
        shm: Optional[A.Expr] = None
        if self.accept("COMMA"):
            shm = self.parse_expr()
        self.expect("LAUNCH_CLOSE", '">>>"')
        self.expect("LPAREN")
        args: list[A.Expr] = []
        if not self.at("RPAREN"):
            while True:
                args.append(self.parse_expr())
                if not self.accept("COMMA"):
                    break
        self.expect("RPAREN")
        self.expect("SEMI")
        return A.LaunchStmt(name.text, grid, block, shm, args, name.loc)

    def parse_dim3(self) -> A.Dim3Arg:
        tok = self.peek()
        if tok.kind == "dim3":
            self.advance()
            self.expect("LPAREN")
            axes = [self.parse_expr()]
            self.expect("COMMA")
            axes.append(self.parse_expr())
            if self.accept("COMMA"):
                axes.append(self.parse_expr())
            self.expect("RPAREN")
            return A.Dim3Arg(axes, tok.loc)
        return A.Dim3Arg([self.parse_expr()], tok.loc)

    def parse_for(self) -> A.ForStmt:
        start = self.expect("for")
        self.expect("LPAREN")
        self.accept("int")
        var = self.expect(IDENT, "loop variable")
        self.expect("ASSIGN", '"="')
        lower = self.parse_expr()
        self.expect("SEMI")
        cond_var = self.expect(IDENT, "loop variable")
        if cond_var.text != var.text:
            raise ResolutionError(
                f"loop condition must test {var.text!r}", cond_var.loc
            )
        self.expect("LT", '"<"')
        upper = self.parse_expr()
        self.expect("SEMI")
        inc_var = self.expect(IDENT, "loop variable")
        if inc_var.text != var.text:
            raise ResolutionError(
                f"loop increment must advance {var.text!r}", inc_var.loc
            )
        if not self.accept("PLUSPLUS"):
            self.expect("ASSIGN", '"++" or "= <var> + 1"')
            same = self.expect(IDENT, "loop variable")
            plus = self.expect("PLUS", '"+"')
            one = self.expect(INT, "literal 1")
            if same.text != var.text or one.text != "1":
                raise ResolutionError(
                    "only unit-stride counted loops are supported", plus.loc
                )
        self.expect("RPAREN")
        body = self.parse_block()
        return A.ForStmt(var.text, lower, upper, body, start.loc)

    def parse_if(self) -> A.IfStmt:
        start = self.expect("if")
        self.expect("LPAREN")
        cond = self.parse_comparison()
        self.expect("RPAREN")
        then_body = self.parse_block()
        else_body = None
        if self.accept("else"):
            else_body = self.parse_block()
        return A.IfStmt(cond, then_body, else_body, start.loc)

    def parse_assert(self) -> A.AssertStmt:
        start = self.expect("assert")
        self.expect("LPAREN")
        cond = self.parse_comparison()
        self.expect("RPAREN")
        self.expect("SEMI")
        return A.AssertStmt(cond, start.loc)

    def parse_comparison(self) -> A.Comparison:
        left = self.parse_expr()
        tok = self.peek()
        rel = _REL_BY_KIND.get(tok.kind)
        if rel is None:
            raise ParseError(
                f"expected comparison operator, found {tok.text!r}", tok.loc
            )
        self.advance()
        right = self.parse_expr()
        return A.Comparison(rel, left, right, tok.loc)

    # ----- expressions ------------------------------------------------------

    def parse_expr(self) -> A.Expr:
        left = self.parse_term()
        while self.peek().kind in ("PLUS", "MINUS"):
            op = self.advance()
            right = self.parse_term()
            left = A.BinaryOp(op.text, left, right, op.loc)
        return left

    def parse_term(self) -> A.Expr:
        left = self.parse_primary()
        while self.peek().kind in ("STAR", "SLASH", "PERCENT"):
            op = self.advance()
            right = self.parse_primary()
            left = A.BinaryOp(op.text, left, right, op.loc)
        return left

    def parse_primary(self) -> A.Expr:
        tok = self.peek()
        if tok.kind == INT:
            self.advance()
            return A.IntLit(int(tok.text), tok.loc)
        if tok.kind == "__input":
            self.advance()
            if self.in_kernel:
                raise ParseError("__input() is host-only", tok.loc)
            self.expect("LPAREN")
            self.expect("RPAREN")
            site = self.input_sites
            self.input_sites += 1
            return A.InputCall(site, tok.loc)
        if tok.kind == "LPAREN":
            self.advance()
            inner = self.parse_expr()
            self.expect("RPAREN")
            return inner
        if tok.kind == IDENT:
            self.advance()
            if (
                self.in_kernel
                and tok.text in A.BUILTIN_GROUPS
            ):
                dot = self.expect("DOT", f'".x/.y/.z" after {tok.text}')
                axis = self.expect(IDENT, "builtin axis")
                if axis.text not in A.AXES:
                    raise ParseError(
                        f"unknown builtin axis {axis.text!r}", axis.loc
                    )
                return A.BuiltinRef(tok.text, axis.text, tok.loc)
            if self.at("LBRACKET"):
                indices = [self._subscript()]
                if self.at("LBRACKET"):
                    indices.append(self._subscript())
                return A.IndexExpr(tok.text, indices, tok.loc)
            return A.Ident(tok.text, tok.loc)
        raise ParseError(f"expected expression, found {tok.text!r}", tok.loc)


# ===== name resolution ======================================================


@dataclass
class _Sym:
    kind: str  # scalar | loopvar | pointer | dynshm | partition | array
    elem_type: str = "int"
    ndims: int = 0
    uniform: bool = True  # kernel scalars: same value for every thread?


class _Scope:
    def __init__(self, parent: Optional["_Scope"] = None):
        self.parent = parent
        self.table: dict[str, _Sym] = {}

    def lookup(self, name: str) -> Optional[_Sym]:
        scope: Optional[_Scope] = self
        while scope is not None:
            if name in scope.table:
                return scope.table[name]
            scope = scope.parent
        return None

    def define(self, name: str, sym: _Sym, loc) -> None:
        if self.lookup(name) is not None:
            raise ResolutionError(
                f"{name!r} is already defined; MiniCUDA is single-assignment",
                loc,
            )
        self.table[name] = sym


class _Resolver:
    def __init__(self, program: A.Program):
        self.program = program
        self.kernels = {k.name: k for k in program.kernels}
        self.in_kernel = False

    def run(self) -> None:
        seen: set[str] = set()
        for k in self.program.kernels:
            if k.name in seen:
                raise ResolutionError(f"kernel {k.name!r} defined twice", k.loc)
            seen.add(k.name)
            self.resolve_kernel(k)
        self.in_kernel = False
        scope = _Scope()
        self.has_dynshm = False
        for st in self.program.host_main:
            self.stmt(st, scope)

    def resolve_kernel(self, k: A.KernelDef) -> None:
        self.in_kernel = True
        self.has_dynshm = False
        scope = _Scope()
        for p in k.params:
            if p.name in A.BUILTIN_GROUPS:
                raise ResolutionError(f"{p.name!r} is reserved in kernels", p.loc)
            kind = "pointer" if p.is_pointer else "scalar"
            scope.define(p.name, _Sym(kind, p.elem_type, ndims=1), p.loc)
        for st in k.body:
            self.stmt(st, scope)

    # ----- statement dispatch ----------------------------------------------

    def stmt(self, st: A.Stmt, scope: _Scope) -> None:
        if isinstance(st, A.AssignStmt):
            self.check_target_name(st.name, st.loc)
            if isinstance(st.value, A.Ident):
                rhs = self.use(st.value, scope)
                if rhs.kind in ("pointer", "dynshm", "partition"):
                    if not self.in_kernel:
                        raise ResolutionError(
                            "pointer aliasing is kernel-only", st.loc
                        )
                    scope.define(st.name, _Sym(rhs.kind, rhs.elem_type, 1), st.loc)
                    return
            uniform = self.scalar_expr(st.value, scope)
            scope.define(st.name, _Sym("scalar", uniform=uniform), st.loc)
        elif isinstance(st, A.MallocStmt):
            self.scalar_expr(st.size, scope)
            scope.define(st.name, _Sym("pointer", st.elem_type, 1), st.loc)
        elif isinstance(st, A.FreeStmt):
            sym = scope.lookup(st.name)
            if sym is None or sym.kind != "pointer":
                raise ResolutionError(
                    f"cudaFree target {st.name!r} is not an allocation", st.loc
                )
        elif isinstance(st, A.LaunchStmt):
            self.launch(st, scope)
        elif isinstance(st, A.AssertStmt):
            self.scalar_expr(st.cond.left, scope)
            self.scalar_expr(st.cond.right, scope)
        elif isinstance(st, A.ForStmt):
            self.scalar_expr(st.lower, scope)
            self.scalar_expr(st.upper, scope)
            body_scope = _Scope(scope)
            self.check_target_name(st.var, st.loc)
            body_scope.define(st.var, _Sym("loopvar", uniform=False), st.loc)
            for inner in st.body:
                self.stmt(inner, body_scope)
        elif isinstance(st, A.IfStmt):
            self.scalar_expr(st.cond.left, scope)
            self.scalar_expr(st.cond.right, scope)
            for inner in st.then_body:
                self.stmt(inner, _Scope(scope))
            if st.else_body is not None:
                for inner in st.else_body:
                    self.stmt(inner, _Scope(scope))
        elif isinstance(st, A.StoreStmt):
            self.indexed_use(st.target, len(st.indices), st.loc, scope)
            for ix in st.indices:
                self.scalar_expr(ix, scope)
            self.scalar_expr(st.value, scope)
        elif isinstance(st, A.AtomicStmt):
            self.indexed_use(st.target, 1, st.loc, scope)
            self.scalar_expr(st.index, scope)
            self.scalar_expr(st.value, scope)
        elif isinstance(st, A.ReturnStmt):
            pass
        elif isinstance(st, A.ExternSharedDecl):
            if self.has_dynshm:
                raise ResolutionError(
                    "only one extern __shared__ array per kernel", st.loc
                )
            self.has_dynshm = True
            scope.define(st.name, _Sym("dynshm", st.elem_type, 1), st.loc)
        elif isinstance(st, (A.SharedArrayDecl, A.LocalArrayDecl)):
            for dim in st.dims:
                if not self.scalar_expr(dim, scope):
                    raise ResolutionError(
                        "array sizes must be launch-uniform "
                        "(no builtins, loads or loop variables)",
                        st.loc,
                    )
            scope.define(
                st.name, _Sym("array", st.elem_type, len(st.dims)), st.loc
            )
        elif isinstance(st, A.PartitionStmt):
            base = scope.lookup(st.base)
            if base is None:
                raise ResolutionError(f"undefined name {st.base!r}", st.loc)
            if base.kind not in ("dynshm", "partition", "pointer"):
                raise ResolutionError(
                    f"partition base {st.base!r} must be dynamic shared memory, "
                    "another partition, or a pointer parameter",
                    st.loc,
                )
            self.scalar_expr(st.offset, scope)
            scope.define(st.name, _Sym("partition", base.elem_type, 1), st.loc)
        else:  # pragma: no cover - exhaustive
            raise ResolutionError(f"unhandled statement {type(st).__name__}", st.loc)

    def check_target_name(self, name: str, loc) -> None:
        if self.in_kernel and name in A.BUILTIN_GROUPS:
            raise ResolutionError(f"{name!r} is reserved in kernels", loc)

    def launch(self, st: A.LaunchStmt, scope: _Scope) -> None:
        kernel = self.kernels.get(st.kernel)
        if kernel is None:
            raise ResolutionError(f"launch of undefined kernel {st.kernel!r}", st.loc)
        if len(st.args) != len(kernel.params):
            raise ResolutionError(
                f"kernel {st.kernel!r} takes {len(kernel.params)} argument(s), "
                f"launch passes {len(st.args)}",
                st.loc,
            )
        for dim in (st.grid, st.block):
            for axis in dim.axes:
                self.scalar_expr(axis, scope)
        if st.shm is not None:
            self.scalar_expr(st.shm, scope)
        for param, arg in zip(kernel.params, st.args):
            if param.is_pointer:
                if not isinstance(arg, A.Ident):
                    raise ResolutionError(
                        f"pointer parameter {param.name!r} needs a bare "
                        "allocation name",
                        st.loc,
                    )
                sym = scope.lookup(arg.name)
                if sym is None or sym.kind != "pointer":
                    raise ResolutionError(
                        f"{arg.name!r} is not a device allocation", arg.loc
                    )
            else:
                self.scalar_expr(arg, scope)

    def indexed_use(self, name: str, nindices: int, loc, scope: _Scope) -> _Sym:
        sym = scope.lookup(name)
        if sym is None:
            raise ResolutionError(f"undefined name {name!r}", loc)
        if sym.kind not in ("pointer", "dynshm", "partition", "array"):
            raise ResolutionError(f"{name!r} is not indexable", loc)
        want = sym.ndims if sym.kind == "array" else 1
        if nindices != want:
            raise ResolutionError(
                f"{name!r} expects {want} subscript(s), found {nindices}", loc
            )
        return sym

    def use(self, ident: A.Ident, scope: _Scope) -> _Sym:
        sym = scope.lookup(ident.name)
        if sym is None:
            raise ResolutionError(f"undefined name {ident.name!r}", ident.loc)
        return sym

    def scalar_expr(self, e: A.Expr, scope: _Scope) -> bool:
        """Validate a scalar expression; returns launch-uniformity."""
        if isinstance(e, A.IntLit):
            return True
        if isinstance(e, A.InputCall):
            return True
        if isinstance(e, A.BuiltinRef):
            return False
        if isinstance(e, A.Ident):
            sym = self.use(e, scope)
            if sym.kind not in ("scalar", "loopvar"):
                raise ResolutionError(
                    f"{e.name!r} is not a scalar value", e.loc
                )
            return sym.uniform and sym.kind != "loopvar"
        if isinstance(e, A.BinaryOp):
            lu = self.scalar_expr(e.left, scope)
            ru = self.scalar_expr(e.right, scope)
            return lu and ru
        if isinstance(e, A.IndexExpr):
            self.indexed_use(e.base, len(e.indices), e.loc, scope)
            for ix in e.indices:
                self.scalar_expr(ix, scope)
            return False
        raise ResolutionError(f"unhandled expression {type(e).__name__}", e.loc)


# ===== public entry points ==================================================


def parse_program(tokens: list[Token], filename: str = "<input>") -> A.Program:
    """Parse and resolve a token stream into a Program."""
    program = _Parser(tokens).parse_program(filename)
    _Resolver(program).run()
    return program


def parse_source(source: str, filename: str = "<input>") -> A.Program:
    return parse_program(tokenize(source, filename), filename)
