"""Syntax trees for the source language.

A library is a sequence of global variable declarations followed by
procedures.  Globals are integers or integer-keyed total maps (one- or
two-dimensional) with a constant default.  Procedure bodies are built
from assignments, calls, conditionals, and a single trailing return;
the havoc/assume/assert forms never appear in parsed source, only in
transformed bodies.

Expressions are integer-valued and side-effect free.  Comparisons and
logical operators yield 0 or 1; any nonzero value is treated as true in
conditions.  Division and modulo are total: Euclidean semantics with
``x / 0 = x % 0 = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field


ARITH_OPS = ("+", "-", "*", "/", "%")
CMP_OPS = ("<", ">", "==")
LOGIC_OPS = ("&&", "||")
BINARY_OPS = ARITH_OPS + CMP_OPS + LOGIC_OPS

KIND_SCALAR = "scalar"
KIND_ARRAY1 = "array1"
KIND_ARRAY2 = "array2"


def emod(a: int, b: int) -> int:
    """Euclidean remainder, total: in [0, |b|), and 0 when b = 0."""
    if b == 0:
        return 0
    return a % abs(b)


def ediv(a: int, b: int) -> int:
    """Euclidean quotient, total: a = b * ediv(a,b) + emod(a,b), 0 when b = 0."""
    if b == 0:
        return 0
    return (a - emod(a, b)) // b


class ArrVal:
    """Total integer-keyed map: finite exceptions over a constant default."""

    __slots__ = ("entries", "default")

    def __init__(self, entries: dict[tuple[int, ...], int] | None = None, default: int = 0):
        self.entries = dict(entries or {})
        self.default = default

    def get(self, idx: tuple[int, ...]) -> int:
        return self.entries.get(idx, self.default)

    def set(self, idx: tuple[int, ...], val: int) -> "ArrVal":
        out = ArrVal(self.entries, self.default)
        out.entries[idx] = val
        return out

    def canon(self) -> tuple[int, frozenset]:
        return (
            self.default,
            frozenset((k, v) for k, v in self.entries.items() if v != self.default),
        )

    def __eq__(self, other) -> bool:
        return isinstance(other, ArrVal) and self.canon() == other.canon()

    def __hash__(self):
        return hash(self.canon())

    def __repr__(self) -> str:
        return f"ArrVal({self.entries!r}, default={self.default})"


@dataclass(frozen=True)
class Pos:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NOPOS = Pos(0, 0)


# --- expressions ---


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Const(Expr):
    value: int
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Var(Expr):
    name: str
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class ArrayRead(Expr):
    name: str
    index: tuple[Expr, ...]
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # only "!"
    operand: Expr
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Apply(Expr):
    """Procedure-symbol application; legal only inside invariant annotations."""

    callee: str
    args: tuple[Expr, ...]
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Quant(Expr):
    """exists/forall; legal only inside invariant annotations."""

    kind: str  # "exists" | "forall"
    vars: tuple[str, ...]
    body: Expr
    pos: Pos = field(default=NOPOS, compare=False)


def expr_vars(e: Expr) -> set[str]:
    """All variable names read by e (array names included)."""
    out: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, ArrayRead):
            out.add(node.name)
            stack.extend(node.index)
        elif isinstance(node, Binary):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Unary):
            stack.append(node.operand)
        elif isinstance(node, Apply):
            stack.extend(node.args)
    return out


def eval_expr(e: Expr, read) -> int:
    """Evaluate e with `read(name, index_tuple_or_None) -> int`."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return read(e.name, None)
    if isinstance(e, ArrayRead):
        idx = tuple(eval_expr(i, read) for i in e.index)
        return read(e.name, idx)
    if isinstance(e, Unary):
        return 0 if eval_expr(e.operand, read) != 0 else 1
    if isinstance(e, Binary):
        op = e.op
        if op == "&&":
            return 1 if eval_expr(e.left, read) != 0 and eval_expr(e.right, read) != 0 else 0
        if op == "||":
            return 1 if eval_expr(e.left, read) != 0 or eval_expr(e.right, read) != 0 else 0
        a = eval_expr(e.left, read)
        b = eval_expr(e.right, read)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return ediv(a, b)
        if op == "%":
            return emod(a, b)
        if op == "<":
            return 1 if a < b else 0
        if op == ">":
            return 1 if a > b else 0
        if op == "==":
            return 1 if a == b else 0
    raise TypeError(f"not an expression: {e!r}")


# --- statements ---


@dataclass(frozen=True)
class LValue:
    name: str
    index: tuple[Expr, ...] = ()  # empty for scalars

    def __str__(self) -> str:
        if not self.index:
            return self.name
        return f"{self.name}[...]"


@dataclass(frozen=True)
class Stmt:
    pass


@dataclass(frozen=True)
class Assign(Stmt):
    target: LValue
    rhs: Expr
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Call(Stmt):
    lhs: str
    callee: str
    args: tuple[Expr, ...]
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Seq(Stmt):
    first: Stmt
    second: Stmt


@dataclass(frozen=True)
class If(Stmt):
    cond: Expr
    then: Stmt
    els: Stmt
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Return(Stmt):
    var: str
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Havoc(Stmt):
    name: str


@dataclass(frozen=True)
class Assume(Stmt):
    formula: object  # formula.Formula; untyped to avoid an import cycle


@dataclass(frozen=True)
class Assert(Stmt):
    formula: object
    site: str = field(default="", compare=False)  # diagnostic label


def seq_of(stmts: list[Stmt]) -> Stmt:
    """Right-nested sequence of one or more statements."""
    if not stmts:
        raise ValueError("empty statement list")
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out)
    return out


def seq_list(s: Stmt) -> list[Stmt]:
    """Flatten a Seq spine back into a list."""
    out: list[Stmt] = []
    stack = [s]
    while stack:
        node = stack.pop()
        if isinstance(node, Seq):
            stack.append(node.second)
            stack.append(node.first)
        else:
            out.append(node)
    return out


def walk_stmts(s: Stmt):
    """Yield every statement node in the tree, preorder."""
    stack = [s]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Seq):
            stack.append(node.second)
            stack.append(node.first)
        elif isinstance(node, If):
            stack.append(node.els)
            stack.append(node.then)


# --- declarations ---


@dataclass(frozen=True)
class GlobalDecl:
    name: str
    kind: str  # scalar | array1 | array2
    init: int  # scalar value, or the default every index maps to
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Procedure:
    name: str
    params: tuple[str, ...]
    body: Stmt
    return_var: str
    invariant: object | None = None  # formula.Formula
    pos: Pos = field(default=NOPOS, compare=False)

    def locals_of(self, globals_: set[str]) -> set[str]:
        """Assigned names that are neither globals nor formals."""
        out: set[str] = set()
        for s in walk_stmts(self.body):
            if isinstance(s, Assign) and not s.target.index:
                out.add(s.target.name)
            elif isinstance(s, Call):
                out.add(s.lhs)
        return out - globals_ - set(self.params)


@dataclass(frozen=True)
class Library:
    globals: tuple[GlobalDecl, ...]
    procedures: tuple[Procedure, ...]

    def global_names(self) -> set[str]:
        return {g.name for g in self.globals}

    def global_decl(self, name: str) -> GlobalDecl:
        for g in self.globals:
            if g.name == name:
                return g
        raise KeyError(name)

    def procedure(self, name: str) -> Procedure:
        for p in self.procedures:
            if p.name == name:
                return p
        raise KeyError(name)

    def proc_arities(self) -> dict[str, int]:
        return {p.name: len(p.params) for p in self.procedures}

    def written_globals(self) -> set[str]:
        """Globals assigned (directly, scalar or cell) anywhere in the library."""
        names = self.global_names()
        out: set[str] = set()
        for p in self.procedures:
            for s in walk_stmts(p.body):
                if isinstance(s, Assign) and s.target.name in names:
                    out.add(s.target.name)
                elif isinstance(s, Call) and s.lhs in names:
                    out.add(s.lhs)
        return out
