"""Lexer, parser, validator, and pretty-printer for the source language.

Concrete syntax, one library per file:

    var g: int := -1;
    var cache: [int] int := 0;
    var m: [int,int] int := -1;

    proc factCache(n)
      invariant g == -1 || g == lastN * factCache(lastN - 1);
    {
      if (n <= 1) { result := 1; } else { ... }
      return result;
    }

Statements: `x := e;`, `x := q(e1, e2);`, `a[e] := e;`,
`if (e) { ... } else { ... }`, `return x;`.  Invariant formulas extend
the expression grammar with `exists x. f`, `forall x, y. f`, and
procedure-symbol applications `q(e)`.

The comparison sugar `!=`, `<=`, `>=` and unary minus are desugared at
parse time into the minimal operator set, so the pretty-printer emits
the desugared form; parse/print round-trips are stable from the first
reprint on.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import formula, lang
from .lang import (
    Apply,
    ArrayRead,
    Assign,
    Binary,
    Call,
    Const,
    Expr,
    GlobalDecl,
    If,
    LValue,
    Library,
    NOPOS,
    Pos,
    Procedure,
    Quant,
    Return,
    Seq,
    Stmt,
    Unary,
    Var,
)

KEYWORDS = {
    "var",
    "proc",
    "int",
    "if",
    "else",
    "return",
    "invariant",
    "exists",
    "forall",
    "true",
    "false",
}

_PUNCT = [
    ":=",
    "==",
    "!=",
    "<=",
    ">=",
    "&&",
    "||",
    "(",
    ")",
    "{",
    "}",
    "[",
    "]",
    ",",
    ";",
    ".",
    ":",
    "+",
    "-",
    "*",
    "/",
    "%",
    "<",
    ">",
    "!",
]


class FrontendError(Exception):
    def __init__(self, message: str, pos: Pos = NOPOS):
        super().__init__(f"{pos}: {message}" if pos != NOPOS else message)
        self.message = message
        self.pos = pos


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    pos: Pos = NOPOS

    def __str__(self) -> str:
        return f"{self.pos}: {self.kind}: {self.message}"


class ValidationError(Exception):
    def __init__(self, diags: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diags))
        self.diagnostics = diags


@dataclass(frozen=True)
class Token:
    kind: str  # ident | int | punct | eof
    text: str
    pos: Pos


def tokenize(source: str) -> list[Token]:
    toks: list[Token] = []
    line, col = 1, 1
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#" or source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        pos = Pos(line, col)
        if c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            toks.append(Token("int", source[i:j], pos))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            toks.append(Token("ident", source[i:j], pos))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if source.startswith(p, i):
                toks.append(Token("punct", p, pos))
                i += len(p)
                col += len(p)
                break
        else:
            raise FrontendError(f"unexpected character {c!r}", pos)
    toks.append(Token("eof", "", Pos(line, col)))
    return toks


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def at(self, text: str) -> bool:
        t = self.cur
        return (t.kind == "punct" and t.text == text) or (
            t.kind == "ident" and t.text == text
        )

    def accept(self, text: str) -> Token | None:
        if self.at(text):
            t = self.cur
            self.i += 1
            return t
        return None

    def expect(self, text: str) -> Token:
        t = self.accept(text)
        if t is None:
            raise FrontendError(f"expected {text!r}, found {self.cur.text!r}", self.cur.pos)
        return t

    def ident(self) -> Token:
        t = self.cur
        if t.kind != "ident" or t.text in KEYWORDS:
            raise FrontendError(f"expected identifier, found {t.text!r}", t.pos)
        self.i += 1
        return t

    # --- library structure ---

    def library(self) -> Library:
        globals_: list[GlobalDecl] = []
        procs: list[Procedure] = []
        while self.cur.kind != "eof":
            if self.at("var"):
                globals_.append(self.global_decl())
            elif self.at("proc"):
                procs.append(self.procedure())
            else:
                raise FrontendError(
                    f"expected 'var' or 'proc', found {self.cur.text!r}", self.cur.pos
                )
        return Library(tuple(globals_), tuple(procs))

    def global_decl(self) -> GlobalDecl:
        start = self.expect("var")
        name = self.ident()
        self.expect(":")
        kind = self.type_kind()
        self.expect(":=")
        init = self.int_const()
        self.expect(";")
        return GlobalDecl(name.text, kind, init, pos=start.pos)

    def type_kind(self) -> str:
        if self.accept("int"):
            return lang.KIND_SCALAR
        self.expect("[")
        self.expect("int")
        two = self.accept(",") is not None
        if two:
            self.expect("int")
        self.expect("]")
        self.expect("int")
        return lang.KIND_ARRAY2 if two else lang.KIND_ARRAY1

    def int_const(self) -> int:
        sign = -1 if self.accept("-") else 1
        t = self.cur
        if t.kind != "int":
            raise FrontendError(f"expected integer constant, found {t.text!r}", t.pos)
        self.i += 1
        return sign * int(t.text)

    def procedure(self) -> Procedure:
        start = self.expect("proc")
        name = self.ident()
        self.expect("(")
        params = [self.ident().text]
        while self.accept(","):
            params.append(self.ident().text)
        self.expect(")")
        inv = None
        if self.accept("invariant"):
            inv_expr = self.expr(allow_quant=True)
            self.expect(";")
            inv = formula.expr_to_formula(inv_expr)
        self.expect("{")
        stmts: list[Stmt] = []
        while not self.at("}"):
            stmts.append(self.statement())
        self.expect("}")
        ret_var = ""
        for s in stmts:
            if isinstance(s, Return):
                ret_var = s.var
        if not stmts:
            raise FrontendError("empty procedure body", start.pos)
        return Procedure(
            name.text, tuple(params), lang.seq_of(stmts), ret_var, inv, pos=start.pos
        )

    # --- statements ---

    def statement(self) -> Stmt:
        if self.at("if"):
            return self.if_stmt()
        if self.at("return"):
            t = self.expect("return")
            var = self.ident()
            self.expect(";")
            return Return(var.text, pos=t.pos)
        target = self.ident()
        if self.at("["):
            self.expect("[")
            idx = [self.expr()]
            while self.accept(","):
                idx.append(self.expr())
            self.expect("]")
            self.expect(":=")
            rhs = self.expr()
            self.expect(";")
            return Assign(LValue(target.text, tuple(idx)), rhs, pos=target.pos)
        self.expect(":=")
        # `x := q(...)` at the top of a right-hand side is a call statement
        if (
            self.cur.kind == "ident"
            and self.cur.text not in KEYWORDS
            and self.toks[self.i + 1].kind == "punct"
            and self.toks[self.i + 1].text == "("
        ):
            callee = self.ident()
            self.expect("(")
            args = [self.expr()]
            while self.accept(","):
                args.append(self.expr())
            self.expect(")")
            self.expect(";")
            return Call(target.text, callee.text, tuple(args), pos=target.pos)
        rhs = self.expr()
        self.expect(";")
        return Assign(LValue(target.text), rhs, pos=target.pos)

    def if_stmt(self) -> Stmt:
        t = self.expect("if")
        self.expect("(")
        cond = self.expr()
        self.expect(")")
        self.expect("{")
        then: list[Stmt] = []
        while not self.at("}"):
            then.append(self.statement())
        self.expect("}")
        self.expect("else")
        if self.at("if"):
            els: list[Stmt] = [self.if_stmt()]
        else:
            self.expect("{")
            els = []
            while not self.at("}"):
                els.append(self.statement())
            self.expect("}")
        if not then or not els:
            raise FrontendError("empty branch", t.pos)
        self.accept(";")  # optional separator after the closing brace
        return If(cond, lang.seq_of(then), lang.seq_of(els), pos=t.pos)

    # --- expressions ---
    # precedence: quant < || < && < comparison < + - < * / % < unary < atom

    def expr(self, allow_quant: bool = False) -> Expr:
        if allow_quant and (self.at("exists") or self.at("forall")):
            kw = self.cur
            self.i += 1
            names = [self.ident().text]
            while self.accept(","):
                names.append(self.ident().text)
            self.expect(".")
            body = self.expr(allow_quant=True)
            return Quant(kw.text, tuple(names), body, pos=kw.pos)
        return self.or_expr(allow_quant)

    def or_expr(self, aq: bool) -> Expr:
        left = self.and_expr(aq)
        while True:
            t = self.accept("||")
            if t is None:
                return left
            right = (
                self.expr(allow_quant=True)
                if aq and (self.at("exists") or self.at("forall"))
                else self.and_expr(aq)
            )
            left = Binary("||", left, right, pos=t.pos)

    def and_expr(self, aq: bool) -> Expr:
        left = self.cmp_expr(aq)
        while True:
            t = self.accept("&&")
            if t is None:
                return left
            right = (
                self.expr(allow_quant=True)
                if aq and (self.at("exists") or self.at("forall"))
                else self.cmp_expr(aq)
            )
            left = Binary("&&", left, right, pos=t.pos)

    def cmp_expr(self, aq: bool) -> Expr:
        left = self.add_expr(aq)
        for op in ("==", "!=", "<=", ">=", "<", ">"):
            t = self.accept(op)
            if t is None:
                continue
            right = self.add_expr(aq)
            if op == "==":
                return Binary("==", left, right, pos=t.pos)
            if op == "<":
                return Binary("<", left, right, pos=t.pos)
            if op == ">":
                return Binary(">", left, right, pos=t.pos)
            if op == "!=":
                return Unary("!", Binary("==", left, right, pos=t.pos), pos=t.pos)
            if op == "<=":
                return Unary("!", Binary(">", left, right, pos=t.pos), pos=t.pos)
            return Unary("!", Binary("<", left, right, pos=t.pos), pos=t.pos)
        return left

    def add_expr(self, aq: bool) -> Expr:
        left = self.mul_expr(aq)
        while True:
            if self.at("+"):
                t = self.expect("+")
                left = Binary("+", left, self.mul_expr(aq), pos=t.pos)
            elif self.at("-"):
                t = self.expect("-")
                left = Binary("-", left, self.mul_expr(aq), pos=t.pos)
            else:
                return left

    def mul_expr(self, aq: bool) -> Expr:
        left = self.unary_expr(aq)
        while True:
            matched = False
            for op in ("*", "/", "%"):
                t = self.accept(op)
                if t is not None:
                    left = Binary(op, left, self.unary_expr(aq), pos=t.pos)
                    matched = True
                    break
            if not matched:
                return left

    def unary_expr(self, aq: bool) -> Expr:
        if self.at("!"):
            t = self.expect("!")
            return Unary("!", self.unary_expr(aq), pos=t.pos)
        if self.at("-"):
            t = self.expect("-")
            operand = self.unary_expr(aq)
            if isinstance(operand, Const):
                return Const(-operand.value, pos=t.pos)
            return Binary("-", Const(0, pos=t.pos), operand, pos=t.pos)
        return self.atom(aq)

    def atom(self, aq: bool) -> Expr:
        t = self.cur
        if t.kind == "int":
            self.i += 1
            return Const(int(t.text), pos=t.pos)
        if self.accept("true"):
            return Const(1, pos=t.pos)
        if self.accept("false"):
            return Const(0, pos=t.pos)
        if self.accept("("):
            inner = self.expr(allow_quant=aq)
            self.expect(")")
            return inner
        if t.kind == "ident" and t.text not in KEYWORDS:
            name = self.ident()
            if aq and self.at("("):
                self.expect("(")
                args = [self.expr(allow_quant=aq)]
                while self.accept(","):
                    args.append(self.expr(allow_quant=aq))
                self.expect(")")
                return Apply(name.text, tuple(args), pos=name.pos)
            if self.at("["):
                self.expect("[")
                idx = [self.expr(allow_quant=aq)]
                while self.accept(","):
                    idx.append(self.expr(allow_quant=aq))
                self.expect("]")
                return ArrayRead(name.text, tuple(idx), pos=name.pos)
            return Var(name.text, pos=name.pos)
        raise FrontendError(f"expected expression, found {t.text!r}", t.pos)


def parse_library(source: str) -> Library:
    """Parse source text into an unvalidated library AST."""
    parser = _Parser(tokenize(source))
    lib = parser.library()
    dupes = [d for d in _duplicate_decls(lib)]
    if dupes:
        raise FrontendError(dupes[0].message, dupes[0].pos)
    return lib


def _duplicate_decls(lib: Library) -> list[Diagnostic]:
    out = []
    seen: dict[str, Pos] = {}
    for g in lib.globals:
        if g.name in seen:
            out.append(
                Diagnostic("duplicate-declaration", f"global {g.name!r} redeclared", g.pos)
            )
        seen[g.name] = g.pos
    for p in lib.procedures:
        if p.name in seen:
            out.append(
                Diagnostic(
                    "duplicate-declaration", f"name {p.name!r} already declared", p.pos
                )
            )
        seen[p.name] = p.pos
    return out


def parse_formula_text(source: str) -> formula.Formula:
    """Parse a standalone formula in annotation syntax."""
    parser = _Parser(tokenize(source))
    e = parser.expr(allow_quant=True)
    if parser.cur.kind != "eof":
        raise FrontendError(f"trailing input {parser.cur.text!r}", parser.cur.pos)
    return formula.expr_to_formula(e)


# --- validation ---


def diagnostics(lib: Library) -> list[Diagnostic]:
    """All contract violations in the library; empty means valid."""
    out: list[Diagnostic] = []
    globals_ = {g.name: g for g in lib.globals}
    arities = lib.proc_arities()

    if not lib.procedures:
        out.append(Diagnostic("no-procedure", "library declares no procedure"))

    for p in lib.procedures:
        if len(set(p.params)) != len(p.params):
            out.append(Diagnostic("duplicate-parameter", f"in {p.name}", p.pos))
        for prm in p.params:
            if prm in globals_:
                out.append(
                    Diagnostic(
                        "name-clash", f"parameter {prm!r} shadows a global", p.pos
                    )
                )
        locals_ = p.locals_of(set(globals_))
        for loc in locals_:
            if loc in arities:
                out.append(
                    Diagnostic("name-clash", f"local {loc!r} shadows a procedure", p.pos)
                )

        stmts = lang.seq_list(p.body)
        for i, s in enumerate(stmts):
            if isinstance(s, Return) and i != len(stmts) - 1:
                out.append(Diagnostic("return-not-last", f"in {p.name}", s.pos))
        if not isinstance(stmts[-1], Return):
            out.append(Diagnostic("missing-return", f"in {p.name}", p.pos))
        returns = [s for s in lang.walk_stmts(p.body) if isinstance(s, Return)]
        if len(returns) > 1:
            out.append(
                Diagnostic("return-not-last", f"multiple returns in {p.name}", p.pos)
            )

        for s in lang.walk_stmts(p.body):
            if isinstance(s, (lang.Havoc, lang.Assume, lang.Assert)):
                out.append(
                    Diagnostic(
                        "transformed-node-in-source",
                        f"{type(s).__name__} in parsed body of {p.name}",
                        p.pos,
                    )
                )
            elif isinstance(s, Assign):
                if s.target.name in p.params:
                    out.append(
                        Diagnostic(
                            "assignment-to-formal",
                            f"{s.target.name!r} in {p.name}",
                            s.pos,
                        )
                    )
                out.extend(_check_lvalue(s.target, globals_, s.pos, p.name))
                out.extend(_check_expr(s.rhs, lib, p, globals_))
            elif isinstance(s, Call):
                if s.lhs in p.params:
                    out.append(
                        Diagnostic(
                            "assignment-to-formal", f"{s.lhs!r} in {p.name}", s.pos
                        )
                    )
                if s.lhs in globals_ and globals_[s.lhs].kind != lang.KIND_SCALAR:
                    out.append(
                        Diagnostic(
                            "kind-mismatch",
                            f"call result into array {s.lhs!r}",
                            s.pos,
                        )
                    )
                if s.callee not in arities:
                    out.append(
                        Diagnostic(
                            "undeclared-procedure", f"{s.callee!r} in {p.name}", s.pos
                        )
                    )
                elif arities[s.callee] != len(s.args):
                    out.append(
                        Diagnostic(
                            "arity-mismatch",
                            f"{s.callee!r} takes {arities[s.callee]} argument(s), got {len(s.args)}",
                            s.pos,
                        )
                    )
                for a in s.args:
                    out.extend(_check_expr(a, lib, p, globals_))
            elif isinstance(s, If):
                out.extend(_check_expr(s.cond, lib, p, globals_))

        if p.invariant is not None:
            allowed = set(globals_)
            for v in sorted(formula.free_vars(p.invariant)):
                if v not in allowed:
                    out.append(
                        Diagnostic(
                            "invariant-scope",
                            f"invariant of {p.name} mentions non-global {v!r}",
                            p.pos,
                        )
                    )
            for name, arity in sorted(formula.applies_of(p.invariant)):
                if name not in arities:
                    out.append(
                        Diagnostic(
                            "undeclared-procedure",
                            f"{name!r} applied in invariant of {p.name}",
                            p.pos,
                        )
                    )
                elif arities[name] != arity:
                    out.append(
                        Diagnostic(
                            "arity-mismatch",
                            f"{name!r} applied with {arity} argument(s) in invariant of {p.name}",
                            p.pos,
                        )
                    )
    out.extend(_duplicate_decls(lib))
    return out


def _check_lvalue(lv: LValue, globals_, pos, proc_name) -> list[Diagnostic]:
    out = []
    decl = globals_.get(lv.name)
    want = 0 if decl is None else {"scalar": 0, "array1": 1, "array2": 2}[decl.kind]
    if len(lv.index) != want:
        out.append(
            Diagnostic(
                "kind-mismatch",
                f"{lv.name!r} indexed with {len(lv.index)} subscript(s), declared with {want}",
                pos,
            )
        )
    return out


def _check_expr(e: Expr, lib: Library, p: Procedure, globals_) -> list[Diagnostic]:
    out = []
    arities = lib.proc_arities()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Apply):
            out.append(
                Diagnostic(
                    "call-in-expression",
                    f"application {node.callee!r} outside an invariant",
                    node.pos,
                )
            )
            stack.extend(node.args)
        elif isinstance(node, Quant):
            out.append(
                Diagnostic("quantifier-in-expression", "quantifier outside an invariant", node.pos)
            )
        elif isinstance(node, ArrayRead):
            decl = globals_.get(node.name)
            want = 0 if decl is None else {"scalar": 0, "array1": 1, "array2": 2}[decl.kind]
            if len(node.index) != want:
                out.append(
                    Diagnostic(
                        "kind-mismatch",
                        f"{node.name!r} read with {len(node.index)} subscript(s), declared with {want}",
                        node.pos,
                    )
                )
            stack.extend(node.index)
        elif isinstance(node, Var):
            decl = globals_.get(node.name)
            if decl is not None and decl.kind != lang.KIND_SCALAR:
                out.append(
                    Diagnostic(
                        "kind-mismatch", f"array {node.name!r} used as scalar", node.pos
                    )
                )
            if node.name in arities:
                out.append(
                    Diagnostic(
                        "kind-mismatch", f"procedure {node.name!r} used as value", node.pos
                    )
                )
        elif isinstance(node, Binary):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Unary):
            stack.append(node.operand)
    return out


def validate(lib: Library) -> Library:
    """Return lib when every structural invariant holds, else raise."""
    diags = diagnostics(lib)
    if diags:
        raise ValidationError(diags)
    return lib


def load_library(source: str) -> Library:
    return validate(parse_library(source))


# --- pretty printing ---


def _fmt_expr(e: Expr, outer: int = 0) -> str:
    PREC = {"||": 1, "&&": 2, "==": 4, "<": 4, ">": 4, "+": 5, "-": 5, "*": 6, "/": 6, "%": 6}
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, ArrayRead):
        return f"{e.name}[{', '.join(_fmt_expr(i) for i in e.index)}]"
    if isinstance(e, Apply):
        return f"{e.callee}({', '.join(_fmt_expr(a) for a in e.args)})"
    if isinstance(e, Quant):
        body = _fmt_expr(e.body)
        s = f"{e.kind} {', '.join(e.vars)}. {body}"
        return f"({s})" if outer > 0 else s
    if isinstance(e, Unary):
        return f"!{_fmt_expr(e.operand, 7)}"
    if isinstance(e, Binary):
        prec = PREC[e.op]
        s = f"{_fmt_expr(e.left, prec)} {e.op} {_fmt_expr(e.right, prec + 1)}"
        return f"({s})" if prec < outer else s
    raise TypeError(repr(e))


def _fmt_stmt(s: Stmt, indent: int, lines: list[str]) -> None:
    pad = "  " * indent
    if isinstance(s, Seq):
        _fmt_stmt(s.first, indent, lines)
        _fmt_stmt(s.second, indent, lines)
    elif isinstance(s, Assign):
        if s.target.index:
            idx = ", ".join(_fmt_expr(i) for i in s.target.index)
            lines.append(f"{pad}{s.target.name}[{idx}] := {_fmt_expr(s.rhs)};")
        else:
            lines.append(f"{pad}{s.target.name} := {_fmt_expr(s.rhs)};")
    elif isinstance(s, Call):
        args = ", ".join(_fmt_expr(a) for a in s.args)
        lines.append(f"{pad}{s.lhs} := {s.callee}({args});")
    elif isinstance(s, If):
        lines.append(f"{pad}if ({_fmt_expr(s.cond)}) {{")
        _fmt_stmt(s.then, indent + 1, lines)
        lines.append(f"{pad}}} else {{")
        _fmt_stmt(s.els, indent + 1, lines)
        lines.append(f"{pad}}}")
    elif isinstance(s, Return):
        lines.append(f"{pad}return {s.var};")
    elif isinstance(s, lang.Havoc):
        lines.append(f"{pad}havoc({s.name});")
    elif isinstance(s, lang.Assume):
        lines.append(f"{pad}assume {formula.to_source(s.formula)};")
    elif isinstance(s, lang.Assert):
        lines.append(f"{pad}assert {formula.to_source(s.formula)};")
    else:
        raise TypeError(repr(s))


def pretty_print(lib: Library) -> str:
    """Concrete syntax whose re-parse equals the input structurally."""
    lines: list[str] = []
    for g in lib.globals:
        ty = {
            lang.KIND_SCALAR: "int",
            lang.KIND_ARRAY1: "[int] int",
            lang.KIND_ARRAY2: "[int,int] int",
        }[g.kind]
        lines.append(f"var {g.name}: {ty} := {g.init};")
    for p in lib.procedures:
        if lines:
            lines.append("")
        head = f"proc {p.name}({', '.join(p.params)})"
        if p.invariant is not None:
            lines.append(head)
            lines.append(f"  invariant {formula.to_source(p.invariant)};")
            lines.append("{")
        else:
            lines.append(head + " {")
        _fmt_stmt(p.body, 1, lines)
        lines.append("}")
    return "\n".join(lines) + "\n"


def pretty_print_stmt(s: Stmt) -> str:
    """Concrete syntax for one statement tree (transformed bodies included)."""
    lines: list[str] = []
    _fmt_stmt(s, 0, lines)
    return "\n".join(lines) + "\n"
