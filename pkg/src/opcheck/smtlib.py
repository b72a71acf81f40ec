"""SMT-LIB2 emission, solver subprocess driver, and model parsing.

A query is rendered deterministically: fixed logic line, sorted
declarations, assertions in caller order, one trailing ``(check-sat)``.
Program division and modulo become total Euclidean define-funs with the
zero-divisor-yields-zero convention, matching the interpreter exactly.

The driver speaks the line protocol of ``z3 -in`` (or an equivalent
wrapper): each query is framed by a ``(reset)`` and an ``(echo …)``
sentinel, so one long-lived process serves isolated queries — no state
survives the reset.  A soft per-query timeout is set through
``(set-option :timeout ms)``; a wall-clock watchdog kills and respawns
the process if the solver stops answering, reporting Timeout.

Solver resolution order: explicit path, the ``OPCHECK_SOLVER``
environment variable, a native ``z3`` on PATH, and finally the bundled
Node/WebAssembly wrapper under ``tools/z3wasm/`` (requires a one-time
``npm install`` there).
"""

from __future__ import annotations

import os
import queue
import shutil
import subprocess
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import formula, lang
from .formula import (
    And,
    Cmp,
    Exists,
    FFalse,
    Forall,
    Formula,
    FTrue,
    Implies,
    Not,
    Or,
    TApply,
    TBin,
    TBoolInt,
    TConst,
    Term,
    TSelect,
    TStore,
    TVar,
)

SORT_SEXPR = {
    formula.SORT_INT: "Int",
    formula.SORT_ARR1: "(Array Int Int)",
    formula.SORT_ARR2: "(Array Int (Array Int Int))",
}

_PRELUDE_DIV = (
    "(define-fun edivz ((a Int) (b Int)) Int (ite (= b 0) 0 (div a b)))",
    "(define-fun emodz ((a Int) (b Int)) Int (ite (= b 0) 0 (mod a b)))",
)


class SolverError(Exception):
    """Spawn or protocol failure — distinct from an Unknown verdict."""


class EmissionError(Exception):
    pass


# --- symbol table ---


@dataclass(frozen=True)
class SymbolTable:
    """Declared constants (name → sort s-expression) and functions
    (name → arity), as needed by a set of formulas."""

    consts: tuple[tuple[str, str], ...]
    funcs: tuple[tuple[str, int], ...]

    @staticmethod
    def from_formulas(formulas, lib: lang.Library | None = None) -> "SymbolTable":
        consts: dict[str, str] = {}
        funcs: dict[str, int] = {}
        for f in formulas:
            for name in formula.free_vars(f):
                sort = _sort_of(name, lib)
                prev = consts.setdefault(name, sort)
                if prev != sort:
                    raise EmissionError(f"{name} used at two sorts: {prev}, {sort}")
            for name, arity in formula.applies_of(f):
                prev = funcs.setdefault(name, arity)
                if prev != arity:
                    raise EmissionError(
                        f"{name} applied at two arities: {prev}, {arity}"
                    )
        for fn in funcs:
            consts.pop(fn, None)
        return SymbolTable(tuple(sorted(consts.items())), tuple(sorted(funcs.items())))

    def declarations(self) -> list[str]:
        out = [f"(declare-fun {n} ({' '.join(['Int'] * a)}) Int)" for n, a in self.funcs]
        out += [f"(declare-const {n} {s})" for n, s in self.consts]
        return sorted(out)


def _sort_of(name: str, lib: lang.Library | None) -> str:
    if lib is not None:
        base = formula.origin(name)
        try:
            decl = lib.global_decl(base)
        except KeyError:
            return SORT_SEXPR[formula.SORT_INT]
        return SORT_SEXPR[
            {
                lang.KIND_SCALAR: formula.SORT_INT,
                lang.KIND_ARRAY1: formula.SORT_ARR1,
                lang.KIND_ARRAY2: formula.SORT_ARR2,
            }[decl.kind]
        ]
    return SORT_SEXPR[formula.SORT_INT]


# --- emission ---


def _emit_int(n: int) -> str:
    return str(n) if n >= 0 else f"(- {-n})"


def _emit_term(t: Term, out: list[str]) -> None:
    if isinstance(t, TConst):
        out.append(_emit_int(t.value))
    elif isinstance(t, TVar):
        out.append(t.name)
    elif isinstance(t, TSelect):
        if len(t.index) == 1:
            out.append("(select ")
            _emit_term(t.array, out)
            out.append(" ")
            _emit_term(t.index[0], out)
            out.append(")")
        else:
            out.append("(select (select ")
            _emit_term(t.array, out)
            out.append(" ")
            _emit_term(t.index[0], out)
            out.append(") ")
            _emit_term(t.index[1], out)
            out.append(")")
    elif isinstance(t, TStore):
        if len(t.index) == 1:
            out.append("(store ")
            _emit_term(t.array, out)
            out.append(" ")
            _emit_term(t.index[0], out)
            out.append(" ")
            _emit_term(t.value, out)
            out.append(")")
        else:
            # a 2-D store rewrites one row of the curried array
            out.append("(store ")
            _emit_term(t.array, out)
            out.append(" ")
            _emit_term(t.index[0], out)
            out.append(" (store (select ")
            _emit_term(t.array, out)
            out.append(" ")
            _emit_term(t.index[0], out)
            out.append(") ")
            _emit_term(t.index[1], out)
            out.append(" ")
            _emit_term(t.value, out)
            out.append("))")
    elif isinstance(t, TApply):
        out.append(f"({t.name}")
        for a in t.args:
            out.append(" ")
            _emit_term(a, out)
        out.append(")")
    elif isinstance(t, TBin):
        op = {"+": "+", "-": "-", "*": "*", "/": "edivz", "%": "emodz"}[t.op]
        out.append(f"({op} ")
        _emit_term(t.left, out)
        out.append(" ")
        _emit_term(t.right, out)
        out.append(")")
    elif isinstance(t, TBoolInt):
        out.append("(ite ")
        _emit_formula(t.formula, out)
        out.append(" 1 0)")
    else:
        raise EmissionError(f"cannot emit term {t!r}")


def _emit_formula(f: Formula, out: list[str]) -> None:
    if isinstance(f, FTrue):
        out.append("true")
    elif isinstance(f, FFalse):
        out.append("false")
    elif isinstance(f, Cmp):
        out.append({"==": "(= ", "<": "(< ", ">": "(> "}[f.op])
        _emit_term(f.left, out)
        out.append(" ")
        _emit_term(f.right, out)
        out.append(")")
    elif isinstance(f, Not):
        out.append("(not ")
        _emit_formula(f.operand, out)
        out.append(")")
    elif isinstance(f, (And, Or)):
        out.append("(and " if isinstance(f, And) else "(or ")
        for i, g in enumerate(f.items):
            if i:
                out.append(" ")
            _emit_formula(g, out)
        out.append(")")
    elif isinstance(f, Implies):
        out.append("(=> ")
        _emit_formula(f.left, out)
        out.append(" ")
        _emit_formula(f.right, out)
        out.append(")")
    elif isinstance(f, (Exists, Forall)):
        out.append("(exists (" if isinstance(f, Exists) else "(forall (")
        out.append(
            " ".join(f"({n} {SORT_SEXPR[s]})" for n, s in f.vars)
        )
        out.append(") ")
        _emit_formula(f.body, out)
        out.append(")")
    else:
        raise EmissionError(f"cannot emit formula {f!r}")


def formula_to_sexpr(f: Formula) -> str:
    out: list[str] = []
    _emit_formula(f, out)
    return "".join(out)


def _term_uses_divmod(t: Term) -> bool:
    if isinstance(t, TBin):
        return t.op in ("/", "%") or _term_uses_divmod(t.left) or _term_uses_divmod(t.right)
    if isinstance(t, TSelect):
        return _term_uses_divmod(t.array) or any(_term_uses_divmod(i) for i in t.index)
    if isinstance(t, TStore):
        return (
            _term_uses_divmod(t.array)
            or any(_term_uses_divmod(i) for i in t.index)
            or _term_uses_divmod(t.value)
        )
    if isinstance(t, TApply):
        return any(_term_uses_divmod(a) for a in t.args)
    if isinstance(t, TBoolInt):
        return _formula_uses_divmod(t.formula)
    return False


def _formula_uses_divmod(f: Formula) -> bool:
    if isinstance(f, Cmp):
        return _term_uses_divmod(f.left) or _term_uses_divmod(f.right)
    if isinstance(f, Not):
        return _formula_uses_divmod(f.operand)
    if isinstance(f, (And, Or)):
        return any(_formula_uses_divmod(g) for g in f.items)
    if isinstance(f, Implies):
        return _formula_uses_divmod(f.left) or _formula_uses_divmod(f.right)
    if isinstance(f, (Exists, Forall)):
        return _formula_uses_divmod(f.body)
    return False


def _uses_divmod(formulas) -> bool:
    return any(_formula_uses_divmod(f) for f in formulas)


@dataclass(frozen=True)
class SmtQuery:
    """One self-contained query: logic, declarations, assertions, options."""

    logic: str
    declarations: tuple[str, ...]
    assertions: tuple[str, ...]
    options: tuple[tuple[str, str], ...] = ()
    prelude: tuple[str, ...] = ()

    def text(self) -> str:
        lines = [f"(set-option :{k} {v})" for k, v in self.options]
        lines.append(f"(set-logic {self.logic})")
        lines.extend(self.prelude)
        lines.extend(self.declarations)
        lines.extend(f"(assert {a})" for a in self.assertions)
        lines.append("(check-sat)")
        return "\n".join(lines) + "\n"


def build_query(
    formulas,
    lib: lang.Library | None = None,
    logic: str = "ALL",
    timeout_ms: int | None = None,
    produce_models: bool = False,
) -> SmtQuery:
    """Assemble the deterministic query asserting each formula in order."""
    formulas = list(formulas)
    table = SymbolTable.from_formulas(formulas, lib)
    options: list[tuple[str, str]] = []
    if produce_models:
        options.append(("produce-models", "true"))
    if timeout_ms is not None:
        options.append(("timeout", str(int(timeout_ms))))
    return SmtQuery(
        logic=logic,
        declarations=tuple(table.declarations()),
        assertions=tuple(formula_to_sexpr(f) for f in formulas),
        options=tuple(options),
        prelude=_PRELUDE_DIV if _uses_divmod(formulas) else (),
    )


def emit_smt2(
    f: Formula | list,
    table: SymbolTable | lang.Library | None = None,
    logic: str = "ALL",
) -> str:
    """Render one or more formulas as a complete SMT-LIB2 query text."""
    formulas = f if isinstance(f, (list, tuple)) else [f]
    lib = table if isinstance(table, lang.Library) else None
    if isinstance(table, SymbolTable):
        decls = tuple(table.declarations())
        free = set()
        for g in formulas:
            free |= formula.free_vars(g)
            free |= {name for name, _ in formula.applies_of(g)}
        declared = {n for n, _ in table.consts} | {n for n, _ in table.funcs}
        missing = free - declared
        if missing:
            raise EmissionError(f"undeclared symbols: {sorted(missing)}")
        q = SmtQuery(
            logic=logic,
            declarations=decls,
            assertions=tuple(formula_to_sexpr(g) for g in formulas),
            prelude=_PRELUDE_DIV if _uses_divmod(formulas) else (),
        )
        return q.text()
    return build_query(formulas, lib, logic=logic).text()


# --- solver answers and models ---


@dataclass(frozen=True)
class FuncInterp:
    """Finite table + default, parsed from an ite-chain define-fun."""

    table: tuple[tuple[tuple[int, ...], int], ...]
    default: int | None
    opaque: bool = False

    def lookup(self, args: tuple[int, ...]) -> int | None:
        for k, v in self.table:
            if k == args:
                return v
        return self.default


@dataclass(frozen=True)
class Model:
    consts: tuple[tuple[str, object], ...] = ()
    funcs: tuple[tuple[str, FuncInterp], ...] = ()
    opaque: bool = False

    def const(self, name: str):
        for n, v in self.consts:
            if n == name:
                return v
        return None

    def func(self, name: str) -> FuncInterp | None:
        for n, v in self.funcs:
            if n == name:
                return v
        return None


@dataclass(frozen=True)
class SolverAnswer:
    kind: str  # sat | unsat | unknown | timeout
    model: Model | None = None
    reason: str = ""
    time_s: float = 0.0

    @property
    def is_sat(self) -> bool:
        return self.kind == "sat"

    @property
    def is_unsat(self) -> bool:
        return self.kind == "unsat"


# --- s-expression reading (for models and values) ---


def _sexpr_tokens(text: str):
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            yield c
            i += 1
        elif c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            yield text[i : j + 1]
            i = j + 1
        elif c == "|":
            j = i + 1
            while j < n and text[j] != "|":
                j += 1
            yield text[i : j + 1]
            i = j + 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in '()";|':
                j += 1
            yield text[i:j]
            i = j


def parse_sexprs(text: str) -> list:
    """All top-level s-expressions; atoms as strings, lists as lists."""
    stack: list[list] = [[]]
    for tok in _sexpr_tokens(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise SolverError("unbalanced solver output")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise SolverError("unbalanced solver output")
    return stack[0]


def _sexpr_int(node) -> int | None:
    if isinstance(node, str):
        try:
            return int(node)
        except ValueError:
            return None
    if (
        isinstance(node, list)
        and len(node) == 2
        and node[0] == "-"
        and isinstance(node[1], str)
    ):
        try:
            return -int(node[1])
        except ValueError:
            return None
    return None


def _parse_ite_chain(params: list[str], body) -> tuple[list, int | None] | None:
    """Flatten nested (ite (= p c) v rest) into table rows + default."""
    rows: list[tuple[tuple[int, ...], int]] = []
    node = body
    while True:
        v = _sexpr_int(node)
        if v is not None:
            return rows, v
        if not (isinstance(node, list) and len(node) == 4 and node[0] == "ite"):
            return None
        cond, val, rest = node[1], node[2], node[3]
        value = _sexpr_int(val)
        if value is None:
            return None
        eqs = []
        if isinstance(cond, list) and cond and cond[0] == "and":
            eqs = cond[1:]
        else:
            eqs = [cond]
        key: dict[str, int] = {}
        for eqn in eqs:
            if not (isinstance(eqn, list) and len(eqn) == 3 and eqn[0] == "="):
                return None
            a, b = eqn[1], eqn[2]
            if isinstance(a, str) and a in params and _sexpr_int(b) is not None:
                key[a] = _sexpr_int(b)
            elif isinstance(b, str) and b in params and _sexpr_int(a) is not None:
                key[b] = _sexpr_int(a)
            else:
                return None
        if set(key) != set(params):
            return None
        rows.append((tuple(key[p] for p in params), value))
        node = rest


def parse_model(text: str) -> Model:
    """Parse (get-model) output; unrecognized shapes degrade to opaque."""
    try:
        top = parse_sexprs(text)
    except SolverError:
        return Model(opaque=True)
    if not top:
        return Model(opaque=True)
    items = top[0]
    if not isinstance(items, list):
        return Model(opaque=True)
    if items and items[0] == "model":
        items = items[1:]
    consts: list[tuple[str, object]] = []
    funcs: list[tuple[str, FuncInterp]] = []
    any_opaque = False
    for item in items:
        if not (isinstance(item, list) and len(item) >= 5 and item[0] == "define-fun"):
            any_opaque = True
            continue
        name, params, _sort, body = item[1], item[2], item[3], item[4]
        if not isinstance(params, list):
            any_opaque = True
            continue
        if not params:
            v = _sexpr_int(body)
            if v is not None:
                consts.append((name, v))
            elif body in ("true", "false"):
                consts.append((name, body == "true"))
            else:
                consts.append((name, None))
                any_opaque = True
            continue
        pnames = [p[0] for p in params if isinstance(p, list) and p]
        parsed = _parse_ite_chain(pnames, body)
        if parsed is None:
            funcs.append((name, FuncInterp((), None, opaque=True)))
            any_opaque = True
        else:
            rows, default = parsed
            funcs.append((name, FuncInterp(tuple(rows), default)))
    return Model(tuple(consts), tuple(funcs), opaque=any_opaque)


def parse_values(text: str) -> dict[str, int]:
    """Parse (get-value (…)) output into name → int."""
    out: dict[str, int] = {}
    try:
        top = parse_sexprs(text)
    except SolverError:
        return out
    if not top or not isinstance(top[0], list):
        return out
    for pair in top[0]:
        if isinstance(pair, list) and len(pair) == 2 and isinstance(pair[0], str):
            v = _sexpr_int(pair[1])
            if v is not None:
                out[pair[0]] = v
    return out


# --- solver processes ---


def _package_root() -> Path:
    return Path(__file__).resolve().parents[2]


def default_wrapper() -> Path:
    return _package_root() / "tools" / "z3wasm" / "z3pipe.mjs"


def resolve_solver(path: str | None = None, args: tuple[str, ...] = ()) -> tuple[str, ...]:
    """Build the solver command line: explicit path, OPCHECK_SOLVER, a
    native z3 on PATH, then the bundled WebAssembly wrapper."""
    chosen = path or os.environ.get("OPCHECK_SOLVER")
    if chosen:
        cmd = (chosen,) + tuple(args)
        if chosen.endswith((".mjs", ".js")):
            node = shutil.which("node")
            if node is None:
                raise SolverError("a JavaScript solver wrapper needs `node` on PATH")
            cmd = (node,) + cmd
        return cmd
    native = shutil.which("z3")
    if native:
        return (native, "-in") + tuple(args)
    wrapper = default_wrapper()
    node = shutil.which("node")
    if node and wrapper.exists():
        if not (wrapper.parent / "node_modules").exists():
            raise SolverError(
                f"solver wrapper present but not installed; run: npm install --prefix {wrapper.parent}"
            )
        return (node, str(wrapper)) + tuple(args)
    raise SolverError(
        "no SMT solver found: install z3, set OPCHECK_SOLVER, or run "
        f"npm install --prefix {wrapper.parent}"
    )


@dataclass
class SolverConfig:
    path: str | None = None
    args: tuple[str, ...] = ()
    timeout_s: float = 10.0
    logic: str = "ALL"
    want_model: bool = False
    value_names: tuple[str, ...] = ()
    emit_dir: str | None = None

    def command(self) -> tuple[str, ...]:
        return resolve_solver(self.path, self.args)


class SolverProcess:
    """One long-lived solver subprocess; queries framed by reset/echo."""

    def __init__(self, command: tuple[str, ...]):
        self.command = command
        self.proc: subprocess.Popen | None = None
        self.lines: queue.Queue = queue.Queue()
        self.counter = 0
        self.lock = threading.Lock()

    def _spawn(self) -> None:
        try:
            self.proc = subprocess.Popen(
                list(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise SolverError(f"cannot start solver {self.command}: {e}") from e
        self.lines = queue.Queue()
        t = threading.Thread(target=self._reader, args=(self.proc,), daemon=True)
        t.start()
        # first answer can be slow (WebAssembly compile); generous grace
        self._send('(echo "--ready--")\n')
        self._collect("--ready--", deadline=time.monotonic() + 120.0)

    def _reader(self, proc: subprocess.Popen) -> None:
        for line in proc.stdout:
            self.lines.put(line.rstrip("\n"))
        self.lines.put(None)

    def _send(self, text: str) -> None:
        assert self.proc is not None
        try:
            self.proc.stdin.write(text)
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise SolverError(f"solver pipe failed: {e}") from e

    def _collect(self, sentinel: str, deadline: float) -> list[str]:
        out: list[str] = []
        while True:
            remain = deadline - time.monotonic()
            if remain <= 0:
                raise TimeoutError
            try:
                line = self.lines.get(timeout=min(remain, 0.5))
            except queue.Empty:
                continue
            if line is None:
                raise SolverError(
                    f"solver exited unexpectedly (last output: {out[-3:] if out else 'none'})"
                )
            if line.strip() == sentinel:
                return out
            out.append(line)

    def kill(self) -> None:
        if self.proc is not None:
            try:
                self.proc.kill()
                self.proc.wait(timeout=5)
            except Exception:
                pass
        self.proc = None

    def ensure_ready(self) -> None:
        """Spawn (or respawn) now, so startup cost never counts against a
        query's wall-clock budget."""
        if self.proc is None or self.proc.poll() is not None:
            self.kill()
            self._spawn()

    def batch(self, script: str, deadline: float) -> list[str]:
        """Send commands, wait for the sentinel, return output lines."""
        self.ensure_ready()
        self.counter += 1
        sentinel = f"--opcheck-{self.counter}--"
        self._send(script + f'(echo "{sentinel}")\n')
        return self._collect(sentinel, deadline)


_PROCESSES: dict[tuple[str, ...], SolverProcess] = {}
_PROCESSES_LOCK = threading.Lock()


def _process_for(command: tuple[str, ...]) -> SolverProcess:
    with _PROCESSES_LOCK:
        p = _PROCESSES.get(command)
        if p is None:
            p = SolverProcess(command)
            _PROCESSES[command] = p
        return p


def shutdown_solvers() -> None:
    with _PROCESSES_LOCK:
        for p in _PROCESSES.values():
            p.kill()
        _PROCESSES.clear()


def check_sat(q: SmtQuery, cfg: SolverConfig) -> SolverAnswer:
    """Run one isolated query; Sat may carry a parsed model."""
    command = cfg.command()
    driver = _process_for(command)
    script = "(reset)\n" + q.text()
    with driver.lock:
        driver.ensure_ready()
        started = time.monotonic()
        wall = cfg.timeout_s * 1.5 + 5.0
        try:
            lines = driver.batch(script, started + wall)
        except TimeoutError:
            driver.kill()
            return SolverAnswer("timeout", reason="wall clock", time_s=time.monotonic() - started)
        verdict = None
        extra: list[str] = []
        for ln in lines:
            s = ln.strip()
            if s in ("sat", "unsat", "unknown"):
                verdict = s
            elif s:
                extra.append(s)
        if verdict is None:
            raise SolverError(f"no verdict in solver output: {extra[:5]}")
        elapsed = time.monotonic() - started
        if verdict == "unknown":
            reason = ""
            try:
                out = driver.batch("(get-info :reason-unknown)\n", time.monotonic() + 10.0)
                reason = " ".join(out)
            except (TimeoutError, SolverError):
                driver.kill()
            if "timeout" in reason or "canceled" in reason or "resource" in reason:
                return SolverAnswer("timeout", reason=reason, time_s=elapsed)
            return SolverAnswer("unknown", reason=reason, time_s=elapsed)
        if verdict == "unsat":
            return SolverAnswer("unsat", time_s=elapsed)
        model = None
        if cfg.want_model or cfg.value_names:
            follow = ""
            if cfg.want_model:
                follow += "(get-model)\n"
            if cfg.value_names:
                follow += f"(get-value ({' '.join(cfg.value_names)}))\n"
            try:
                out = driver.batch(follow, time.monotonic() + max(10.0, cfg.timeout_s))
            except (TimeoutError, SolverError):
                driver.kill()
                out = []
            text = "\n".join(out)
            model = parse_model(text) if cfg.want_model else Model()
            if cfg.value_names:
                vals = parse_values(text if not cfg.want_model else _last_sexpr_text(out))
                merged = dict(model.consts)
                for k, v in vals.items():
                    merged[k] = v
                model = Model(tuple(sorted(merged.items())), model.funcs, model.opaque)
        return SolverAnswer("sat", model=model, time_s=elapsed)


def _last_sexpr_text(lines: list[str]) -> str:
    """The trailing balanced s-expression in a line batch (the get-value
    answer when a model precedes it)."""
    depth = 0
    start = len(lines)
    for i in range(len(lines) - 1, -1, -1):
        depth += lines[i].count(")") - lines[i].count("(")
        if depth <= 0:
            start = i
            break
    return "\n".join(lines[start:])


# --- high-level helpers ---


class QueryRunner:
    """Config-bound runner that can also mirror each query to a directory."""

    def __init__(self, cfg: SolverConfig, lib: lang.Library | None = None):
        self.cfg = cfg
        self.lib = lib
        self.emitted = 0

    def ask(self, formulas, want_model: bool = False, value_names: tuple[str, ...] = (),
            label: str = "query") -> SolverAnswer:
        q = build_query(
            formulas,
            self.lib,
            logic=self.cfg.logic,
            timeout_ms=int(self.cfg.timeout_s * 1000),
            produce_models=want_model or bool(value_names),
        )
        if self.cfg.emit_dir:
            path = Path(self.cfg.emit_dir)
            path.mkdir(parents=True, exist_ok=True)
            self.emitted += 1
            (path / f"{self.emitted:03d}-{label}.smt2").write_text(q.text())
        cfg = SolverConfig(
            path=self.cfg.path,
            args=self.cfg.args,
            timeout_s=self.cfg.timeout_s,
            logic=self.cfg.logic,
            want_model=want_model,
            value_names=value_names,
            emit_dir=self.cfg.emit_dir,
        )
        return check_sat(q, cfg)

    def decide(self, f: Formula) -> str:
        """'sat' | 'unsat' | 'unknown' — the callback shape used by the
        formula simplifier and the invariant generator."""
        a = self.ask([f])
        return a.kind if a.kind in ("sat", "unsat") else "unknown"
