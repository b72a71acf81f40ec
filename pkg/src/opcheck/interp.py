"""Small-step reference interpreter and randomized purity oracle.

The machine runs validated source libraries (never transformed bodies):
a configuration is a stack of (continuation, local-environment) frames
over a single global environment.  `step` applies exactly one of the
transition rules —

    seq                (S1; S2) · K          →  S1 · S2 · K
    assgn              x := e                →  ρ_ℓ[x ↦ v]   (or ρ_g)
    if-true/if-false   if (e) {A} else {B}   →  A or B pushed
    call               x := q(ē)             →  new frame, params bound
    return             return y              →  pop, caller's x bound
    top-level-call     empty stack + chosen (q, v̄)  →  one fresh frame
    top-level-return   return y on the last frame   →  value observed

Expression evaluation (shared total semantics: Euclidean division with
zero divisors mapping to zero, comparisons and logic yielding 0/1) is
one atomic part of a step; expressions are pre-compiled to closures per
procedure so stepping stays cheap.

The purity oracle drives this machine over seeded random call
sequences, folding every completed call — nested ones included — into a
per-procedure input/output table and reporting the first input mapped
to two distinct outputs.  Calls whose step budget runs out mark their
sequence skipped.  Because the machine is deterministic, a call entered
with the same procedure, arguments, and global state as one that
already exhausted its budget must repeat it exactly, so such calls are
skipped immediately rather than re-run; that shortcut only suppresses
reruns of provably identical non-terminating descents.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import formula, lang
from .lang import (
    ArrVal,
    Assign,
    Call,
    Const,
    If,
    Library,
    Return,
    Seq,
    ediv,
    emod,
)


class InterpError(Exception):
    pass


# --- expression compilation ---
#
# A compiled expression is a closure (locals_dict, globals_dict) -> int.
# Whether a name is local is fixed per procedure, so the lookup side is
# decided at compile time.


def _compile_expr(e: lang.Expr, local_names: frozenset[str]):
    if isinstance(e, Const):
        v = e.value
        return lambda rl, rg: v
    if isinstance(e, lang.Var):
        name = e.name
        if name in local_names:
            return lambda rl, rg: rl[name]
        return lambda rl, rg: rg[name]
    if isinstance(e, lang.ArrayRead):
        name = e.name
        idx = tuple(_compile_expr(i, local_names) for i in e.index)
        if len(idx) == 1:
            i0 = idx[0]
            return lambda rl, rg: rg[name].get((i0(rl, rg),))
        i0, i1 = idx
        return lambda rl, rg: rg[name].get((i0(rl, rg), i1(rl, rg)))
    if isinstance(e, lang.Unary):
        sub = _compile_expr(e.operand, local_names)
        return lambda rl, rg: 0 if sub(rl, rg) != 0 else 1
    if isinstance(e, lang.Binary):
        a = _compile_expr(e.left, local_names)
        b = _compile_expr(e.right, local_names)
        op = e.op
        if op == "+":
            return lambda rl, rg: a(rl, rg) + b(rl, rg)
        if op == "-":
            return lambda rl, rg: a(rl, rg) - b(rl, rg)
        if op == "*":
            return lambda rl, rg: a(rl, rg) * b(rl, rg)
        if op == "/":
            return lambda rl, rg: ediv(a(rl, rg), b(rl, rg))
        if op == "%":
            return lambda rl, rg: emod(a(rl, rg), b(rl, rg))
        if op == "==":
            return lambda rl, rg: 1 if a(rl, rg) == b(rl, rg) else 0
        if op == "<":
            return lambda rl, rg: 1 if a(rl, rg) < b(rl, rg) else 0
        if op == ">":
            return lambda rl, rg: 1 if a(rl, rg) > b(rl, rg) else 0
        if op == "&&":
            return lambda rl, rg: 1 if a(rl, rg) != 0 and b(rl, rg) != 0 else 0
        if op == "||":
            return lambda rl, rg: 1 if a(rl, rg) != 0 or b(rl, rg) != 0 else 0
        raise InterpError(f"unknown operator {op!r}")
    raise InterpError(f"not executable: {e!r}")


class _CompiledProc:
    __slots__ = ("proc", "locals", "exprs")

    def __init__(self, proc: lang.Procedure, global_names: frozenset[str]):
        self.proc = proc
        self.locals = frozenset(proc.locals_of(set(global_names))) | frozenset(proc.params)
        self.exprs: dict[int, object] = {}

    def expr(self, e: lang.Expr):
        key = id(e)
        fn = self.exprs.get(key)
        if fn is None:
            fn = _compile_expr(e, self.locals)
            self.exprs[key] = fn
        return fn


# --- traces ---


@dataclass
class TraceRecord:
    """One completed (or in-flight) call: arguments, result, snapshots."""

    proc: str
    args: tuple[int, ...]
    globals_before: dict[str, object] | None
    globals_after: dict[str, object] | None = None
    retval: int | None = None
    children: list["TraceRecord"] = field(default_factory=list)

    def walk(self):
        """This record and all nested ones, in call order."""
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass
class CallLog:
    """Completed top-level traces of one client run."""

    records: tuple[TraceRecord, ...]
    returns: tuple[int, ...]
    steps: int

    def entries(self):
        """(procedure, args, return value) for every call, nested included."""
        for r in self.records:
            for rec in r.walk():
                yield rec.proc, rec.args, rec.retval

    def io_table(self) -> dict[tuple[str, tuple[int, ...]], int]:
        out: dict[tuple[str, tuple[int, ...]], int] = {}
        for proc, args, ret in self.entries():
            out.setdefault((proc, args), ret)
        return out


@dataclass
class FuelExhausted:
    """A call ran out of steps; the partial log covers the completed prefix."""

    partial: CallLog
    failed_index: int
    proc: str
    args: tuple[int, ...]


# --- the machine ---


class Frame:
    __slots__ = ("cont", "env", "ret_target", "record", "proc", "args", "entry_fp")

    def __init__(self, cont, env, ret_target, record, proc, args, entry_fp):
        self.cont = cont
        self.env = env
        self.ret_target = ret_target
        self.record = record
        self.proc = proc
        self.args = args
        self.entry_fp = entry_fp


class KnownDivergent(Exception):
    """A call repeats the entry state of a run that already exhausted fuel."""

    def __init__(self, proc: str, args: tuple[int, ...]):
        super().__init__(f"{proc}{args} re-enters a non-terminating state")
        self.proc = proc
        self.args = args


def initial_globals(lib: Library) -> dict[str, object]:
    out: dict[str, object] = {}
    for g in lib.globals:
        if g.kind == lang.KIND_SCALAR:
            out[g.name] = g.init
        else:
            out[g.name] = ArrVal(default=g.init)
    return out


class RuntimeState:
    """Machine configuration: frame stack over one global environment."""

    def __init__(
        self,
        lib: Library,
        record_snapshots: bool = True,
        divergence_cache: set | None = None,
    ):
        self.lib = lib
        self.globals = initial_globals(lib)
        self.stack: list[Frame] = []
        self.log: list[TraceRecord] = []
        self.last_return: int | None = None
        self.steps = 0
        self.record_snapshots = record_snapshots
        self.divergence_cache = divergence_cache
        self._global_names = tuple(g.name for g in lib.globals)
        self._compiled = {
            p.name: _CompiledProc(p, frozenset(self._global_names))
            for p in lib.procedures
        }

    def snapshot(self) -> dict[str, object]:
        return dict(self.globals)

    def fingerprint(self) -> tuple:
        rg = self.globals
        return tuple(
            v.canon() if isinstance(v := rg[n], ArrVal) else v
            for n in self._global_names
        )

    def _push_call(self, callee: str, args: tuple[int, ...], ret_target: str | None):
        comp = self._compiled.get(callee)
        if comp is None:
            raise InterpError(f"no procedure named {callee!r}")
        proc = comp.proc
        if len(args) != len(proc.params):
            raise InterpError(
                f"{callee} expects {len(proc.params)} argument(s), got {len(args)}"
            )
        entry_fp = None
        if self.divergence_cache is not None:
            entry_fp = self.fingerprint()
            if (callee, args, entry_fp) in self.divergence_cache:
                raise KnownDivergent(callee, args)
        record = TraceRecord(
            callee, args, self.snapshot() if self.record_snapshots else None
        )
        parent = self.stack[-1] if self.stack else None
        if parent is not None and parent.record is not None:
            parent.record.children.append(record)
        frame = Frame([proc.body], dict(zip(proc.params, args)), ret_target, record, callee, args, entry_fp)
        self.stack.append(frame)


def step(state: RuntimeState, pending_arg=None) -> RuntimeState:
    """Apply exactly one transition rule; returns the mutated state.

    `pending_arg` must be given exactly when the stack is empty: it is
    the client's chosen next call, as (procedure name, argument tuple) —
    or a bare argument tuple when the library has a single procedure.
    """
    state.steps += 1
    if not state.stack:
        if pending_arg is None:
            raise InterpError("empty stack needs a pending top-level call")
        if isinstance(pending_arg, tuple) and pending_arg and isinstance(pending_arg[0], str):
            callee, args = pending_arg
        else:
            procs = state.lib.procedures
            if len(procs) != 1:
                raise InterpError("bare argument tuple is ambiguous: name the procedure")
            callee, args = procs[0].name, tuple(pending_arg)
        state._push_call(callee, tuple(args), None)
        return state
    if pending_arg is not None:
        raise InterpError("pending call supplied while the stack is non-empty")

    frame = state.stack[-1]
    comp = state._compiled[frame.proc]
    s = frame.cont.pop()

    if type(s) is Seq:
        frame.cont.append(s.second)
        frame.cont.append(s.first)
        return state
    if type(s) is Assign:
        target = s.target
        val = comp.expr(s.rhs)(frame.env, state.globals)
        if not target.index:
            if target.name in comp.locals:
                frame.env[target.name] = val
            else:
                state.globals[target.name] = val
        else:
            idx = tuple(comp.expr(i)(frame.env, state.globals) for i in target.index)
            state.globals[target.name] = state.globals[target.name].set(idx, val)
        return state
    if type(s) is If:
        if comp.expr(s.cond)(frame.env, state.globals) != 0:
            frame.cont.append(s.then)
        else:
            frame.cont.append(s.els)
        return state
    if type(s) is Call:
        args = tuple(comp.expr(a)(frame.env, state.globals) for a in s.args)
        state._push_call(s.callee, args, s.lhs)
        return state
    if type(s) is Return:
        val = frame.env[s.var]
        state.stack.pop()
        if frame.record is not None:
            frame.record.retval = val
            if state.record_snapshots:
                frame.record.globals_after = state.snapshot()
        if state.stack:
            parent = state.stack[-1]
            tgt = frame.ret_target
            if tgt in state._compiled[parent.proc].locals:
                parent.env[tgt] = val
            else:
                state.globals[tgt] = val
        else:
            state.last_return = val
            if frame.record is not None:
                state.log.append(frame.record)
        return state
    raise InterpError(f"statement form not executable here: {s!r}")


def _drive(state: RuntimeState, budget: int) -> int:
    """Step until the stack empties or the budget runs out; returns the
    budget left.  Rule-for-rule identical to `step`, with the dispatch
    inlined so fuel-heavy runs stay cheap (a differential test holds the
    two in lockstep)."""
    stack = state.stack
    rg = state.globals
    compiled = state._compiled
    while stack and budget > 0:
        budget -= 1
        state.steps += 1
        frame = stack[-1]
        comp = compiled[frame.proc]
        cont = frame.cont
        s = cont.pop()
        t = type(s)
        if t is Seq:
            cont.append(s.second)
            cont.append(s.first)
        elif t is If:
            if comp.expr(s.cond)(frame.env, rg) != 0:
                cont.append(s.then)
            else:
                cont.append(s.els)
        elif t is Assign:
            target = s.target
            val = comp.expr(s.rhs)(frame.env, rg)
            if not target.index:
                if target.name in comp.locals:
                    frame.env[target.name] = val
                else:
                    rg[target.name] = val
            else:
                idx = tuple(comp.expr(i)(frame.env, rg) for i in target.index)
                rg[target.name] = rg[target.name].set(idx, val)
        elif t is Call:
            args = tuple(comp.expr(a)(frame.env, rg) for a in s.args)
            state._push_call(s.callee, args, s.lhs)
        elif t is Return:
            val = frame.env[s.var]
            stack.pop()
            if frame.record is not None:
                frame.record.retval = val
                if state.record_snapshots:
                    frame.record.globals_after = state.snapshot()
            if stack:
                parent = stack[-1]
                tgt = frame.ret_target
                if tgt in compiled[parent.proc].locals:
                    parent.env[tgt] = val
                else:
                    rg[tgt] = val
            else:
                state.last_return = val
                if frame.record is not None:
                    state.log.append(frame.record)
        else:
            raise InterpError(f"statement form not executable here: {s!r}")
    return budget


def _mark_divergent(state: RuntimeState, cap: int = 64) -> None:
    """Every call still on the stack repeats from its entry state; cache it."""
    if state.divergence_cache is None:
        return
    for frame in state.stack[:cap]:
        if frame.entry_fp is not None:
            state.divergence_cache.add((frame.proc, frame.args, frame.entry_fp))


def run_call(
    lib: Library,
    proc: str,
    args: tuple[int, ...],
    globals_map: dict[str, object] | None = None,
    fuel: int = 10**6,
    divergence_cache: set | None = None,
):
    """One call executed from a chosen global state.

    `globals_map` replaces the declared initial values (missing names
    keep their declared defaults); array values must be ArrVal.  Returns
    the completed TraceRecord (snapshots on), or None when the call does
    not finish within `fuel` steps.  A caller-held `divergence_cache`
    carries fuel-exhaustion entry states across invocations, so known
    non-terminating entries return None without burning fuel again.
    """
    if fuel <= 0:
        raise InterpError("fuel must be positive")
    state = RuntimeState(lib, record_snapshots=True, divergence_cache=divergence_cache)
    if globals_map:
        state.globals.update(globals_map)
    try:
        step(state, pending_arg=(proc, args))
        _drive(state, fuel - 1)
    except KnownDivergent:
        return None
    if state.stack:
        _mark_divergent(state)
        return None
    return state.log[0]


def run_client(lib: Library, calls, fuel: int = 10**6, record_snapshots: bool = True):
    """Run a sequence of top-level calls against one fresh instance.

    Globals are initialized once; each call gets its own step budget of
    `fuel`.  Returns the CallLog, or FuelExhausted with the partial log
    when a call fails to finish.
    """
    if fuel <= 0:
        raise InterpError("fuel must be positive")
    state = RuntimeState(lib, record_snapshots=record_snapshots)
    returns: list[int] = []
    for i, c in enumerate(calls):
        step(state, pending_arg=c)
        _drive(state, fuel - 1)
        if state.stack:
            frame0 = state.stack[0]
            return FuelExhausted(
                CallLog(tuple(state.log), tuple(returns), state.steps),
                i,
                frame0.proc,
                frame0.args,
            )
        returns.append(state.last_return)
    return CallLog(tuple(state.log), tuple(returns), state.steps)


# --- randomized purity oracle ---


@dataclass(frozen=True)
class Witness:
    """One input observed mapping to two distinct outputs."""

    proc: str
    args: tuple[int, ...]
    r1: int
    r2: int
    sequence1: tuple  # the call sequences that produced each observation
    sequence2: tuple

    def as_dict(self) -> dict:
        return {
            "witness": {
                "procedure": self.proc,
                "args": list(self.args),
                "result_1": self.r1,
                "result_2": self.r2,
                "sequence_1": [[p, list(a)] for p, a in self.sequence1],
                "sequence_2": [[p, list(a)] for p, a in self.sequence2],
            }
        }


@dataclass(frozen=True)
class NoWitnessFound:
    trials: int
    skipped: int
    distinct_inputs: int
    io_table: dict = field(compare=False, hash=False, repr=False, default=None)

    def as_dict(self) -> dict:
        return {
            "witness": None,
            "trials": self.trials,
            "skipped": self.skipped,
            "distinct_inputs": self.distinct_inputs,
        }


def _random_sequence(rng: random.Random, lib: Library, max_arg: int) -> list[tuple[str, tuple[int, ...]]]:
    """One random call sequence; each call has a 50% chance of repeating
    an earlier call of the sequence (purity witnesses need repeats)."""
    procs = lib.procedures
    length = rng.randint(1, 6)
    calls: list[tuple[str, tuple[int, ...]]] = []
    for _ in range(length):
        if calls and rng.random() < 0.5:
            calls.append(rng.choice(calls))
        else:
            p = procs[rng.randrange(len(procs))]
            args = tuple(rng.randint(-max_arg, max_arg) for _ in p.params)
            calls.append((p.name, args))
    return calls


def oracle_purity(
    lib: Library,
    trials: int = 10000,
    max_arg: int = 12,
    seed: int = 0,
    fuel: int = 10**6,
):
    """Hunt for an input with two distinct observed outputs.

    Runs `trials` seeded random call sequences, each against a fresh
    instance, folding every completed call into one input/output table.
    Deterministic given the seed.  Sequences that exhaust fuel are
    skipped and counted; a witness is returned at first discovery.
    """
    if trials < 1:
        raise InterpError("trials must be >= 1")
    rng = random.Random(seed)
    io: dict[tuple[str, tuple[int, ...]], tuple[int, tuple]] = {}
    divergence_cache: set = set()
    skipped = 0

    for _ in range(trials):
        seq = _random_sequence(rng, lib, max_arg)
        seq_t = tuple(seq)
        state = RuntimeState(lib, record_snapshots=False, divergence_cache=divergence_cache)
        ok = True
        try:
            for c in seq:
                step(state, pending_arg=c)
                _drive(state, fuel - 1)
                if state.stack:
                    _mark_divergent(state)
                    ok = False
                    break
        except KnownDivergent:
            _mark_divergent(state)
            ok = False
        if not ok:
            skipped += 1
            continue
        for rec in state.log:
            for r in rec.walk():
                key = (r.proc, r.args)
                prev = io.get(key)
                if prev is None:
                    io[key] = (r.retval, seq_t)
                elif prev[0] != r.retval:
                    return Witness(
                        r.proc, r.args, prev[0], r.retval, prev[1], seq_t
                    )
    table = {k: v[0] for k, v in io.items()}
    return NoWitnessFound(trials, skipped, len(io), table)


def reachable_states(
    lib: Library,
    seed: int = 0,
    warm_calls: int = 40,
    max_arg: int = 8,
    fuel: int = 200_000,
) -> list[dict[str, object]]:
    """Distinct global states visited by one seeded random client run.

    Harvests the entry and exit snapshot of every trace (nested included)
    and deduplicates by value, preserving first-seen order.  Useful as a
    pool of realistic, invariant-respecting environments.
    """
    rng = random.Random(seed)
    calls = []
    for _ in range(warm_calls):
        p = rng.choice(lib.procedures)
        calls.append((p.name, tuple(rng.randint(-max_arg, max_arg) for _ in p.params)))
    log = run_client(lib, calls, fuel=fuel, record_snapshots=True)
    if isinstance(log, FuelExhausted):
        log = log.partial
    pool: list[dict[str, object]] = []
    seen: set[tuple] = set()
    names = tuple(g.name for g in lib.globals)
    for rec in log.records:
        for r in rec.walk():
            for snap in (r.globals_before, r.globals_after):
                if snap is None:
                    continue
                fp = tuple(
                    v.canon() if isinstance(v, ArrVal) else v
                    for v in (snap[n] for n in names)
                )
                if fp not in seen:
                    seen.add(fp)
                    pool.append(dict(snap))
    return pool


# --- runtime invariant diagnostics ---


def runtime_invariant_diagnostics(
    lib: Library,
    log: CallLog,
    io_table: dict[tuple[str, tuple[int, ...]], int] | None = None,
) -> list[str]:
    """Check each trace's entry and exit snapshot against its invariant.

    Procedure symbols inside invariants are interpreted by the supplied
    input/output table (default: the log's own); applications outside
    the table make that single check inconclusive, not a violation.
    Returns human-readable diagnostics, empty when nothing failed.
    """
    if io_table is None:
        io_table = log.io_table()

    def funcs(name, args):
        return io_table.get((name, tuple(args)))

    out: list[str] = []
    for record in log.records:
        for rec in record.walk():
            proc = lib.procedure(rec.proc)
            if proc.invariant is None:
                continue
            for side, snap in (("entry", rec.globals_before), ("exit", rec.globals_after)):
                if snap is None:
                    continue
                try:
                    holds = formula.eval_formula(proc.invariant, dict(snap), funcs=funcs)
                except formula.EvalUndef:
                    continue
                if not holds:
                    out.append(
                        f"invariant of {rec.proc} false at {side} of call "
                        f"{rec.proc}{rec.args} (globals {snap})"
                    )
    return out
