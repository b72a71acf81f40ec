"""Strongest-postcondition and verification-condition calculus.

Over a transformed body the rules are:

    POST(pre, x := e)      = (∃x. pre) ∧ (x = e)      [x not read by e]
    POST(pre, a[i] := e)   = (∃a. pre) ∧ (a = store(a_old, i_old, e_old))
    POST(pre, havoc(x))    = ∃x. pre
    POST(pre, assume e)    = pre ∧ e
    POST(pre, assert e)    = pre
    POST(pre, S1; S2)      = POST(POST(pre, S1), S2)
    POST(pre, if e S1 S2)  = POST(pre ∧ e, S1) ∨ POST(pre ∧ ¬e, S2)

    VC(pre, assert e)      = pre ⇒ e
    VC(pre, S1; S2)        = VC(pre, S1) ∧ VC(POST(pre, S1), S2)
    VC(pre, if e S1 S2)    = VC(pre ∧ e, S1) ∧ VC(pre ∧ ¬e, S2)
    VC(pre, S)             = true otherwise

Each introduced existential is immediately given a fresh ``x!k`` name
(the old value of x), so binders never shadow one another and lifting
them to a prefix is purely structural.  Existentials whose variable is
not mentioned are dropped eagerly; no deeper simplification is applied,
keeping the output a faithful calculus run.

The full result conjoins ``init(P) ⇒ inv`` into the verification
condition: the initial state must satisfy the candidate invariant too.

Alongside the formulas, `postvc` records one `Path` per root-to-exit
route with a replayable event list (branches taken, snapshots made,
havocs and assumes passed).  `execute_path` drives those events over a
concrete entry environment plus the call results of a real run, landing
in a total valuation of the disjunct's variables — the bridge used to
test the calculus against the interpreter.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import formula, lang
from .formula import (
    Exists,
    Formula,
    Implies,
    NameGen,
    TConst,
    TStore,
    TVar,
    conj,
    disj,
    eq,
    expr_to_formula,
    expr_to_term,
    neg,
    term_subst,
)
from .lang import ArrVal, Assert, Assign, Assume, Call, Havoc, If, Library, Return, Seq, Stmt
from .transform import TransformedBody, init_formula, transform_body


@dataclass(frozen=True)
class PathEvent:
    kind: str  # branch | assign | assign_cell | havoc | assume | assert
    data: tuple


@dataclass(frozen=True)
class Path:
    condition: Formula  # this path's disjunct of post
    events: tuple[PathEvent, ...]
    sites: tuple[str, ...]  # assert sites crossed, in order


@dataclass(frozen=True)
class PostVcResult:
    post: Formula
    vc: Formula
    per_site_obligations: tuple[tuple[str, Formula], ...]  # (site, pre ⇒ inv)
    paths: tuple[Path, ...]
    inv: Formula
    init: Formula
    tb: TransformedBody


class VcgenError(Exception):
    pass


def _tidy(f: Formula) -> Formula:
    """Structural cleanup only: flatten, units, drop unused binders."""
    if isinstance(f, formula.And):
        return conj(*(_tidy(g) for g in f.items))
    if isinstance(f, formula.Or):
        return disj(*(_tidy(g) for g in f.items))
    if isinstance(f, Exists):
        body = _tidy(f.body)
        frees = formula.free_vars(body)
        vars_ = tuple((n, s) for n, s in f.vars if n in frees)
        if not vars_:
            return body
        if isinstance(body, Exists):
            return Exists(vars_ + body.vars, body.body)
        return Exists(vars_, body)
    return f


class _Ctx:
    def __init__(self, lib: Library, gen: NameGen):
        self.lib = lib
        self.gen = gen

    def sort_of(self, name: str) -> str:
        base = formula.origin(name)
        try:
            decl = self.lib.global_decl(base)
        except KeyError:
            return formula.SORT_INT
        return {
            lang.KIND_SCALAR: formula.SORT_INT,
            lang.KIND_ARRAY1: formula.SORT_ARR1,
            lang.KIND_ARRAY2: formula.SORT_ARR2,
        }[decl.kind]

    def snapshot(self, pre: Formula, name: str) -> tuple[Formula, str | None]:
        """Quantify the current value of `name` out of pre as a fresh copy."""
        if name not in formula.free_vars(pre):
            return pre, None
        snap = self.gen.fresh(name)
        renamed = formula.substitute_map(pre, {name: TVar(snap)})
        return Exists(((snap, self.sort_of(name)),), renamed), snap


def _run(
    pre: Formula,
    s: Stmt,
    ctx: _Ctx,
    obligations: list[tuple[str, Formula]] | None,
    paths: list[dict] | None,
) -> Formula:
    """One traversal computing POST while collecting VC obligations and paths.

    VC(pre, S) is the conjunction, in traversal order, of `pre ⇒ e` for
    each assert crossed — the sequencing rule threads POST through, and
    branch obligations are collected under pre ∧ cond / pre ∧ ¬cond.
    """
    if isinstance(s, Seq):
        mid = _run(pre, s.first, ctx, obligations, paths)
        return _run(mid, s.second, ctx, obligations, paths)
    if isinstance(s, If):
        cond = expr_to_formula(s.cond)
        if paths is None:
            then_paths = else_paths = None
        else:
            then_paths = [
                {
                    "cond": _tidy(conj(p["cond"], cond)),
                    "events": p["events"] + [PathEvent("branch", (s.cond, True))],
                    "sites": list(p["sites"]),
                }
                for p in paths
            ]
            else_paths = [
                {
                    "cond": _tidy(conj(p["cond"], neg(cond))),
                    "events": p["events"] + [PathEvent("branch", (s.cond, False))],
                    "sites": list(p["sites"]),
                }
                for p in paths
            ]
        then_post = _run(_tidy(conj(pre, cond)), s.then, ctx, obligations, then_paths)
        else_post = _run(_tidy(conj(pre, neg(cond))), s.els, ctx, obligations, else_paths)
        if paths is not None:
            paths[:] = then_paths + else_paths
        return _tidy(disj(then_post, else_post))
    if isinstance(s, Assign):
        target = s.target
        if not target.index:
            if target.name in lang.expr_vars(s.rhs):
                raise VcgenError(
                    f"self-referential assignment to {target.name!r} not normalized"
                )
            out, snap = ctx.snapshot(pre, target.name)
            equation = eq(TVar(target.name), expr_to_term(s.rhs))
            if paths is not None:
                for p in paths:
                    pc = _path_rename(p["cond"], target.name, snap)
                    p["cond"] = _tidy(conj(pc, equation))
                    p["events"].append(PathEvent("assign", (target.name, snap, s.rhs)))
            return _tidy(conj(out, equation))
        # array-cell update: the whole array is replaced, index and value
        # expressions reading the array see its old copy
        out, snap = ctx.snapshot(pre, target.name)
        if snap is None:
            snap = ctx.gen.fresh(target.name)
            out = Exists(((snap, ctx.sort_of(target.name)),), out)
        ren = {target.name: TVar(snap)}
        idx = tuple(term_subst(expr_to_term(i), ren) for i in target.index)
        val = term_subst(expr_to_term(s.rhs), ren)
        equation = eq(TVar(target.name), TStore(TVar(snap), idx, val))
        if paths is not None:
            for p in paths:
                pc = _path_rename(p["cond"], target.name, snap)
                p["cond"] = _tidy(conj(pc, equation))
                p["events"].append(
                    PathEvent("assign_cell", (target.name, snap, target.index, s.rhs))
                )
        return _tidy(conj(out, equation))
    if isinstance(s, Havoc):
        out, snap = ctx.snapshot(pre, s.name)
        if paths is not None:
            for p in paths:
                p["cond"] = _tidy(_path_rename(p["cond"], s.name, snap))
                p["events"].append(PathEvent("havoc", (s.name, snap)))
        return _tidy(out)
    if isinstance(s, Assume):
        if paths is not None:
            for p in paths:
                p["cond"] = _tidy(conj(p["cond"], s.formula))
                p["events"].append(PathEvent("assume", (s.formula,)))
        return _tidy(conj(pre, s.formula))
    if isinstance(s, Assert):
        if obligations is not None:
            obligations.append((s.site, Implies(pre, s.formula)))
        if paths is not None:
            for p in paths:
                p["events"].append(PathEvent("assert", (s.site,)))
                p["sites"].append(s.site)
        return pre
    if isinstance(s, (Call, Return)):
        raise VcgenError(f"{type(s).__name__} node in transformed body")
    raise TypeError(repr(s))


def _path_rename(cond: Formula, name: str, snap: str | None) -> Formula:
    """Rename `name` to its allocated snapshot inside one path condition."""
    if snap is None or name not in formula.free_vars(cond):
        return cond
    return formula.substitute_map(cond, {name: TVar(snap)})


def post(pre: Formula, s: Stmt, lib: Library, gen: NameGen | None = None) -> Formula:
    """Strongest postcondition of a transformed statement."""
    if gen is None:
        gen = _default_gen(pre, s, lib)
    return _run(pre, s, _Ctx(lib, gen), None, None)


def vc(pre: Formula, s: Stmt, lib: Library, gen: NameGen | None = None) -> Formula:
    """Verification condition of a transformed statement."""
    if gen is None:
        gen = _default_gen(pre, s, lib)
    obligations: list[tuple[str, Formula]] = []
    _run(pre, s, _Ctx(lib, gen), obligations, None)
    return conj(*(ob for _, ob in obligations))


def _default_gen(pre: Formula, s: Stmt, lib: Library) -> NameGen:
    reserved = set(formula.free_vars(pre)) | {g.name for g in lib.globals}
    for st in lang.walk_stmts(s):
        if isinstance(st, Assign):
            reserved.add(st.target.name)
            reserved |= lang.expr_vars(st.rhs)
        elif isinstance(st, Havoc):
            reserved.add(st.name)
    return NameGen(reserved)


def postvc(p: lang.Procedure, inv: Formula, lib: Library) -> PostVcResult:
    """POSTVC(P, inv): the postcondition and full verification condition."""
    tb = transform_body(p, inv, lib)
    init = init_formula(lib)

    # one shared name generator keeps post and vc snapshots aligned
    reserved = set(formula.free_vars(inv))
    for g in lib.globals:
        reserved.add(g.name)
    reserved |= {pr.name for pr in lib.procedures}
    reserved |= set(p.params)
    reserved |= p.locals_of(lib.global_names())
    for st in lang.walk_stmts(tb.body):
        if isinstance(st, Assign):
            reserved.add(st.target.name)

    ctx = _Ctx(lib, NameGen(reserved))
    paths: list[dict] = [{"cond": inv, "events": [], "sites": []}]
    obligations: list[tuple[str, Formula]] = []
    post_f = _run(inv, tb.body, ctx, obligations, paths)

    init_ob = Implies(init, inv)
    obligations.append(("init", init_ob))
    vc_f = conj(*(ob for _, ob in obligations))

    path_objs = tuple(
        Path(pd["cond"], tuple(pd["events"]), tuple(pd["sites"])) for pd in paths
    )
    return PostVcResult(
        post=post_f,
        vc=vc_f,
        per_site_obligations=tuple(obligations),
        paths=path_objs,
        inv=inv,
        init=init,
        tb=tb,
    )


def path_count(s: Stmt) -> int:
    """Root-to-exit paths through the conditional structure."""
    if isinstance(s, Seq):
        return path_count(s.first) * path_count(s.second)
    if isinstance(s, If):
        return path_count(s.then) + path_count(s.els)
    return 1


# --- concrete path replay ---


@dataclass(frozen=True)
class CallResult:
    """Observed effect of one real nested call: return value, globals after."""

    retval: int
    globals_after: dict[str, object]


class Inconclusive(Exception):
    """Replay could not produce a verdict (procedure-symbol table miss)."""


def execute_path(
    path: Path,
    entry: dict[str, object],
    call_results: list[CallResult],
    funcs=None,
) -> dict[str, object] | None:
    """Run a path's events over a concrete entry environment.

    `entry` maps variable names to ints/ArrVals; `call_results` supplies,
    in order, the observed return value and post-call global snapshot for
    each call site crossed.  Returns the final environment extended with
    all snapshot bindings, or None when the environment does not drive
    this path to its exit — a branch event contradicts it, or (when
    `funcs` interprets procedure symbols) an assume evaluates to false,
    meaning the supplied call effect left the modeled state space.
    """
    env = dict(entry)
    calls = list(call_results)

    def read(name, idx):
        val = env[name]
        if idx is None:
            return val
        return val.get(idx)

    pending_call = None
    for ev in path.events:
        if ev.kind == "branch":
            cond_expr, taken = ev.data
            if (lang.eval_expr(cond_expr, read) != 0) != taken:
                return None
        elif ev.kind == "assign":
            name, snap, rhs = ev.data
            val = lang.eval_expr(rhs, read)
            if snap is not None:
                env[snap] = env.get(name, 0)
            env[name] = val
        elif ev.kind == "assign_cell":
            name, snap, idx_exprs, rhs = ev.data
            idx = tuple(lang.eval_expr(i, read) for i in idx_exprs)
            val = lang.eval_expr(rhs, read)
            old = env.get(name)
            if snap is not None:
                env[snap] = old
            env[name] = old.set(idx, val)
        elif ev.kind == "assert":
            (site,) = ev.data
            if site != "end":
                if not calls:
                    raise Inconclusive("fewer real calls than call sites")
                pending_call = calls.pop(0)
        elif ev.kind == "havoc":
            name, snap = ev.data
            if snap is not None:
                env[snap] = env.get(name, 0)
            if pending_call is None:
                raise Inconclusive("havoc outside a call block")
            env[name] = pending_call.globals_after[name]
        elif ev.kind == "assume":
            (phi,) = ev.data
            if pending_call is None:
                raise Inconclusive("assume outside a call block")
            # the call equation pins the call's target variable
            target = _assume_target(phi)
            if target is not None:
                env[target] = pending_call.retval
            pending_call = None
            if funcs is not None:
                try:
                    if not formula.eval_formula(phi, env, funcs=funcs):
                        return None
                except formula.EvalUndef as e:
                    raise Inconclusive(f"procedure symbol without a table entry: {e}")
    return env


def _open_witnessed(f: Formula, witnessed, positive: bool = True) -> Formula:
    """Drop positive ∃-binders whose variables carry supplied witness values.

    With the binder gone the variable reads from the evaluation
    environment, so checking the body against the recorded old value is
    at least as strong as the original ∃.  Binders under a negation keep
    their quantifier: dropping there would weaken the formula.
    """
    if isinstance(f, Exists) and positive:
        kept = tuple((n, s) for n, s in f.vars if n not in witnessed)
        body = _open_witnessed(f.body, witnessed, positive)
        return Exists(kept, body) if kept else body
    if isinstance(f, formula.And):
        return conj(*(_open_witnessed(g, witnessed, positive) for g in f.items))
    if isinstance(f, formula.Or):
        return disj(*(_open_witnessed(g, witnessed, positive) for g in f.items))
    if isinstance(f, formula.Not):
        return neg(_open_witnessed(f.operand, witnessed, not positive))
    if isinstance(f, Implies):
        return Implies(
            _open_witnessed(f.left, witnessed, not positive),
            _open_witnessed(f.right, witnessed, positive),
        )
    return f


def eval_path_condition(
    path: Path,
    env: dict[str, object],
    funcs,
    probe_ints=None,
) -> bool:
    """Decide whether `env` (as produced by execute_path) satisfies the
    path's disjunct, instantiating snapshot existentials with the
    recorded old values and interpreting procedure symbols via `funcs`.
    """
    opened = _open_witnessed(path.condition, set(env))
    return formula.eval_formula(opened, env, funcs=funcs, probe_ints=probe_ints)


def path_soundness_trial(
    res: PostVcResult,
    entry_globals: dict[str, object],
    args: tuple[int, ...],
    record,
) -> str:
    """One differential trial of the calculus against a real execution.

    `record` is a completed top-level trace (with snapshots) of the
    procedure `res` was generated for, run on `args` from the global
    state `entry_globals`.  Procedure symbols are interpreted by the
    trace's own I/O table.  Returns:

      "pass"  the run matches exactly one path and satisfies its disjunct
      "fail"  the run matches a path whose disjunct evaluates false, or
              matches several paths
      "skip"  no verdict: the entry state falls outside the invariant,
              the trace's I/O table is not functional or misses a needed
              entry, or every path blocks on an assume
    """
    table: dict[tuple[str, tuple[int, ...]], int] = {}
    for r in record.walk():
        key = (r.proc, r.args)
        if key in table and table[key] != r.retval:
            return "skip"
        table.setdefault(key, r.retval)

    def funcs(name, call_args):
        return table.get((name, tuple(call_args)))

    try:
        if not formula.eval_formula(res.inv, dict(entry_globals), funcs=funcs):
            return "skip"
    except (formula.EvalUndef, TypeError):
        return "skip"

    entry = dict(entry_globals) | dict(zip(res.tb.proc.params, args))
    call_results = [CallResult(c.retval, c.globals_after) for c in record.children]
    matches = []
    for path in res.paths:
        try:
            env = execute_path(path, dict(entry), list(call_results), funcs=funcs)
        except Inconclusive:
            env = None
        if env is not None:
            matches.append((path, env))
    if not matches:
        return "skip"
    if len(matches) > 1:
        return "fail"
    path, env = matches[0]
    try:
        return "pass" if eval_path_condition(path, env, funcs) else "fail"
    except (formula.EvalUndef, TypeError):
        return "skip"


def _assume_target(phi: Formula) -> str | None:
    items = phi.items if isinstance(phi, formula.And) else (phi,)
    for g in items:
        if (
            isinstance(g, formula.Cmp)
            and g.op == "=="
            and isinstance(g.left, TVar)
            and isinstance(g.right, formula.TApply)
        ):
            return g.left.name
    return None
