"""Rewrite of a procedure body for checking against a candidate invariant.

Three rules produce the transformed body TB:

1. Self-referential assignments ``x := e`` with x read by e become
   ``t := e; x := t`` with t fresh, so the postcondition calculus's
   side condition (assigned variable absent from the right-hand side)
   always holds.
2. Each call ``x := q(y)`` is replaced by the sequence
   ``assert inv; havoc(g1); ...; havoc(gN); assume inv && x == q(y)``
   after first copying any non-local argument into a fresh local.  The
   invariant describes the library's shared globals, so the same
   formula is asserted going into any call and assumed coming back out,
   whether the callee is the procedure itself or a sibling.  The havocs
   cover every global, so the call's effect on the cache is abstracted
   to "anything preserving the invariant".
3. The trailing ``return x`` becomes ``assert inv``.

The result contains no calls; recursion survives only as the
uninterpreted symbol inside the assume equations.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import formula, lang
from .formula import Formula, TApply, TConst, TVar, conj, eq, forall
from .lang import (
    Assert,
    Assign,
    Assume,
    Call,
    Havoc,
    If,
    Library,
    LValue,
    Procedure,
    Return,
    Seq,
    Stmt,
    Var,
)


@dataclass(frozen=True)
class TransformedBody:
    body: Stmt
    temp_counter: int
    call_sites: tuple[str, ...]  # site labels, in body order
    proc: Procedure
    inv: Formula


class _Temps:
    def __init__(self, reserved: set[str]):
        self.reserved = set(reserved)
        self.counter = 0

    def fresh(self) -> str:
        while True:
            self.counter += 1
            name = f"tmp{self.counter}"
            if name not in self.reserved:
                self.reserved.add(name)
                return name


def _reserved_names(lib: Library) -> set[str]:
    names: set[str] = set()
    for g in lib.globals:
        names.add(g.name)
    for p in lib.procedures:
        names.add(p.name)
        names.update(p.params)
        for s in lang.walk_stmts(p.body):
            if isinstance(s, Assign):
                names.add(s.target.name)
            elif isinstance(s, Call):
                names.add(s.lhs)
    return names


def _normalize(s: Stmt, temps: _Temps) -> Stmt:
    if isinstance(s, Seq):
        return Seq(_normalize(s.first, temps), _normalize(s.second, temps))
    if isinstance(s, If):
        return If(s.cond, _normalize(s.then, temps), _normalize(s.els, temps), pos=s.pos)
    if isinstance(s, Assign) and s.target.name in lang.expr_vars(s.rhs):
        t = temps.fresh()
        return Seq(
            Assign(LValue(t), s.rhs, pos=s.pos),
            Assign(s.target, Var(t), pos=s.pos),
        )
    return s


def normalize_self_assign(s: Stmt, reserved: set[str] | None = None) -> Stmt:
    """Split every assignment whose target occurs on its right-hand side."""
    if reserved is None:
        reserved = {
            st.target.name if isinstance(st, Assign) else ""
            for st in lang.walk_stmts(s)
            if isinstance(st, Assign)
        }
        for st in lang.walk_stmts(s):
            reserved |= lang.expr_vars(st.rhs) if isinstance(st, Assign) else set()
    return _normalize(s, _Temps(reserved))


def init_formula(lib: Library) -> Formula:
    """Conjunction pinning every global to its declared initial value."""
    used = lib.global_names()
    parts: list[Formula] = []
    for g in lib.globals:
        if g.kind == lang.KIND_SCALAR:
            parts.append(eq(TVar(g.name), TConst(g.init)))
            continue
        bound = _index_names(1 if g.kind == lang.KIND_ARRAY1 else 2, used)
        idx = tuple(TVar(b) for b in bound)
        cell = formula.TSelect(TVar(g.name), idx)
        parts.append(
            forall([(b, formula.SORT_INT) for b in bound], eq(cell, TConst(g.init)))
        )
    return conj(*parts)


def _index_names(count: int, used: set[str]) -> list[str]:
    names = []
    for base in ("k", "j", "i", "k2", "j2", "i2"):
        if base not in used:
            names.append(base)
            if len(names) == count:
                return names
    raise AssertionError("no free index name")


def transform_body(p: Procedure, inv: Formula, lib: Library) -> TransformedBody:
    """TB(P, inv): the call-free body checked by the calculus."""
    temps = _Temps(_reserved_names(lib))
    local_names = p.locals_of(lib.global_names()) | set(p.params)
    sites: list[str] = []
    call_counter = [0]

    def rewrite(s: Stmt) -> Stmt:
        if isinstance(s, Seq):
            return Seq(rewrite(s.first), rewrite(s.second))
        if isinstance(s, If):
            return If(s.cond, rewrite(s.then), rewrite(s.els), pos=s.pos)
        if isinstance(s, Return):
            sites.append("end")
            return Assert(inv, site="end")
        if isinstance(s, Call):
            call_counter[0] += 1
            site = f"call{call_counter[0]}"
            sites.append(site)
            pre: list[Stmt] = []
            arg_vars: list[Var] = []
            for a in s.args:
                if isinstance(a, Var) and a.name in local_names:
                    arg_vars.append(a)
                else:
                    t = temps.fresh()
                    pre.append(Assign(LValue(t), a, pos=s.pos))
                    arg_vars.append(Var(t))
            equation = eq(
                TVar(s.lhs), TApply(s.callee, tuple(TVar(v.name) for v in arg_vars))
            )
            seq: list[Stmt] = list(pre)
            seq.append(Assert(inv, site=site))
            for g in lib.globals:
                seq.append(Havoc(g.name))
            seq.append(Assume(conj(inv, equation)))
            return lang.seq_of(seq)
        return s

    body = rewrite(_normalize(p.body, temps))
    return TransformedBody(body, temps.counter, tuple(sites), p, inv)
