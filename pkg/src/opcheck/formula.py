"""Logic intermediate representation.

Formulas carry invariants, postconditions, and verification conditions.
Terms are integer- or map-valued; booleans embed into integers as 0/1
via `TBoolInt`, mirroring the source language's untyped conditions.

Naming discipline: generated variable copies append ``!k`` (snapshot
copies made when a variable is overwritten or havocked) and ``.a`` /
``.b`` (the two-execution copies used by the twin check).  Neither
character can occur in a source identifier, so `origin` recovers the
program variable behind any generated name.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import lang
from .lang import ediv, emod

SORT_INT = "int"
SORT_ARR1 = "arr1"
SORT_ARR2 = "arr2"


def origin(name: str) -> str:
    """Program variable a generated copy descends from."""
    return name.split(".", 1)[0].split("!", 1)[0]


class NameGen:
    """Fresh ``base!k`` names, deterministic, never colliding with reserved."""

    def __init__(self, reserved: set[str] | None = None):
        self.reserved = set(reserved or ())
        self.counter = 0

    def fresh(self, base: str) -> str:
        base = origin(base)
        while True:
            self.counter += 1
            name = f"{base}!{self.counter}"
            if name not in self.reserved:
                self.reserved.add(name)
                return name


# --- terms ---


@dataclass(frozen=True)
class Term:
    pass


@dataclass(frozen=True)
class TConst(Term):
    value: int


@dataclass(frozen=True)
class TVar(Term):
    name: str


@dataclass(frozen=True)
class TSelect(Term):
    array: Term
    index: tuple[Term, ...]


@dataclass(frozen=True)
class TStore(Term):
    array: Term
    index: tuple[Term, ...]
    value: Term


@dataclass(frozen=True)
class TApply(Term):
    name: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class TBin(Term):
    op: str  # + - * / %
    left: Term
    right: Term


@dataclass(frozen=True)
class TBoolInt(Term):
    """A formula as an integer: 1 when it holds, else 0."""

    formula: "Formula"


# --- formulas ---


@dataclass(frozen=True)
class Formula:
    pass


@dataclass(frozen=True)
class FTrue(Formula):
    pass


@dataclass(frozen=True)
class FFalse(Formula):
    pass


@dataclass(frozen=True)
class Cmp(Formula):
    op: str  # == < >
    left: Term
    right: Term


@dataclass(frozen=True)
class Not(Formula):
    operand: Formula


@dataclass(frozen=True)
class And(Formula):
    items: tuple[Formula, ...]


@dataclass(frozen=True)
class Or(Formula):
    items: tuple[Formula, ...]


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Exists(Formula):
    vars: tuple[tuple[str, str], ...]  # (name, sort)
    body: Formula


@dataclass(frozen=True)
class Forall(Formula):
    vars: tuple[tuple[str, str], ...]
    body: Formula


TRUE = FTrue()
FALSE = FFalse()


def conj(*items: Formula) -> Formula:
    """Flattened conjunction with unit/annihilator handling."""
    flat: list[Formula] = []
    for f in items:
        if isinstance(f, And):
            flat.extend(f.items)
        elif isinstance(f, FFalse):
            return FALSE
        elif not isinstance(f, FTrue):
            flat.append(f)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(*items: Formula) -> Formula:
    flat: list[Formula] = []
    for f in items:
        if isinstance(f, Or):
            flat.extend(f.items)
        elif isinstance(f, FTrue):
            return TRUE
        elif not isinstance(f, FFalse):
            flat.append(f)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def neg(f: Formula) -> Formula:
    if isinstance(f, FTrue):
        return FALSE
    if isinstance(f, FFalse):
        return TRUE
    if isinstance(f, Not):
        return f.operand
    return Not(f)


def eq(a: Term, b: Term) -> Formula:
    return Cmp("==", a, b)


def exists(vars_: list[tuple[str, str]], body: Formula) -> Formula:
    if not vars_:
        return body
    if isinstance(body, (FTrue, FFalse)):
        return body
    return Exists(tuple(vars_), body)


def forall(vars_: list[tuple[str, str]], body: Formula) -> Formula:
    if not vars_:
        return body
    if isinstance(body, (FTrue, FFalse)):
        return body
    return Forall(tuple(vars_), body)


# --- conversion from source expressions ---


def expr_to_term(e: lang.Expr) -> Term:
    if isinstance(e, lang.Const):
        return TConst(e.value)
    if isinstance(e, lang.Var):
        return TVar(e.name)
    if isinstance(e, lang.ArrayRead):
        return TSelect(TVar(e.name), tuple(expr_to_term(i) for i in e.index))
    if isinstance(e, lang.Apply):
        return TApply(e.callee, tuple(expr_to_term(a) for a in e.args))
    if isinstance(e, lang.Binary) and e.op in lang.ARITH_OPS:
        return TBin(e.op, expr_to_term(e.left), expr_to_term(e.right))
    if isinstance(e, (lang.Binary, lang.Unary, lang.Quant)):
        return TBoolInt(expr_to_formula(e))
    raise TypeError(f"not an expression: {e!r}")


def expr_to_formula(e: lang.Expr) -> Formula:
    """Read an integer expression as a condition (nonzero means true)."""
    if isinstance(e, lang.Const):
        return TRUE if e.value != 0 else FALSE
    if isinstance(e, lang.Quant):
        body = expr_to_formula(e.body)
        vars_ = [(n, SORT_INT) for n in e.vars]
        return exists(vars_, body) if e.kind == "exists" else forall(vars_, body)
    if isinstance(e, lang.Unary):
        return neg(expr_to_formula(e.operand))
    if isinstance(e, lang.Binary):
        if e.op == "&&":
            return conj(expr_to_formula(e.left), expr_to_formula(e.right))
        if e.op == "||":
            return disj(expr_to_formula(e.left), expr_to_formula(e.right))
        if e.op in lang.CMP_OPS:
            return Cmp(e.op, expr_to_term(e.left), expr_to_term(e.right))
    return neg(eq(expr_to_term(e), TConst(0)))


# --- traversals ---


def term_free_vars(t: Term, bound: frozenset[str] = frozenset()) -> set[str]:
    if isinstance(t, TConst):
        return set()
    if isinstance(t, TVar):
        return set() if t.name in bound else {t.name}
    if isinstance(t, TSelect):
        out = term_free_vars(t.array, bound)
        for i in t.index:
            out |= term_free_vars(i, bound)
        return out
    if isinstance(t, TStore):
        out = term_free_vars(t.array, bound) | term_free_vars(t.value, bound)
        for i in t.index:
            out |= term_free_vars(i, bound)
        return out
    if isinstance(t, TApply):
        out = set()
        for a in t.args:
            out |= term_free_vars(a, bound)
        return out
    if isinstance(t, TBin):
        return term_free_vars(t.left, bound) | term_free_vars(t.right, bound)
    if isinstance(t, TBoolInt):
        return free_vars(t.formula, bound)
    raise TypeError(repr(t))


def free_vars(f: Formula, bound: frozenset[str] = frozenset()) -> set[str]:
    if isinstance(f, (FTrue, FFalse)):
        return set()
    if isinstance(f, Cmp):
        return term_free_vars(f.left, bound) | term_free_vars(f.right, bound)
    if isinstance(f, Not):
        return free_vars(f.operand, bound)
    if isinstance(f, (And, Or)):
        out: set[str] = set()
        for g in f.items:
            out |= free_vars(g, bound)
        return out
    if isinstance(f, Implies):
        return free_vars(f.left, bound) | free_vars(f.right, bound)
    if isinstance(f, (Exists, Forall)):
        return free_vars(f.body, bound | {v for v, _ in f.vars})
    raise TypeError(repr(f))


def applies_of(f: Formula) -> set[tuple[str, int]]:
    """All procedure-symbol applications (name, arity)."""
    out: set[tuple[str, int]] = set()

    def walk_t(t: Term) -> None:
        if isinstance(t, TApply):
            out.add((t.name, len(t.args)))
            for a in t.args:
                walk_t(a)
        elif isinstance(t, (TSelect, TStore)):
            walk_t(t.array)
            for i in t.index:
                walk_t(i)
            if isinstance(t, TStore):
                walk_t(t.value)
        elif isinstance(t, TBin):
            walk_t(t.left)
            walk_t(t.right)
        elif isinstance(t, TBoolInt):
            walk_f(t.formula)

    def walk_f(g: Formula) -> None:
        if isinstance(g, Cmp):
            walk_t(g.left)
            walk_t(g.right)
        elif isinstance(g, Not):
            walk_f(g.operand)
        elif isinstance(g, (And, Or)):
            for h in g.items:
                walk_f(h)
        elif isinstance(g, Implies):
            walk_f(g.left)
            walk_f(g.right)
        elif isinstance(g, (Exists, Forall)):
            walk_f(g.body)

    walk_f(f)
    return out


def map_terms(f: Formula, fn) -> Formula:
    """Rebuild f with fn applied to every maximal term (fn gets bound set)."""

    def go(g: Formula, bound: frozenset[str]) -> Formula:
        if isinstance(g, (FTrue, FFalse)):
            return g
        if isinstance(g, Cmp):
            return Cmp(g.op, fn(g.left, bound), fn(g.right, bound))
        if isinstance(g, Not):
            return neg_raw(go(g.operand, bound))
        if isinstance(g, And):
            return And(tuple(go(h, bound) for h in g.items))
        if isinstance(g, Or):
            return Or(tuple(go(h, bound) for h in g.items))
        if isinstance(g, Implies):
            return Implies(go(g.left, bound), go(g.right, bound))
        if isinstance(g, Exists):
            return Exists(g.vars, go(g.body, bound | {v for v, _ in g.vars}))
        if isinstance(g, Forall):
            return Forall(g.vars, go(g.body, bound | {v for v, _ in g.vars}))
        raise TypeError(repr(g))

    return go(f, frozenset())


def neg_raw(f: Formula) -> Formula:
    # plain Not wrapper used during structural rebuilds
    return Not(f) if not isinstance(f, Not) else f.operand


# --- substitution and renaming ---


def substitute_map(f: Formula, subst: dict[str, Term]) -> Formula:
    """Capture-avoiding simultaneous substitution of free variables."""
    if not subst:
        return f
    needed = set(subst)
    term_frees: set[str] = set()
    for t in subst.values():
        term_frees |= term_free_vars(t)

    def sub_t(t: Term, live: dict[str, Term]) -> Term:
        if isinstance(t, TConst):
            return t
        if isinstance(t, TVar):
            return live.get(t.name, t)
        if isinstance(t, TSelect):
            return TSelect(sub_t(t.array, live), tuple(sub_t(i, live) for i in t.index))
        if isinstance(t, TStore):
            return TStore(
                sub_t(t.array, live),
                tuple(sub_t(i, live) for i in t.index),
                sub_t(t.value, live),
            )
        if isinstance(t, TApply):
            return TApply(t.name, tuple(sub_t(a, live) for a in t.args))
        if isinstance(t, TBin):
            return TBin(t.op, sub_t(t.left, live), sub_t(t.right, live))
        if isinstance(t, TBoolInt):
            return TBoolInt(sub_f(t.formula, live))
        raise TypeError(repr(t))

    def sub_f(g: Formula, live: dict[str, Term]) -> Formula:
        if not live:
            return g
        if isinstance(g, (FTrue, FFalse)):
            return g
        if isinstance(g, Cmp):
            return Cmp(g.op, sub_t(g.left, live), sub_t(g.right, live))
        if isinstance(g, Not):
            return Not(sub_f(g.operand, live))
        if isinstance(g, And):
            return And(tuple(sub_f(h, live) for h in g.items))
        if isinstance(g, Or):
            return Or(tuple(sub_f(h, live) for h in g.items))
        if isinstance(g, Implies):
            return Implies(sub_f(g.left, live), sub_f(g.right, live))
        if isinstance(g, (Exists, Forall)):
            live2 = {k: v for k, v in live.items() if k not in {n for n, _ in g.vars}}
            incoming = set()
            for v in live2.values():
                incoming |= term_free_vars(v)
            renames: dict[str, Term] = {}
            new_vars = []
            taken = free_vars(g) | term_frees | needed
            for name, sort in g.vars:
                if live2 and name in incoming:
                    # binder would capture a substituted term: rename it
                    k = 1
                    while f"{name}!c{k}" in taken:
                        k += 1
                    fresh = f"{name}!c{k}"
                    taken.add(fresh)
                    renames[name] = TVar(fresh)
                    new_vars.append((fresh, sort))
                else:
                    new_vars.append((name, sort))
            body = g.body
            if renames:
                body = substitute_map(body, renames)
            body = sub_f(body, live2)
            cls = Exists if isinstance(g, Exists) else Forall
            return cls(tuple(new_vars), body)
        raise TypeError(repr(g))

    return sub_f(f, dict(subst))


def substitute(f: Formula, var: str, replacement: Term | lang.Expr) -> Formula:
    if isinstance(replacement, lang.Expr):
        replacement = expr_to_term(replacement)
    return substitute_map(f, {var: replacement})


def term_subst(t: Term, subst: dict[str, Term]) -> Term:
    """Substitute free variables inside one term."""
    if isinstance(t, TConst):
        return t
    if isinstance(t, TVar):
        return subst.get(t.name, t)
    if isinstance(t, TSelect):
        return TSelect(term_subst(t.array, subst), tuple(term_subst(i, subst) for i in t.index))
    if isinstance(t, TStore):
        return TStore(
            term_subst(t.array, subst),
            tuple(term_subst(i, subst) for i in t.index),
            term_subst(t.value, subst),
        )
    if isinstance(t, TApply):
        return TApply(t.name, tuple(term_subst(a, subst) for a in t.args))
    if isinstance(t, TBin):
        return TBin(t.op, term_subst(t.left, subst), term_subst(t.right, subst))
    if isinstance(t, TBoolInt):
        return TBoolInt(substitute_map(t.formula, subst))
    raise TypeError(repr(t))


def rename_free(f: Formula, tag: str) -> Formula:
    """Append ``.tag`` to every free variable; procedure symbols untouched."""
    suffix = "." + tag

    def fn(t: Term, bound: frozenset[str]) -> Term:
        def go(u: Term) -> Term:
            if isinstance(u, TConst):
                return u
            if isinstance(u, TVar):
                return u if u.name in bound else TVar(u.name + suffix)
            if isinstance(u, TSelect):
                return TSelect(go(u.array), tuple(go(i) for i in u.index))
            if isinstance(u, TStore):
                return TStore(go(u.array), tuple(go(i) for i in u.index), go(u.value))
            if isinstance(u, TApply):
                return TApply(u.name, tuple(go(a) for a in u.args))
            if isinstance(u, TBin):
                return TBin(u.op, go(u.left), go(u.right))
            if isinstance(u, TBoolInt):
                return TBoolInt(rename_bound_aware(u.formula, bound))
            raise TypeError(repr(u))

        return go(t)

    def rename_bound_aware(g: Formula, bound: frozenset[str]) -> Formula:
        if isinstance(g, (FTrue, FFalse)):
            return g
        if isinstance(g, Cmp):
            return Cmp(g.op, fn(g.left, bound), fn(g.right, bound))
        if isinstance(g, Not):
            return Not(rename_bound_aware(g.operand, bound))
        if isinstance(g, And):
            return And(tuple(rename_bound_aware(h, bound) for h in g.items))
        if isinstance(g, Or):
            return Or(tuple(rename_bound_aware(h, bound) for h in g.items))
        if isinstance(g, Implies):
            return Implies(
                rename_bound_aware(g.left, bound), rename_bound_aware(g.right, bound)
            )
        if isinstance(g, (Exists, Forall)):
            b2 = bound | {v for v, _ in g.vars}
            cls = Exists if isinstance(g, Exists) else Forall
            return cls(g.vars, rename_bound_aware(g.body, b2))
        raise TypeError(repr(g))

    return rename_bound_aware(f, frozenset())


# --- quantifier handling ---


def lift_existentials(f: Formula, gen: NameGen | None = None) -> tuple[list[tuple[str, str]], Formula]:
    """Hoist generated existentials to one outer prefix.

    Descends the positive and/or spine only; universals and negations are
    kept verbatim (any quantifier inside them belongs to a user-written
    invariant).  Binders that are not already unique generated names are
    freshened, so `Exists(vars, body)` is equivalent to the input.
    """
    if gen is None:
        gen = NameGen(free_vars(f) | {n for n, _ in _all_binders(f)})

    def go(g: Formula) -> tuple[list[tuple[str, str]], Formula]:
        if isinstance(g, Exists):
            renames: dict[str, Term] = {}
            vars_out: list[tuple[str, str]] = []
            for name, sort in g.vars:
                if "!" in name:
                    vars_out.append((name, sort))
                else:
                    fresh = gen.fresh(name)
                    renames[name] = TVar(fresh)
                    vars_out.append((fresh, sort))
            body = substitute_map(g.body, renames) if renames else g.body
            inner_vars, inner_body = go(body)
            return vars_out + inner_vars, inner_body
        if isinstance(g, And):
            vars_out = []
            bodies = []
            for h in g.items:
                v, b = go(h)
                vars_out.extend(v)
                bodies.append(b)
            return vars_out, conj(*bodies)
        if isinstance(g, Or):
            vars_out = []
            bodies = []
            for h in g.items:
                v, b = go(h)
                vars_out.extend(v)
                bodies.append(b)
            return vars_out, disj(*bodies)
        return [], g

    return go(f)


def _all_binders(f: Formula) -> list[tuple[str, str]]:
    out: list[tuple[str, str]] = []

    def walk(g: Formula) -> None:
        if isinstance(g, (Exists, Forall)):
            out.extend(g.vars)
            walk(g.body)
        elif isinstance(g, Not):
            walk(g.operand)
        elif isinstance(g, (And, Or)):
            for h in g.items:
                walk(h)
        elif isinstance(g, Implies):
            walk(g.left)
            walk(g.right)
        elif isinstance(g, Cmp):
            for t in (g.left, g.right):
                _walk_term_binders(t, walk)

    def _walk_term_binders(t: Term, wf) -> None:
        if isinstance(t, TBoolInt):
            wf(t.formula)
        elif isinstance(t, (TSelect, TStore)):
            _walk_term_binders(t.array, wf)
            for i in t.index:
                _walk_term_binders(i, wf)
            if isinstance(t, TStore):
                _walk_term_binders(t.value, wf)
        elif isinstance(t, TBin):
            _walk_term_binders(t.left, wf)
            _walk_term_binders(t.right, wf)
        elif isinstance(t, TApply):
            for a in t.args:
                _walk_term_binders(a, wf)

    walk(f)
    return out


def nnf(f: Formula) -> Formula:
    """Negation normal form; Implies rewritten away."""

    def pos(g: Formula) -> Formula:
        if isinstance(g, (FTrue, FFalse, Cmp)):
            return g
        if isinstance(g, Not):
            return negf(g.operand)
        if isinstance(g, And):
            return conj(*(pos(h) for h in g.items))
        if isinstance(g, Or):
            return disj(*(pos(h) for h in g.items))
        if isinstance(g, Implies):
            return disj(negf(g.left), pos(g.right))
        if isinstance(g, Exists):
            return exists(list(g.vars), pos(g.body))
        if isinstance(g, Forall):
            return forall(list(g.vars), pos(g.body))
        raise TypeError(repr(g))

    def negf(g: Formula) -> Formula:
        if isinstance(g, FTrue):
            return FALSE
        if isinstance(g, FFalse):
            return TRUE
        if isinstance(g, Cmp):
            return Not(g)
        if isinstance(g, Not):
            return pos(g.operand)
        if isinstance(g, And):
            return disj(*(negf(h) for h in g.items))
        if isinstance(g, Or):
            return conj(*(negf(h) for h in g.items))
        if isinstance(g, Implies):
            return conj(pos(g.left), negf(g.right))
        if isinstance(g, Exists):
            return forall(list(g.vars), negf(g.body))
        if isinstance(g, Forall):
            return exists(list(g.vars), negf(g.body))
        raise TypeError(repr(g))

    return pos(f)


def skolemize_positive(f: Formula, gen: NameGen) -> Formula:
    """Drop positive existential binders, freshening their variables.

    Valid for satisfiability checks.  Input must be in NNF; existentials
    under a universal are left in place (the solver handles them).
    """
    if isinstance(f, Exists):
        renames = {}
        for name, sort in f.vars:
            if "!" in name:
                continue
            renames[name] = TVar(gen.fresh(name))
        body = substitute_map(f.body, renames) if renames else f.body
        return skolemize_positive(body, gen)
    if isinstance(f, And):
        return conj(*(skolemize_positive(g, gen) for g in f.items))
    if isinstance(f, Or):
        return disj(*(skolemize_positive(g, gen) for g in f.items))
    return f


# --- serialization ---


def term_sexpr(t: Term, names: dict[str, str] | None = None) -> str:
    def go(u: Term) -> str:
        if isinstance(u, TConst):
            return str(u.value)
        if isinstance(u, TVar):
            return names.get(u.name, u.name) if names else u.name
        if isinstance(u, TSelect):
            return f"(select {go(u.array)} {' '.join(go(i) for i in u.index)})"
        if isinstance(u, TStore):
            idx = " ".join(go(i) for i in u.index)
            return f"(store {go(u.array)} {idx} {go(u.value)})"
        if isinstance(u, TApply):
            if not u.args:
                return f"({u.name})"
            return f"({u.name} {' '.join(go(a) for a in u.args)})"
        if isinstance(u, TBin):
            return f"({u.op} {go(u.left)} {go(u.right)})"
        if isinstance(u, TBoolInt):
            return f"(b2i {_sexpr(u.formula, names)})"
        raise TypeError(repr(u))

    return go(t)


def _sexpr(f: Formula, names: dict[str, str] | None) -> str:
    if isinstance(f, FTrue):
        return "true"
    if isinstance(f, FFalse):
        return "false"
    if isinstance(f, Cmp):
        op = {"==": "=", "<": "<", ">": ">"}[f.op]
        return f"({op} {term_sexpr(f.left, names)} {term_sexpr(f.right, names)})"
    if isinstance(f, Not):
        return f"(not {_sexpr(f.operand, names)})"
    if isinstance(f, And):
        return f"(and {' '.join(_sexpr(g, names) for g in f.items)})"
    if isinstance(f, Or):
        return f"(or {' '.join(_sexpr(g, names) for g in f.items)})"
    if isinstance(f, Implies):
        return f"(=> {_sexpr(f.left, names)} {_sexpr(f.right, names)})"
    if isinstance(f, (Exists, Forall)):
        kw = "exists" if isinstance(f, Exists) else "forall"
        if names is None:
            binders = " ".join(f"({n} {s})" for n, s in f.vars)
            return f"({kw} ({binders}) {_sexpr(f.body, names)})"
        inner = dict(names)
        binders_l = []
        depth = len([k for k in names.values() if k.startswith("%")])
        for i, (n, s) in enumerate(f.vars):
            canon = f"%{depth + i}"
            inner[n] = canon
            binders_l.append(f"({canon} {s})")
        return f"({kw} ({' '.join(binders_l)}) {_sexpr(f.body, inner)})"
    raise TypeError(repr(f))


def to_sexpr(f: Formula) -> str:
    """Deterministic s-expression form, used for goldens and debugging."""
    return _sexpr(f, None)


def canon_key(f: Formula) -> str:
    """Alpha-canonical key: bound variables replaced by de-Bruijn-style slots."""
    return _sexpr(f, {})


# --- source-syntax printing ---

_PREC_OR = 1
_PREC_AND = 2
_PREC_NOT = 3
_PREC_CMP = 4
_PREC_ADD = 5
_PREC_MUL = 6
_PREC_ATOM = 7


def _paren(s: str, mine: int, outer: int) -> str:
    return f"({s})" if mine < outer else s


def term_to_source(t: Term, outer: int = 0) -> str:
    if isinstance(t, TConst):
        return str(t.value) if t.value >= 0 else _paren(str(t.value), _PREC_ADD, outer)
    if isinstance(t, TVar):
        return t.name
    if isinstance(t, TSelect):
        base = term_to_source(t.array, _PREC_ATOM)
        return f"{base}[{', '.join(term_to_source(i) for i in t.index)}]"
    if isinstance(t, TApply):
        return f"{t.name}({', '.join(term_to_source(a) for a in t.args)})"
    if isinstance(t, TBin):
        prec = _PREC_ADD if t.op in ("+", "-") else _PREC_MUL
        left = term_to_source(t.left, prec)
        right = term_to_source(t.right, prec + 1)
        return _paren(f"{left} {t.op} {right}", prec, outer)
    if isinstance(t, TBoolInt):
        return f"({to_source(t.formula)})"
    if isinstance(t, TStore):
        idx = ", ".join(term_to_source(i) for i in t.index)
        return f"store({term_to_source(t.array)}, {idx}, {term_to_source(t.value)})"
    raise TypeError(repr(t))


def to_source(f: Formula, outer: int = 0) -> str:
    """Annotation-syntax text; parseable back whenever no stores appear."""
    if isinstance(f, FTrue):
        return "true"
    if isinstance(f, FFalse):
        return "false"
    if isinstance(f, Cmp):
        s = f"{term_to_source(f.left, _PREC_ADD)} {f.op} {term_to_source(f.right, _PREC_ADD)}"
        return _paren(s, _PREC_CMP, outer)
    if isinstance(f, Not):
        return _paren(f"!({to_source(f.operand)})", _PREC_NOT, outer)
    if isinstance(f, And):
        s = " && ".join(to_source(g, _PREC_AND + 1) for g in f.items)
        return _paren(s, _PREC_AND, outer)
    if isinstance(f, Or):
        s = " || ".join(to_source(g, _PREC_OR + 1) for g in f.items)
        return _paren(s, _PREC_OR, outer)
    if isinstance(f, Implies):
        return to_source(disj(neg(f.left), f.right), outer)
    if isinstance(f, (Exists, Forall)):
        kw = "exists" if isinstance(f, Exists) else "forall"
        names = ", ".join(n for n, _ in f.vars)
        return _paren(f"{kw} {names}. {to_source(f.body)}", _PREC_OR, outer)
    raise TypeError(repr(f))


# --- simplification ---


def _fold_term(t: Term) -> Term:
    if isinstance(t, (TConst, TVar)):
        return t
    if isinstance(t, TSelect):
        return TSelect(_fold_term(t.array), tuple(_fold_term(i) for i in t.index))
    if isinstance(t, TStore):
        return TStore(
            _fold_term(t.array),
            tuple(_fold_term(i) for i in t.index),
            _fold_term(t.value),
        )
    if isinstance(t, TApply):
        return TApply(t.name, tuple(_fold_term(a) for a in t.args))
    if isinstance(t, TBin):
        a = _fold_term(t.left)
        b = _fold_term(t.right)
        if isinstance(a, TConst) and isinstance(b, TConst):
            x, y = a.value, b.value
            val = {
                "+": lambda: x + y,
                "-": lambda: x - y,
                "*": lambda: x * y,
                "/": lambda: ediv(x, y),
                "%": lambda: emod(x, y),
            }[t.op]()
            return TConst(val)
        if t.op == "+" and isinstance(b, TConst) and b.value == 0:
            return a
        if t.op == "+" and isinstance(a, TConst) and a.value == 0:
            return b
        if t.op == "-" and isinstance(b, TConst) and b.value == 0:
            return a
        if t.op == "*" and isinstance(b, TConst) and b.value == 1:
            return a
        if t.op == "*" and isinstance(a, TConst) and a.value == 1:
            return b
        return TBin(t.op, a, b)
    if isinstance(t, TBoolInt):
        inner = _simplify_pass(t.formula, None)
        if isinstance(inner, FTrue):
            return TConst(1)
        if isinstance(inner, FFalse):
            return TConst(0)
        return TBoolInt(inner)
    raise TypeError(repr(t))


def _one_point(vars_: list[tuple[str, str]], items: list[Formula]):
    """Eliminate ∃v where some conjunct is v = t with v not free in t."""
    for vi, (name, sort) in enumerate(vars_):
        for ci, c in enumerate(items):
            if not (isinstance(c, Cmp) and c.op == "=="):
                continue
            repl = None
            if isinstance(c.left, TVar) and c.left.name == name:
                repl = c.right
            elif isinstance(c.right, TVar) and c.right.name == name:
                repl = c.left
            if repl is None or name in term_free_vars(repl):
                continue
            rest = items[:ci] + items[ci + 1 :]
            new_items = [substitute_map(g, {name: repl}) for g in rest]
            return vars_[:vi] + vars_[vi + 1 :], new_items, True
    return vars_, items, False


def _propagate_consts(items: list[Formula]) -> list[Formula]:
    """Within a conjunction, push v = c bindings into sibling conjuncts."""
    bindings: dict[str, TConst] = {}
    for c in items:
        if isinstance(c, Cmp) and c.op == "==":
            if isinstance(c.left, TVar) and isinstance(c.right, TConst):
                bindings.setdefault(c.left.name, c.right)
            elif isinstance(c.right, TVar) and isinstance(c.left, TConst):
                bindings.setdefault(c.right.name, c.left)
    if not bindings:
        return items
    out = []
    for c in items:
        keep = c
        if isinstance(c, Cmp) and c.op == "==":
            a, b = c.left, c.right
            if isinstance(a, TVar) and a.name in bindings and bindings[a.name] is b:
                out.append(c)
                continue
            if isinstance(b, TVar) and b.name in bindings and bindings[b.name] is a:
                out.append(c)
                continue
        live = dict(bindings)
        if isinstance(c, Cmp) and c.op == "==":
            # never rewrite the defining equation itself into c = c
            if isinstance(c.left, TVar) and c.left.name in live:
                live.pop(c.left.name)
            elif isinstance(c.right, TVar) and c.right.name in live:
                live.pop(c.right.name)
        keep = substitute_map(c, live)
        out.append(keep)
    return out


def _prune_unconstrained(vars_, items):
    """Drop a bound integer variable whose only constraints are
    disequalities and same-direction strict/non-strict bounds — always
    satisfiable over the integers, so the conjuncts say nothing."""

    def classify(g: Formula, x: str):
        # 'neq' | 'lo' | 'hi' on success, None when g doesn't fit
        neg_ = isinstance(g, Not)
        c = g.operand if neg_ else g
        if not isinstance(c, Cmp):
            return None
        if c.left == TVar(x) and x not in term_free_vars(c.right):
            side = "left"
        elif c.right == TVar(x) and x not in term_free_vars(c.left):
            side = "right"
        else:
            return None
        if c.op == "==":
            return "neq" if neg_ else None  # equalities belong to one-point
        lower_ops = {("<", "right"), (">", "left")}  # t < x  or  x > t
        is_lower = (c.op, side) in lower_ops
        if neg_:
            is_lower = not is_lower  # ¬(x < t) is a lower bound, etc.
        return "lo" if is_lower else "hi"

    changed = True
    while changed:
        changed = False
        for name, _sort in list(vars_):
            others = {n for n, _ in vars_ if n != name}
            touching = [g for g in items if name in free_vars(g)]
            if not touching:
                continue
            kinds = set()
            for g in touching:
                if free_vars(g) & others:
                    kinds = None
                    break
                kinds.add(classify(g, name))
            if kinds is None or None in kinds or {"lo", "hi"} <= kinds:
                continue
            items = [g for g in items if name not in free_vars(g)]
            vars_ = [(n, s) for n, s in vars_ if n != name]
            changed = True
    return vars_, items


def _simplify_pass(f: Formula, solver) -> Formula:
    if isinstance(f, (FTrue, FFalse)):
        return f
    if isinstance(f, Cmp):
        a = _fold_term(f.left)
        b = _fold_term(f.right)
        if isinstance(a, TConst) and isinstance(b, TConst):
            res = {
                "==": a.value == b.value,
                "<": a.value < b.value,
                ">": a.value > b.value,
            }[f.op]
            return TRUE if res else FALSE
        if f.op == "==" and a == b:
            return TRUE
        return Cmp(f.op, a, b)
    if isinstance(f, Not):
        inner = _simplify_pass(f.operand, solver)
        return neg(inner)
    if isinstance(f, Implies):
        left = _simplify_pass(f.left, solver)
        right = _simplify_pass(f.right, solver)
        if isinstance(left, FTrue):
            return right
        if isinstance(left, FFalse) or isinstance(right, FTrue):
            return TRUE
        if isinstance(right, FFalse):
            return neg(left)
        return Implies(left, right)
    if isinstance(f, And):
        items = [_simplify_pass(g, solver) for g in f.items]
        items = [i for g in items for i in (g.items if isinstance(g, And) else (g,))]
        if any(isinstance(g, FFalse) for g in items):
            return FALSE
        items = [g for g in items if not isinstance(g, FTrue)]
        items = _propagate_consts(items)
        items = [_simplify_pass(g, solver) for g in items]
        if any(isinstance(g, FFalse) for g in items):
            return FALSE
        items = [g for g in items if not isinstance(g, FTrue)]
        seen: dict[str, Formula] = {}
        for g in items:
            seen.setdefault(canon_key(g), g)
        items = list(seen.values())
        for g in items:
            if canon_key(neg(g)) in seen:
                return FALSE
        return conj(*items)
    if isinstance(f, Or):
        items = [_simplify_pass(g, solver) for g in f.items]
        items = [i for g in items for i in (g.items if isinstance(g, Or) else (g,))]
        if any(isinstance(g, FTrue) for g in items):
            return TRUE
        items = [g for g in items if not isinstance(g, FFalse)]
        seen = {}
        for g in items:
            seen.setdefault(canon_key(g), g)
        items = list(seen.values())
        for g in items:
            if canon_key(neg(g)) in seen:
                return TRUE
        return disj(*items)
    if isinstance(f, Exists):
        body = _simplify_pass(f.body, solver)
        if isinstance(body, Or):
            return _simplify_pass(
                disj(*(exists(list(f.vars), g) for g in body.items)), solver
            )
        vars_ = [(n, s) for n, s in f.vars if n in free_vars(body)]
        items = list(body.items) if isinstance(body, And) else [body]
        changed = True
        while changed and vars_:
            vars_, items, changed = _one_point(vars_, items)
        vars_, items = _prune_unconstrained(vars_, items)
        body = conj(*items)
        body = _simplify_pass(body, solver)
        vars_ = [(n, s) for n, s in vars_ if n in free_vars(body)]
        bound = {n for n, _ in vars_}
        if bound and isinstance(body, And):
            outside = [g for g in body.items if not (free_vars(g) & bound)]
            if outside:
                inside = [g for g in body.items if free_vars(g) & bound]
                return _simplify_pass(
                    conj(*outside, exists(vars_, conj(*inside))), solver
                )
        out = exists(vars_, body)
        if (
            solver is not None
            and isinstance(out, Exists)
            and not free_vars(out)
            and not applies_of(out)
        ):
            res = solver(out)
            if res == "sat":
                return TRUE
            if res == "unsat":
                return FALSE
        return out
    if isinstance(f, Forall):
        body = _simplify_pass(f.body, solver)
        vars_ = [(n, s) for n, s in f.vars if n in free_vars(body)]
        return forall(vars_, body)
    raise TypeError(repr(f))


def simplify(f: Formula, solver=None, max_rounds: int = 6) -> Formula:
    """Logically equivalent cleanup.

    Flattens connectives, folds constants, removes duplicate and
    complementary conjuncts/disjuncts (up to alpha-equivalence), drops
    unused binders, applies the one-point rule, and propagates constant
    equalities through conjunctions.  `solver`, when given, is a callable
    deciding closed quantified subformulas ('sat'/'unsat'/'unknown') and
    enabling disjunct-subsumption dropping; unknown answers skip the pass.
    """
    cur = f
    for _ in range(max_rounds):
        nxt = _simplify_pass(cur, solver)
        if nxt == cur:
            break
        cur = nxt
    if solver is not None and isinstance(cur, Or):
        cur = _subsume_disjuncts(cur, solver)
    return cur


def _subsume_disjuncts(f: Or, solver) -> Formula:
    items = list(f.items)
    # offer the most complex disjuncts first so the minimal form survives
    order = sorted(range(len(items)), key=lambda i: -len(canon_key(items[i])))
    dropped: set[int] = set()
    for i in order:
        if len(items) - len(dropped) <= 1:
            break
        rest = [items[j] for j in range(len(items)) if j != i and j not in dropped]
        # drop items[i] when it implies the rest: d ∧ ¬(rest) unsatisfiable
        if solver(conj(items[i], neg(disj(*rest)))) == "unsat":
            dropped.add(i)
    return disj(*(items[j] for j in range(len(items)) if j not in dropped))


def to_dnf(f: Formula, cap: int = 64) -> list[list[Formula]] | None:
    """Disjunctive normal form as conjunct lists.

    Quantified subformulas, negations, and comparisons are treated as
    literals.  Returns None when the result would exceed `cap` disjuncts.
    """
    if isinstance(f, FFalse):
        return []
    if isinstance(f, FTrue):
        return [[]]
    if isinstance(f, Or):
        out: list[list[Formula]] = []
        for g in f.items:
            sub = to_dnf(g, cap)
            if sub is None:
                return None
            out.extend(sub)
            if len(out) > cap:
                return None
        return out
    if isinstance(f, And):
        out = [[]]
        for g in f.items:
            sub = to_dnf(g, cap)
            if sub is None:
                return None
            out = [a + b for a in out for b in sub]
            if len(out) > cap:
                return None
        return out
    return [[f]]


def from_dnf(clauses: list[list[Formula]]) -> Formula:
    return disj(*(conj(*c) for c in clauses))


# --- evaluation ---


class EvalUndef(Exception):
    """A procedure-symbol application hit an input outside the I/O table."""


def eval_term(t: Term, read, funcs, domain) -> int | lang.ArrVal:
    if isinstance(t, TConst):
        return t.value
    if isinstance(t, TVar):
        return read(t.name)
    if isinstance(t, TSelect):
        arr = eval_term(t.array, read, funcs, domain)
        idx = tuple(eval_term(i, read, funcs, domain) for i in t.index)
        if not isinstance(arr, lang.ArrVal):
            raise TypeError(f"select on non-array value {arr!r}")
        return arr.get(idx)
    if isinstance(t, TStore):
        arr = eval_term(t.array, read, funcs, domain)
        idx = tuple(eval_term(i, read, funcs, domain) for i in t.index)
        val = eval_term(t.value, read, funcs, domain)
        if not isinstance(arr, lang.ArrVal):
            raise TypeError(f"store on non-array value {arr!r}")
        return arr.set(idx, val)
    if isinstance(t, TApply):
        args = tuple(eval_term(a, read, funcs, domain) for a in t.args)
        val = funcs(t.name, args)
        if val is None:
            raise EvalUndef(f"{t.name}{args}")
        return val
    if isinstance(t, TBin):
        a = eval_term(t.left, read, funcs, domain)
        b = eval_term(t.right, read, funcs, domain)
        return {
            "+": lambda: a + b,
            "-": lambda: a - b,
            "*": lambda: a * b,
            "/": lambda: ediv(a, b),
            "%": lambda: emod(a, b),
        }[t.op]()
    if isinstance(t, TBoolInt):
        return 1 if eval_formula_env(t.formula, read, funcs, domain) else 0
    raise TypeError(repr(t))


def eval_formula_env(f: Formula, read, funcs, domain) -> bool:
    """Evaluate with `read(name) -> value`, `funcs(name, args) -> int|None`.

    Quantifiers range over `domain(sort)` — a finite probe set, so the
    result is an approximation for unbounded universals; callers that need
    exactness must keep quantified formulas out (or accept finite support).
    """
    if isinstance(f, FTrue):
        return True
    if isinstance(f, FFalse):
        return False
    if isinstance(f, Cmp):
        a = eval_term(f.left, read, funcs, domain)
        b = eval_term(f.right, read, funcs, domain)
        if isinstance(a, lang.ArrVal) or isinstance(b, lang.ArrVal):
            if f.op == "==":
                return a.canon() == b.canon()
            raise TypeError("ordered comparison on arrays")
        return {"==": a == b, "<": a < b, ">": a > b}[f.op]
    if isinstance(f, Not):
        return not eval_formula_env(f.operand, read, funcs, domain)
    if isinstance(f, And):
        return all(eval_formula_env(g, read, funcs, domain) for g in f.items)
    if isinstance(f, Or):
        return any(eval_formula_env(g, read, funcs, domain) for g in f.items)
    if isinstance(f, Implies):
        return (not eval_formula_env(f.left, read, funcs, domain)) or eval_formula_env(
            f.right, read, funcs, domain
        )
    if isinstance(f, (Exists, Forall)):
        want_all = isinstance(f, Forall)

        def assigns(vars_left: list[tuple[str, str]], env: dict[str, object]):
            if not vars_left:
                yield env
                return
            (name, sort), rest = vars_left[0], vars_left[1:]
            for v in domain(sort):
                yield from assigns(rest, {**env, name: v})

        def read2(env):
            return lambda n: env[n] if n in env else read(n)

        results = (
            eval_formula_env(f.body, read2(env), funcs, domain)
            for env in assigns(list(f.vars), {})
        )
        return all(results) if want_all else any(results)
    raise TypeError(repr(f))


def eval_formula(f: Formula, env: dict[str, object], funcs=None, probe_ints=None) -> bool:
    """Convenience wrapper: env maps names to ints/ArrVals.

    Quantified integer variables range over `probe_ints` (default: all
    indices touched by env's arrays plus a small window around 0).
    """
    if probe_ints is None:
        touched: set[int] = set()
        for v in env.values():
            if isinstance(v, lang.ArrVal):
                for idx in v.entries:
                    touched.update(idx)
        probe_ints = sorted(touched | set(range(-3, 4)) | {min(touched, default=0) - 1, max(touched, default=0) + 1})

    def domain(sort: str):
        if sort == SORT_INT:
            return probe_ints
        raise TypeError("cannot enumerate array-sorted quantifier")

    def read(name: str):
        if name not in env:
            raise KeyError(f"unbound variable {name}")
        return env[name]

    def funcs_fn(name, args):
        if funcs is None:
            return None
        return funcs(name, args)

    return eval_formula_env(f, read, funcs_fn, domain)
