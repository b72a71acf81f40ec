"""Logic IR: substitution, normal forms, simplification, evaluation."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opcheck import formula, frontend, lang, smtlib
from opcheck.formula import (
    SORT_INT,
    Cmp,
    Exists,
    Not,
    TApply,
    TBin,
    TConst,
    TVar,
    canon_key,
    conj,
    disj,
    eq,
    eval_formula,
    exists,
    neg,
    nnf,
    simplify,
    skolemize_positive,
    substitute_map,
)

from conftest import corpus_library

x, y, g = TVar("x"), TVar("y"), TVar("g")


def F(text: str) -> formula.Formula:
    return frontend.parse_formula_text(text)


# --- smart constructors ---


def test_conj_flattens_and_short_circuits():
    a, b = eq(x, TConst(1)), eq(y, TConst(2))
    assert conj(a, conj(b, a)) == formula.And((a, b, a))
    assert conj(a, formula.FALSE, b) == formula.FALSE
    assert conj(formula.TRUE, a) == a


def test_disj_flattens_and_short_circuits():
    a, b = eq(x, TConst(1)), eq(y, TConst(2))
    assert disj(a, disj(b, a)) == formula.Or((a, b, a))
    assert disj(a, formula.TRUE) == formula.TRUE
    assert disj(formula.FALSE, a) == a


def test_neg_cancels():
    a = eq(x, TConst(1))
    assert neg(neg(a)) == a
    assert neg(formula.TRUE) == formula.FALSE


# --- substitution ---


def test_substitute_replaces_free_occurrences():
    f = conj(eq(x, y), eq(y, TConst(3)))
    got = substitute_map(f, {"y": TConst(7)})
    assert got == conj(eq(x, TConst(7)), eq(TConst(7), TConst(3)))


def test_substitute_spares_bound_occurrences():
    f = exists([("x", SORT_INT)], eq(x, y))
    got = substitute_map(f, {"x": TConst(9)})
    assert got == f


def test_substitute_avoids_capture():
    # (exists x. x == y)[y := x] must not bind the incoming x
    f = exists([("x", SORT_INT)], eq(x, y))
    got = substitute_map(f, {"y": x})
    assert isinstance(got, Exists)
    (bound, _), = got.vars
    assert bound != "x"
    assert got.body == eq(TVar(bound), x)


def test_rename_free_tags_variables_but_not_application_symbols():
    f = eq(TVar("f"), TApply("f", (TVar("f"),)))
    got = formula.rename_free(f, "a")
    assert got == eq(TVar("f.a"), TApply("f", (TVar("f.a"),)))


# --- normal forms ---


def test_nnf_pushes_negation_to_atoms():
    f = neg(conj(eq(x, TConst(0)), disj(eq(y, TConst(1)), neg(eq(g, TConst(2))))))
    got = nnf(f)
    assert got == disj(
        Not(eq(x, TConst(0))), conj(Not(eq(y, TConst(1))), eq(g, TConst(2)))
    )


def test_nnf_dualizes_quantifiers():
    f = neg(exists([("x", SORT_INT)], eq(x, y)))
    assert nnf(f) == formula.forall([("x", SORT_INT)], Not(eq(x, y)))


def test_skolemize_positive_strips_existentials():
    f = exists([("x", SORT_INT)], eq(x, y))
    got = skolemize_positive(f, formula.NameGen({"x", "y"}))
    assert "y" in formula.free_vars(got)
    assert not any(isinstance(s, Exists) for s in _subformulas(got))


def _subformulas(f):
    out, stack = [], [f]
    while stack:
        cur = stack.pop()
        out.append(cur)
        for attr in ("items", "body", "operand", "left", "right"):
            v = getattr(cur, attr, None)
            if isinstance(v, formula.Formula):
                stack.append(v)
            elif isinstance(v, tuple):
                stack.extend(i for i in v if isinstance(i, formula.Formula))
    return out


def test_lift_existentials_hoists_nested_binders():
    inner = exists([("x", SORT_INT)], eq(x, y))
    f = conj(inner, eq(g, TConst(1)))
    binders, body = formula.lift_existentials(f)
    assert [s for _, s in binders] == [SORT_INT]
    assert not any(isinstance(s, Exists) for s in _subformulas(body))
    (lifted, _), = binders
    assert body == conj(eq(TVar(lifted), y), eq(g, TConst(1)))


# --- simplification (solver-free pins) ---


def test_simplify_drops_binder_constrained_only_by_itself():
    f = exists([("result", SORT_INT)], eq(g, TConst(-1)))
    assert simplify(f) == eq(g, TConst(-1))


def test_simplify_one_point_rule():
    f = exists([("x", SORT_INT)], conj(eq(x, TConst(5)), eq(y, TBin("+", x, TConst(1)))))
    assert simplify(f) == eq(y, TConst(6))


def test_simplify_removes_duplicate_disjuncts():
    a = eq(x, TConst(1))
    assert simplify(formula.Or((a, a))) == a


def test_simplify_removes_complementary_conjuncts():
    a = eq(x, TConst(1))
    assert simplify(conj(a, neg(a))) == formula.FALSE


def test_simplify_folds_constants():
    assert simplify(eq(TBin("+", TConst(2), TConst(2)), TConst(4))) == formula.TRUE


def test_simplify_prunes_unconstrained_bound_var():
    # exists k. k < y  holds for every y over the integers
    f = exists([("k", SORT_INT)], Cmp("<", TVar("k"), y))
    assert simplify(f) == formula.TRUE


def test_simplify_is_idempotent_on_corpus_invariants():
    for name in ("factcache", "factsingle", "mcm"):
        lib = corpus_library(name)
        for p in lib.procedures:
            s1 = simplify(p.invariant)
            assert simplify(s1) == s1


# --- simplification (solver-backed) ---


def test_simplify_subsumption_drops_stronger_disjunct(solver):
    runner = smtlib.QueryRunner(solver, corpus_library("identity"))
    strong = conj(Cmp("<", TConst(0), x), Cmp("<", x, TConst(10)))
    weak = Cmp("<", TConst(0), x)
    got = simplify(disj(strong, weak), runner.decide)
    assert got == weak


# --- evaluation ---


def test_eval_euclidean_division_matches_language():
    f = F("x / y == 2 && x % y == 1")
    assert eval_formula(f, {"x": -7, "y": -4})
    assert lang.ediv(-7, -4) == 2 and lang.emod(-7, -4) == 1


def test_eval_quantifier_enumerates_probe_window():
    f = exists([("k", SORT_INT)], eq(TVar("k"), x))
    assert eval_formula(f, {"x": 2})
    assert not eval_formula(f, {"x": 50})  # outside the default window
    assert eval_formula(f, {"x": 50}, probe_ints=range(45, 55))


def test_eval_unbound_variable_raises():
    with pytest.raises(KeyError):
        eval_formula(eq(x, TConst(0)), {})


def test_eval_application_uses_function_table():
    f = eq(TApply("f", (TConst(3),)), TConst(6))
    assert eval_formula(f, {}, funcs=lambda n, a: {(3,): 6}.get(a))
    with pytest.raises(formula.EvalUndef):
        eval_formula(f, {}, funcs=lambda n, a: None)


def test_eval_array_select_and_store():
    arr = lang.ArrVal(default=0).set((2,), 5)
    f = F("a[2] == 5 && a[3] == 0")
    assert eval_formula(f, {"a": arr})


def test_eval_embedded_boolean_is_zero_or_one():
    t = formula.TBoolInt(eq(x, TConst(1)))
    f = eq(t, TConst(1))
    assert eval_formula(f, {"x": 1})
    assert not eval_formula(f, {"x": 2})


# --- properties ---


@st.composite
def _envs(draw):
    return {n: draw(st.integers(-5, 5)) for n in ("x", "y", "g")}


def _qf_formulas():
    terms = st.recursive(
        st.one_of(
            st.integers(-8, 8).map(TConst),
            st.sampled_from(["x", "y", "g"]).map(TVar),
        ),
        lambda c: st.builds(TBin, st.sampled_from(["+", "-", "*"]), c, c),
        max_leaves=4,
    )
    atoms = st.builds(Cmp, st.sampled_from(["==", "<", ">"]), terms, terms)
    return st.recursive(
        atoms,
        lambda c: st.one_of(
            st.builds(conj, c, c), st.builds(disj, c, c), st.builds(neg, c)
        ),
        max_leaves=4,
    )


@given(_qf_formulas(), _envs())
@settings(max_examples=200, deadline=None)
def test_simplify_preserves_truth(f, env):
    assert eval_formula(simplify(f), env) == eval_formula(f, env)


@given(_qf_formulas(), _envs())
@settings(max_examples=200, deadline=None)
def test_nnf_preserves_truth(f, env):
    assert eval_formula(nnf(f), env) == eval_formula(f, env)


@given(_qf_formulas())
@settings(max_examples=100, deadline=None)
def test_canon_key_stable_under_reconstruction(f):
    assert canon_key(f) == canon_key(f)
    assert formula.to_sexpr(f) == formula.to_sexpr(f)
