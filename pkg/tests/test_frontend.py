"""Parser, validator, and pretty-printer behavior."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opcheck import formula, frontend, lang

from conftest import corpus_source


def diag_kinds(source: str) -> set[str]:
    return {d.kind for d in frontend.diagnostics(frontend.parse_library(source))}


# --- round trips ---


def test_corpus_pretty_print_round_trip(corpus):
    for name, lib in corpus.items():
        again = frontend.load_library(frontend.pretty_print(lib))
        assert again == lib, name


def test_corpus_parses_clean(corpus):
    for name in corpus:
        lib = frontend.parse_library(corpus_source(name))
        assert frontend.diagnostics(lib) == [], name


def test_parsed_bodies_contain_no_verification_statements(corpus):
    for lib in corpus.values():
        for p in lib.procedures:
            for s in lang.walk_stmts(p.body):
                assert not isinstance(s, (lang.Havoc, lang.Assume, lang.Assert))


# --- pinned parses ---


def test_cached_factorial_declarations():
    lib = frontend.load_library(corpus_source("factcache"))
    assert [(g.name, g.kind, g.init) for g in lib.globals] == [
        ("g", lang.KIND_SCALAR, -1),
        ("lastN", lang.KIND_SCALAR, 0),
    ]
    (p,) = lib.procedures
    assert p.name == "factCache"
    assert p.params == ("n",)
    assert p.return_var == "result"
    want = frontend.parse_formula_text(
        "(g == -1 && lastN == 0) || g == lastN * factCache(lastN - 1)"
    )
    assert formula.canon_key(p.invariant) == formula.canon_key(want)


def test_array_global_default_value():
    lib = frontend.load_library(corpus_source("factarray"))
    arrays = [g for g in lib.globals if g.kind != lang.KIND_SCALAR]
    assert arrays and all(g.init == 0 for g in arrays)


def test_minimal_program_shape():
    lib = frontend.load_library(
        "proc id(x) invariant true; { result := x; return result; }"
    )
    (p,) = lib.procedures
    assert p.params == ("x",)
    body = lang.seq_list(p.body)
    assert isinstance(body[0], lang.Assign)
    assert isinstance(body[-1], lang.Return)
    assert p.invariant == formula.TRUE


def test_locals_of_excludes_formals_and_globals():
    lib = frontend.load_library(corpus_source("factcache"))
    (p,) = lib.procedures
    assert p.locals_of(lib.global_names()) == {"t1", "t2", "result"}


# --- validation diagnostics ---


def test_assignment_to_formal_rejected():
    src = "proc f(n) invariant true; { n := 1; result := n; return result; }"
    assert "assignment-to-formal" in diag_kinds(src)


def test_call_result_into_formal_rejected():
    src = """
proc f(n) invariant true; { n := f(0); result := n; return result; }
"""
    assert "assignment-to-formal" in diag_kinds(src)


def test_invariant_must_only_mention_globals():
    src = """
var g: int := 0;
proc f(n) invariant result == 0; { result := g; return result; }
"""
    assert "invariant-scope" in diag_kinds(src)


def test_duplicate_global_rejected():
    src = """
var g: int := 0;
var g: int := 1;
proc f(n) invariant true; { result := g; return result; }
"""
    with pytest.raises(frontend.FrontendError, match="redeclared"):
        frontend.parse_library(src)


def test_arity_mismatch_rejected():
    src = "proc f(n) invariant true; { result := f(1, 2); return result; }"
    assert "arity-mismatch" in diag_kinds(src)


def test_undeclared_procedure_rejected():
    src = "proc f(n) invariant true; { result := h(1); return result; }"
    assert "undeclared-procedure" in diag_kinds(src)


def test_return_must_come_last():
    src = "proc f(n) invariant true; { return n; result := 1; }"
    assert "return-not-last" in diag_kinds(src)


def test_missing_return_rejected():
    src = "proc f(n) invariant true; { result := n; }"
    assert "missing-return" in diag_kinds(src)


def test_call_embedded_in_expression_fails_to_parse():
    src = "proc f(n) invariant true; { result := 1 + f(0); return result; }"
    with pytest.raises(frontend.FrontendError):
        frontend.parse_library(src)


def test_call_in_expression_diagnostic_on_constructed_tree():
    body = lang.seq_of(
        [
            lang.Assign(lang.LValue("result"), lang.Apply("f", (lang.Const(0),))),
            lang.Return("result"),
        ]
    )
    lib = lang.Library(
        globals=(),
        procedures=(lang.Procedure("f", ("n",), body, "result", formula.TRUE),),
    )
    assert any(d.kind == "call-in-expression" for d in frontend.diagnostics(lib))


def test_validate_raises_with_diagnostics():
    with pytest.raises(frontend.ValidationError) as exc:
        frontend.load_library("proc f(n) invariant true; { result := n; }")
    assert any(d.kind == "missing-return" for d in exc.value.diagnostics)


def test_syntax_error_reports_position():
    with pytest.raises(frontend.FrontendError):
        frontend.parse_library("proc f(n { return n; }")


# --- formula text round trip ---

names = st.sampled_from(["x", "y", "g", "lastN"])


def _terms():
    base = st.one_of(
        st.integers(min_value=-20, max_value=20).map(formula.TConst),
        names.map(formula.TVar),
    )

    def extend(children):
        return st.builds(
            formula.TBin, st.sampled_from(["+", "-", "*"]), children, children
        )

    return st.recursive(base, extend, max_leaves=5)


def _formulas():
    atoms = st.builds(formula.Cmp, st.sampled_from(["==", "<", ">"]), _terms(), _terms())

    def extend(children):
        # the smart constructors mirror the parser's normalizations
        # (flattened conjunction, cancelled double negation)
        return st.one_of(
            st.builds(formula.conj, children, children),
            st.builds(formula.disj, children, children),
            st.builds(formula.neg, children),
        )

    return st.recursive(atoms, extend, max_leaves=4)


@given(_formulas())
@settings(max_examples=80, deadline=None)
def test_formula_source_round_trip(f):
    again = frontend.parse_formula_text(formula.to_source(f))
    assert formula.canon_key(again) == formula.canon_key(f)


@given(_formulas())
@settings(max_examples=60, deadline=None)
def test_quantified_formula_source_round_trip(f):
    q = formula.exists([("x", formula.SORT_INT)], f)
    again = frontend.parse_formula_text(formula.to_source(q))
    assert formula.canon_key(again) == formula.canon_key(q)
