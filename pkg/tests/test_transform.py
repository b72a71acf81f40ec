"""Call-elimination transform: self-assign splitting, call sites, havocs."""

from __future__ import annotations

from opcheck import formula, frontend, lang, transform

from conftest import GOLDEN_DIR, corpus_library


def parse_body(src: str) -> lang.Stmt:
    lib = frontend.parse_library(f"proc f(n) invariant true; {{ {src} return result; }}")
    return lib.procedures[0].body


def stmts_of(kind, body):
    return [s for s in lang.walk_stmts(body) if isinstance(s, kind)]


def assume_parts(assume):
    """(frame, equation) of a call-site assumption; with a trivial
    invariant the conjunction collapses to the bare equation."""
    f = assume.formula
    if isinstance(f, formula.And):
        return formula.conj(*f.items[:-1]), f.items[-1]
    return formula.TRUE, f


def transformed(name: str, proc: str | None = None) -> transform.TransformedBody:
    lib = corpus_library(name)
    p = lib.procedure(proc) if proc else lib.procedures[0]
    inv = p.invariant if p.invariant is not None else formula.TRUE
    return transform_body_of(lib, p, inv)


def transform_body_of(lib, p, inv):
    return transform.transform_body(p, inv, lib)


# --- self-assignment splitting ---


def test_self_assign_goes_through_temp():
    body = parse_body("x := x + 1; result := x;")
    flat = lang.seq_list(transform.normalize_self_assign(body))
    first, second = flat[0], flat[1]
    assert isinstance(first, lang.Assign) and isinstance(second, lang.Assign)
    temp = first.target.name
    assert temp not in ("x", "result")
    assert first.rhs == lang.Binary("+", lang.Var("x"), lang.Const(1))
    assert second.target == lang.LValue("x") and second.rhs == lang.Var(temp)


def test_array_cell_self_assign_goes_through_temp():
    src = """
var a: [int] int := 0;
proc f(n) invariant true; { a[n] := a[n] + 1; result := a[n]; return result; }
"""
    lib = frontend.load_library(src)
    got = transform.normalize_self_assign(lib.procedures[0].body)
    flat = lang.seq_list(got)
    first, second = flat[0], flat[1]
    assert isinstance(first.target, lang.LValue) and not first.target.index
    assert second.target.name == "a" and second.target.index
    assert isinstance(second.rhs, lang.Var) and second.rhs.name == first.target.name


def test_non_self_assign_left_alone():
    body = parse_body("x := n + 1; result := x;")
    assert transform.normalize_self_assign(body) == body


def test_normalize_is_idempotent():
    body = parse_body("x := x + 1; y := y * 2; result := x + y;")
    once = transform.normalize_self_assign(body)
    assert transform.normalize_self_assign(once) == once


def test_fresh_temps_avoid_existing_names():
    body = parse_body("tmp1 := 0; x := x + tmp1; result := x;")
    flat = lang.seq_list(transform.normalize_self_assign(body))
    introduced = flat[1].target.name
    assert introduced != "tmp1"


# --- initial-state formula ---


def test_init_formula_pins_scalars():
    lib = corpus_library("factcache")
    got = transform.init_formula(lib)
    want = frontend.parse_formula_text("g == -1 && lastN == 0")
    assert got == want


def test_init_formula_quantifies_arrays():
    lib = corpus_library("factarray")
    got = transform.init_formula(lib)
    assert any(isinstance(c, formula.Forall) for c in getattr(got, "items", (got,)))


# --- call elimination ---


def test_transformed_body_matches_golden():
    tb = transformed("factcache")
    got = frontend.pretty_print_stmt(tb.body)
    want = (GOLDEN_DIR / "factcache_tb.txt").read_text()
    assert got == want


def test_sites_in_body_order_end_last():
    tb = transformed("factcache")
    assert tb.call_sites == ("call1", "end")
    asserts = stmts_of(lang.Assert, tb.body)
    assert [a.site for a in asserts] == ["call1", "end"]


def test_no_calls_or_returns_survive(corpus):
    for lib in corpus.values():
        for p in lib.procedures:
            inv = p.invariant if p.invariant is not None else formula.TRUE
            tb = transform.transform_body(p, inv, lib)
            assert not stmts_of(lang.Call, tb.body)
            assert not stmts_of(lang.Return, tb.body)


def test_assert_havoc_assume_counts(corpus):
    for name, lib in corpus.items():
        for p in lib.procedures:
            inv = p.invariant if p.invariant is not None else formula.TRUE
            tb = transform.transform_body(p, inv, lib)
            calls = len(stmts_of(lang.Call, p.body))
            returns = len(stmts_of(lang.Return, p.body))
            asserts = stmts_of(lang.Assert, tb.body)
            havocs = stmts_of(lang.Havoc, tb.body)
            assumes = stmts_of(lang.Assume, tb.body)
            assert len(asserts) == calls + returns, (name, p.name)
            assert len(havocs) == calls * len(lib.globals), (name, p.name)
            assert len(assumes) == calls, (name, p.name)
            assert len(tb.call_sites) == calls + returns, (name, p.name)


def test_every_global_havocked_at_each_call_site():
    lib = corpus_library("factcache")
    tb = transformed("factcache")
    havoc_names = [h.name for h in stmts_of(lang.Havoc, tb.body)]
    assert havoc_names == [g.name for g in lib.globals]


def test_call_site_assume_relates_result_to_symbol():
    tb = transformed("factcache")
    (assume,) = stmts_of(lang.Assume, tb.body)
    assert isinstance(assume.formula, formula.And)
    _, equation = assume_parts(assume)
    assert equation == formula.eq(
        formula.TVar("t2"), formula.TApply("factCache", (formula.TVar("t1"),))
    )


def test_non_local_arguments_are_localized():
    src = """
var g: int := 0;
proc f(n) invariant true; { result := f(g); return result; }
"""
    lib = frontend.load_library(src)
    p = lib.procedures[0]
    tb = transform.transform_body(p, p.invariant, lib)
    flat = lang.seq_list(tb.body)
    first = flat[0]
    assert isinstance(first, lang.Assign) and first.rhs == lang.Var("g")
    temp = first.target.name
    (assume,) = stmts_of(lang.Assume, tb.body)
    _, equation = assume_parts(assume)
    assert equation.right == formula.TApply("f", (formula.TVar(temp),))


def test_constant_arguments_are_localized():
    src = "proc f(n) invariant true; { result := f(7); return result; }"
    lib = frontend.load_library(src)
    p = lib.procedures[0]
    tb = transform.transform_body(p, p.invariant, lib)
    first = lang.seq_list(tb.body)[0]
    assert isinstance(first, lang.Assign) and first.rhs == lang.Const(7)


def test_local_variable_arguments_pass_through():
    tb = transformed("factcache")
    # t1 is a local, so the call argument stays t1 with no extra copy
    (assume,) = stmts_of(lang.Assume, tb.body)
    _, equation = assume_parts(assume)
    assert equation.right.args == (formula.TVar("t1"),)


def test_cross_procedure_call_uses_supplied_invariant():
    lib = corpus_library("mcm")
    mcm = lib.procedure("mcm")
    tb = transform.transform_body(mcm, mcm.invariant, lib)
    callees = set()
    for assume in stmts_of(lang.Assume, tb.body):
        frame, equation = assume_parts(assume)
        callees.add(equation.right.name)
        # callee-independent: the assumed frame is always the supplied invariant
        assert formula.canon_key(frame) == formula.canon_key(mcm.invariant)
    assert "chooseSplit" in callees
    for a in stmts_of(lang.Assert, tb.body):
        assert formula.canon_key(a.formula) == formula.canon_key(mcm.invariant)


def test_trivial_invariant_transform_keeps_shape():
    tb = transformed("identity")
    assert tb.call_sites == ("end",)
    (a,) = stmts_of(lang.Assert, tb.body)
    assert a.formula == formula.TRUE
