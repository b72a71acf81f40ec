"""Purity checking: the impurity-witness approach and the existential approach.

Impurity-witness (default).  From POSTVC(P, inv) build two formulas and
check each for satisfiability on its own:

    notVc — the negated verification condition.  ¬vc is a disjunction of
        ``pre ∧ ¬(invariant)`` per assert site; generated existentials
        sit positively and are skolemized away to fresh free constants.
    twin  — post_α ∧ post_β ∧ n_α = n_β ∧ r_α ≠ r_β: two runs from
        arbitrary invariant states, equal arguments, different results.
        Every free variable is copied with an ``.a`` / ``.b`` tag;
        procedure symbols are shared between the copies.

Both unsatisfiable certifies purity.  A satisfiable notVc is an
invariant violation.  A satisfiable twin is conservative: the model's
argument values are replayed through the reference interpreter, and
only a reproduced concrete collision upgrades the verdict from
"too weak to certify" to a definite impurity witness.

Globals that no procedure ever writes keep their declared initial value
in every reachable state, so both queries also assume that pin — for
the original name and for every snapshot or twin copy of it.  This
matters for procedures that only read a configuration array: the call
rule havocs all globals, and without the pin the havoc invents writes
the program cannot perform.

Existential approach (behind a flag).  Asserts the universal closure of
``vc ∧ (post ⇒ r = p(n̄))`` with p uninterpreted; satisfiable means some
total function matches every run.  Kept literal — no pins, no
skolemization — as the baseline semantics; realistic inputs are
expected to come back unknown or time out.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from . import formula, interp, lang, smtlib, vcgen
from .formula import (
    Forall,
    Formula,
    NameGen,
    TApply,
    TConst,
    TSelect,
    TVar,
    conj,
    disj,
    eq,
    neg,
)

PURE_CERTIFIED = "PureCertified"
NOT_CERTIFIED = "NotCertified"
UNKNOWN = "Unknown"

INVARIANT_VIOLATION = "InvariantViolation"
IMPURITY_WITNESS = "ImpurityWitness"
TOO_WEAK = "TooWeakToCertify"


@dataclass(frozen=True)
class QueryStat:
    label: str
    answer: str
    time_s: float


@dataclass(frozen=True)
class SolverStats:
    solver: str
    queries: tuple[QueryStat, ...] = ()

    @property
    def query_count(self) -> int:
        return len(self.queries)

    @property
    def total_time_s(self) -> float:
        return sum(q.time_s for q in self.queries)


@dataclass(frozen=True)
class Verdict:
    procedure: str
    kind: str  # PureCertified | NotCertified | Unknown
    approach: str  # iw | ea
    subkind: str = ""  # InvariantViolation | ImpurityWitness | TooWeakToCertify
    reason: str = ""
    model: dict = field(default_factory=dict)
    witness: dict = field(default_factory=dict)
    stats: SolverStats | None = None
    invariant: str = ""

    def as_dict(self, with_times: bool = True) -> dict:
        out: dict = {
            "procedure": self.procedure,
            "verdict": self.kind,
            "approach": self.approach,
        }
        if self.subkind:
            out["kind"] = self.subkind
        if self.reason:
            out["reason"] = self.reason
        if self.model:
            out["model"] = self.model
        if self.witness:
            out["witness"] = self.witness
        if self.invariant:
            out["invariant"] = self.invariant
        if self.stats is not None:
            out["solver"] = self.stats.solver
            out["queries"] = [
                {"label": q.label, "answer": q.answer}
                | ({"time_s": round(q.time_s, 4)} if with_times else {})
                for q in self.stats.queries
            ]
        return out


class CheckerError(Exception):
    pass


# --- frozen-global pins ---


def _unwritten_globals(lib: lang.Library) -> dict[str, lang.GlobalDecl]:
    written = lib.written_globals()
    return {g.name: g for g in lib.globals if g.name not in written}


def frozen_global_axioms(lib: lang.Library, formulas) -> list[Formula]:
    """Pin every copy of a never-written global to its initial value."""
    unwritten = _unwritten_globals(lib)
    if not unwritten:
        return []
    frees: set[str] = set()
    for f in formulas:
        frees |= formula.free_vars(f)
    gen = NameGen(frees | set(unwritten))
    axioms: list[Formula] = []
    for name in sorted(frees):
        decl = unwritten.get(formula.origin(name))
        if decl is None:
            continue
        if decl.kind == lang.KIND_SCALAR:
            axioms.append(eq(TVar(name), TConst(decl.init)))
        elif decl.kind == lang.KIND_ARRAY1:
            k = gen.fresh("k")
            axioms.append(
                Forall(
                    ((k, formula.SORT_INT),),
                    eq(TSelect(TVar(name), (TVar(k),)), TConst(decl.init)),
                )
            )
        else:
            k, j = gen.fresh("k"), gen.fresh("j")
            axioms.append(
                Forall(
                    ((k, formula.SORT_INT), (j, formula.SORT_INT)),
                    eq(TSelect(TVar(name), (TVar(k), TVar(j))), TConst(decl.init)),
                )
            )
    return axioms


# --- formula construction ---


def iw_site_checks(
    p: lang.Procedure, inv: Formula, lib: lang.Library
) -> list[tuple[str, Formula]]:
    """One satisfiability formula per assert site: the site's precondition
    with the invariant denied, generated existentials skolemized away.
    The site formulas' disjunction is equisatisfiable with ¬vc, but each
    site alone is a far easier query and names the violation."""
    res = vcgen.postvc(p, inv, lib)
    gen = NameGen(_all_names(res))
    out = []
    for site, ob in res.per_site_obligations:
        negated = conj(ob.left, neg(ob.right))  # pre ∧ ¬goal of pre ⇒ goal
        out.append((site, formula.skolemize_positive(formula.nnf(negated), gen)))
    return out


def build_twin(p: lang.Procedure, inv: Formula, lib: lang.Library) -> Formula:
    """Two copies of the exit relation sharing procedure symbols, equal
    arguments, required to disagree on the result."""
    res = vcgen.postvc(p, inv, lib)
    lift_gen = NameGen(_all_names(res))
    _, post_body = formula.lift_existentials(res.post, lift_gen)
    post_a = formula.rename_free(post_body, "a")
    post_b = formula.rename_free(post_body, "b")
    args_eq = conj(
        *(eq(TVar(f"{x}.a"), TVar(f"{x}.b")) for x in p.params)
    )
    r = p.return_var
    return conj(post_a, post_b, args_eq, neg(eq(TVar(f"{r}.a"), TVar(f"{r}.b"))))


def build_iw(
    p: lang.Procedure, inv: Formula, lib: lang.Library
) -> tuple[Formula, Formula]:
    """The two impurity-witness formulas (notVc, twin) for one procedure."""
    not_vc = disj(*(phi for _, phi in iw_site_checks(p, inv, lib)))
    return not_vc, build_twin(p, inv, lib)


def _all_names(res: vcgen.PostVcResult) -> set[str]:
    names = set(formula.free_vars(res.post)) | set(formula.free_vars(res.vc))
    for f in (res.post, res.vc):
        names.update(n for n, _ in formula._all_binders(f))
    return names


def build_ea(p: lang.Procedure, inv: Formula, lib: lang.Library) -> Formula:
    """The existential-approach formula: the universal closure of
    vc ∧ (post ⇒ r = p(n̄)), procedure symbols left free."""
    res = vcgen.postvc(p, inv, lib)
    r = p.return_var
    app = TApply(p.name, tuple(TVar(x) for x in p.params))
    body = conj(res.vc, formula.Implies(res.post, eq(TVar(r), app)))
    frees = sorted(formula.free_vars(body))
    if not frees:
        return body
    sorts = []
    for name in frees:
        sorts.append((name, _sort_of_name(name, lib)))
    return Forall(tuple(sorts), body)


def _sort_of_name(name: str, lib: lang.Library) -> str:
    base = formula.origin(name)
    try:
        decl = lib.global_decl(base)
    except KeyError:
        return formula.SORT_INT
    return {
        lang.KIND_SCALAR: formula.SORT_INT,
        lang.KIND_ARRAY1: formula.SORT_ARR1,
        lang.KIND_ARRAY2: formula.SORT_ARR2,
    }[decl.kind]


# --- oracle replay ---


class OracleReplayer:
    """Replays solver-model arguments through the interpreter, hunting a
    concrete same-input different-output collision."""

    def __init__(self, lib: lang.Library, seed: int = 0, fuel: int = 10**6):
        self.lib = lib
        self.seed = seed
        self.fuel = fuel

    def replay(self, proc: str, args: tuple[int, ...]):
        """A Witness-shaped dict on success, else None; fuel notes kept."""
        import random

        rng = random.Random(self.seed)
        p = self.lib.procedure(proc)
        sequences = [[(proc, args), (proc, args)]]
        for _ in range(20):
            seq: list[tuple[str, tuple[int, ...]]] = []
            for _ in range(rng.randint(0, 3)):
                warm = tuple(rng.randint(-8, 8) for _ in p.params)
                seq.append((proc, warm))
            seq.append((proc, args))
            seq.extend(
                (proc, args) if rng.random() < 0.7 else (proc, tuple(rng.randint(-8, 8) for _ in p.params))
                for _ in range(rng.randint(1, 3))
            )
            sequences.append(seq)
        fuel_note = False
        for seq in sequences:
            log = interp.run_client(self.lib, seq, fuel=self.fuel, record_snapshots=False)
            if isinstance(log, interp.FuelExhausted):
                fuel_note = True
                continue
            seen: dict[tuple[str, tuple[int, ...]], int] = {}
            for pr, ar, ret in log.entries():
                key = (pr, ar)
                if key in seen and seen[key] != ret:
                    return {
                        "procedure": pr,
                        "args": list(ar),
                        "result_1": seen[key],
                        "result_2": ret,
                        "sequence": [[q, list(a)] for q, a in seq],
                    }
                seen.setdefault(key, ret)
        return {"fuel_exhausted": True} if fuel_note else None


def classify_twin_model(model, oracle: OracleReplayer, proc: lang.Procedure) -> tuple[str, dict]:
    """Separate a satisfiable twin into a definite impurity or mere
    incompleteness, by concrete replay of the model's argument values."""
    args = []
    for x in proc.params:
        v = None
        if model is not None:
            v = model.const(f"{x}.a")
            if v is None:
                v = model.const(f"{x}.b")
        args.append(v if isinstance(v, int) else 0)
    found = oracle.replay(proc.name, tuple(args))
    if found and "procedure" in found:
        return IMPURITY_WITNESS, found
    note = {"note": "replay found equal outputs"}
    if found and found.get("fuel_exhausted"):
        note = {"note": "replay exhausted fuel"}
    return TOO_WEAK, note


# --- checking ---


def _model_dict(model) -> dict:
    if model is None:
        return {}
    out = {}
    for name, val in model.consts:
        if isinstance(val, (int, bool)):
            out[name] = val
    return dict(sorted(out.items()))


def _invariant_of(p: lang.Procedure, supplied: dict[str, Formula] | None) -> Formula:
    if supplied and p.name in supplied:
        return supplied[p.name]
    return p.invariant if p.invariant is not None else formula.TRUE


def check_impurity_witness(
    lib: lang.Library,
    solver_cfg: smtlib.SolverConfig,
    invariants: dict[str, Formula] | None = None,
    replay_seed: int = 0,
) -> dict[str, Verdict]:
    """Two satisfiability queries per procedure; both unsatisfiable
    certifies purity under the procedure's invariant."""
    solver_id = " ".join(solver_cfg.command())
    out: dict[str, Verdict] = {}
    for p in lib.procedures:
        inv = _invariant_of(p, invariants)
        sites = iw_site_checks(p, inv, lib)
        twin = build_twin(p, inv, lib)
        axioms = frozen_global_axioms(lib, [phi for _, phi in sites] + [twin])

        queries: list[QueryStat] = []

        def ask(label: str, phi: Formula, want_values=()):
            runner_cfg = smtlib.SolverConfig(
                path=solver_cfg.path,
                args=solver_cfg.args,
                timeout_s=solver_cfg.timeout_s,
                logic=solver_cfg.logic,
                want_model=bool(want_values),
                value_names=tuple(want_values),
                emit_dir=solver_cfg.emit_dir,
            )
            q = smtlib.build_query(
                [phi] + axioms,
                lib,
                logic=runner_cfg.logic,
                timeout_ms=int(runner_cfg.timeout_s * 1000),
                produce_models=runner_cfg.want_model,
            )
            if runner_cfg.emit_dir:
                _mirror_query(runner_cfg.emit_dir, f"{p.name}-{label}", q)
            t0 = time.monotonic()
            ans = smtlib.check_sat(q, runner_cfg)
            queries.append(QueryStat(label, ans.kind, time.monotonic() - t0))
            return ans

        inv_text = formula.to_source(inv)
        violated = None
        answers = []
        for site, phi in sites:
            ans = ask(f"not-vc:{site}", phi, want_values=_free_ints(phi, lib))
            answers.append(ans)
            if ans.is_sat:
                violated = (site, ans)
                break
        if violated is not None:
            site, ans = violated
            out[p.name] = Verdict(
                p.name,
                NOT_CERTIFIED,
                "iw",
                subkind=INVARIANT_VIOLATION,
                reason=f"invariant not preserved at {site}",
                model=_model_dict(ans.model),
                stats=SolverStats(solver_id, tuple(queries)),
                invariant=inv_text,
            )
            continue

        twin_values = tuple(
            f"{x}.{t}" for x in p.params for t in ("a", "b")
        ) + tuple(f"{p.return_var}.{t}" for t in ("a", "b"))
        a_twin = ask("twin", twin, want_values=twin_values)
        answers.append(a_twin)

        stats = SolverStats(solver_id, tuple(queries))
        if a_twin.is_sat:
            oracle = OracleReplayer(lib, seed=replay_seed)
            label, witness = classify_twin_model(a_twin.model, oracle, p)
            out[p.name] = Verdict(
                p.name,
                NOT_CERTIFIED,
                "iw",
                subkind=label,
                model=_model_dict(a_twin.model),
                witness=witness,
                stats=stats,
                invariant=inv_text,
            )
        elif all(a.is_unsat for a in answers):
            out[p.name] = Verdict(
                p.name, PURE_CERTIFIED, "iw", stats=stats, invariant=inv_text
            )
        else:
            reasons = {a.kind for a in answers if a.kind in ("unknown", "timeout")}
            out[p.name] = Verdict(
                p.name,
                UNKNOWN,
                "iw",
                reason="timeout" if "timeout" in reasons else "solver-unknown",
                stats=stats,
                invariant=inv_text,
            )
    return out


def _free_ints(phi: Formula, lib: lang.Library) -> tuple[str, ...]:
    names = []
    for n in sorted(formula.free_vars(phi)):
        if _sort_of_name(n, lib) == formula.SORT_INT:
            names.append(n)
    return tuple(names)


def _mirror_query(emit_dir: str, label: str, q: smtlib.SmtQuery) -> None:
    from pathlib import Path

    d = Path(emit_dir)
    d.mkdir(parents=True, exist_ok=True)
    existing = len(list(d.glob("*.smt2")))
    (d / f"{existing + 1:03d}-{label}.smt2").write_text(q.text())


def check_existential(
    lib: lang.Library,
    solver_cfg: smtlib.SolverConfig,
    invariants: dict[str, Formula] | None = None,
) -> dict[str, Verdict]:
    """The satisfiability formulation with p uninterpreted; satisfiable
    certifies, unsatisfiable means the invariant cannot support any
    matching function, and unknown/timeout is the expected outcome on
    realistic inputs."""
    solver_id = " ".join(solver_cfg.command())
    out: dict[str, Verdict] = {}
    for p in lib.procedures:
        inv = _invariant_of(p, invariants)
        psi = build_ea(p, inv, lib)
        q = smtlib.build_query(
            [psi], lib, logic=solver_cfg.logic, timeout_ms=int(solver_cfg.timeout_s * 1000)
        )
        if solver_cfg.emit_dir:
            _mirror_query(solver_cfg.emit_dir, f"{p.name}-ea", q)
        t0 = time.monotonic()
        ans = smtlib.check_sat(q, solver_cfg)
        stats = SolverStats(
            solver_id, (QueryStat("ea", ans.kind, time.monotonic() - t0),)
        )
        inv_text = formula.to_source(inv)
        if ans.is_sat:
            out[p.name] = Verdict(p.name, PURE_CERTIFIED, "ea", stats=stats, invariant=inv_text)
        elif ans.is_unsat:
            out[p.name] = Verdict(
                p.name, NOT_CERTIFIED, "ea", subkind=TOO_WEAK, stats=stats, invariant=inv_text
            )
        else:
            out[p.name] = Verdict(
                p.name,
                UNKNOWN,
                "ea",
                reason="timeout" if ans.kind == "timeout" else "solver-unknown",
                stats=stats,
                invariant=inv_text,
            )
    return out


def exit_code(verdicts) -> int:
    """0 all certified; 1 some not certified; 2 some unknown; errors are 3."""
    kinds = {v.kind for v in verdicts}
    if NOT_CERTIFIED in kinds:
        return 1
    if UNKNOWN in kinds:
        return 2
    return 0
