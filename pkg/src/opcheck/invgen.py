"""Invariant inference as a fixpoint of reachable-cache descriptions.

The iteration starts from the initial-state formula of the declared
globals and repeatedly adds what one more procedure call can make true
of them:

    I_0     = init
    I_k     = Simplify(I_{k-1} ∨ Weaken(Next(I_{k-1})))

Next(I) collects, at every assert site of the transformed body built
under candidate I, the site's precondition with everything but the
globals existentially quantified — the states the globals can reach
when the procedure runs from an I-state.  Weaken drops, inside each
disjunct that mentions a procedure symbol, the conjuncts that do not;
value-specific residue (say, a particular argument seen first) would
otherwise pin the cache to one history and block convergence.

The chain is monotone (each iterate disjoins onto the last), so the
first solver-certified equivalence I_k ≡ I_{k-1} is a fixpoint and
I_{k-1} is returned.  The chain need not converge — a counter that
steps its global forever has strictly growing iterates — so the budget
is mandatory and exhausting it raises NoFixpoint with the trace.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import formula, lang, smtlib, vcgen
from .formula import Formula, NameGen, conj, disj, exists, neg


@dataclass(frozen=True)
class GeneratedInvariant:
    formula: Formula
    iteration: int  # index of the returned iterate in the chain
    iterates: tuple[Formula, ...]  # I_0 … I_k for the whole run


class NoFixpoint(Exception):
    """The iteration budget ran out before the chain closed."""

    def __init__(self, iterates: tuple[Formula, ...]):
        self.iterates = iterates
        super().__init__(
            f"no fixpoint within {len(iterates) - 1} iterations; "
            f"last iterate: {formula.to_source(iterates[-1])}"
        )


def next_states(p: lang.Procedure, inv: Formula, lib: lang.Library) -> Formula:
    """The disjunction, over the assert sites of TB(p, inv), of the site
    precondition with formals, locals, and the return variable closed
    off existentially; only the globals remain free."""
    res = vcgen.postvc(p, inv, lib)
    global_names = {g.name for g in lib.globals}
    pieces = []
    for site, ob in res.per_site_obligations:
        if site == "init":
            continue  # initial-state obligation, not a reachable-state site
        pre = ob.left
        qvars = sorted(
            v
            for v in formula.free_vars(pre)
            if formula.origin(v) not in global_names
        )
        pieces.append(exists([(v, formula.SORT_INT) for v in qvars], pre))
    return disj(*pieces)


def weaken(f: Formula) -> Formula:
    """Drop value-specific conjuncts from procedure-symbol disjuncts.

    In DNF, a disjunct that applies a procedure symbol keeps only the
    literals that also do; disjuncts free of procedure symbols are kept
    whole.  Formulas too large to normalize are returned unchanged."""
    clauses = formula.to_dnf(f)
    if clauses is None:
        return f
    out = []
    for clause in clauses:
        if any(formula.applies_of(lit) for lit in clause):
            clause = [lit for lit in clause if formula.applies_of(lit)]
        out.append(clause)
    return formula.from_dnf(out)


def equivalent(f1: Formula, f2: Formula, decide) -> bool:
    """Solver-certified f1 ≡ f2; unknown counts as not equivalent."""
    for a, b in ((f1, f2), (f2, f1)):
        gen = NameGen(formula.free_vars(a) | formula.free_vars(b))
        query = formula.skolemize_positive(
            formula.nnf(conj(a, neg(b))), gen
        )
        if decide(query) != "unsat":
            return False
    return True


def generate_invariant(
    p: lang.Procedure,
    lib: lang.Library,
    solver_cfg: smtlib.SolverConfig | None = None,
    max_iters: int = 8,
) -> GeneratedInvariant:
    """Iterate to a candidate invariant for p's caching globals.

    Returns the first iterate whose successor is solver-equivalent to
    it; raises NoFixpoint when max_iters successors all differ."""
    runner = smtlib.QueryRunner(solver_cfg or smtlib.SolverConfig(), lib)
    decide = runner.decide

    current = formula.simplify(vcgen.postvc(p, formula.TRUE, lib).init, decide)
    iterates = [current]
    for _ in range(max_iters):
        step = weaken(formula.simplify(next_states(p, current, lib), decide))
        candidate = formula.simplify(disj(current, step), decide)
        iterates.append(candidate)
        if equivalent(candidate, current, decide):
            return GeneratedInvariant(
                current, len(iterates) - 2, tuple(iterates)
            )
        current = candidate
    raise NoFixpoint(tuple(iterates))
