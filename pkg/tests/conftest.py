"""Shared fixtures: corpus loading, solver availability, differential runner."""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from opcheck import formula, frontend, interp, lang, smtlib, vcgen

CORPUS_DIR = Path(__file__).resolve().parent.parent / "src" / "opcheck" / "corpus"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


def corpus_source(name: str) -> str:
    return (CORPUS_DIR / f"{name}.op").read_text()


def corpus_library(name: str) -> frontend.Library:
    return frontend.load_library(corpus_source(name))


@pytest.fixture(scope="session")
def corpus() -> dict[str, frontend.Library]:
    return {p.stem: frontend.load_library(p.read_text()) for p in sorted(CORPUS_DIR.glob("*.op"))}


@pytest.fixture(scope="session")
def solver() -> smtlib.SolverConfig:
    """A working solver configuration, or skip for tests that need one.

    The first query a fresh process answers pays its startup cost, so the
    fixture warms the session solver up front with a trivial check.
    """
    cfg = smtlib.SolverConfig(timeout_s=10.0)
    try:
        cfg.command()
    except smtlib.SolverError as e:
        pytest.skip(f"no SMT solver available: {e}")
    lib = corpus_library("identity")
    runner = smtlib.QueryRunner(cfg, lib)
    answer = runner.ask([formula.TRUE], label="warmup")
    if answer.kind not in ("sat", "unsat"):
        pytest.skip(f"solver warm-up failed: {answer.kind} ({answer.reason})")
    return cfg


@pytest.fixture(scope="session", autouse=True)
def _shutdown_solvers_at_exit():
    yield
    smtlib.shutdown_solvers()


# --- calculus-vs-interpreter differential runner ---


def random_entry_state(rng, lib, pool):
    """One random entry global state: declared initial values, a harvested
    reachable state, or a reachable state with scrambled scalars."""
    mode = rng.random()
    if mode < 0.2 or not pool:
        return interp.initial_globals(lib)
    state = dict(rng.choice(pool))
    if mode >= 0.7:
        for d in lib.globals:
            if d.kind == lang.KIND_SCALAR and rng.random() < 0.5:
                state[d.name] = rng.randint(-6, 6)
    return state


def differential_counts(
    lib,
    p,
    pool,
    divergence_cache,
    want: int,
    seed: int = 0,
    max_arg: int = 8,
    sample_cap: int = 20000,
    fuel: int = 200_000,
):
    """Run calculus-vs-interpreter trials until `want` are conclusive.

    Returns (conclusive, passed, sampled).  Trials draw a random entry
    state and argument tuple, execute the procedure for real, and check
    the matching path disjunct against the landed state.
    """
    inv = p.invariant if p.invariant is not None else formula.TRUE
    res = vcgen.postvc(p, inv, lib)
    rng = random.Random(seed)
    conclusive = passed = sampled = 0
    while conclusive < want and sampled < sample_cap:
        sampled += 1
        entry = random_entry_state(rng, lib, pool)
        args = tuple(rng.randint(-max_arg, max_arg) for _ in p.params)
        record = interp.run_call(
            lib, p.name, args, globals_map=dict(entry), fuel=fuel,
            divergence_cache=divergence_cache,
        )
        if record is None:
            continue
        verdict = vcgen.path_soundness_trial(res, entry, args, record)
        if verdict == "skip":
            continue
        conclusive += 1
        passed += verdict == "pass"
    return conclusive, passed, sampled


@pytest.fixture(scope="session")
def differential_runner():
    """Callable running the differential check over one whole library."""

    def run(lib, want: int, seed: int = 0):
        pool = interp.reachable_states(lib, seed=seed + 1)
        divergence_cache: set = set()
        return {
            p.name: differential_counts(lib, p, pool, divergence_cache, want, seed=seed)
            for p in lib.procedures
        }

    return run
