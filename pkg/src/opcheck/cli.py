"""Command-line entry point.

    opcheck check FILE [--approach iw|ea] [--json] ...
    opcheck gen-invariant FILE [--max-iters N] ...
    opcheck oracle FILE [--trials N] [--seed N] [--max-arg N] [--fuel N] ...
    opcheck emit FILE (--emit-tb | --emit-vc | --emit-smt DIR) ...

`check` decides observational purity per procedure and exits 0 when every
procedure certifies, 1 when any is NotCertified, 2 when any is Unknown,
3 on usage or solver trouble.  `gen-invariant` runs the fixpoint
iteration and prints the inferred invariant.  `oracle` hammers the
interpreter with random call sequences hunting a concrete impurity.
`emit` prints intermediate artifacts (transformed body, post/vc, solver
queries) for inspection.

The solver defaults to the OPCHECK_SOLVER environment variable, then a
`z3` binary on PATH, then the bundled WebAssembly build.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import checker, formula, frontend, interp, invgen, smtlib, vcgen

EXIT_OK = 0
EXIT_NOT_CERTIFIED = 1
EXIT_UNKNOWN = 2
EXIT_ERROR = 3

CORPUS_DIR = Path(__file__).resolve().parent / "corpus"

# name -> expected verdict (kind, subkind-or-empty) under the default approach
CORPUS_EXPECTED: dict[str, tuple[str, str]] = {
    "factcache": (checker.PURE_CERTIFIED, ""),
    "factsingle": (checker.PURE_CERTIFIED, ""),
    "factarray": (checker.PURE_CERTIFIED, ""),
    "factrecent": (checker.PURE_CERTIFIED, ""),
    "fib": (checker.PURE_CERTIFIED, ""),
    "mcm": (checker.PURE_CERTIFIED, ""),
    "counter": (checker.NOT_CERTIFIED, checker.IMPURITY_WITNESS),
    "factpoison": (checker.NOT_CERTIFIED, checker.INVARIANT_VIOLATION),
    "leak": (checker.NOT_CERTIFIED, checker.IMPURITY_WITNESS),
    "identity": (checker.PURE_CERTIFIED, ""),
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    input_path: str
    approach: str = "iw"
    solver_path: str | None = None
    solver_args: tuple[str, ...] = ()
    timeout_s: float = 10.0
    emit_smt: str | None = None
    emit_vc: bool = False
    emit_tb: bool = False
    json_report: bool = False
    seed: int = 0
    trials: int = 10000
    max_iters: int = 8
    max_arg: int = 12
    fuel: int = 10**6
    certify: bool = False
    proc: str | None = None

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ValueError("timeout must be positive")
        if self.trials <= 0:
            raise ValueError("trials must be positive")

    def solver_config(self) -> smtlib.SolverConfig:
        return smtlib.SolverConfig(
            path=self.solver_path,
            args=self.solver_args,
            timeout_s=self.timeout_s,
            emit_dir=self.emit_smt,
        )


def load_corpus() -> list[tuple[str, str, tuple[str, str]]]:
    """(name, source text, expected verdict) for every shipped program."""
    out = []
    for name, expected in CORPUS_EXPECTED.items():
        path = CORPUS_DIR / f"{name}.op"
        try:
            source = path.read_text()
        except OSError as e:
            raise frontend.FrontendError(f"corpus file missing: {path}: {e}")
        out.append((name, source, expected))
    return out


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="opcheck",
        description="observational-purity checker for caching procedures",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("input", help="library source file (.op)")
        sp.add_argument("--solver", default=None, help="solver executable")
        sp.add_argument(
            "--solver-arg",
            action="append",
            default=[],
            help="extra solver argument (repeatable)",
        )
        sp.add_argument("--timeout", type=float, default=10.0, help="per-query seconds")
        sp.add_argument("--json", action="store_true", help="machine-readable report")
        sp.add_argument("--seed", type=int, default=0, help="randomness seed")

    sp = sub.add_parser("check", help="decide observational purity")
    common(sp)
    sp.add_argument("--approach", choices=("iw", "ea"), default="iw")
    sp.add_argument("--emit-smt", metavar="DIR", help="mirror solver queries to DIR")

    sp = sub.add_parser("gen-invariant", help="infer an invariant by iteration")
    common(sp)
    sp.add_argument("--max-iters", type=int, default=8)
    sp.add_argument("--proc", metavar="NAME", help="only this procedure (default: all)")
    sp.add_argument("--check", action="store_true", help="also certify with the result")

    sp = sub.add_parser("oracle", help="randomized concrete impurity search")
    common(sp)
    sp.add_argument("--trials", type=int, default=10000)
    sp.add_argument("--max-arg", type=int, default=12)
    sp.add_argument("--fuel", type=int, default=10**6)

    sp = sub.add_parser("emit", help="print intermediate artifacts")
    common(sp)
    sp.add_argument("--emit-tb", action="store_true", help="transformed body")
    sp.add_argument("--emit-vc", action="store_true", help="post and vc formulas")
    sp.add_argument("--emit-smt", metavar="DIR", help="write solver queries to DIR")
    return ap


def _load(path: str) -> "frontend.lang.Library":
    return frontend.load_library(Path(path).read_text())


def _report_check(verdicts: dict[str, checker.Verdict], as_json: bool) -> None:
    if as_json:
        body = {
            "report": "check",
            "procedures": [v.as_dict() for v in verdicts.values()],
        }
        print(json.dumps(body, sort_keys=True, indent=2))
        return
    for name, v in verdicts.items():
        if v.kind == checker.PURE_CERTIFIED:
            line = f"{name}: PURE (certified, {v.approach})"
        elif v.kind == checker.NOT_CERTIFIED:
            line = f"{name}: NOT CERTIFIED ({v.subkind})"
            if v.witness and "procedure" in v.witness:
                w = v.witness
                line += (
                    f"\n  witness: {w['procedure']}({', '.join(map(str, w['args']))})"
                    f" returned {w['result_1']} then {w['result_2']}"
                )
        else:
            line = f"{name}: UNKNOWN ({v.reason})"
        print(line)


def _cmd_check(cfg: RunConfig) -> int:
    lib = _load(cfg.input_path)
    scfg = cfg.solver_config()
    if cfg.approach == "ea":
        verdicts = checker.check_existential(lib, scfg)
    else:
        verdicts = checker.check_impurity_witness(lib, scfg, replay_seed=cfg.seed)
    _report_check(verdicts, cfg.json_report)
    return checker.exit_code(verdicts.values())


def _combine_exit(a: int, b: int) -> int:
    """Worst of two exit codes under the priority error > not-certified > unknown > ok."""
    priority = {EXIT_ERROR: 3, EXIT_NOT_CERTIFIED: 2, EXIT_UNKNOWN: 1, EXIT_OK: 0}
    return a if priority[a] >= priority[b] else b


def _cmd_gen_invariant(cfg: RunConfig) -> int:
    lib = _load(cfg.input_path)
    scfg = cfg.solver_config()
    results = {}
    generated = {}
    code = EXIT_OK
    procs = lib.procedures
    if cfg.proc is not None:
        procs = [p for p in procs if p.name == cfg.proc]
        if not procs:
            raise ValueError(f"no procedure named {cfg.proc!r}")
    for p in procs:
        try:
            gen = invgen.generate_invariant(p, lib, scfg, max_iters=cfg.max_iters)
            generated[p.name] = gen.formula
            results[p.name] = {
                "procedure": p.name,
                "invariant": formula.to_source(gen.formula),
                "iteration": gen.iteration,
            }
        except invgen.NoFixpoint as e:
            results[p.name] = {
                "procedure": p.name,
                "no_fixpoint": True,
                "iterates": [formula.to_source(i) for i in e.iterates],
            }
            code = EXIT_UNKNOWN
    if cfg.certify and generated:
        verdicts = checker.check_impurity_witness(
            lib, scfg, invariants=generated, replay_seed=cfg.seed
        )
        for name, v in verdicts.items():
            if name in results:
                results[name]["verdict"] = v.kind
        code = _combine_exit(code, checker.exit_code(verdicts.values()))
    if cfg.json_report:
        print(json.dumps({"report": "gen-invariant", "procedures": list(results.values())}, sort_keys=True, indent=2))
    else:
        for name, r in results.items():
            if r.get("no_fixpoint"):
                print(f"{name}: no fixpoint within {cfg.max_iters} iterations")
            else:
                print(f"{name}: invariant {r['invariant']}  (iteration {r['iteration']})")
            if "verdict" in r:
                print(f"  certifies: {r['verdict']}")
    return code


def _cmd_oracle(cfg: RunConfig) -> int:
    lib = _load(cfg.input_path)
    res = interp.oracle_purity(
        lib, trials=cfg.trials, max_arg=cfg.max_arg, seed=cfg.seed, fuel=cfg.fuel
    )
    if cfg.json_report:
        print(json.dumps({"report": "oracle"} | res.as_dict(), sort_keys=True, indent=2))
    else:
        if isinstance(res, interp.Witness):
            print(
                f"impure: {res.proc}({', '.join(map(str, res.args))})"
                f" returned {res.r1} then {res.r2}"
            )
        else:
            print(
                f"no witness in {res.trials} sequences"
                f" ({res.distinct_inputs} distinct calls, {res.skipped} skipped)"
            )
    return EXIT_NOT_CERTIFIED if isinstance(res, interp.Witness) else EXIT_OK


def _cmd_emit(cfg: RunConfig) -> int:
    lib = _load(cfg.input_path)
    wrote = False
    for p in lib.procedures:
        inv = p.invariant if p.invariant is not None else formula.TRUE
        res = vcgen.postvc(p, inv, lib)
        if cfg.emit_tb:
            wrote = True
            print(f"; transformed body of {p.name}")
            print(frontend.pretty_print_stmt(res.tb.body))
        if cfg.emit_vc:
            wrote = True
            print(f"; post of {p.name}")
            print(formula.to_source(res.post))
            print(f"; vc of {p.name}")
            print(formula.to_source(res.vc))
    if cfg.emit_smt:
        wrote = True
        scfg = cfg.solver_config()
        runner = smtlib.QueryRunner(
            smtlib.SolverConfig(
                path=scfg.path,
                args=scfg.args,
                timeout_s=scfg.timeout_s,
                emit_dir=cfg.emit_smt,
            ),
            lib,
        )
        for p in lib.procedures:
            inv = p.invariant if p.invariant is not None else formula.TRUE
            for site, phi in checker.iw_site_checks(p, inv, lib):
                runner.ask([phi], label=f"{p.name}-not-vc-{site}")
            runner.ask([checker.build_twin(p, inv, lib)], label=f"{p.name}-twin")
        print(f"queries written to {cfg.emit_smt}")
    if not wrote:
        print("emit: nothing selected (use --emit-tb, --emit-vc, or --emit-smt DIR)", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def run(cfg: RunConfig) -> int:
    return {
        "check": _cmd_check,
        "gen-invariant": _cmd_gen_invariant,
        "oracle": _cmd_oracle,
        "emit": _cmd_emit,
    }[cfg.command](cfg)


def main(argv: list[str] | None = None) -> int:
    try:
        ns = _parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code not in (0, None) else 0
    try:
        cfg = RunConfig(
            command=ns.command,
            input_path=ns.input,
            approach=getattr(ns, "approach", "iw"),
            solver_path=ns.solver,
            solver_args=tuple(ns.solver_arg),
            timeout_s=ns.timeout,
            emit_smt=getattr(ns, "emit_smt", None),
            emit_vc=getattr(ns, "emit_vc", False),
            emit_tb=getattr(ns, "emit_tb", False),
            json_report=ns.json,
            seed=ns.seed,
            trials=getattr(ns, "trials", 10000),
            max_iters=getattr(ns, "max_iters", 8),
            max_arg=getattr(ns, "max_arg", 12),
            fuel=getattr(ns, "fuel", 10**6),
            certify=getattr(ns, "check", False),
            proc=getattr(ns, "proc", None),
        )
        return run(cfg)
    except (OSError, ValueError) as e:
        print(f"opcheck: {e}", file=sys.stderr)
        return EXIT_ERROR
    except frontend.FrontendError as e:
        print(f"opcheck: {e}", file=sys.stderr)
        return EXIT_ERROR
    except frontend.ValidationError as e:
        print(f"opcheck: {e}", file=sys.stderr)
        return EXIT_ERROR
    except smtlib.SolverError as e:
        print(f"opcheck: solver: {e}", file=sys.stderr)
        return EXIT_ERROR
    finally:
        smtlib.shutdown_solvers()


if __name__ == "__main__":
    sys.exit(main())
