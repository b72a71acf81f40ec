"""Observational-purity checker for a small recursive imperative language.

A library is a set of procedures sharing private mutable globals (caches).
A procedure is observationally pure when every call sequence makes it
behave like a mathematical function of its arguments, no matter what the
caches do internally.  This package decides that property by generating
verification conditions in which recursive calls are replaced by an
uninterpreted function symbol, discharging them to an SMT solver, and —
when certification fails — replaying candidate counterexamples on a
reference interpreter to tell genuine impurity from an invariant that is
merely too weak.

Modules
-------
lang       core syntax tree and library model
frontend   parser, validator, pretty-printer
formula    first-order formulas: build, normalize, simplify
transform  rewrite of a procedure body for symbolic analysis
vcgen      strongest-postcondition and verification-condition generator
checker    purity verdicts via solver queries (two approaches)
invgen     fixpoint inference of the cache invariant
interp     reference interpreter and randomized purity oracle
smtlib     SMT-LIB 2 emission and solver subprocess driver
cli        command-line interface (`opcheck`)
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
