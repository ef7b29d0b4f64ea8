"""
Long user-facing texts for the isodense command line.
"""

DESCRIPTION = """Weighted isoperimetric profiles for densities f = exp(psi).

Solves the one-dimensional profile exactly, checks curvature and stability of spheres and
hyperplanes under radial densities, runs Steiner symmetrization for exp(c|x|^2) on a columnar
grid, tabulates existence diagnostics and compares Dirichlet eigenvalues of the associated
drift Laplacian."""

EXPRESSION_HELP = """Density expressions
  numbers      3, 0.5, 1e-3
  variables    x (line densities), r (radial profiles), plus --param NAME=VALUE bindings
  constants    pi
  operators    + - * / ^ and unary minus; ^ is right-associative
  functions    exp log sqrt abs sin cos

--density gives f itself (exp(x), 1/(1+x^2)); --psi gives the log-density; --delta gives a
radial profile delta(r) with psi(x) = delta(|x|). Built-in names (--builtin) are gauss,
exp-square, laplace, houseroof-flat and houseroof-decay. A CSV path (--csv) supplies samples
t,psi with an optional header row and strictly increasing t."""

EPILOG = """Exit codes: 0 success, 1 input error, 2 numeric non-convergence.
Errors are printed to stdout as {"success": false, "error": ...}; logs go to stderr.

Examples:
  isodense profile --density "exp(x)" --volume 3
  isodense stability --delta "-sqrt(r^2+1)" --r 1 --n 1
  isodense existence --density "exp(r^2)" --n 1 --m-max 20
  isodense symmetrize --set disk.json --output log.csv --final final.json
  isodense eigen --mask domain.json --c 1"""

ZETA_VERDICT_FOOTER = "verdict: {verdict} (diagnostic)"
