"""Numerical certificates for matrix-mean curvature and entropy inequalities.

Modules
-------
linalg      dense complex kernels: eigendecomposition, matrix functions,
            Kronecker/partial-trace algebra, Sylvester solves, vectorization
quadrature  deterministic rules for the three recurring integral shapes
geomean     geometric means and their PSD curvature term
powerpert   perturbation expansions of matrix powers
lieb        dyadic second-derivative construction for tensor powers
relent      joint convexity of relative entropy with explicit curvature
ssa         exact remainder decomposition of conditional mutual information
instances   seeded random instances
report      verification records and deterministic JSON reports
cli         batch front end (gen / verify-* / decompose)
"""

__version__ = "0.1.0"

from . import geomean, instances, lieb, linalg, powerpert, quadrature, relent, report, ssa

__all__ = [
    "geomean",
    "instances",
    "lieb",
    "linalg",
    "powerpert",
    "quadrature",
    "relent",
    "report",
    "ssa",
    "__version__",
]
