"""Strong subadditivity with an exact remainder decomposition.

The conditional mutual information I(A:C|B) of a full-rank tripartite state
is reproduced, term by term, as a sum of manifestly nonnegative curvature
integrals: a discrete twirl over sign-flip and permutation unitaries on the A
factor interpolates between S(rho_ABC | rho_AB x rho_C) and
S(rho_BC | rho_B x rho_C), and each interpolation step contributes the
triangular double integral of a PSD curvature pairing.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    InvalidInputError,
    NumericalFailureError,
    as_positive_definite,
    hermitian_eig,
    operator_norm,
    partial_trace,
)
from .quadrature import QuadratureConfig, triangular_weight_function, _gauss_legendre
from .relent import SegmentInstance, gamma_pairing, relent
from .report import VerificationReport

TRACE_TOL = 1e-12
TERM_SLACK = 1e-8

PREFACTOR_UNIFORM = "uniform_over_family"  # every term carries 1/J (telescoping)
PREFACTOR_PRINTED = "per_step"  # boundary 1/J, interior 1/(K+1)


@dataclass
class TripartiteState:
    """Full-rank density matrix on a three-factor tensor space."""

    rho: np.ndarray
    dims: tuple[int, int, int]

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.dims) != 3:
            raise InvalidInputError("dims must be a triple")
        self.rho, _ = as_positive_definite(self.rho)
        n = int(np.prod(self.dims))
        if self.rho.shape != (n, n):
            raise InvalidInputError(
                f"state dimension {self.rho.shape} does not match dims {self.dims}"
            )
        tr = float(np.trace(self.rho).real)
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidInputError(f"state trace {tr} is not 1")

    @property
    def d_a(self) -> int:
        return self.dims[0]

    def marginal(self, keep: tuple[int, ...]) -> np.ndarray:
        traced = tuple(i for i in range(3) if i not in keep)
        return partial_trace(self.rho, self.dims, traced)


@dataclass(frozen=True)
class TwirlFamily:
    """Sign-flip x permutation unitaries averaging any matrix to (Tr/N) I."""

    dim: int
    unitaries: tuple[np.ndarray, ...]

    @property
    def size(self) -> int:
        return len(self.unitaries)


def twirl_family(N: int, max_dim: int = 5, certify: bool = True) -> TwirlFamily:
    """All 2^N diagonal sign matrices (binary order) composed with all N!
    row-permutation matrices (lexicographic order); family size 2^N N!.

    The sign average kills off-diagonal entries, the permutation average
    equalizes the diagonal, so conjugation-averaging sends any M to (Tr M/N) I.
    """
    if N < 1 or N > max_dim:
        raise InvalidInputError(f"twirl_family: N = {N} outside [1, {max_dim}]")
    signs = []
    for mask in range(2**N):
        diag = np.array([-1.0 if (mask >> m) & 1 else 1.0 for m in range(N)])
        signs.append(np.diag(diag).astype(complex))
    perms = []
    for perm in itertools.permutations(range(N)):
        P = np.zeros((N, N), dtype=complex)
        for i, j in enumerate(perm):
            P[j, i] = 1.0
        perms.append(P)
    unitaries = tuple(P @ K for P in perms for K in signs)
    fam = TwirlFamily(dim=N, unitaries=unitaries)
    if certify:
        rng = np.random.default_rng(0)
        for _ in range(3):
            probe = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
            probe = (probe + probe.conj().T) / 2
            avg = sum(U @ probe @ U.conj().T for U in unitaries) / fam.size
            target = np.eye(N) * np.trace(probe) / N
            if operator_norm(avg - target) > 1e-12 * (1 + operator_norm(probe)):
                raise NumericalFailureError("twirl averaging identity failed")
    return fam


def entropy_bits(M: np.ndarray) -> float:
    """von Neumann entropy -Tr(M log2 M) in bits."""
    w = hermitian_eig(M, check=False).eigenvalues
    w = w[w > 1e-300]
    return float(-np.sum(w * np.log2(w)))


def entropies(state: TripartiteState) -> dict[str, float]:
    return {
        "S_ABC": entropy_bits(state.rho),
        "S_AB": entropy_bits(state.marginal((0, 1))),
        "S_BC": entropy_bits(state.marginal((1, 2))),
        "S_B": entropy_bits(state.marginal((1,))),
    }


def cmi(state: TripartiteState) -> float:
    """I(A:C|B) = S_AB + S_BC - S_ABC - S_B, nonnegative by strong subadditivity."""
    e = entropies(state)
    return e["S_AB"] + e["S_BC"] - e["S_ABC"] - e["S_B"]


def _lifted_family(state: TripartiteState, fam: TwirlFamily) -> list[np.ndarray]:
    ibc = np.eye(state.dims[1] * state.dims[2])
    return [np.kron(U, ibc) for U in fam.unitaries]


def _product_reference(state: TripartiteState) -> np.ndarray:
    """rho_AB (x) rho_C, the reference against which the remainder telescopes."""
    return np.kron(state.marginal((0, 1)), state.marginal((2,)))


def _partial_averages(rho: np.ndarray, lifted: list[np.ndarray]) -> list[np.ndarray]:
    """Running averages (1/K) sum_{k<=K} U_k rho U_k* for K = 1..J."""
    out = []
    acc = np.zeros_like(rho)
    for k, U in enumerate(lifted, start=1):
        acc = acc + U @ rho @ U.conj().T
        out.append(acc / k)
    return out


def f_chain(state: TripartiteState, K: int, fam: TwirlFamily | None = None) -> float:
    """F_K: relative entropy between the K-term partial twirl averages of the
    state and of its product reference."""
    fam = fam or twirl_family(state.d_a, certify=False)
    if not (2 <= K <= fam.size):
        raise InvalidInputError(f"f_chain: K = {K} outside [2, {fam.size}]")
    lifted = _lifted_family(state, fam)[:K]
    sigma = _product_reference(state)
    avg_rho = sum(U @ state.rho @ U.conj().T for U in lifted) / K
    avg_sigma = sum(U @ sigma @ U.conj().T for U in lifted) / K
    return relent(avg_rho, avg_sigma, check=False)


def endpoint_identity_gap(state: TripartiteState, fam: TwirlFamily | None = None) -> float:
    """|F_J - S(rho_BC | rho_B x rho_C)|; zero because the full twirl outputs
    I_A/N tensored with the BC marginals."""
    fam = fam or twirl_family(state.d_a, certify=False)
    fj = f_chain(state, fam.size, fam)
    direct = relent(
        state.marginal((1, 2)),
        np.kron(state.marginal((1,)), state.marginal((2,))),
        check=False,
    )
    return abs(fj - direct)


@dataclass
class SsaConfig:
    k_max: int = 10
    sigma_nodes: int = 20  # Gauss-Legendre nodes per subinterval of (0, 1)
    prefactor: str = PREFACTOR_UNIFORM
    tol_reconstruct_rel: float = 1e-3
    quad: QuadratureConfig = field(default_factory=lambda: QuadratureConfig(nodes_half_line=96))

    def as_dict(self) -> dict:
        return {
            "k_max": self.k_max,
            "sigma_nodes": self.sigma_nodes,
            "prefactor": self.prefactor,
            "tol_reconstruct_rel": self.tol_reconstruct_rel,
            "nodes_half_line": self.quad.nodes_half_line,
        }


@dataclass
class DecompositionReport:
    """The certified remainder decomposition of one tripartite state."""

    cmi_entropic: float
    boundary_term: float
    delta_terms: list[float]
    reconstruction_gap: float
    family_size: int
    config: dict
    diagnostics: dict = field(default_factory=dict)

    @property
    def decomposition_total(self) -> float:
        return self.boundary_term + float(sum(self.delta_terms))

    def to_dict(self) -> dict:
        return {
            "cmi_entropic": self.cmi_entropic,
            "boundary_term": self.boundary_term,
            "delta_terms": self.delta_terms,
            "decomposition_total": self.decomposition_total,
            "reconstruction_gap": self.reconstruction_gap,
            "family_size": self.family_size,
            "config": self.config,
            "diagnostics": self.diagnostics,
        }


def _step_double_integral(
    state: TripartiteState,
    lifted: list[np.ndarray],
    running_rho: list[np.ndarray],
    running_sigma: list[np.ndarray],
    K: int,
    config: SsaConfig,
) -> float:
    """int_0^1 int_{lam/K}^lam of the curvature pairing for step K.

    The segment endpoints are the K-th twirl image versus the (K-1)-term
    running averages of the state and its product reference.
    """
    A1 = lifted[K - 1] @ state.rho @ lifted[K - 1].conj().T
    A2 = running_rho[K - 2]
    sigma = _product_reference(state)
    B1 = lifted[K - 1] @ sigma @ lifted[K - 1].conj().T
    B2 = running_sigma[K - 2]
    seg = SegmentInstance(A1=A1, A2=A2, B1=B1, B2=B2, quad=config.quad, k_max=config.k_max)
    t = 1.0 / K
    total = 0.0
    for a, b in ((0.0, t), (t, 1.0)):
        nodes, weights = _gauss_legendre(config.sigma_nodes, a, b)
        wt = triangular_weight_function(t, nodes)
        vals = np.array([gamma_pairing(seg, config.k_max, float(s)) for s in nodes])
        total += float(np.sum(weights * wt * vals))
    return total


def delta_terms(
    state: TripartiteState,
    config: SsaConfig | None = None,
    fam: TwirlFamily | None = None,
) -> DecompositionReport:
    """All remainder terms of the decomposition, each certified nonnegative.

    Terms are (prefactor) * double integral for K = 2..J, with the K = J term
    reported separately as the boundary.  The uniform 1/J prefactor arises
    from telescoping the step identity
    F_K = (1/K) S(rho|sigma) + (1 - 1/K) F_{K-1} - (1/K) * (double integral);
    the per-step variant is kept behind the ``prefactor`` switch.
    """
    config = config or SsaConfig()
    fam = fam or twirl_family(state.d_a, certify=False)
    J = fam.size
    lifted = _lifted_family(state, fam)
    sigma = _product_reference(state)
    running_rho = _partial_averages(state.rho, lifted)
    running_sigma = _partial_averages(sigma, lifted)

    integrals = {}
    for K in range(2, J + 1):
        integrals[K] = _step_double_integral(
            state, lifted, running_rho, running_sigma, K, config
        )

    if config.prefactor == PREFACTOR_UNIFORM:
        prefac = {K: 1.0 / J for K in range(2, J + 1)}
    elif config.prefactor == PREFACTOR_PRINTED:
        prefac = {K: 1.0 / (K + 1) for K in range(2, J)}
        prefac[J] = 1.0 / J
    else:
        raise InvalidInputError(f"unknown prefactor convention {config.prefactor!r}")

    boundary = prefac[J] * integrals[J]
    deltas = [prefac[K] * integrals[K] for K in range(2, J)]
    for name, val in [("boundary", boundary)] + [
        (f"delta_{K}", d) for K, d in zip(range(2, J), deltas)
    ]:
        if val < -TERM_SLACK:
            raise NumericalFailureError(
                f"remainder term {name} = {val:.3e} is negative beyond slack"
            )

    value = cmi(state)
    total = boundary + float(sum(deltas))
    gap = abs(value - total)
    return DecompositionReport(
        cmi_entropic=value,
        boundary_term=boundary,
        delta_terms=deltas,
        reconstruction_gap=gap,
        family_size=J,
        config=config.as_dict(),
        diagnostics={
            "raw_double_integrals": {str(K): integrals[K] for K in sorted(integrals)},
            "endpoint_identity_gap": endpoint_identity_gap(state, fam),
        },
    )


def decompose(
    state: TripartiteState,
    config: SsaConfig | None = None,
    fam: TwirlFamily | None = None,
) -> DecompositionReport:
    """Full decomposition with the reconstruction gap enforced."""
    config = config or SsaConfig()
    report = delta_terms(state, config, fam)
    tol = config.tol_reconstruct_rel * max(report.cmi_entropic, 0.01)
    if report.reconstruction_gap > tol:
        raise NumericalFailureError(
            f"reconstruction gap {report.reconstruction_gap:.3e} exceeds {tol:.3e}; "
            f"per-step integrals: {report.diagnostics['raw_double_integrals']}"
        )
    return report


def decomposition_report(
    state: TripartiteState, config: SsaConfig | None = None, seed: int | None = None
) -> VerificationReport:
    config = config or SsaConfig()
    rep = delta_terms(state, config)
    tol = config.tol_reconstruct_rel * max(rep.cmi_entropic, 0.01)
    return VerificationReport.from_discrepancy(
        name="ssa.decomposition",
        claim="conditional mutual information equals the boundary term plus "
        "the nonnegative step remainders",
        discrepancy=rep.reconstruction_gap,
        tolerance=tol,
        computed=rep.to_dict(),
        seed=seed,
        config=config.as_dict(),
    )
