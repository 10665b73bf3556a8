"""Joint convexity of relative entropy with an explicit curvature integrand.

S(A|B) = Tr[A log2 A] - Tr[A log2 B] is represented as a pairing against the
operator F(A, B) on the tensor-square space.  Along a segment
(t A1 + (1-t) A2, t B1 + (1-t) B2) the second derivative of S equals
2 log2(e) <V_I, Gamma(t) V_I> where Gamma(t) is a limit of rescaled chains of
half-averaged PSD source terms; every piece is manifestly PSD, which makes
joint convexity a sum of visible nonnegative contributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    InvalidInputError,
    NumericalFailureError,
    as_positive_definite,
    hermitian_eig,
    matrix_log2,
    matrix_power,
    operator_norm,
    pairing_matrix,
)
from .lieb import ConcavityInstance, DyadicExponent, q_recursion
from .quadrature import QuadratureConfig, triangular_weight
from .report import VerificationReport

LOG2_E = 1.0 / math.log(2.0)
DEFAULT_K_MAX = 14


def relent(A: np.ndarray, B: np.ndarray, check: bool = True) -> float:
    """Relative entropy in bits; zero iff A = B for density arguments."""
    if check:
        A, _ = as_positive_definite(A)
        B, _ = as_positive_definite(B)
    if A.shape != B.shape:
        raise InvalidInputError("relent: dimension mismatch")
    wa = hermitian_eig(A, check=False).eigenvalues
    term_a = float(np.sum(wa * np.log2(wa)))
    term_b = float(np.real(np.trace(A @ matrix_log2(B))))
    return term_a - term_b


def f_operator(A: np.ndarray, B: np.ndarray, certify_tol: float = 1e-10) -> np.ndarray:
    """Tensor-space operator with <V_I, F(A,B) V_I> = S(A|B).

    Built through the vectorization pairing (second factor transposed); the
    pairing identity is certified on construction.
    """
    A, _ = as_positive_definite(A)
    B, _ = as_positive_definite(B)
    AlogA = A @ matrix_log2(A)
    F = pairing_matrix(AlogA, np.eye(A.shape[0])) - pairing_matrix(A, matrix_log2(B))
    vI = np.eye(A.shape[0], dtype=complex).reshape(-1)
    paired = float((vI.conj() @ (F @ vI)).real)
    direct = relent(A, B, check=False)
    if abs(paired - direct) > certify_tol * (1.0 + abs(direct)):
        raise NumericalFailureError(
            f"pairing certification failed: {paired} vs {direct}"
        )
    return F


def f_k_family(A: np.ndarray, B: np.ndarray, k: int) -> np.ndarray:
    """A^{1 - 2^{-k}} (x) B~^{2^{-k}} in the pairing convention.

    The k = 0 member is I (x) B~; the rescaled difference quotient
    -log2(e) (F_k - F_infty)/2^{-k}, paired with V_I, recovers S(A|B) for
    density arguments.
    """
    if k < 0:
        raise InvalidInputError("f_k_family: k >= 0")
    delta = 2.0 ** (-k)
    return pairing_matrix(matrix_power(A, 1.0 - delta), matrix_power(B, delta))


@dataclass
class SegmentInstance:
    """Endpoints of the joint segment whose relative entropy is certified."""

    A1: np.ndarray
    A2: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    k_max: int = DEFAULT_K_MAX

    def __post_init__(self):
        for name in ("A1", "A2", "B1", "B2"):
            arr, _ = as_positive_definite(getattr(self, name))
            setattr(self, name, arr)
        if self.A1.shape != self.A2.shape or self.B1.shape != self.B2.shape:
            raise InvalidInputError("segment endpoints dimension mismatch")
        if self.A1.shape != self.B1.shape:
            raise InvalidInputError("first and second slots must share dimension")
        self._instances: dict = {}

    @property
    def dim(self) -> int:
        return self.A1.shape[0]

    def interpolants(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        return (
            t * self.A1 + (1 - t) * self.A2,
            t * self.B1 + (1 - t) * self.B2,
        )

    def instance(self, t: float) -> ConcavityInstance:
        """Tensor-space instance at base point t (second slot transposed)."""
        if t not in self._instances:
            At, Bt = self.interpolants(t)
            self._instances[t] = ConcavityInstance(
                psi=At,
                phi=Bt.T,
                v=self.A1 - self.A2,
                w=(self.B1 - self.B2).T,
                p=1.0,
                quad=self.quad,
                max_level=self.k_max,
            )
        return self._instances[t]

    def relent_at(self, t: float) -> float:
        At, Bt = self.interpolants(t)
        return relent(At, Bt, check=False)


def _chain_exponent(k: int) -> DyadicExponent:
    return DyadicExponent(2**k - 1, k)


def gamma_k(seg: SegmentInstance, k: int, t: float = 0.0) -> np.ndarray:
    """Level-k curvature chain at base point t.

    Equals the local source at level k plus the half-averaged image (at
    delta = -2^{-k}) of the level k-1 chain; PSD at every level because both
    operations preserve positivity.  Boundary sources vanish identically here
    (the segment construction has p = 1).
    """
    if k < 1:
        raise InvalidInputError("gamma_k: k >= 1")
    inst = seg.instance(t)
    return q_recursion(inst, _chain_exponent(k))


def gamma_pairing(seg: SegmentInstance, k: int, t: float) -> float:
    """2 log2(e) 2^k <V_I, Gamma_k(t) V_I>, the scalar curvature integrand."""
    G = gamma_k(seg, k, t)
    vI = np.eye(seg.dim, dtype=complex).reshape(-1)
    return 2.0 * LOG2_E * (2.0**k) * float((vI.conj() @ (G @ vI)).real)


@dataclass
class GammaLimit:
    """Rescaled chain value with its Cauchy convergence evidence."""

    matrix: np.ndarray
    k_max: int
    increments: list[float]

    @property
    def converged(self) -> bool:
        tail = [x for x in self.increments if x > 0]
        return all(b <= 0.75 * a + 1e-14 for a, b in zip(tail, tail[1:]))


def gamma_limit(seg: SegmentInstance, k_max: int | None = None, t: float = 0.0) -> GammaLimit:
    """2^{k_max} Gamma_{k_max}(t) plus the increment table ||2^k G_k - 2^{k+1} G_{k+1}||.

    Increments must decay geometrically; a non-decreasing tail signals a
    convention or implementation bug and raises.
    """
    k_max = seg.k_max if k_max is None else k_max
    if k_max < 3:
        raise InvalidInputError("gamma_limit: k_max >= 3")
    prev = None
    increments = []
    for k in range(1, k_max + 1):
        cur = (2.0**k) * gamma_k(seg, k, t)
        if prev is not None:
            increments.append(float(operator_norm(cur - prev)))
        prev = cur
    lim = GammaLimit(matrix=prev, k_max=k_max, increments=increments)
    scale = max(operator_norm(prev), 1e-30)
    tail = [x for x in increments[2:] if x > 1e-13 * scale]
    if len(tail) >= 3 and any(b > a * 1.05 for a, b in zip(tail, tail[1:])):
        raise NumericalFailureError(
            f"gamma increments do not decrease: {increments}"
        )
    return lim


def second_derivative_fd(seg: SegmentInstance, t: float, h: float = 1e-4) -> float:
    """Richardson-refined central second difference of t -> S(segment(t))."""
    def g(s: float) -> float:
        return seg.relent_at(s)

    d1 = (g(t + h) - 2 * g(t) + g(t - h)) / h**2
    d2 = (g(t + h / 2) - 2 * g(t) + g(t - h / 2)) / (h / 2) ** 2
    return (4 * d2 - d1) / 3


def convexity_certificate(
    seg: SegmentInstance,
    t: float = 0.3,
    sigma_grid=(0.15, 0.4, 0.6, 0.85),
    tol: float = 1e-4,
    k_max: int | None = None,
    seed: int | None = None,
    mixing_nodes: int = 24,
) -> VerificationReport:
    """Certify joint convexity of S along the segment.

    Checks (i) the curvature pairing against finite differences of S on a
    sigma grid, (ii) the mixing identity S(t interpolant) = t S(A1|B1) +
    (1-t) S(A2|B2) - 2 log2(e) t * (triangular integral of the pairing), and
    (iii) nonnegativity of the integral term.
    """
    k_max = seg.k_max if k_max is None else k_max
    worst_fd = 0.0
    for s in sigma_grid:
        paired = gamma_pairing(seg, k_max, s)
        fd = second_derivative_fd(seg, s)
        worst_fd = max(worst_fd, abs(paired - fd) / (1.0 + abs(fd)))

    integrand = lambda s: gamma_pairing(seg, k_max, s)
    tw = triangular_weight(t, integrand, n=mixing_nodes)
    mixed = seg.relent_at(t)
    split = t * relent(seg.A1, seg.B1, check=False) + (1 - t) * relent(
        seg.A2, seg.B2, check=False
    )
    recon_gap = abs(mixed - (split - t * tw)) / (1.0 + abs(mixed))
    negativity = max(0.0, -tw)
    disc = max(worst_fd, recon_gap)
    if negativity > 1e-10:
        disc = max(disc, 1.0)  # convexity violated outright
    return VerificationReport.from_discrepancy(
        name="relent.joint-convexity",
        claim="second derivative of S along the segment equals the curvature "
        "pairing and the mixing identity reconstructs S(t)",
        discrepancy=disc,
        tolerance=tol,
        computed={
            "fd_pairing_gap": worst_fd,
            "mixing_identity_gap": recon_gap,
            "integral_term": tw,
            "k_max": k_max,
            "t": t,
        },
        seed=seed,
    )
