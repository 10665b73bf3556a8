"""Dyadic second-derivative construction for tensor powers.

For G(eps) = (Psi + eps V)^q (x) (Phi + eps W)^r with q + r = p <= 1, the
quadratic coefficient Q = -G''(0)/2 is assembled from manifestly PSD pieces:

* ``source`` terms: curvature terms of geometric means between neighboring
  dyadic exponents (interior), or second-order power coefficients (boundary);
* the ``d_delta`` half-averaging operator, the Sylvester solve against
  K_delta = Psi^delta (x) Phi^{-delta}, which preserves positivity;
* a recursion over the dyadic grid l/2^k, descending to exponents 0 and 1,
  equivalently a sum over signed dyadic paths of nested d_delta images.

Every dyadic exponent is kept as an exact reduced fraction; path sums are
validated in rational arithmetic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .linalg import (
    InvalidInputError,
    as_hermitian,
    as_positive_definite,
    hermitian_eig,
    hermitian_part,
    matrix_power,
    operator_norm,
    trace_pairing,
)
from .powerpert import first_order, second_order
from .quadrature import QuadratureConfig, triangular_weight
from .geomean import cross
from .report import VerificationReport

DELTA_LEVEL_K = "level_k"
DELTA_LEVEL_K_MINUS_1 = "level_k_minus_1"
MAX_LEVEL = 8
NONDYADIC_TRUNCATION_LEVEL = 12


@dataclass(frozen=True, order=True)
class DyadicExponent:
    """Reduced dyadic rational l / 2^k in [0, 1].

    Level 0 holds the endpoints 0/1 and 1/1; every level k >= 1 carries an odd
    numerator, so the representation is unique.
    """

    numerator: int
    level: int

    def __post_init__(self):
        if self.level < 0 or not (0 <= self.numerator <= 2**self.level):
            raise InvalidInputError(f"dyadic exponent out of range: {self}")
        if self.level >= 1 and self.numerator % 2 == 0:
            raise InvalidInputError(f"dyadic exponent not reduced: {self}")

    @classmethod
    def from_fraction(cls, fr: Fraction) -> "DyadicExponent":
        if fr < 0 or fr > 1:
            raise InvalidInputError(f"dyadic exponent out of [0, 1]: {fr}")
        den = fr.denominator
        if den & (den - 1):
            raise InvalidInputError(f"{fr} is not dyadic")
        return cls(fr.numerator, den.bit_length() - 1)

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, 2**self.level)

    @property
    def is_boundary(self) -> bool:
        return self.level == 0

    def neighbors(self) -> tuple["DyadicExponent", "DyadicExponent"]:
        """Reduced (l-1)/2^k and (l+1)/2^k, the recursion children."""
        if self.is_boundary:
            raise InvalidInputError("boundary exponent has no neighbors")
        lo = DyadicExponent.from_fraction(Fraction(self.numerator - 1, 2**self.level))
        hi = DyadicExponent.from_fraction(Fraction(self.numerator + 1, 2**self.level))
        return lo, hi

    def __str__(self) -> str:
        return f"{self.numerator}/{2**self.level}"


@dataclass(frozen=True)
class SignedPath:
    """Strictly level-increasing signed dyadic steps (level_j, sign_j)."""

    steps: tuple[tuple[int, int], ...]

    def __post_init__(self):
        levels = [m for m, _ in self.steps]
        if any(c not in (-1, 1) for _, c in self.steps):
            raise InvalidInputError("path signs must be +-1")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise InvalidInputError("path levels must strictly increase")

    def total(self) -> Fraction:
        return sum((Fraction(c, 2**m) for m, c in self.steps), Fraction(0))


@dataclass
class ConcavityInstance:
    """Positive definite bases with Hermitian directions on both tensor slots."""

    psi: np.ndarray
    phi: np.ndarray
    v: np.ndarray
    w: np.ndarray
    p: float = 1.0
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    max_level: int = MAX_LEVEL
    _source_cache: dict = field(default_factory=dict, repr=False)
    _q_cache: dict = field(default_factory=dict, repr=False)
    _factor_eig: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        self.psi, _ = as_positive_definite(self.psi)
        self.phi, _ = as_positive_definite(self.phi)
        self.v = as_hermitian(self.v)
        self.w = as_hermitian(self.w)
        if self.psi.shape != self.v.shape or self.phi.shape != self.w.shape:
            raise InvalidInputError("instance dimension mismatch")
        if not (0.0 < self.p <= 1.0):
            raise InvalidInputError(f"p = {self.p} outside (0, 1]")

    @property
    def dims(self) -> tuple[int, int]:
        return self.psi.shape[0], self.phi.shape[0]

    def factor_eig(self):
        if self._factor_eig is None:
            dp = hermitian_eig(self.psi, check=False)
            df = hermitian_eig(self.phi, check=False)
            U = np.kron(dp.eigenvectors, df.eigenvectors)
            self._factor_eig = (dp.eigenvalues, df.eigenvalues, U)
        return self._factor_eig


def build_G(inst: ConcavityInstance, q: float, r: float, eps: float) -> np.ndarray:
    """(Psi + eps V)^q (x) (Phi + eps W)^r, the curve whose curvature is certified."""
    if q < 0 or r < 0 or q + r > 1 + 1e-12:
        raise InvalidInputError(f"exponents q={q}, r={r} outside the concavity regime")
    A = hermitian_part(inst.psi + eps * inst.v)
    B = hermitian_part(inst.phi + eps * inst.w)
    for M in (A, B):
        if np.linalg.eigvalsh(M)[0] <= 0:
            raise InvalidInputError(f"eps = {eps} leaves the PD cone")
    return np.kron(matrix_power(A, q, check=False), matrix_power(B, r, check=False))


def k_delta(inst: ConcavityInstance, delta: float) -> np.ndarray:
    """Psi^delta (x) Phi^{-delta}; identity at delta = 0, PD always."""
    n1, n2 = inst.dims
    if delta == 0.0:
        return np.eye(n1 * n2, dtype=complex)
    return np.kron(
        matrix_power(inst.psi, delta, check=False),
        matrix_power(inst.phi, -delta, check=False),
    )


def d_delta(inst: ConcavityInstance, delta: float, F: np.ndarray) -> np.ndarray:
    """Solve K_delta Q + Q K_delta = F; positivity-preserving, near-halving.

    Uses the cached factor eigenbases, in which K_delta is diagonal with
    entries psi_i^delta phi_j^{-delta}.
    """
    if delta == 0.0:
        return np.asarray(F, dtype=complex) / 2.0
    dpsi, dphi, U = inst.factor_eig()
    kvals = np.kron(dpsi**delta, dphi ** (-delta))
    Fh = U.conj().T @ F @ U
    X = Fh / (kvals[:, None] + kvals[None, :])
    return hermitian_part(U @ X @ U.conj().T)


def source(inst: ConcavityInstance, exponent: DyadicExponent) -> np.ndarray:
    """PSD source term injected at one dyadic node (exponents scaled by p).

    Interior nodes: curvature term of the geometric mean between the two
    level-k neighbors.  Boundary nodes: second-order power coefficient on the
    active factor (zero when p = 1, where the endpoint maps are affine).
    """
    key = exponent
    if key in inst._source_cache:
        return inst._source_cache[key]
    p = inst.p
    n1, n2 = inst.dims
    if exponent.is_boundary:
        if exponent.numerator == 1:  # exponent pair (p, 0)
            val = np.kron(
                second_order(inst.psi, inst.v, p, rule=inst.quad.power_rule(), check=False),
                np.eye(n2),
            )
        else:  # exponent pair (0, p)
            val = np.kron(
                np.eye(n1),
                second_order(inst.phi, inst.w, p, rule=inst.quad.power_rule(), check=False),
            )
    else:
        lo, hi = exponent.neighbors()
        q_lo, q_hi = p * float(lo.value), p * float(hi.value)
        r_lo, r_hi = p - q_lo, p - q_hi
        psi_lo = matrix_power(inst.psi, q_lo, check=False)
        psi_hi = matrix_power(inst.psi, q_hi, check=False)
        phi_lo = matrix_power(inst.phi, r_lo, check=False)
        phi_hi = matrix_power(inst.phi, r_hi, check=False)
        A = np.kron(psi_lo, phi_lo)
        B = np.kron(psi_hi, phi_hi)
        X = np.kron(first_order(inst.psi, inst.v, q_lo, check=False), phi_lo) + np.kron(
            psi_lo, first_order(inst.phi, inst.w, r_lo, check=False)
        )
        Z = np.kron(first_order(inst.psi, inst.v, q_hi, check=False), phi_hi) + np.kron(
            psi_hi, first_order(inst.phi, inst.w, r_hi, check=False)
        )
        val = cross(A, B, X, Z, rule=inst.quad.sqrt_rule(), check=False)
    inst._source_cache[key] = val
    return val


def _delta_for_level(p: float, level: int, convention: str) -> float:
    if convention == DELTA_LEVEL_K:
        return p * 2.0 ** (-level)
    if convention == DELTA_LEVEL_K_MINUS_1:
        return p * 2.0 ** (-(level - 1))
    raise InvalidInputError(f"unknown delta convention {convention!r}")


def q_recursion(
    inst: ConcavityInstance,
    exponent: DyadicExponent,
    convention: str = DELTA_LEVEL_K,
) -> np.ndarray:
    """Q at a dyadic node: half-averaged neighbor terms plus the local source.

    Memoized on the exact exponent; descends to the boundary exponents whose Q
    is the boundary source.  The result is PSD (up to quadrature round-off).
    """
    if exponent.level > inst.max_level:
        raise InvalidInputError(
            f"exponent level {exponent.level} exceeds max_level {inst.max_level}"
        )
    key = (exponent, convention)
    if key in inst._q_cache:
        return inst._q_cache[key]
    if exponent.is_boundary:
        val = source(inst, exponent)
    else:
        lo, hi = exponent.neighbors()
        delta = _delta_for_level(inst.p, exponent.level, convention)
        val = (
            d_delta(inst, +delta, q_recursion(inst, hi, convention))
            + d_delta(inst, -delta, q_recursion(inst, lo, convention))
            + source(inst, exponent)
        )
    inst._q_cache[key] = val
    return val


def admissible_anchors(exponent: DyadicExponent) -> list[DyadicExponent]:
    """All lower-level dyadics within 2^{-k0} of the exponent, plus itself.

    These are exactly the nodes visited by the recursion, i.e. the sources
    that generate the second derivative.
    """
    out = [exponent]
    x = exponent.value
    for k0 in range(exponent.level):
        if k0 == 0:
            candidates = [0, 1]
        else:
            candidates = range(1, 2**k0 + 1, 2)
        for l0 in candidates:
            q0 = Fraction(l0, 2**k0)
            if abs(q0 - x) < Fraction(1, 2**k0):
                out.append(DyadicExponent(l0, k0))
    return sorted(out, key=lambda e: (e.level, e.numerator))


def enumerate_paths(
    q0: DyadicExponent,
    q: DyadicExponent,
    strict_upper: bool = False,
) -> list[SignedPath]:
    """All signed dyadic paths from q back to the anchor q0.

    Steps (m_j, c_j) have strictly increasing levels in (k0, k] and must sum
    to q0 - q exactly.  ``strict_upper`` excludes m = k (a variant that is
    empty for reduced level-k exponents; kept for comparison).
    """
    target = q0.value - q.value
    if q0 == q:
        return [SignedPath(())]
    if q0.level >= q.level:
        raise InvalidInputError("anchor must have lower level than the exponent")
    if abs(target) >= Fraction(1, 2**q0.level):
        return []
    top = q.level - 1 if strict_upper else q.level
    levels = list(range(q0.level + 1, top + 1))
    out = []
    for signs in itertools.product((-1, 0, 1), repeat=len(levels)):
        total = sum(
            (Fraction(c, 2**m) for m, c in zip(levels, signs) if c), Fraction(0)
        )
        if total == target:
            steps = tuple((m, c) for m, c in zip(levels, signs) if c)
            out.append(SignedPath(steps))
    return sorted(out, key=lambda pth: pth.steps)


def y_term(
    inst: ConcavityInstance,
    q: DyadicExponent,
    q0: DyadicExponent,
    convention: str = DELTA_LEVEL_K,
) -> np.ndarray:
    """Sum over paths of nested half-averaging images of the anchor source.

    The innermost operator carries the smallest level; each step applies
    d_delta with delta = c_j * p * 2^{-m_j}.
    """
    S = source(inst, q0)
    total = np.zeros_like(S)
    for path in enumerate_paths(q0, q):
        term = S
        for m, c in path.steps:
            term = d_delta(inst, c * _delta_for_level(inst.p, m, convention), term)
        total = total + term
    return total


def second_derivative(
    inst: ConcavityInstance,
    q,
    r=None,
    convention: str = DELTA_LEVEL_K,
    compare_paths: bool = False,
    truncation_level: int = NONDYADIC_TRUNCATION_LEVEL,
    return_info: bool = False,
):
    """G''(0) for the tensor-power curve; negative semidefinite.

    ``q`` may be a Fraction (exact dyadic multiple of p) or a float; non-dyadic
    ratios are truncated to ``truncation_level`` binary digits and the Cauchy
    increment between the last two levels is reported.  With ``compare_paths``
    the path-sum assembly is checked against the memoized recursion.
    """
    p = inst.p
    if r is not None and abs(float(q) + float(r) - p) > 1e-12:
        raise InvalidInputError(f"q + r = {float(q) + float(r)} does not match p = {p}")
    info: dict = {"convention": convention}
    ratio = Fraction(q) / Fraction(p)
    ratio = min(max(ratio, Fraction(0)), Fraction(1))
    den = ratio.denominator
    if den & (den - 1) == 0 and den.bit_length() - 1 <= inst.max_level:
        exponent = DyadicExponent.from_fraction(ratio)
        Q = q_recursion(inst, exponent, convention)
        if compare_paths:
            Y = sum(
                (y_term(inst, exponent, q0, convention) for q0 in admissible_anchors(exponent)),
                np.zeros_like(Q),
            )
            info["path_vs_recursion_gap"] = float(operator_norm(Y - Q))
        info["exponent"] = str(exponent)
        val = -2.0 * Q
    else:
        lo = _truncate_dyadic(ratio, truncation_level - 1, inst.max_level)
        hi = _truncate_dyadic(ratio, truncation_level, inst.max_level)
        Q_hi = q_recursion(inst, hi, convention)
        Q_lo = q_recursion(inst, lo, convention)
        info["exponent"] = str(hi)
        info["cauchy_increment"] = float(operator_norm(Q_hi - Q_lo)) * 2.0
        val = -2.0 * Q_hi
    if return_info:
        return val, info
    return val


def _truncate_dyadic(ratio: Fraction, level: int, max_level: int) -> DyadicExponent:
    level = min(level, max_level)
    trunc = Fraction(math.floor(ratio * 2**level), 2**level)
    return DyadicExponent.from_fraction(trunc)


# --- scalar trace form ------------------------------------------------------


@dataclass
class TraceConcavityInstance:
    """Data for h(t) = Tr(K* (t A1 + (1-t) A2)^q K (t B1 + (1-t) B2)^r)."""

    A1: np.ndarray
    A2: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    K: np.ndarray
    q: float
    r: float

    def __post_init__(self):
        for M in ("A1", "A2", "B1", "B2"):
            arr, _ = as_positive_definite(getattr(self, M))
            setattr(self, M, arr)
        self.K = np.asarray(self.K, dtype=complex)
        if self.q < 0 or self.r < 0 or self.q + self.r > 1 + 1e-12:
            raise InvalidInputError("exponents outside the concavity regime")

    def interpolants(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        return (
            hermitian_part(t * self.A1 + (1 - t) * self.A2),
            hermitian_part(t * self.B1 + (1 - t) * self.B2),
        )

    def segment_instance(self, t: float, **kw) -> ConcavityInstance:
        """Tensor-space instance at base point t, second factor transposed to
        match the vectorization pairing."""
        At, Bt = self.interpolants(t)
        return ConcavityInstance(
            psi=At,
            phi=Bt.T,
            v=self.A1 - self.A2,
            w=(self.B1 - self.B2).T,
            p=self.q + self.r,
            **kw,
        )


def lieb_h(inst2: TraceConcavityInstance, t: float) -> float:
    At, Bt = inst2.interpolants(t)
    val = np.trace(
        inst2.K.conj().T @ matrix_power(At, inst2.q, check=False) @ inst2.K
        @ matrix_power(Bt, inst2.r, check=False)
    )
    return float(val.real)


def lieb_h_second_derivative(
    inst2: TraceConcavityInstance, t: float, convention: str = DELTA_LEVEL_K, **kw
) -> float:
    """h''(t) through the tensor-space construction and the trace pairing."""
    seg = inst2.segment_instance(t, **kw)
    H2 = second_derivative(seg, inst2.q, convention=convention)
    v = np.asarray(inst2.K, dtype=complex).reshape(-1)
    return float((v.conj() @ (H2 @ v)).real)


def lieb_certificate(
    inst2: TraceConcavityInstance,
    t_grid=(0.2, 0.35, 0.5, 0.65, 0.8),
    tol: float = 1e-6,
    seed: int | None = None,
    reconstruction_nodes: int = 24,
    max_level: int = MAX_LEVEL,
) -> VerificationReport:
    """Certify concavity of h: sign of h'', finite differences, and the
    endpoint reconstruction h(t) = (1-t)h(0) + t h(1) - t * (double integral of h'').

    When q/(q+r) is not a dyadic rational within ``max_level`` the construction
    carries a truncation error O(2^{-max_level}); the finite-difference and
    reconstruction gaps are then reported but not gated.
    """
    p = inst2.q + inst2.r
    ratio = Fraction(inst2.q / p)
    den = ratio.denominator
    exact = den & (den - 1) == 0 and den.bit_length() - 1 <= max_level
    h0, h1 = lieb_h(inst2, 0.0), lieb_h(inst2, 1.0)
    scale = 1.0 + abs(h0) + abs(h1)
    worst_gap = 0.0
    max_positive_hpp = 0.0
    worst_concavity_violation = 0.0
    for t in t_grid:
        hpp = lieb_h_second_derivative(inst2, t)
        max_positive_hpp = max(max_positive_hpp, hpp)
        fd = _scalar_fd_second(lambda s: lieb_h(inst2, s), t)
        worst_gap = max(worst_gap, abs(hpp - fd) / scale)
        chord = (1 - t) * h0 + t * h1
        worst_concavity_violation = max(worst_concavity_violation, chord - lieb_h(inst2, t))
        recon = chord - t * triangular_weight(
            t, lambda s: lieb_h_second_derivative(inst2, s), n=reconstruction_nodes
        )
        worst_gap = max(worst_gap, abs(recon - lieb_h(inst2, t)) / scale)
    disc = max(max_positive_hpp / scale, worst_concavity_violation / scale)
    if exact:
        disc = max(disc, worst_gap)
    return VerificationReport.from_discrepancy(
        name="lieb.h-concavity",
        claim="trace form h is concave; h'' from the dyadic construction "
        "matches finite differences and reconstructs h from its endpoints",
        discrepancy=disc,
        tolerance=tol,
        computed={
            "fd_and_reconstruction_gap": worst_gap,
            "max_positive_hpp": max_positive_hpp,
            "concavity_violation": worst_concavity_violation,
            "dyadic_ratio": exact,
        },
        seed=seed,
    )


def _scalar_fd_second(f, t: float, h: float = 1e-4) -> float:
    d1 = (f(t + h) - 2 * f(t) + f(t - h)) / h**2
    d2 = (f(t + h / 2) - 2 * f(t) + f(t - h / 2)) / (h / 2) ** 2
    return (4 * d2 - d1) / 3
