"""Geometric means of positive definite matrices and their curvature term.

The central object is ``cross(A, B, X, Z)``, a manifestly positive
semidefinite matrix equal to minus half the second directional derivative of
the geometric mean M0(A + eps X, B + eps Z) at eps = 0.  Its construction goes
through three auxiliary Hermitian matrices built from the half-sum C = (A+B)/2:

    Psi = C^{-1/2} (A-B)/2 C^{-1/2}        (norm < 1)
    E2  = C^{-1/2} (X-Z)/2 C^{-1/2}
    E1  = -C^{-1/2} (X+Z)/2 C^{-1/2}

and two half-line integrals whose integrands are built from the resolvent
T(s) = (I - (1+s)^{-1} Psi^2)^{-1} and P = E2 + Psi E1:

    cross = (1/pi) C^{1/2} [ I1 + Psi I2 Psi ] C^{1/2}
    I1 = int_0^inf s^{1/2} (1+s)^{-1} T W T W* T ds,
         W(s) = (1+s)^{-1/2} P + (1+s)^{-3/2} Psi P Psi
    I2 = int_0^inf s^{1/2} (1+s)^{-3} T P P* T ds

Each integrand is a positive semidefinite sandwich, which is what makes
negativity of the second derivative visible by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import (
    InvalidInputError,
    NumericalFailureError,
    as_hermitian,
    as_positive_definite,
    hermitian_eig,
    hermitian_part,
    matrix_function,
    operator_norm,
)
from .quadrature import QuadratureRule, half_line_sqrt_rule
from .report import VerificationReport

PSD_SLACK = 1e-10


def geometric_mean(A: np.ndarray, B: np.ndarray, check: bool = True) -> np.ndarray:
    """M0(A, B) = B^{1/2} (B^{-1/2} A B^{-1/2})^{1/2} B^{1/2}."""
    if check:
        A, _ = as_positive_definite(A)
        B, _ = as_positive_definite(B)
    if A.shape != B.shape:
        raise InvalidInputError(f"dimension mismatch {A.shape} vs {B.shape}")
    Bh = matrix_function(B, math.sqrt, check=False)
    Bhi = np.linalg.inv(Bh)
    inner = matrix_function(hermitian_part(Bhi @ A @ Bhi), math.sqrt, check=False)
    return hermitian_part(Bh @ inner @ Bh)


@dataclass(frozen=True)
class CrossIngredients:
    """The three Hermitian building blocks of the curvature term."""

    psi: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    half_sum_sqrt: np.ndarray  # ((A+B)/2)^{1/2}

    @property
    def p_factor(self) -> np.ndarray:
        """P = E2 + Psi E1; the curvature vanishes iff P = 0."""
        return self.e2 + self.psi @ self.e1


def cross_ingredients(
    A: np.ndarray,
    B: np.ndarray,
    X: np.ndarray,
    Z: np.ndarray,
    check: bool = True,
    psi_norm_check: bool = True,
) -> CrossIngredients:
    if check:
        A, _ = as_positive_definite(A)
        B, _ = as_positive_definite(B)
        X = as_hermitian(X)
        Z = as_hermitian(Z)
    if not (A.shape == B.shape == X.shape == Z.shape):
        raise InvalidInputError("cross_ingredients: dimension mismatch")
    C = (A + B) / 2
    Ch = matrix_function(C, math.sqrt, check=False)
    Chi = np.linalg.inv(Ch)
    psi = hermitian_part(Chi @ ((A - B) / 2) @ Chi)
    e2 = hermitian_part(Chi @ ((X - Z) / 2) @ Chi)
    e1 = hermitian_part(Chi @ (-(X + Z) / 2) @ Chi)
    if psi_norm_check:
        nrm = operator_norm(psi)
        if nrm >= 1.0:
            raise NumericalFailureError(
                f"|Psi| = {nrm} >= 1; upstream inputs were not both positive definite"
            )
    return CrossIngredients(psi=psi, e1=e1, e2=e2, half_sum_sqrt=Ch)


def cross(
    A: np.ndarray,
    B: np.ndarray,
    X: np.ndarray,
    Z: np.ndarray,
    rule: QuadratureRule | None = None,
    check: bool = True,
    psd_slack: float = PSD_SLACK,
) -> np.ndarray:
    """The PSD curvature term with cross(A,B)(X,Z) = -1/2 d^2/deps^2 M0 at 0.

    Evaluated in the eigenbasis of Psi, where the resolvent T(s) is diagonal
    and all quadrature nodes batch into a single stack of matrix products.
    """
    if not (np.any(X) or np.any(Z)):
        return np.zeros_like(np.asarray(A, dtype=complex))
    ing = cross_ingredients(A, B, X, Z, check=check, psi_norm_check=check)
    if rule is None:
        rule = half_line_sqrt_rule()
    psi, Ch = ing.psi, ing.half_sum_sqrt
    P = ing.p_factor

    dec = hermitian_eig(psi, check=False)
    d, U = dec.eigenvalues, dec.eigenvectors
    if np.max(np.abs(d)) >= 1.0:
        raise NumericalFailureError(
            f"|Psi| = {np.max(np.abs(d))} >= 1; inputs were not both positive definite"
        )
    Ph = U.conj().T @ P @ U

    s = rule.nodes
    x = 1.0 / (1.0 + s)  # (1+s)^{-1} per node
    tilde = 1.0 / (1.0 - np.outer(x, d**2))  # T(s) eigenvalues, shape (nodes, n)
    c1 = rule.weights * np.sqrt(s) * x
    c2 = rule.weights * np.sqrt(s) * x**3

    # W(s) entrywise in the eigenbasis: P_kl (1+s)^{-1/2} (1 + (1+s)^{-1} d_k d_l)
    dd = np.outer(d, d)
    W = Ph[None, :, :] * np.sqrt(x)[:, None, None] * (1.0 + x[:, None, None] * dd[None, :, :])
    TWT = tilde[:, :, None] * W * tilde[:, None, :]
    WstarT = W.conj().transpose(0, 2, 1) * tilde[:, None, :]
    I1 = np.einsum("j,jkl->kl", c1, TWT @ WstarT)

    PPc = Ph @ Ph.conj().T
    wkl = (tilde * c2[:, None]).T @ tilde  # sum_j c2_j t_jk t_jl
    I2 = wkl * PPc

    J = I1 + np.outer(d, d) * I2  # Psi I2 Psi is entrywise in the eigenbasis
    M = Ch @ (U @ J @ U.conj().T) @ Ch / math.pi
    M = hermitian_part(M)
    lo = float(np.linalg.eigvalsh(M)[0])
    if lo < -psd_slack * max(operator_norm(M), 1e-300):
        raise NumericalFailureError(f"curvature term not PSD: min eig {lo:.3e}")
    return M


def cross_scalar(a: float, b: float, x: float, z: float) -> float:
    """Closed form in dimension one: (x b - z a)^2 / (8 (a b)^{3/2})."""
    return (x * b - z * a) ** 2 / (8.0 * (a * b) ** 1.5)


def _beta_half(n: float) -> float:
    """int_0^inf s^{1/2} (1+s)^{-n} ds = B(3/2, n - 3/2), for n > 3/2."""
    return math.exp(
        math.lgamma(1.5) + math.lgamma(n - 1.5) - math.lgamma(n)
    )


def _geometric_coeffs(a: float, nmax: int) -> np.ndarray:
    return a ** np.arange(nmax)


def cross_eigenbasis_series(
    A: np.ndarray,
    B: np.ndarray,
    X: np.ndarray,
    Z: np.ndarray,
    tail_tol: float = 1e-14,
    nmax: int = 4000,
) -> np.ndarray:
    """Quadrature-free evaluation of the curvature term.

    In the eigenbasis of Psi every integrand entry is a product of geometric
    series in (1+s)^{-1}; integrating term by term turns each entry into a
    series of Beta values, summed here until the geometric tail is below
    ``tail_tol``.  Serves as an independent oracle for :func:`cross`.
    """
    ing = cross_ingredients(A, B, X, Z)
    psi, Ch = ing.psi, ing.half_sum_sqrt
    P = ing.p_factor
    dec = hermitian_eig(psi, check=False)
    d, U = dec.eigenvalues, dec.eigenvectors
    Ph = U.conj().T @ P @ U
    n = len(d)

    rho = float(np.max(np.abs(d))) ** 2
    if rho >= 1.0:
        raise NumericalFailureError("series oracle requires |Psi| < 1")
    # series length: rho^N * N^2 below tail_tol
    N = 64
    while N < nmax and rho**N * (N + 1) ** 2 > tail_tol:
        N *= 2
    N = min(N, nmax)

    idx = np.arange(N)
    beta_at = {}

    def beta(shift: int) -> np.ndarray:
        # integral weights int s^{1/2}(1+s)^{-(shift + m)} ds for m = 0..N-1
        if shift not in beta_at:
            beta_at[shift] = np.array([_beta_half(shift + m) for m in idx])
        return beta_at[shift]

    geo = {k: _geometric_coeffs(d[k] ** 2, N) for k in range(n)}

    def conv2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.convolve(a, b)[:N]

    I2 = np.zeros((n, n), dtype=complex)
    PPc = Ph @ Ph.conj().T
    for k in range(n):
        for l in range(n):
            c2 = conv2(geo[k], geo[l])
            I2[k, l] = PPc[k, l] * float(np.sum(c2 * beta(3)))

    I1 = np.zeros((n, n), dtype=complex)
    for k in range(n):
        for l in range(n):
            acc = 0.0 + 0.0j
            for m in range(n):
                c3 = conv2(conv2(geo[k], geo[m]), geo[l])
                p1 = d[k] * d[m] + d[m] * d[l]
                p2 = d[k] * d[m] ** 2 * d[l]
                val = float(np.sum(c3 * beta(2))) + p1 * float(
                    np.sum(c3 * beta(3))
                ) + p2 * float(np.sum(c3 * beta(4)))
                acc += Ph[k, m] * np.conj(Ph[l, m]) * val
            I1[k, l] = acc

    J = I1 + np.outer(d, d) * I2
    M = Ch @ (U @ J @ U.conj().T) @ Ch / math.pi
    return hermitian_part(M)


def default_fd_step(
    A: np.ndarray, B: np.ndarray, X: np.ndarray, Z: np.ndarray, base: float = 1e-3
) -> float:
    """Step keeping A +- h X, B +- h Z safely positive definite."""
    la = float(np.linalg.eigvalsh(as_hermitian(A))[0])
    lb = float(np.linalg.eigvalsh(as_hermitian(B))[0])
    return base * min(1.0, la, lb) / (1.0 + operator_norm(X) + operator_norm(Z))


def mean_second_derivative_fd(
    A: np.ndarray, B: np.ndarray, X: np.ndarray, Z: np.ndarray, step: float
) -> np.ndarray:
    """Central second difference of eps -> M0(A + eps X, B + eps Z); oracle only."""
    for sgn in (+1, -1):
        for M, D in ((A, X), (B, Z)):
            w = np.linalg.eigvalsh(as_hermitian(M + sgn * step * D))
            if w[0] <= 0:
                raise InvalidInputError(
                    f"fd step {step} leaves the PD cone; use a smaller step"
                )
    plus = geometric_mean(A + step * X, B + step * Z, check=False)
    mid = geometric_mean(A, B, check=False)
    minus = geometric_mean(A - step * X, B - step * Z, check=False)
    return (plus - 2 * mid + minus) / step**2


def mean_second_derivative_fd_refined(
    A: np.ndarray, B: np.ndarray, X: np.ndarray, Z: np.ndarray, step: float
) -> np.ndarray:
    """Richardson-refined central second difference (steps h and h/2).

    Cancels the leading h^2 truncation term, leaving O(h^4); used where the
    identity must certify below the plain central-difference floor.
    """
    d1 = mean_second_derivative_fd(A, B, X, Z, step)
    d2 = mean_second_derivative_fd(A, B, X, Z, step / 2)
    return (4 * d2 - d1) / 3


def joint_concavity_check(
    A1: np.ndarray,
    A2: np.ndarray,
    B1: np.ndarray,
    B2: np.ndarray,
    t: float,
    tol: float = 1e-5,
    seed: int | None = None,
    rule: QuadratureRule | None = None,
) -> VerificationReport:
    """Certify concavity of t -> M0(t A1 + (1-t) A2, t B1 + (1-t) B2) at t.

    Checks the PSD curvature term against a finite-difference Hessian and the
    midpoint inequality M(t) >= (M(t+e) + M(t-e))/2.
    """
    if not (0.0 < t < 1.0):
        raise InvalidInputError("t must lie in (0, 1)")
    At = t * A1 + (1 - t) * A2
    Bt = t * B1 + (1 - t) * B2
    X = A1 - A2
    Z = B1 - B2
    C = cross(At, Bt, X, Z, rule=rule)
    scale = 1.0 + operator_norm(C)
    if operator_norm(X) == 0.0 and operator_norm(Z) == 0.0:
        fd = np.zeros_like(C)
        h = 0.0
    else:
        h = default_fd_step(At, Bt, X, Z)
        fd = mean_second_derivative_fd_refined(At, Bt, X, Z, h)
    fd_gap = operator_norm(fd + 2 * C) / scale
    eps = min(t, 1 - t) / 4
    mid = geometric_mean(At, Bt)
    avg = (
        geometric_mean(At + eps * X, Bt + eps * Z)
        + geometric_mean(At - eps * X, Bt - eps * Z)
    ) / 2
    midpoint_violation = max(0.0, -float(np.linalg.eigvalsh(mid - avg)[0]))
    disc = max(fd_gap, midpoint_violation / scale)
    return VerificationReport.from_discrepancy(
        name="geomean.joint-concavity",
        claim="second derivative of the interpolated geometric mean equals "
        "-2 x curvature term and the midpoint inequality holds",
        discrepancy=disc,
        tolerance=tol,
        computed={
            "fd_identity_gap": fd_gap,
            "midpoint_violation": midpoint_violation,
            "fd_step": h,
            "t": t,
            "curvature_norm": operator_norm(C),
        },
        seed=seed,
    )
