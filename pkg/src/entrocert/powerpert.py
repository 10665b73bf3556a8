"""Perturbation expansions of matrix powers (L + eps F)^q for q in [0, 1].

Production path: divided differences in the eigenbasis of L (exact up to
round-off).  The alternative constructions that define the same objects --
the half-power Sylvester recursion, its rescaled limit, and the resolvent
integral representation -- are implemented alongside as independent oracles:

    (L + eps F)^q = L^q + eps * first_order - eps^2 * second_order + O(eps^3)

with ``second_order`` positive semidefinite for every q in (0, 1).
"""

from __future__ import annotations

import math

import numpy as np

from .linalg import (
    InvalidInputError,
    as_hermitian,
    as_positive_definite,
    hermitian_eig,
    hermitian_part,
    matrix_power,
    sylvester_solve,
)
from .quadrature import QuadratureRule, half_line_power_rule, integrate_loewner

EQUAL_EIG_REL = 1e-8


def _divided_difference_power(d: np.ndarray, q: float) -> np.ndarray:
    """Matrix of (d_k^q - d_l^q)/(d_k - d_l), analytic limit on near-ties."""
    dk = d[:, None]
    dl = d[None, :]
    close = np.abs(dk - dl) < EQUAL_EIG_REL * (dk + dl)
    mid = (dk + dl) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        dd = (dk**q - dl**q) / (dk - dl)
    limit = q * mid ** (q - 1)
    return np.where(close, limit, dd)


def _divided_difference_log(d: np.ndarray) -> np.ndarray:
    dk = d[:, None]
    dl = d[None, :]
    close = np.abs(dk - dl) < EQUAL_EIG_REL * (dk + dl)
    mid = (dk + dl) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        dd = (np.log(dk) - np.log(dl)) / (dk - dl)
    return np.where(close, 1.0 / mid, dd)


def first_order(L: np.ndarray, F: np.ndarray, q: float, check: bool = True) -> np.ndarray:
    """First directional derivative of the q-th power at L in direction F."""
    if check:
        L, _ = as_positive_definite(L)
        F = as_hermitian(F)
    if q == 0.0:
        return np.zeros_like(np.asarray(F, dtype=complex))
    if q == 1.0:
        return np.asarray(F, dtype=complex)
    if not (0.0 < q < 1.0):
        raise InvalidInputError(f"first_order: q = {q} outside [0, 1]")
    dec = hermitian_eig(L, check=False)
    d, U = dec.eigenvalues, dec.eigenvectors
    Fh = U.conj().T @ F @ U
    out = Fh * _divided_difference_power(d, q)
    return hermitian_part(U @ out @ U.conj().T)


def log_derivative(L: np.ndarray, F: np.ndarray, check: bool = True) -> np.ndarray:
    """The unique Hermitian matrix G with first_order(L, F, q) = int_0^q L^s G L^{q-s} ds.

    Equals the limit of 2^m times the m-fold half-power recursion; in the
    eigenbasis it is F_kl (ln d_k - ln d_l)/(d_k - d_l).
    """
    if check:
        L, _ = as_positive_definite(L)
        F = as_hermitian(F)
    dec = hermitian_eig(L, check=False)
    d, U = dec.eigenvalues, dec.eigenvectors
    Fh = U.conj().T @ F @ U
    out = Fh * _divided_difference_log(d)
    return hermitian_part(U @ out @ U.conj().T)


def second_order(
    L: np.ndarray,
    F: np.ndarray,
    q: float,
    rule: QuadratureRule | None = None,
    check: bool = True,
) -> np.ndarray:
    """The PSD quadratic coefficient (sin(pi q)/pi) int t^q R F R F R dt, R = (t+L)^{-1}.

    Evaluated in the eigenbasis of L so each quadrature node costs one scaled
    matrix product; q in {0, 1} returns zero (the power map is affine there).
    """
    if check:
        L, _ = as_positive_definite(L)
        F = as_hermitian(F)
    n = L.shape[0]
    if q in (0.0, 1.0):
        return np.zeros((n, n), dtype=complex)
    if not (0.0 < q < 1.0):
        raise InvalidInputError(f"second_order: q = {q} outside [0, 1]")
    if rule is None:
        rule = half_line_power_rule()
    dec = hermitian_eig(L, check=False)
    d, U = dec.eigenvalues, dec.eigenvectors
    Fh = U.conj().T @ F @ U

    t = rule.nodes
    log_scale = np.log(rule.weights) + q * np.log(t)
    # distribute the node weight over the three resolvent factors so that no
    # intermediate over- or underflows at the extreme exp-sinh nodes
    cbrt = np.exp(log_scale / 3.0)
    # resolvent is diagonal: R(t) = diag(1/(t + d_k))
    r = cbrt[:, None] / (t[:, None] + d[None, :])  # (nodes, n)
    RF = r[:, :, None] * Fh[None, :, :] * r[:, None, :]  # w^{2/3} R F R per node
    FR = Fh[None, :, :] * r[:, None, :]  # w^{1/3} F R per node
    K = np.einsum("jkl->kl", RF @ FR)
    K = hermitian_part(U @ K @ U.conj().T) * (math.sin(math.pi * q) / math.pi)
    return K


def loewner_power(
    L: np.ndarray, q: float, rule: QuadratureRule | None = None, check: bool = True
) -> np.ndarray:
    """L^q through the resolvent representation; independent of the eigenbasis power."""
    if check:
        L, _ = as_positive_definite(L)
    if not (0.0 < q < 1.0):
        raise InvalidInputError(f"loewner_power: q = {q} outside (0, 1)")
    n = L.shape[0]
    Lc = np.asarray(L, dtype=complex)

    def g(t: float) -> np.ndarray:
        # 1/t - (t+L)^{-1} = t^{-1} L (t+L)^{-1}, safe at both endpoints
        R = np.linalg.inv(t * np.eye(n) + Lc)
        return (Lc @ R) / t

    return integrate_loewner(q, g, rule=rule)


def power_expansion_residual(
    L: np.ndarray, F: np.ndarray, q: float, eps: float
) -> float:
    """Norm of (L + eps F)^q - [L^q + eps first_order - eps^2 second_order]."""
    base = matrix_power(L, q, check=False)
    fo = first_order(L, F, q, check=False)
    so = second_order(L, F, q, check=False)
    pert = matrix_power(hermitian_part(L + eps * F), q, check=False)
    resid = pert - base - eps * fo + eps**2 * so
    return float(np.linalg.norm(resid, 2))


# --- recursion-based oracles -----------------------------------------------


def half_power_chain(L: np.ndarray, F: np.ndarray, m: int) -> list[np.ndarray]:
    """[F_{1/2}, F_{1/4}, ..., F_{1/2^m}] via the nested Sylvester equations
    L^{1/2^j} G_j + G_j L^{1/2^j} = G_{j-1}, starting from G_0 = F."""
    if m < 1:
        raise InvalidInputError("half_power_chain: m >= 1 required")
    chain = []
    prev = np.asarray(F, dtype=complex)
    for j in range(1, m + 1):
        root = matrix_power(L, 2.0 ** (-j), check=False)
        prev = sylvester_solve(root, prev, check=False)
        chain.append(prev)
    return chain


def first_order_recursive(L: np.ndarray, F: np.ndarray, k: int, m: int) -> np.ndarray:
    """First derivative at dyadic exponent k/2^m assembled from 1/2^m pieces.

    Product rule over k copies of the 1/2^m power:
    sum_l L^{l/2^m} F_{1/2^m} L^{(k-1-l)/2^m}.
    """
    if not (0 <= k <= 2**m):
        raise InvalidInputError("first_order_recursive: need 0 <= k <= 2^m")
    if k == 0:
        return np.zeros_like(np.asarray(F, dtype=complex))
    Fm = half_power_chain(L, F, m)[-1]
    dec = hermitian_eig(L, check=False)
    d, U = dec.eigenvalues, dec.eigenvectors
    Fmh = U.conj().T @ Fm @ U
    powers = d[:, None] ** (np.arange(k)[None, :] / 2.0**m)
    # sum_l d_i^{l/2^m} Fm_ij d_j^{(k-1-l)/2^m}, vectorized over the entry grid
    out = np.zeros_like(Fmh)
    for l in range(k):
        out += (powers[:, l][:, None]) * Fmh * (powers[:, k - 1 - l][None, :])
    return hermitian_part(U @ out @ U.conj().T)


def log_derivative_recursive(L: np.ndarray, F: np.ndarray, m: int) -> np.ndarray:
    """2^m F_{1/2^m}; converges to log_derivative(L, F) as m grows."""
    return (2.0**m) * half_power_chain(L, F, m)[-1]
