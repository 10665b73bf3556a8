"""Deterministic random instances for the verification suites.

Recipe: a Hermitian G with standard complex normal entries, scaled by
1/sqrt(dim) to keep the spectral radius O(1), exponentiated to a full-rank
positive definite matrix (normalized to unit trace for density matrices).
Direction matrices are Hermitian with unit operator norm.  Everything is a
pure function of the seed.
"""

from __future__ import annotations

import math

import numpy as np

from .linalg import InvalidInputError, hermitian_part


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_hermitian(n: int, rng: np.random.Generator, unit_norm: bool = True) -> np.ndarray:
    M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    H = hermitian_part(M)
    if unit_norm:
        nrm = np.linalg.norm(H, 2)
        if nrm > 0:
            H = H / nrm
    return H

def random_pd(n: int, rng: np.random.Generator, spread: float | None = None) -> np.ndarray:
    """exp(G / sqrt(n)); condition number stays moderate across dimensions."""
    s = spread if spread is not None else math.sqrt(max(n, 1))
    G = random_hermitian(n, rng, unit_norm=False) / s
    w, U = np.linalg.eigh(G)
    return hermitian_part((U * np.exp(w)) @ U.conj().T)


def random_density(n: int, rng: np.random.Generator) -> np.ndarray:
    R = random_pd(n, rng)
    return R / float(np.trace(R).real)


def mean_quadruple(dim: int, seed: int):
    """(A, B, X, Z) for curvature checks: PD pair plus unit-norm directions."""
    rng = _rng(seed)
    return (
        random_pd(dim, rng),
        random_pd(dim, rng),
        random_hermitian(dim, rng),
        random_hermitian(dim, rng),
    )


def concavity_quadruple(dim_n: int, dim_m: int, seed: int):
    """(A1, A2, B1, B2, K) for the trace concavity form."""
    rng = _rng(seed)
    A1, A2 = random_pd(dim_n, rng), random_pd(dim_n, rng)
    B1, B2 = random_pd(dim_m, rng), random_pd(dim_m, rng)
    K = rng.standard_normal((dim_n, dim_m)) + 1j * rng.standard_normal((dim_n, dim_m))
    return A1, A2, B1, B2, K


def segment_endpoints(dim: int, seed: int):
    """(A1, A2, B1, B2) densities for relative-entropy segments."""
    rng = _rng(seed)
    return tuple(random_density(dim, rng) for _ in range(4))


def tripartite_density(dims: tuple[int, int, int], seed: int) -> np.ndarray:
    n = int(np.prod(dims))
    if n < 2:
        raise InvalidInputError(f"degenerate dims {dims}")
    return random_density(n, _rng(seed))


def classical_tripartite_density(dims: tuple[int, int, int], seed: int) -> np.ndarray:
    """Diagonal (classical) full-rank state; its cmi has a closed formula."""
    rng = _rng(seed)
    n = int(np.prod(dims))
    p = rng.random(n) + 0.05
    p = p / p.sum()
    return np.diag(p).astype(complex)
