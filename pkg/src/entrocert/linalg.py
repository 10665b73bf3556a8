"""Dense complex linear algebra kernels shared by every verification module.

All matrices are plain ``numpy.ndarray`` with complex entries.  Hermitian and
positive-definite inputs are validated (and symmetrized) by the helpers here;
downstream modules assume validated arrays and stay allocation-light.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

HERMITICITY_TOL = 1e-10
PD_FLOOR = 1e-12
EIG_TOL = 1e-10
SYLVESTER_TOL = 1e-12


class InvalidInputError(ValueError):
    """Input violates a documented precondition."""


class NumericalFailureError(ArithmeticError):
    """A numerical routine failed to meet its accuracy contract."""


def operator_norm(M: np.ndarray) -> float:
    """Largest singular value of M (spectral radius for Hermitian M)."""
    M = np.asarray(M)
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("operator_norm: non-finite entries")
    return float(np.linalg.norm(M, 2))


def hermitian_part(M: np.ndarray) -> np.ndarray:
    return (M + M.conj().T) / 2


def as_hermitian(M: np.ndarray, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Validate Hermiticity to tolerance and return the symmetrized matrix."""
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("matrix has non-finite entries")
    dev = operator_norm(M - M.conj().T)
    if dev > tol * (1.0 + operator_norm(M)):
        raise InvalidInputError(f"matrix is not Hermitian: deviation {dev:.3e}")
    return hermitian_part(M)


def as_positive_definite(
    M: np.ndarray, floor: float = PD_FLOOR, tol: float = HERMITICITY_TOL
) -> tuple[np.ndarray, float]:
    """Validate positive definiteness; returns (symmetrized matrix, min eigenvalue).

    Rejects rather than regularizes: the smallest eigenvalue must be at least
    ``floor`` times the largest.
    """
    H = as_hermitian(M, tol)
    w = np.linalg.eigvalsh(H)
    if w[0] <= floor * max(w[-1], 0.0) or w[0] <= 0.0:
        raise InvalidInputError(
            f"matrix is not positive definite: min eig {w[0]:.3e}, max eig {w[-1]:.3e}"
        )
    return H, float(w[0])


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.conj().T


def hermitian_eig(M: np.ndarray, check: bool = True) -> SpectralDecomposition:
    """Deterministic Hermitian eigendecomposition.

    Eigenvalues ascend; each eigenvector's phase is fixed so that its first
    component of non-negligible modulus is real and positive, which makes
    repeated runs bit-stable.
    """
    H = as_hermitian(M) if check else np.asarray(M, dtype=complex)
    w, U = np.linalg.eigh(H)
    n = H.shape[0]
    idx = np.argmax(np.abs(U) > 1e-8, axis=0)
    pivots = U[idx, np.arange(n)]
    mags = np.abs(pivots)
    safe = mags > 0
    phases = np.where(safe, np.conj(pivots) / np.where(safe, mags, 1.0), 1.0)
    U = U * phases[None, :]
    dec = SpectralDecomposition(eigenvalues=w, eigenvectors=U)
    if check:
        scale = max(abs(w[0]), abs(w[-1]), 1.0)
        resid = operator_norm(dec.reconstruct() - H)
        ortho = operator_norm(U.conj().T @ U - np.eye(n))
        if resid > EIG_TOL * scale or ortho > EIG_TOL:
            raise NumericalFailureError(
                f"eigendecomposition residual {resid:.3e}, orthogonality {ortho:.3e}"
            )
    return dec


def matrix_function(M: np.ndarray, f, check: bool = True) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its spectrum.

    Raises a domain error naming the offending eigenvalue when f is undefined
    (NaN/Inf) there.
    """
    dec = hermitian_eig(M, check=check)
    with np.errstate(all="ignore"):
        fw = np.asarray([f(x) for x in dec.eigenvalues], dtype=float)
    bad = ~np.isfinite(fw)
    if np.any(bad):
        ev = dec.eigenvalues[bad][0]
        raise InvalidInputError(f"matrix_function: f undefined at eigenvalue {ev!r}")
    U = dec.eigenvectors
    return hermitian_part((U * fw) @ U.conj().T)


def matrix_power(M: np.ndarray, q: float, check: bool = True) -> np.ndarray:
    if q == 0:
        return np.eye(M.shape[0], dtype=complex)
    if q == 1:
        return np.asarray(M, dtype=complex)
    return matrix_function(M, lambda x: float(x) ** q, check=check)


def matrix_log2(M: np.ndarray) -> np.ndarray:
    return matrix_function(M, np.log2)


def kron(M1: np.ndarray, M2: np.ndarray) -> np.ndarray:
    """Kronecker product, row-major block convention."""
    return np.kron(np.asarray(M1), np.asarray(M2))


def vec_embed(K: np.ndarray) -> np.ndarray:
    """Row-major vectorization of K; pairs with :func:`pairing_matrix`."""
    return np.asarray(K, dtype=complex).reshape(-1)


def pairing_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """The operator P(A, B) with Tr(K* A K B) = <vec K, P(A,B) vec K>.

    With row-major vec the second factor enters transposed, so P(A,B) = A (x) B^T.
    For Hermitian B the transpose is the entrywise conjugate.  All entropy code
    goes through this map and never builds a bare A (x) B.
    """
    return np.kron(np.asarray(A), np.asarray(B).T)


def conjugate_second_factor(B: np.ndarray) -> np.ndarray:
    """Second-factor image under the vectorization pairing (transpose)."""
    return np.asarray(B).T.copy()


def trace_pairing(K: np.ndarray, A: np.ndarray, B: np.ndarray) -> complex:
    """<V_K, (A (x) B~) V_K>, numerically equal to Tr(K* A K B)."""
    v = vec_embed(K)
    return complex(v.conj() @ (pairing_matrix(A, B) @ v))


def sylvester_solve(Y: np.ndarray, Omega: np.ndarray, check: bool = True) -> np.ndarray:
    """Unique Hermitian X with Y X + X Y = Omega, for positive definite Y.

    Solved in Y's eigenbasis: X_kl = Omega_kl / (d_k + d_l).  Preserves
    positive semidefiniteness of Omega.
    """
    if check:
        Y, _ = as_positive_definite(Y)
        Omega = as_hermitian(Omega)
    dec = hermitian_eig(Y, check=False)
    d = dec.eigenvalues
    if d[0] <= 0:
        raise InvalidInputError("sylvester_solve: Y is not positive definite")
    U = dec.eigenvectors
    Om = U.conj().T @ Omega @ U
    X = Om / (d[:, None] + d[None, :])
    X = hermitian_part(U @ X @ U.conj().T)
    if check:
        resid = operator_norm(Y @ X + X @ Y - Omega)
        if resid > SYLVESTER_TOL * max(operator_norm(Omega), 1e-300):
            raise NumericalFailureError(f"sylvester residual {resid:.3e}")
    return X


def partial_trace(
    M: np.ndarray, dims: tuple[int, ...], traced: tuple[int, ...]
) -> np.ndarray:
    """Trace out the listed tensor factors of a matrix on a product space."""
    dims = tuple(int(d) for d in dims)
    M = np.asarray(M, dtype=complex)
    n = int(np.prod(dims))
    if M.shape != (n, n):
        raise InvalidInputError(
            f"partial_trace: matrix shape {M.shape} does not match dims {dims}"
        )
    traced = tuple(sorted(set(int(i) for i in traced)))
    if any(i < 0 or i >= len(dims) for i in traced):
        raise InvalidInputError(f"partial_trace: factor index out of range {traced}")
    keep = [i for i in range(len(dims)) if i not in traced]
    T = M.reshape(dims + dims)
    m = len(dims)
    # axes 0..m-1 index rows per factor, m..2m-1 columns; traced factors share
    # the row index so einsum contracts them
    in_idx = list(range(m)) + [i if i in traced else m + i for i in range(m)]
    out_idx = keep + [m + i for i in keep]
    out = np.einsum(T, in_idx, out_idx)
    dkeep = int(np.prod([dims[i] for i in keep])) if keep else 1
    return out.reshape(dkeep, dkeep)


# --- shared matrix file format -------------------------------------------------
#
# JSON object {"dims": [d1, ..., dm], "entries": [[[re, im], ...], ...]} with
# entries row-major; a single square matrix uses "dims": [n].


def matrix_to_json(M: np.ndarray, dims: tuple[int, ...] | None = None) -> dict:
    M = np.asarray(M, dtype=complex)
    if dims is None:
        dims = (M.shape[0],)
    entries = [[[float(z.real), float(z.imag)] for z in row] for row in M]
    return {"dims": [int(d) for d in dims], "entries": entries}


def matrix_from_json(obj: dict, hermitian: bool = False) -> tuple[np.ndarray, tuple[int, ...]]:
    try:
        dims = tuple(int(d) for d in obj["dims"])
        entries = obj["entries"]
        M = np.array(
            [[complex(float(e[0]), float(e[1])) for e in row] for row in entries],
            dtype=complex,
        )
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise InvalidInputError(f"malformed matrix object: {exc}") from exc
    n = int(np.prod(dims))
    if M.shape != (n, n):
        raise InvalidInputError(f"entries shape {M.shape} does not match dims {dims}")
    if hermitian:
        M = as_hermitian(M)
    return M, dims


def save_matrix(path: str, M: np.ndarray, dims: tuple[int, ...] | None = None) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(matrix_to_json(M, dims), fh)
        fh.write("\n")
    os.replace(tmp, path)


def load_matrix(path: str, hermitian: bool = False) -> tuple[np.ndarray, tuple[int, ...]]:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"malformed JSON in {path}: {exc}") from exc
    return matrix_from_json(obj, hermitian=hermitian)
