"""Dense real-matrix kernels at desk scale (n up to ~50).

Symmetric spectra come from the project's cyclic-Jacobi kernel (compiled or
pure backend); matrix products and the small SPD solve inside the
pseudo-inverse use numpy. All functions are pure and safe to call
concurrently.
"""

from dataclasses import dataclass

import numpy as np

from ._kernels import jacobi_eigvals
from .errors import (
    AsymmetricBeyondTol,
    ConvergenceError,
    DimensionMismatch,
    NonSquare,
    RankDeficient,
)

SYM_TOL = 1e-9
_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class SymmetricSpectrum:
    """All eigenvalues of a symmetric matrix, sorted ascending."""

    eigenvalues: np.ndarray
    max: float
    min: float


def as_matrix(m, name="matrix"):
    """Validate and convert to a float64 2-D array; rejects NaN/Inf."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array")
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatch(f"{name} contains non-finite entries")
    return np.ascontiguousarray(arr)


def _require_square(arr, name):
    if arr.shape[0] != arr.shape[1]:
        raise NonSquare(f"{name} is {arr.shape[0]}x{arr.shape[1]}, expected square")


def _sym_eigvals(sym):
    """Sorted eigenvalues of an already-symmetric array via the Jacobi kernel."""
    try:
        return np.sort(jacobi_eigvals(np.ascontiguousarray(sym)))
    except ArithmeticError as exc:
        raise ConvergenceError(str(exc)) from exc


def sym_spectrum(m, tol=SYM_TOL):
    """Full spectrum of a symmetric matrix.

    The input must be symmetric within `tol` in max-abs; the spectrum is
    computed for (M + M^T)/2.
    """
    arr = as_matrix(m)
    _require_square(arr, "matrix")
    skew = np.max(np.abs(arr - arr.T)) if arr.size else 0.0
    if skew > tol:
        raise AsymmetricBeyondTol(f"max |M - M^T| = {skew:.3e} exceeds tol {tol:.3e}")
    eig = _sym_eigvals(0.5 * (arr + arr.T))
    return SymmetricSpectrum(eigenvalues=eig, max=float(eig[-1]), min=float(eig[0]))


def log_norm2(m):
    """Logarithmic norm (matrix measure) in the 2-norm: lambda_max((M+M^T)/2).

    Can be negative; bounds every eigenvalue real part from above.
    """
    arr = as_matrix(m)
    _require_square(arr, "matrix")
    return float(_sym_eigvals(0.5 * (arr + arr.T))[-1])


def spectral_norm(m):
    """Largest singular value, computed as sqrt(lambda_max(M^T M))."""
    arr = as_matrix(m)
    gram = arr.T @ arr
    lam = _sym_eigvals(0.5 * (gram + gram.T))[-1]
    return float(np.sqrt(max(lam, 0.0)))


def _row_gram_eigs(c):
    gram = c @ c.T
    return _sym_eigvals(0.5 * (gram + gram.T))


def right_pseudo_inverse(c):
    """Moore-Penrose right inverse C^T (C C^T)^-1 of a full-row-rank map."""
    arr = as_matrix(c, "C")
    p, n = arr.shape
    if p > n:
        raise RankDeficient(f"C is {p}x{n}: more rows than columns")
    eig = _row_gram_eigs(arr)
    if eig[0] <= (_RANK_RTOL ** 2) * eig[-1] or eig[-1] <= 0.0:
        raise RankDeficient("smallest singular value of C is below the rank tolerance")
    return np.linalg.solve(arr @ arr.T, arr).T


def kernel_projector(c):
    """Orthogonal projector onto ker(C): I - C^+ C."""
    arr = as_matrix(c, "C")
    pinv = right_pseudo_inverse(arr)
    return np.eye(arr.shape[1]) - pinv @ arr


def is_negative_definite(m, margin=0.0):
    """True iff lambda_max(M) < -margin for symmetric M (strict at margin 0)."""
    arr = as_matrix(m)
    _require_square(arr, "matrix")
    skew = np.max(np.abs(arr - arr.T))
    if skew > SYM_TOL:
        raise AsymmetricBeyondTol(f"max |M - M^T| = {skew:.3e} exceeds tol {SYM_TOL:.3e}")
    return bool(_sym_eigvals(0.5 * (arr + arr.T))[-1] < -margin)
