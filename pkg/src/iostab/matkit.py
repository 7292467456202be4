"""Dense real-matrix kernels used throughout the package.

Conventions:

* matrices are ``numpy.ndarray`` with ``float64`` entries, row-major
  semantic indexing ``(i, j)``;
* polynomials are 1-d coefficient arrays ordered by descending degree
  (the ``numpy.polyval`` convention);
* spectra are 1-d complex arrays, multiplicity-counted.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    CapacityError,
    ConvergenceError,
    DimensionError,
    NoUniqueSolutionError,
)

_EPS = np.finfo(float).eps

CHAR_POLY_MAX_DIM = 64


@dataclass(frozen=True)
class NumericPolicy:
    """Central record of the floating-point tolerances used for decisions.

    A value of 0.0 for ``rank_tol``/``pinv_tol`` selects the automatic
    threshold ``max(rows, cols) * eps * sigma_max``.
    """

    rank_tol: float = 0.0
    pinv_tol: float = 0.0
    resultant_tol: float = 1e-9
    hurwitz_margin: float = 1e-9
    stability_margin: float = 1e-7
    pathology_tol: float = 1e-8
    residual_tol: float = 1e-8
    recovery_rtol: float = 1e-7
    spectrum_tol: float = 1e-7
    decomposition_tol: float = 1e-8
    skew_tol: float = 1e-9
    strict_feasibility_factor: float = 1e-6


DEFAULT_POLICY = NumericPolicy()


def _as_matrix(A, name="A"):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2:
        raise DimensionError(f"{name} must be a matrix, got ndim={A.ndim}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def _as_square(A, name="A"):
    A = _as_matrix(A, name)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    return A


def mat_exp(A):
    """Matrix exponential e^A (scaling-and-squaring with Pade approximant)."""
    A = _as_square(A)
    return scipy.linalg.expm(A)


def spectrum(A):
    """All eigenvalues of a square matrix, multiplicity-counted.

    Computed by the balanced QR iteration; raises ``ConvergenceError``
    if the iteration does not converge.
    """
    A = _as_square(A)
    try:
        return np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceError(f"eigenvalue iteration failed: {exc}") from exc


def pinv_svd(A, tol=0.0):
    """Moore-Penrose pseudoinverse via SVD.

    Singular values at or below the threshold are treated as zero.
    ``tol = 0`` selects ``max(rows, cols) * eps * sigma_max``; a positive
    ``tol`` is used as an absolute cutoff.
    """
    A = _as_matrix(A)
    if tol < 0:
        raise ValueError("tol must be >= 0")
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    cutoff = tol if tol > 0 else max(A.shape) * _EPS * (s[0] if s.size else 0.0)
    nonzero = s > cutoff
    s_inv = np.zeros_like(s)
    s_inv[nonzero] = 1.0 / s[nonzero]
    return (Vh.T * s_inv) @ U.T


def char_poly(A):
    """Monic characteristic polynomial of A, descending coefficients.

    The coefficients are recovered from the computed eigenvalues and the
    result is verified: the returned polynomial evaluated at each
    eigenvalue must have a residual below 1e-8 relative to the evaluated
    magnitude scale.
    """
    A = _as_square(A)
    n = A.shape[0]
    if n > CHAR_POLY_MAX_DIM:
        raise CapacityError(f"char_poly supports dimension <= {CHAR_POLY_MAX_DIM}, got {n}")
    eigs = spectrum(A)
    coeffs = np.poly(eigs)
    if np.iscomplexobj(coeffs):
        coeffs = coeffs.real
    for lam in eigs:
        residual = abs(np.polyval(coeffs, lam))
        scale = np.polyval(np.abs(coeffs), max(1.0, abs(lam)))
        if residual > 1e-8 * scale:
            raise ConvergenceError(
                f"characteristic polynomial residual {residual:.3e} exceeds "
                f"1e-8 * {scale:.3e} at eigenvalue {lam}"
            )
    return coeffs


def solve_sylvester(A, B, C):
    """Solve X B + A X = C for X via the Kronecker-vectorized system.

    A is (r x r), B is (c x c), C is (r x c).  A unique solution exists
    iff the spectra of A and -B are disjoint; overlap raises
    ``NoUniqueSolutionError``.
    """
    A = _as_square(A, "A")
    B = _as_square(B, "B")
    C = _as_matrix(C, "C")
    r, c = A.shape[0], B.shape[0]
    if C.shape != (r, c):
        raise DimensionError(f"C must be {r}x{c}, got {C.shape}")
    eig_a = spectrum(A)
    eig_b = spectrum(B)
    scale = max(np.abs(eig_a).max(initial=0.0), np.abs(eig_b).max(initial=0.0), 1.0)
    gap = np.abs(eig_a[:, None] + eig_b[None, :]).min()
    if gap <= 1e-12 * scale:
        raise NoUniqueSolutionError(
            f"spectra of A and -B overlap (min |lam_A + lam_B| = {gap:.3e})"
        )
    # Column-major vec: vec(AX) = (I (x) A) vec(X), vec(XB) = (B^T (x) I) vec(X).
    K = np.kron(np.eye(c), A) + np.kron(B.T, np.eye(r))
    x = np.linalg.solve(K, C.flatten(order="F"))
    X = x.reshape((r, c), order="F")
    residual = np.linalg.norm(X @ B + A @ X - C)
    norm_x = np.linalg.norm(X)
    bound = 1e-9 * (np.linalg.norm(A) + np.linalg.norm(B)) * max(norm_x, 1e-30)
    if residual > max(bound, 1e-12 * np.linalg.norm(C)):
        raise ConvergenceError(
            f"Sylvester residual {residual:.3e} exceeds bound {bound:.3e}"
        )
    return X


def kron_product(A, B):
    """Kronecker product A (x) B."""
    return np.kron(_as_matrix(A), _as_matrix(B))


def build_hankel(seq, depth):
    """Block-Hankel matrix of the given depth.

    ``seq`` is a sequence of equal-length vectors (scalars allowed);
    column k stacks ``seq[k], ..., seq[k + depth - 1]``.
    """
    data = np.atleast_2d(np.asarray(seq, dtype=float))
    if data.shape[0] == 1 and data.shape[1] > 1 and np.asarray(seq).ndim == 1:
        data = data.T
    count, width = data.shape
    if depth < 1:
        raise DimensionError("depth must be >= 1")
    if count < depth:
        raise DimensionError(f"sequence length {count} shorter than depth {depth}")
    cols = count - depth + 1
    H = np.zeros((depth * width, cols))
    for k in range(cols):
        H[:, k] = data[k : k + depth, :].flatten()
    return H


def build_toeplitz_lower(first_col, rows, cols, allow_wide=False):
    """Lower-triangular banded Toeplitz matrix from its first column.

    Entry (i, j) equals ``first_col[i - j]`` when ``0 <= i - j < len``,
    else zero.  ``cols > rows`` is rejected unless ``allow_wide``.
    """
    col = np.atleast_1d(np.asarray(first_col, dtype=float))
    if col.ndim != 1:
        raise DimensionError("first_col must be a vector")
    if col.size > rows:
        raise DimensionError(f"first_col length {col.size} exceeds rows {rows}")
    if cols > rows and not allow_wide:
        raise DimensionError(f"cols {cols} > rows {rows} (pass allow_wide to permit)")
    T = np.zeros((rows, cols))
    for j in range(cols):
        stop = min(rows, j + col.size)
        T[j:stop, j] = col[: stop - j]
    return T


def numerical_rank(A, tol=0.0):
    """Number of singular values above the threshold.

    ``tol = 0`` selects the automatic threshold
    ``max(rows, cols) * eps * sigma_max``.
    """
    A = _as_matrix(A)
    if tol < 0:
        raise ValueError("tol must be >= 0")
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0:
        return 0
    cutoff = tol if tol > 0 else max(A.shape) * _EPS * s[0]
    return int(np.count_nonzero(s > cutoff))
