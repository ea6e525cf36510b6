"""Dense linear-algebra kernels.

Thin, validated wrappers over LAPACK (through numpy/scipy). Every function is
pure; inputs are never modified.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, NotPSDError, SingularMatrixError

#: Default relative rank tolerance for :func:`null_basis` and :func:`psd_factor`.
RANK_TOL = 1e-9


def _as_finite(M, name: str = "matrix", dtype=float) -> np.ndarray:
    M = np.asarray(M, dtype=dtype)
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return M


def _as_square(M, name: str = "matrix", dtype=float) -> np.ndarray:
    M = _as_finite(M, name, dtype)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {M.shape}")
    return M


def symmetrize(S) -> np.ndarray:
    """Return the symmetric matrix defined by the upper triangle of ``S``."""
    S = np.asarray(S, dtype=float)
    U = np.triu(S)
    return U + np.triu(S, 1).T


def sym_eig(S) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a real symmetric matrix.

    Only the upper triangle of ``S`` is referenced.

    Returns
    -------
    w : ndarray
        Eigenvalues in ascending order.
    V : ndarray
        Orthonormal eigenvectors, ``S = V @ diag(w) @ V.T``.
    """
    S = _as_square(S, "S")
    return np.linalg.eigh(S, UPLO="U")


def null_basis(M, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the kernel of ``M``.

    Singular values below ``tol * sigma_max`` count as zero. A full
    column-rank ``M`` yields a matrix with zero columns.
    """
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    M = np.atleast_2d(_as_finite(M, "M"))
    rows, cols = M.shape
    if cols == 0:
        return np.zeros((0, 0))
    if rows == 0:
        return np.eye(cols)
    _, sv, vt = np.linalg.svd(M, full_matrices=True)
    cutoff = tol * sv[0] if sv.size and sv[0] > 0 else 0.0
    rank = int(np.sum(sv > cutoff))
    return vt[rank:].T.copy()


def psd_factor(S, tol: float | None = None) -> np.ndarray:
    """Factor a positive semidefinite ``S`` as ``F @ F.T``.

    ``F`` keeps one column per eigenvalue above the rank tolerance, largest
    first. Negative eigenvalues not below ``-tol`` are clamped to zero. When
    ``tol`` is None it defaults to ``1e-9`` times the largest eigenvalue
    magnitude.
    """
    w, V = sym_eig(S)
    scale = max(abs(w[0]), abs(w[-1])) if w.size else 0.0
    if tol is None:
        tol = RANK_TOL * scale
    if w.size and w[0] < -tol:
        raise NotPSDError(f"smallest eigenvalue {w[0]:.3e} is below -{tol:.3e}")
    keep = w > max(tol, RANK_TOL * scale)
    w, V = w[keep][::-1], V[:, keep][:, ::-1]
    return V * np.sqrt(w)


def spectral_radius(A) -> float:
    """Largest eigenvalue modulus of a real square matrix."""
    A = _as_square(A, "A")
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def complex_solve(M, B) -> np.ndarray:
    """Solve ``M @ X = B`` for complex (or real) ``M`` and ``B``.

    Raises
    ------
    SingularMatrixError
        If ``M`` is singular to working precision.
    """
    M = _as_square(M, "M", complex)
    B = _as_finite(B, "B", complex)
    if B.shape[0] != M.shape[0]:
        raise InvalidInputError(f"B has {B.shape[0]} rows, expected {M.shape[0]}")
    if M.size == 0:
        return np.zeros(B.shape, dtype=complex)
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            X = scipy.linalg.solve(M, B, check_finite=False)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
            raise SingularMatrixError(str(exc)) from exc
    # diagonal inputs bypass the LAPACK singularity check
    if not np.all(np.isfinite(X)):
        raise SingularMatrixError("matrix is singular to working precision")
    return X
