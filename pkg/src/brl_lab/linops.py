"""Dense linear-algebra kernel.

Hermitian spectral calculus, defect operators, the Moore-Penrose inverse,
Loewner-order comparison and the matrix exponential.  Everything here is a
thin, validated layer over LAPACK (through numpy/scipy); the validation is
what the rest of the library relies on.
"""

import numpy as np
import scipy.linalg as sla

from .errors import (
    NotContractive,
    NotPositiveSemidefinite,
    NumericalFailure,
    ShapeError,
)

__all__ = [
    "as_matrix",
    "hermitize",
    "herm_eig",
    "herm_sqrt",
    "herm_inv",
    "defect",
    "pinv",
    "loewner_leq",
    "expm",
    "opnorm",
    "lambda_max",
    "lambda_min",
]

HERMITIAN_RTOL = 1e-8
EXPM_OVERFLOW = 700.0


def as_matrix(M, name="matrix"):
    """Return `M` as a finite 2-D float or complex array (no copy if possible)."""
    M = np.asarray(M)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2:
        raise ShapeError(f"{name} must be two-dimensional, got ndim={M.ndim}")
    if not np.issubdtype(M.dtype, np.inexact):
        M = M.astype(float)
    if not np.all(np.isfinite(M)):
        raise ShapeError(f"{name} has non-finite entries")
    return M


def _square(M, name):
    M = as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise ShapeError(f"{name} must be square, got {M.shape}")
    return M


def hermitize(M, name="matrix"):
    """Symmetrize ``(M + M*)/2``; reject matrices that are far from Hermitian.

    Rounding asymmetry up to ``1e-8 * ||M||`` is tolerated silently, anything
    larger raises :class:`ShapeError`.
    """
    M = _square(M, name)
    scale = np.abs(M).max() if M.size else 0.0
    asym = np.abs(M - M.conj().T).max() if M.size else 0.0
    if asym > HERMITIAN_RTOL * max(scale, np.finfo(float).tiny):
        raise ShapeError(f"{name} is not Hermitian (asymmetry {asym:.3e})")
    return 0.5 * (M + M.conj().T)


def herm_eig(M):
    """Eigendecomposition of a Hermitian matrix.

    Parameters
    ----------
    M : (n, n) array_like
        Hermitian matrix; it is symmetrized before factorization.

    Returns
    -------
    w : (n,) ndarray
        Real eigenvalues in ascending order.
    V : (n, n) ndarray
        Unitary matrix of eigenvectors, ``M = V diag(w) V*``.

    Raises
    ------
    NumericalFailure
        If LAPACK fails to converge.
    """
    M = hermitize(M)
    try:
        w, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"Hermitian eigensolver failed: {exc}") from exc
    return w, V


def _default_clamp(M):
    n = M.shape[0]
    return 1e-10 * max(n, 1) * max(1.0, np.abs(M).max() if M.size else 0.0)


def herm_sqrt(M, clamp_tol=None):
    """Positive semidefinite square root of a Hermitian matrix.

    Parameters
    ----------
    M : (n, n) array_like
        Hermitian, positive semidefinite up to `clamp_tol`.
    clamp_tol : float, optional
        Negative eigenvalues in ``[-clamp_tol, 0)`` are set to zero.  The
        default is ``1e-10 * n * max(1, max|M_ij|)``.

    Returns
    -------
    R : (n, n) ndarray
        The unique ``R >= 0`` with ``R @ R`` equal to the clamped `M`.

    Raises
    ------
    NotPositiveSemidefinite
        If the smallest eigenvalue is below ``-clamp_tol``.
    """
    M = hermitize(M)
    if clamp_tol is None:
        clamp_tol = _default_clamp(M)
    w, V = herm_eig(M)
    if w.size and w[0] < -clamp_tol:
        raise NotPositiveSemidefinite(
            f"smallest eigenvalue {w[0]:.3e} below -{clamp_tol:.1e}")
    s = np.sqrt(np.clip(w, 0.0, None))
    return hermitize((V * s) @ V.conj().T)


def herm_inv(M, floor=0.0):
    """Inverse of a Hermitian positive definite matrix via its eigenvalues.

    Raises :class:`NotPositiveSemidefinite` if an eigenvalue is not above
    ``floor * max(1, lambda_max)``.
    """
    w, V = herm_eig(M)
    if w.size and w[0] <= floor * max(1.0, abs(w[-1])):
        raise NotPositiveSemidefinite(f"matrix is not positive definite "
                                      f"(lambda_min = {w[0]:.3e})")
    return hermitize((V / w) @ V.conj().T)


def opnorm(T):
    """Operator 2-norm (largest singular value)."""
    T = as_matrix(T)
    if T.size == 0:
        return 0.0
    return float(np.linalg.norm(T, 2))


def defect(T, clamp_tol=None):
    r"""Defect operator :math:`D_T = (I - T^* T)^{1/2}` of a contraction.

    Raises
    ------
    NotContractive
        If ``||T|| > 1 + clamp_tol``.
    """
    T = as_matrix(T, "T")
    m = T.shape[1]
    if clamp_tol is None:
        clamp_tol = 1e-10 * max(m, 1)
    nrm = opnorm(T)
    if nrm > 1.0 + clamp_tol:
        raise NotContractive(f"||T|| = {nrm:.12g} exceeds 1")
    G = np.eye(m, dtype=np.result_type(T, float)) - T.conj().T @ T
    # ||T|| <= 1 + tol means lambda_min(G) >= -2 tol approximately.
    return herm_sqrt(G, clamp_tol=3.0 * clamp_tol)


def pinv(M, rtol=1e-12):
    """Moore-Penrose inverse; singular values below ``rtol * s_max`` are dropped."""
    M = as_matrix(M)
    if M.size == 0:
        return np.zeros(M.shape[::-1], dtype=M.dtype)
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    if s[0] == 0.0:
        return np.zeros(M.shape[::-1], dtype=M.dtype)
    keep = s > rtol * s[0]
    return (Vh[keep].conj().T / s[keep]) @ U[:, keep].conj().T


def lambda_max(M):
    return float(herm_eig(M)[0][-1])


def lambda_min(M):
    return float(herm_eig(M)[0][0])


def loewner_leq(A, B, tol=0.0):
    """Decide ``A <= B`` in the Loewner order.

    Returns
    -------
    ok : bool
        ``lambda_min(B - A) >= -tol``.
    witness : float
        ``lambda_min(B - A)``.
    """
    A = _square(A, "A")
    B = _square(B, "B")
    if A.shape != B.shape:
        raise ShapeError(f"dimension mismatch {A.shape} vs {B.shape}")
    w = lambda_min(B - A)
    return bool(w >= -tol), w


def expm(A, t=1.0):
    """Matrix exponential ``exp(A t)``.

    Uses scaling and squaring with a degree-13 Pade approximant
    (:func:`scipy.linalg.expm`).  Overflow is declared when the spectral
    abscissa times `t` exceeds 700, or when the result is not finite.
    """
    A = _square(A, "A")
    At = A * t
    if At.size:
        abscissa = np.linalg.eigvals(At).real.max()
        if abscissa > EXPM_OVERFLOW:
            raise NumericalFailure(f"exp(At) overflows (abscissa {abscissa:.3g})")
    E = sla.expm(At)
    if not np.all(np.isfinite(E)):
        raise NumericalFailure("exp(At) is not finite")
    return E
