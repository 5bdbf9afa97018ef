"""KYP certificates in node (matrix) and integrated (grid) form.

The node form of the standard inequality is

    [[H A + A* H + C* C,  H B + C* D],
     [B* H + D* C,        D* D - I  ]]  <= 0,

and the strict form adds ``delta I`` to the state block and replaces ``I``
by ``(1 - delta) I``.  Residuals are the largest eigenvalue of the
certificate matrix, so a certificate is valid when its residual is at most
a caller-chosen tolerance.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from . import linops
from .discretization import aux_state_maps, build_maps
from .errors import InvalidDelta, NotAFeasiblePoint, NotPositiveDefinite, ShapeError
from .system_model import StateSpaceSystem, dual

__all__ = [
    "KypCertificate",
    "node_matrix",
    "kyp_node_check",
    "kyp_strict_node_check",
    "kyp_integrated_check",
    "riccati_residual",
    "similarity_transform",
    "max_delta",
    "dual_kyp_check",
]

DELTA_CAP = 1.0 - 1e-8


@dataclass(frozen=True, eq=False)
class KypCertificate:
    """Hermitian ``H > 0`` with strictness margin ``delta`` and its residual."""

    H: np.ndarray
    delta: float
    form: str
    residual: float

    def __post_init__(self):
        if self.form not in ("node", "integrated"):
            raise ValueError(f"form must be 'node' or 'integrated', got {self.form!r}")
        if not 0.0 <= self.delta < 1.0:
            raise InvalidDelta(f"delta must lie in [0, 1), got {self.delta}")
        object.__setattr__(self, "H", linops.hermitize(self.H, "H"))

    def valid(self, tol=1e-8):
        return bool(self.residual <= tol)

    def to_dict(self):
        from .io import matrix_to_json
        return {"H": matrix_to_json(self.H), "delta": self.delta,
                "form": self.form, "residual": self.residual}


def _check_H(sys, H):
    H = linops.hermitize(H, "H")
    if H.shape != (sys.n, sys.n):
        raise ShapeError(f"H must be {sys.n}x{sys.n}, got {H.shape}")
    return H


def node_matrix(sys, H, delta=0.0):
    """Certificate matrix of the (strict when ``delta > 0``) node inequality."""
    H = _check_H(sys, H)
    A, B, C, D = sys.matrices()
    Ch, Dh = C.conj().T, D.conj().T
    xx = H @ A + A.conj().T @ H + Ch @ C + delta * np.eye(sys.n)
    xu = H @ B + Ch @ D
    uu = Dh @ D - (1.0 - delta) * np.eye(sys.m)
    K = np.block([[xx, xu], [xu.conj().T, uu]])
    return 0.5 * (K + K.conj().T)


def kyp_node_check(sys, H, tol=None):
    """Largest eigenvalue of the standard node certificate matrix.

    `tol` is accepted for symmetry with the other checks; the residual is
    returned and the caller compares it with a tolerance.
    """
    return linops.lambda_max(node_matrix(sys, H))


def kyp_strict_node_check(sys, H, delta, tol=None):
    """Largest eigenvalue of the strict node certificate matrix.

    ``delta = 0`` reduces to :func:`kyp_node_check`.

    Raises
    ------
    InvalidDelta
        If ``delta`` lies outside ``[0, 1)``.
    """
    if not 0.0 <= delta < 1.0:
        raise InvalidDelta(f"delta must lie in (0, 1), got {delta}")
    return linops.lambda_max(node_matrix(sys, H, delta))


def riccati_residual(sys, H):
    """Largest eigenvalue of ``P - Q* R^{-1} Q`` (requires ``||D|| < 1``).

    Here ``P = HA + A*H + C*C``, ``Q = B*H + D*C`` and ``R = D*D - I``.  This
    is the small-time limit of the integrated residual divided by ``t``.
    """
    H = _check_H(sys, H)
    A, B, C, D = sys.matrices()
    P = H @ A + A.conj().T @ H + C.conj().T @ C
    Q = B.conj().T @ H + D.conj().T @ C
    R = D.conj().T @ D - np.eye(sys.m)
    X = P - Q.conj().T @ np.linalg.solve(R, Q)
    # Hermitian by construction; the entries may cancel to rounding level
    return linops.lambda_max(0.5 * (X + X.conj().T))


def _integrated_lmax(At, Bt, Ct, Dt, H, delta, strict_terms):
    """lambda_max of G* diag(H, I) G - diag(H, (1 - delta) I) (+ delta S* S)."""
    n = At.shape[0]
    top = np.hstack([At, Bt])
    bot = np.hstack([Ct, Dt])
    M = top.conj().T @ H @ top + bot.conj().T @ bot
    M[:n, :n] -= H
    M[n:, n:] -= (1.0 - delta) * np.eye(M.shape[0] - n)
    if strict_terms is not None:
        S = np.hstack(strict_terms)
        M += delta * (S.conj().T @ S)
    M = 0.5 * (M + M.conj().T)
    if M.shape[0] <= 2500:
        return float(np.linalg.eigvalsh(M)[-1])
    op = LinearOperator(M.shape, matvec=lambda v: M @ v, dtype=M.dtype)
    return float(eigsh(op, k=1, which="LA", tol=1e-12, return_eigenvectors=False)[0])


def kyp_integrated_check(sys, H, grid, t_indices=None, mode="standard", delta=0.0):
    """Worst residual of the integrated KYP inequality over sampled times.

    For each sampled ``t = t_k`` the integrated operators
    ``(e^{At}, B^t, C^t, D^t)`` on the sub-grid ``[0, t]`` are assembled
    and the largest eigenvalue of

        [A^t B^t; C^t D^t]* diag(H, I) [A^t B^t; C^t D^t] - diag(H, (1-delta) I)

    is computed; ``mode="strict"`` adds ``delta [C1t DABt]* [C1t DABt]``
    (the state energy on ``[0, t]``).  ``mode="semi_strict"`` keeps only
    the ``(1 - delta)`` input weight.  The default times are the nodes
    closest to ``T/64, T/16, T/4, T``.

    Returns
    -------
    float
        Largest residual over the sampled times.
    """
    if mode not in ("standard", "strict", "semi_strict"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "standard":
        delta = 0.0
    if not 0.0 <= delta < 1.0:
        raise InvalidDelta(f"delta must lie in [0, 1), got {delta}")
    H = _check_H(sys, H)
    N = grid.steps
    if t_indices is None:
        t_indices = sorted({max(1, int(round(N * f))) for f in (1 / 64, 1 / 16, 1 / 4, 1.0)})
    worst = -np.inf
    for k in t_indices:
        sub = grid.sub(k)
        mp = build_maps(sys, sub)
        At = linops.expm(sys.A, sub.horizon)
        strict_terms = aux_state_maps(sys, grid, k) if mode == "strict" and delta > 0 else None
        r = _integrated_lmax(At, mp.Wc, mp.Wo, mp.Tfut, H, delta, strict_terms)
        worst = max(worst, r)
    return float(worst)


def similarity_transform(sys, H):
    """Similarity ``(G A G^-1, G B, C G^-1, D)`` with ``G = H^{1/2}``.

    If ``H`` solves the KYP inequality of `sys`, the identity solves it for
    the transformed system.

    Raises
    ------
    NotPositiveDefinite
        If ``lambda_min(H) < 1e-10``.
    """
    H = _check_H(sys, H)
    w, V = linops.herm_eig(H)
    if w[0] < 1e-10:
        raise NotPositiveDefinite(f"lambda_min(H) = {w[0]:.3e}")
    G = (V * np.sqrt(w)) @ V.conj().T
    Gi = (V / np.sqrt(w)) @ V.conj().T
    A, B, C, D = sys.matrices()
    return StateSpaceSystem(G @ A @ Gi, G @ B, C @ Gi, D)


def max_delta(sys, H, tol=0.0, accuracy=1e-8):
    """Largest ``delta`` for which the strict node inequality holds.

    Bisection on ``[0, 1 - 1e-8]``; feasibility means residual ``<= tol``.

    Raises
    ------
    NotAFeasiblePoint
        If the standard inequality already fails.
    """
    r0 = kyp_node_check(sys, H)
    if r0 > tol:
        raise NotAFeasiblePoint(f"standard residual {r0:.3e} exceeds {tol:g}")
    if kyp_strict_node_check(sys, H, DELTA_CAP) <= tol:
        return DELTA_CAP
    lo, hi = 0.0, DELTA_CAP
    while hi - lo > accuracy:
        mid = 0.5 * (lo + hi)
        if kyp_strict_node_check(sys, H, mid) <= tol:
            lo = mid
        else:
            hi = mid
    return lo


def dual_kyp_check(sys, H, tol=None):
    """Standard node residual of ``H^{-1}`` for the dual system."""
    H = _check_H(sys, H)
    w = linops.lambda_min(H)
    if w <= 0:
        raise NotPositiveDefinite(f"lambda_min(H) = {w:.3e}")
    return kyp_node_check(dual(sys), linops.herm_inv(H))
