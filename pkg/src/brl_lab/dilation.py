"""Epsilon-regularization and strict KYP certificates.

The regularized system keeps ``A`` and appends ``eps``-scaled identity
channels::

    B_eps = [B, eps I],   C_eps = [C; eps I; 0],
    D_eps = [[D, 0], [0, 0], [eps I, 0]].

It is controllable and observable by construction, and for small ``eps``
it stays in the strict Schur class.  The available-storage solution of the
regularized system solves the strict KYP inequality of the original one
with ``delta = eps^2``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DilationExtractionFailed, NotExponentiallyStable, NotStrictSchur
from .kyp import KypCertificate, kyp_strict_node_check
from .storage import extremal_band
from .system_model import StateSpaceSystem, growth_bound, hinf_norm

__all__ = [
    "DilatedSystem",
    "epsilon_regularize",
    "choose_epsilon",
    "strict_from_standard",
    "semigroup_invertible",
]


@dataclass(frozen=True, eq=False)
class DilatedSystem:
    base: StateSpaceSystem
    epsilon: float
    dilated: StateSpaceSystem

    def blocks(self, lam):
        """The 3x2 block partition of the regularized transfer function at `lam`."""
        from .system_model import transfer
        G = transfer(self.dilated, lam)
        n, m, p = self.base.n, self.base.m, self.base.p
        rows = (slice(0, p), slice(p, p + n), slice(p + n, p + n + m))
        cols = (slice(0, m), slice(m, m + n))
        return [[G[r, c] for c in cols] for r in rows]


def epsilon_regularize(sys, epsilon):
    """Regularized realization with input space ``m + n`` and output ``p + n + m``.

    Raises
    ------
    NotExponentiallyStable
        If ``sys`` is not exponentially stable.
    ValueError
        If ``epsilon < 0``.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if growth_bound(sys) >= 0:
        raise NotExponentiallyStable("regularization needs an exponentially stable system")
    A, B, C, D = sys.matrices()
    n, m, p = sys.n, sys.m, sys.p
    dt = sys.dtype
    eye = np.eye(n, dtype=dt)
    Be = np.hstack([B, epsilon * eye])
    Ce = np.vstack([C, epsilon * eye, np.zeros((m, n), dtype=dt)])
    De = np.zeros((p + n + m, m + n), dtype=dt)
    De[:p, :m] = D
    De[p + n:, :m] = epsilon * np.eye(m)
    return DilatedSystem(sys, float(epsilon), StateSpaceSystem(A, Be, Ce, De))


def choose_epsilon(sys, safety=0.05, kmax=20):
    """Largest ``eps = 2^-k`` (``k <= kmax``) with ``||D_eps||_inf <= 1 - safety``.

    The regularized norm grows with ``eps``, so the ladder is scanned from
    ``k = 0`` upward and the first admissible rung is returned.

    Raises
    ------
    NotStrictSchur
        If ``sys`` is not strict Schur or no rung is admissible.
    """
    v = hinf_norm(sys)
    if not v.is_strict_schur:
        raise NotStrictSchur(f"||D||_inf = {v.hinf_norm:.12g} is not below 1")
    for k in range(kmax + 1):
        eps = 2.0 ** -k
        if hinf_norm(epsilon_regularize(sys, eps).dilated).hinf_norm <= 1.0 - safety:
            return eps
    raise NotStrictSchur(f"no eps >= 2^-{kmax} keeps the regularized norm below "
                         f"1 - {safety:g}")


def strict_from_standard(sys, epsilon, grid=None, tol=1e-6, extremal="a", levels=3,
                         **band_options):
    """Strict KYP certificate with ``delta = eps^2`` from the regularized system.

    Parameters
    ----------
    sys : StateSpaceSystem
    epsilon : float
    grid : TimeGrid, optional
        Base grid for the regularized maps; by default one grid per
        decoupled component (see :func:`~brl_lab.storage.extremal_band`).
    tol : float
        Largest acceptable strict node residual.
    extremal : {"a", "r"}
        Use the available-storage solution (default) or the
        required-supply solution of the regularized system.
    levels : int
        Grids used for Richardson extrapolation.

    Returns
    -------
    KypCertificate
        Node-form certificate with ``delta = eps**2``.

    Raises
    ------
    NotStrictSchur
        If the regularized system is not strict Schur.
    DilationExtractionFailed
        If the strict residual exceeds `tol`; the residual is attached.
    """
    dil = epsilon_regularize(sys, epsilon)
    v = hinf_norm(dil.dilated)
    if not v.is_strict_schur:
        raise NotStrictSchur(f"regularized norm {v.hinf_norm:.12g} is not below 1")
    opts = dict(horizon_factor=18.0, h_scale=0.05)
    opts.update(band_options)
    band = extremal_band(dil.dilated, grid, levels=levels, **opts)
    if extremal == "a":
        H = band.Ha
    elif extremal == "r":
        H = band.Hr
    else:
        raise ValueError("extremal must be 'a' or 'r'")
    delta = float(epsilon) ** 2
    res = kyp_strict_node_check(sys, H, delta)
    if res > tol:
        raise DilationExtractionFailed(
            f"strict residual {res:.3e} exceeds {tol:g} at delta = {delta:g}", res)
    return KypCertificate(H, delta, "node", float(res))


def semigroup_invertible(sys):
    """Matrix exponentials are always invertible; reported for completeness."""
    return True
