"""Optimization over a contractive 2x2 operator block.

A :class:`ContractiveBlock` is a contraction ``L = [[T1, 0], [Hblk, T2]]``
together with a factorization ``Hblk = W1 W2``.  Two quadratic problems are
attached to it:

* ``S_minus(x0) = sup_h ||W1 x0 + T2 h||^2 - ||h||^2``,
* ``S_plus(x0)  = inf {||k||^2 - ||T1 k||^2 : W2 k = x0}``.

Closed forms go through the Douglas factors ``X1`` (with
``W1 = D_{T2*} X1``) and ``X2`` (with ``W2* = D_{T1} X2``):
``S_minus(x0) = ||X1 x0||^2`` and ``S_plus(x0) = ||(X2* X2)^{-1/2} x0||^2``.
With ``(T1, T2, Hblk, W1, W2) = (Tpast, Tfut, Hank, Wo, Wc)`` these are the
available storage and the required supply.
"""

from dataclasses import dataclass

import numpy as np

from . import linops
from .errors import (
    FactorizationInconsistent,
    NotStrictlyContractive,
    ShapeError,
)

__all__ = [
    "ContractiveBlock",
    "random_block",
    "block_from_maps",
    "x1_factor",
    "x2_factor",
    "s_minus",
    "s_minus_oracle",
    "s_plus",
    "s_plus_oracle",
    "s_plus_x2",
]

STRICT_MARGIN = 1e-8


@dataclass(frozen=True, eq=False)
class ContractiveBlock:
    """Contractive block ``[[T1, 0], [Hblk, T2]]`` with ``Hblk = W1 W2``.

    Invariants checked on construction: the block is a contraction (up to
    ``1e-10``), ``||Hblk - W1 W2|| <= 1e-10 (1 + ||Hblk||)``, ``W1`` has full
    column rank and ``W2`` full row rank.
    """

    T1: np.ndarray
    T2: np.ndarray
    Hblk: np.ndarray
    W1: np.ndarray
    W2: np.ndarray

    def __post_init__(self):
        T1, T2, Hb, W1, W2 = (linops.as_matrix(M, nm) for M, nm in zip(
            (self.T1, self.T2, self.Hblk, self.W1, self.W2), ("T1", "T2", "Hblk", "W1", "W2")))
        if Hb.shape != (T2.shape[0], T1.shape[1]):
            raise ShapeError("Hblk must map the domain of T1 into the codomain of T2")
        if W1.shape[0] != Hb.shape[0] or W2.shape[1] != Hb.shape[1] or W1.shape[1] != W2.shape[0]:
            raise ShapeError("W1 W2 is not conformable with Hblk")
        L = np.block([[T1, np.zeros((T1.shape[0], T2.shape[1]))], [Hb, T2]])
        if linops.opnorm(L) > 1 + 1e-10:
            raise ShapeError("the operator block is not contractive")
        if linops.opnorm(Hb - W1 @ W2) > 1e-10 * (1 + linops.opnorm(Hb)):
            raise FactorizationInconsistent("Hblk != W1 W2")
        if np.linalg.matrix_rank(W1) < W1.shape[1]:
            raise ShapeError("W1 must be injective")
        if np.linalg.matrix_rank(W2) < W2.shape[0]:
            raise ShapeError("W2 must be surjective")
        for nm, M in zip(("T1", "T2", "Hblk", "W1", "W2"), (T1, T2, Hb, W1, W2)):
            object.__setattr__(self, nm, M)

    @property
    def L(self):
        Z = np.zeros((self.T1.shape[0], self.T2.shape[1]), dtype=self.T1.dtype)
        return np.block([[self.T1, Z], [self.Hblk, self.T2]])


def random_block(rng, k1=4, k2=3, r1=4, r2=3, nx=2, scale=0.9, complex_=False):
    """Random strictly contractive block with an exact factorization.

    ``W2`` (``nx x k1``) is drawn with full row rank and ``W1`` (``r2 x nx``)
    with full column rank; ``Hblk = W1 W2``.  The assembled block is scaled
    by ``scale / ||L||`` with the scale absorbed into ``W1``.
    """
    def draw(*shape):
        M = rng.standard_normal(shape)
        if complex_:
            M = M + 1j * rng.standard_normal(shape)
        return M
    T1, T2 = draw(r1, k1), draw(r2, k2)
    W1, W2 = draw(r2, nx), draw(nx, k1)
    Z = np.zeros((r1, k2))
    L = np.block([[T1, Z], [W1 @ W2, T2]])
    c = scale / linops.opnorm(L)
    return ContractiveBlock(c * T1, c * T2, (c * W1) @ W2, c * W1, W2)


def block_from_maps(maps):
    """Block ``(Tpast, Tfut, Hank, Wo, Wc)`` of discretized system maps."""
    return ContractiveBlock(maps.Tpast, maps.Tfut, maps.Hank, maps.Wo, maps.Wc)


def _defect_star(T):
    """``D_{T*}`` together with its pseudoinverse."""
    D = linops.defect(T.conj().T)
    return D, linops.pinv(D)


def x1_factor(block):
    """Douglas factor ``X1`` with ``W1 = D_{T2*} X1`` on ``range(W2)``.

    ``Y1 = pinv(D_{T2*}) Hblk`` is the minimal solution of
    ``D_{T2*} Y1 = Hblk`` and ``X1 = Y1 pinv(W2)``.

    Raises
    ------
    FactorizationInconsistent
        If ``Hblk`` is not in the range of ``D_{T2*}`` (relative residual
        above 1e-8).
    """
    D, Dp = _defect_star(block.T2)
    Y1 = Dp @ block.Hblk
    gap = linops.opnorm(D @ Y1 - block.Hblk)
    if gap > 1e-8 * max(1.0, linops.opnorm(block.Hblk)):
        raise FactorizationInconsistent(f"Hblk is not in range(D_T2*) (gap {gap:.3e})")
    return Y1 @ linops.pinv(block.W2)


def x2_factor(block):
    """Douglas factor ``X2 = pinv(D_{T1}) W2*`` with ``W2* = D_{T1} X2``."""
    D = linops.defect(block.T1)
    X2 = linops.pinv(D) @ block.W2.conj().T
    gap = linops.opnorm(D @ X2 - block.W2.conj().T)
    if gap > 1e-8 * max(1.0, linops.opnorm(block.W2)):
        raise FactorizationInconsistent(f"W2* is not in range(D_T1) (gap {gap:.3e})")
    return X2


def _strict(T, name):
    s = linops.opnorm(T)
    if s >= 1 - STRICT_MARGIN:
        raise NotStrictlyContractive(f"||{name}|| = {s:.12g} is not below 1")
    return s


def s_minus(block, x0):
    """``S_minus(x0) = ||X1 x0||^2`` and the maximizer ``h* = (I - T2*T2)^{-1} T2* W1 x0``.

    Raises
    ------
    NotStrictlyContractive
        If ``||T2|| >= 1 - 1e-8`` (the supremum need not be attained).
    """
    _strict(block.T2, "T2")
    x0 = np.asarray(x0).reshape(-1)
    X1 = x1_factor(block)
    v = X1 @ x0
    T2 = block.T2
    F = np.eye(T2.shape[1]) - T2.conj().T @ T2
    h = np.linalg.solve(F, T2.conj().T @ (block.W1 @ x0))
    return float(np.vdot(v, v).real), h


def s_minus_oracle(block, x0, iterations=100_000, rtol=1e-8):
    """Gradient ascent on ``||W1 x0 + T2 h||^2 - ||h||^2``.

    Step ``0.4 (1 - ||T2||^2)``; stops early once the gradient is below
    ``rtol`` relative to ``||W1 x0||``.
    """
    T2 = block.T2
    s = linops.opnorm(T2)
    step = 0.4 * (1 - s * s)
    x0 = np.asarray(x0).reshape(-1)
    w = block.W1 @ x0
    h = np.zeros(T2.shape[1], dtype=np.result_type(T2, w))
    scale = max(np.linalg.norm(w), 1e-300)
    for _ in range(iterations):
        g = 2.0 * (T2.conj().T @ (w + T2 @ h) - h)
        if np.linalg.norm(g) <= rtol * 1e-3 * scale:
            break
        h = h + step * g
    r = w + T2 @ h
    return float(np.vdot(r, r).real - np.vdot(h, h).real), h


def s_plus(block, x0):
    """``S_plus(x0) = x0* (W2 (I - T1* T1)^{-1} W2*)^{-1} x0`` via the KKT system.

    Returns the value and the minimizer ``k*``.
    """
    _strict(block.T1, "T1")
    x0 = np.asarray(x0).reshape(-1)
    T1, W2 = block.T1, block.W2
    F = np.eye(T1.shape[1]) - T1.conj().T @ T1
    Y = np.linalg.solve(F, W2.conj().T)
    G = linops.hermitize(W2 @ Y)
    lam = np.linalg.solve(G, x0)
    return float(np.vdot(x0, lam).real), Y @ lam


def s_plus_x2(block, x0):
    """``S_plus`` through ``X2``: ``x0* (X2* X2)^{-1} x0``."""
    X2 = x2_factor(block)
    x0 = np.asarray(x0).reshape(-1)
    G = linops.hermitize(X2.conj().T @ X2)
    return float(np.vdot(x0, np.linalg.solve(G, x0)).real)


def s_plus_oracle(block, x0, rho=1e8):
    """Quadratic penalty ``||k||^2 - ||T1 k||^2 + rho ||W2 k - x0||^2``."""
    T1, W2 = block.T1, block.W2
    x0 = np.asarray(x0).reshape(-1)
    F = np.eye(T1.shape[1]) - T1.conj().T @ T1
    k = np.linalg.solve(F + rho * W2.conj().T @ W2, rho * W2.conj().T @ x0)
    return float(np.vdot(k, F @ k).real), k
