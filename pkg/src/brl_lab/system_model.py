"""Continuous-time state-space and diagonal systems.

A :class:`StateSpaceSystem` is the finite-dimensional realization
``x' = Ax + Bu, y = Cx + Du``.  A :class:`DiagonalSystem` lists decoupled
scalar modes; :func:`diagonal_example` builds the standard family with
``lambda_n = -(n+1)`` whose transfer function has constant modulus on the
imaginary axis.
"""

from dataclasses import dataclass
import math

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import linops
from .errors import (
    EmptySystem,
    NotExponentiallyStable,
    ResolventSingular,
    ShapeError,
)

__all__ = [
    "StateSpaceSystem",
    "DiagonalSystem",
    "SchurVerdict",
    "diagonal_example",
    "transfer",
    "growth_bound",
    "hinf_norm",
    "cayley",
    "dual",
    "truncate",
    "decoupled_blocks",
    "subsystem",
]


def _frozen(M):
    M = np.array(M, copy=True)
    M.setflags(write=False)
    return M


@dataclass(frozen=True, eq=False)
class StateSpaceSystem:
    """Realization ``(A, B, C, D)`` with ``n`` states, ``m`` inputs, ``p`` outputs.

    Arrays are copied and made read-only.  Real data stays real; complex
    data is kept complex.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = linops.as_matrix(self.A, "A")
        B = linops.as_matrix(self.B, "B")
        C = linops.as_matrix(self.C, "C")
        D = linops.as_matrix(self.D, "D")
        n = A.shape[0]
        if n < 1 or A.shape != (n, n):
            raise ShapeError(f"A must be square with n >= 1, got {A.shape}")
        if B.shape[0] != n:
            raise ShapeError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise ShapeError(f"C has {C.shape[1]} columns, expected {n}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise ShapeError(f"D must be {(C.shape[0], B.shape[1])}, got {D.shape}")
        dt = np.result_type(A, B, C, D, float)
        for name, M in zip("ABCD", (A, B, C, D)):
            object.__setattr__(self, name, _frozen(M.astype(dt, copy=False)))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    @property
    def dtype(self):
        return self.A.dtype

    @property
    def is_real(self):
        return not np.iscomplexobj(self.A)

    def matrices(self):
        return self.A, self.B, self.C, self.D

    def __eq__(self, other):
        if not isinstance(other, StateSpaceSystem):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self.matrices(), other.matrices()))

    __hash__ = None

    def __repr__(self):
        return f"StateSpaceSystem(n={self.n}, m={self.m}, p={self.p}, dtype={self.dtype})"


@dataclass(frozen=True, eq=False)
class DiagonalSystem:
    """Decoupled scalar modes ``x_n' = lambda_n x_n + b_n u_n, y_n = c_n x_n + d_n u_n``."""

    lam: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        arrs = [np.atleast_1d(np.asarray(v, dtype=complex)) for v in
                (self.lam, self.b, self.c, self.d)]
        N = arrs[0].size
        if N == 0:
            raise EmptySystem("a diagonal system needs at least one mode")
        if any(a.ndim != 1 or a.size != N for a in arrs):
            raise ShapeError("mode arrays must be one-dimensional of equal length")
        if np.any(arrs[0].real >= 0):
            raise NotExponentiallyStable("every mode needs Re(lambda) < 0")
        for name, a in zip(("lam", "b", "c", "d"), arrs):
            object.__setattr__(self, name, _frozen(a))

    @property
    def modes(self):
        """List of ``(lambda, b, c, d)`` tuples."""
        return list(zip(self.lam, self.b, self.c, self.d))

    def __len__(self):
        return self.lam.size

    def gramians(self):
        """Closed-form observability and controllability Gramian diagonals.

        ``int_0^inf |c e^{lambda t}|^2 dt = |c|^2 / (-2 Re lambda)`` and the
        analogous expression with ``b``.
        """
        rate = -2.0 * self.lam.real
        return np.abs(self.c) ** 2 / rate, np.abs(self.b) ** 2 / rate

    def riccati_roots(self):
        """Per-mode roots ``(h_low, h_high)`` of the scalar bounded-real equation.

        For a mode with ``|d| < 1`` the 2x2 node matrix is singular exactly when
        ``|b|^2 h^2 - (2 Re(lambda)(|d|^2 - 1) - 2 Re(b c conj(d))) h + |c|^2 = 0``.
        Its roots bracket the feasible ``h``; the smaller one is the
        available-storage solution and the larger one the required-supply
        solution of that mode.
        """
        b2 = np.abs(self.b) ** 2
        c2 = np.abs(self.c) ** 2
        e = np.abs(self.d) ** 2 - 1.0
        if np.any(e >= 0):
            raise ValueError("closed-form roots need |d_n| < 1 for every mode")
        q = 2.0 * self.lam.real * e - 2.0 * (self.b * self.c * np.conj(self.d)).real
        disc = q * q - 4.0 * b2 * c2
        if np.any(disc < 0) or np.any(b2 == 0):
            raise ValueError("a mode has no real root pair (not strict Schur or b_n = 0)")
        r = np.sqrt(disc)
        # numerically stable pair: product of the roots is c2 / b2
        high = (q + r) / (2.0 * b2)
        low = c2 / (b2 * high)
        return low, high

    def __repr__(self):
        return f"DiagonalSystem(modes={len(self)})"


def diagonal_example(N, d0=0.5):
    """Mode family ``lambda_n = -(n+1)``, ``b_n = sqrt(n+1)/2``, ``c_n = 2 sqrt(n+1)``.

    The feedthrough ``d_n`` is chosen so that every mode's transfer function
    takes the value `d0` at zero.  With ``d0 = 1/2`` each mode equals
    ``-(1/2)(s - (n+1))/(s + (n+1))`` which has modulus 1/2 on the whole
    imaginary axis.
    """
    if N < 1:
        raise EmptySystem("need at least one mode")
    k = np.arange(1, N + 1, dtype=float)
    lam = -k
    b = np.sqrt(k) / 2.0
    c = 2.0 * np.sqrt(k)
    # transfer(0) = d + c b / (0 - lambda) = d + 1
    d = np.full(N, d0 - 1.0)
    return DiagonalSystem(lam, b, c, d)


@dataclass(frozen=True)
class SchurVerdict:
    """H-infinity norm with the Schur / strict Schur classification."""

    hinf_norm: float
    is_schur: bool
    is_strict_schur: bool
    worst_frequency: float

    def to_dict(self):
        wf = self.worst_frequency
        return {
            "hinf_norm": self.hinf_norm,
            "is_schur": self.is_schur,
            "is_strict_schur": self.is_strict_schur,
            "worst_frequency": None if not math.isfinite(wf) else wf,
        }


def _as_ss(sys):
    if isinstance(sys, DiagonalSystem):
        return truncate(sys, len(sys))
    if not isinstance(sys, StateSpaceSystem):
        raise TypeError(f"expected a system, got {type(sys).__name__}")
    return sys


def transfer(sys, lam):
    """Evaluate ``C (lam I - A)^{-1} B + D``.

    For a :class:`DiagonalSystem` the result is the diagonal matrix of
    ``d_n + c_n b_n / (lam - lambda_n)``.

    Raises
    ------
    ResolventSingular
        If ``lam`` is within ``1e-12 * max(1, ||A||)`` of the spectrum.
    """
    lam = complex(lam)
    if isinstance(sys, DiagonalSystem):
        gap = lam - sys.lam
        if np.min(np.abs(gap)) <= 1e-12 * max(1.0, np.abs(sys.lam).max()):
            raise ResolventSingular(f"{lam} is an eigenvalue")
        return np.diag(sys.d + sys.c * sys.b / gap)
    A, B, C, D = sys.matrices()
    R = lam * np.eye(sys.n) - A
    s = np.linalg.svd(R, compute_uv=False)
    if s[-1] <= 1e-12 * max(1.0, np.abs(A).max()):
        raise ResolventSingular(f"{lam} is (numerically) an eigenvalue of A")
    return C @ np.linalg.solve(R, B) + D


def growth_bound(sys):
    """Spectral bound ``max Re eig(A)`` (equal to the growth bound for matrices)."""
    if isinstance(sys, DiagonalSystem):
        return float(sys.lam.real.max())
    return float(np.linalg.eigvals(sys.A).real.max())


def _sigma_max(sys, w):
    if not math.isfinite(w):
        return linops.opnorm(sys.D)
    return linops.opnorm(transfer(sys, 1j * w))


def _hamiltonian(sys, g):
    """Hamiltonian whose imaginary eigenvalues ``i w`` mark ``sigma(G(iw)) = g``."""
    A, B, C, D = sys.matrices()
    Dh = D.conj().T
    R = Dh @ D - g * g * np.eye(sys.m)
    S = D @ Dh - g * g * np.eye(sys.p)
    Ri = np.linalg.inv(R)
    Si = np.linalg.inv(S)
    return np.block([
        [A - B @ Ri @ Dh @ C, -g * B @ Ri @ B.conj().T],
        [g * C.conj().T @ Si @ C, -A.conj().T + C.conj().T @ D @ Ri @ B.conj().T],
    ])


def _imaginary_frequencies(sys, g):
    H = _hamiltonian(sys, g)
    ev = np.linalg.eigvals(H)
    scale = max(1.0, np.abs(H).max())
    tol = 1e-6 * scale
    return np.sort(ev.imag[np.abs(ev.real) <= tol])


def hinf_norm(sys, tol=1e-8, max_iter=200):
    """H-infinity norm of a stable system.

    A lower bound is always an actual evaluation of ``sigma_max(G(i w))``.
    Candidate frequencies come from the imaginary eigenvalues of the
    Hamiltonian at a trial level ``g``; their midpoints are evaluated and the
    best value raises the lower bound.  When the Hamiltonian at
    ``g = lower * (1 + 2 tol)`` has no crossing that pushes the evaluated
    norm above ``g``, the lower bound is accepted.  Convergence is quadratic
    in practice.

    Parameters
    ----------
    sys : StateSpaceSystem or DiagonalSystem
    tol : float
        Relative accuracy; also the margin of the Schur classification.

    Returns
    -------
    SchurVerdict
        ``worst_frequency`` is ``inf`` when the supremum is attained at
        infinite frequency (by ``D``).

    Raises
    ------
    NotExponentiallyStable
        If ``max Re eig(A) >= 0``.
    """
    sys = _as_ss(sys)
    if growth_bound(sys) >= 0:
        raise NotExponentiallyStable(f"growth bound {growth_bound(sys):.3e} >= 0")

    def verdict(val, w):
        return SchurVerdict(float(val), bool(val <= 1 + tol), bool(val < 1 - tol), float(w))

    sD = linops.opnorm(sys.D)
    if not np.any(sys.B) or not np.any(sys.C):
        return verdict(sD, math.inf)

    eigA = np.linalg.eigvals(sys.A)
    cands = [math.inf, 0.0] + [w for w in np.unique(eigA.imag)]
    best, wbest = -1.0, math.inf
    for w in cands:
        v = _sigma_max(sys, w)
        if v > best:
            best, wbest = v, w
    # Bracket from the spectral abscissa; used only as a safeguard.
    upper = sD + linops.opnorm(sys.C) * linops.opnorm(sys.B) / abs(growth_bound(sys)) + 1.0
    floor = 1e-14 * upper
    for _ in range(max_iter):
        g = max(best * (1 + 2 * tol), floor)
        if g >= upper:
            break
        ws = _imaginary_frequencies(sys, g)
        if ws.size == 0:
            break
        trial = list(ws) + list(0.5 * (ws[1:] + ws[:-1]))
        vals = [(_sigma_max(sys, w), w) for w in trial]
        v, w = max(vals, key=lambda t: t[0])
        if v <= g:
            # crossings did not materialize into larger values: accept.
            break
        best, wbest = v, w
    else:
        raise linops.NumericalFailure("H-infinity iteration did not converge")
    return verdict(best, wbest)


def cayley(sys):
    """Cayley transform ``(I + A)(I - A)^{-1}`` and its spectral radius.

    Raises
    ------
    ResolventSingular
        If 1 is (numerically) an eigenvalue of ``A``.
    """
    A = sys.A if isinstance(sys, StateSpaceSystem) else np.diag(sys.lam)
    n = A.shape[0]
    IA = np.eye(n) - A
    s = np.linalg.svd(IA, compute_uv=False)
    if s[-1] <= 1e-12 * max(1.0, np.abs(A).max()):
        raise ResolventSingular("1 is an eigenvalue of A")
    Ad = np.linalg.solve(IA.T, (np.eye(n) + A).T).T
    if isinstance(sys, DiagonalSystem) or _is_diagonal(A):
        rho = float(np.abs(np.diag(Ad)).max())
    else:
        rho = float(np.abs(np.linalg.eigvals(Ad)).max())
    return Ad, rho


def _is_diagonal(M):
    return not np.any(M - np.diag(np.diag(M)))


def dual(sys):
    """Causal dual ``(A*, C*, B*, D*)``."""
    sys = _as_ss(sys)
    A, B, C, D = sys.matrices()
    return StateSpaceSystem(A.conj().T, C.conj().T, B.conj().T, D.conj().T)


def truncate(dsys, N):
    """First `N` modes of a diagonal system as an N-input, N-output realization."""
    if N <= 0:
        raise EmptySystem("truncation to zero modes")
    if N > len(dsys):
        raise ShapeError(f"only {len(dsys)} modes available, requested {N}")
    sl = slice(0, N)
    parts = [dsys.lam[sl], dsys.b[sl], dsys.c[sl], dsys.d[sl]]
    if all(not np.any(v.imag) for v in parts):
        parts = [v.real for v in parts]
    return StateSpaceSystem(*(np.diag(v) for v in parts))


def decoupled_blocks(sys):
    """Split a realization into independent subsystems.

    Two coordinates are coupled when a nonzero entry of ``A``, ``B``, ``C``
    or ``D`` links them.  Returns a list of ``(states, inputs, outputs)``
    index arrays, one per connected component that contains at least one
    state.  Components without states (pure feedthrough) are omitted.
    """
    n, m, p = sys.n, sys.m, sys.p
    # nodes: states [0, n), inputs [n, n+m), outputs [n+m, n+m+p)
    rows, cols = [], []
    for M, r0, c0 in ((sys.A, 0, 0), (sys.B, 0, n), (sys.C, n + m, 0), (sys.D, n + m, n)):
        i, j = np.nonzero(M)
        rows.append(i + r0)
        cols.append(j + c0)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    tot = n + m + p
    G = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(tot, tot))
    ncomp, labels = connected_components(G, directed=False)
    blocks = []
    for k in range(ncomp):
        idx = np.flatnonzero(labels == k)
        states = idx[idx < n]
        if states.size == 0:
            continue
        inputs = idx[(idx >= n) & (idx < n + m)] - n
        outputs = idx[idx >= n + m] - n - m
        blocks.append((states, inputs, outputs))
    blocks.sort(key=lambda b: b[0][0])
    return blocks


def subsystem(sys, states, inputs, outputs):
    """Restriction of `sys` to the given coordinate index sets."""
    A, B, C, D = sys.matrices()
    return StateSpaceSystem(
        A[np.ix_(states, states)],
        B[np.ix_(states, inputs)],
        C[np.ix_(outputs, states)],
        D[np.ix_(outputs, inputs)],
    )
