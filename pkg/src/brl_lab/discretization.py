"""Quadrature-weighted matrix representations of the L2 input/output maps.

Signals on ``[0, T]`` are sampled at trapezoid nodes ``t_0 .. t_N`` and
embedded as ``sqrt(w_i) f(t_i)``, so Euclidean inner products of embedded
vectors are trapezoid approximations of L2 inner products.  In that
embedding

* ``Wo`` (output map) has row block ``i`` equal to ``sqrt(w_i) C e^{A t_i}``;
* ``Wc`` (input map) has column block ``j`` equal to
  ``sqrt(w_j) e^{A (T - t_j)} B``, i.e. the past input on ``[-T, 0]``
  shifted to ``[0, T]``;
* the Toeplitz map has blocks ``sqrt(w_i w_j) C e^{A (t_i - t_j)} B`` below
  the diagonal and ``D + w_i C B / 2`` on it;
* the Hankel map is ``Wo @ Wc``.

On a uniform grid the Toeplitz map is applied with FFT block convolutions
and never materialized unless asked for (``maps.Tfut``).  Inverses of the
defect operators ``I - M M*`` and ``I - M* M`` are applied by conjugate
gradients, whose condition number is ``1 / (1 - ||M||^2)``.
"""

from dataclasses import dataclass, field
import functools
import math

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator

from . import linops
from .errors import (
    NotStrictlyContractive,
    ShapeError,
    UnsupportedGrid,
)
from .system_model import StateSpaceSystem, growth_bound

__all__ = [
    "TimeGrid",
    "default_grid",
    "ToeplitzOperator",
    "DiscretizedMaps",
    "Trajectory",
    "build_Wo",
    "build_Wc",
    "build_toeplitz",
    "build_hankel",
    "build_maps",
    "simulate",
    "integrated_block",
    "aux_state_maps",
    "dual_maps",
    "write_trajectory_csv",
]


class TimeGrid:
    """Composite-trapezoid grid on ``[0, T]`` with ``N`` steps (``N + 1`` nodes).

    Parameters
    ----------
    horizon : float
        ``T > 0``.
    steps : int
        ``N >= 1``; the step is ``h = T / N``.
    nodes : array_like, optional
        Explicit strictly increasing nodes starting at 0 (non-uniform grid).
        `horizon` and `steps` are then taken from the nodes.
    """

    def __init__(self, horizon=None, steps=None, nodes=None):
        if nodes is not None:
            t = np.asarray(nodes, dtype=float)
            if t.ndim != 1 or t.size < 2 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
                raise ShapeError("nodes must start at 0 and increase strictly")
            self.nodes = t
            self.horizon = float(t[-1])
            self.steps = t.size - 1
            d = np.diff(t)
            self.uniform = bool(np.allclose(d, d[0], rtol=1e-13, atol=0.0))
        else:
            if not (horizon > 0) or not math.isfinite(horizon):
                raise ShapeError(f"horizon must be positive, got {horizon}")
            if int(steps) != steps or steps < 1:
                raise ShapeError(f"steps must be a positive integer, got {steps}")
            self.horizon = float(horizon)
            self.steps = int(steps)
            self.nodes = self.horizon * np.arange(self.steps + 1) / self.steps
            self.nodes[-1] = self.horizon
            self.uniform = True
        d = np.diff(self.nodes)
        w = np.zeros(self.steps + 1)
        w[:-1] += d / 2
        w[1:] += d / 2
        self.weights = w
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def h(self):
        if not self.uniform:
            raise UnsupportedGrid("non-uniform grid has no single step size")
        return self.horizon / self.steps

    @property
    def size(self):
        """Number of nodes, ``N + 1``."""
        return self.steps + 1

    def sub(self, k):
        """Grid restricted to ``[0, t_k]``."""
        if not 1 <= k <= self.steps:
            raise ShapeError(f"t_index must lie in [1, {self.steps}], got {k}")
        if self.uniform:
            return TimeGrid(self.nodes[k], k)
        return TimeGrid(nodes=self.nodes[: k + 1])

    def refined(self, factor=2):
        if not self.uniform:
            raise UnsupportedGrid("refinement is defined for uniform grids")
        return TimeGrid(self.horizon, self.steps * factor)

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.nodes, other.nodes)

    def __repr__(self):
        kind = "uniform" if self.uniform else "non-uniform"
        return f"TimeGrid(T={self.horizon!r}, N={self.steps}, {kind})"


def default_grid(sys, steps=1024, horizon_factor=12.0, transient=False):
    """Grid with ``T = horizon_factor / |growth bound|``.

    With ``transient=True`` the horizon is enlarged by factors of 1.25 until
    ``||e^{AT}|| <= exp(-horizon_factor)``, which matters for non-normal
    ``A`` whose transient growth delays the asymptotic decay.
    """
    gb = growth_bound(sys)
    if gb >= 0:
        raise ShapeError("default horizon requires an exponentially stable system")
    T = horizon_factor / abs(gb)
    if transient:
        target = math.exp(-horizon_factor)
        for _ in range(40):
            if linops.opnorm(linops.expm(sys.A, T)) <= target:
                break
            T *= 1.25
    return TimeGrid(T, steps)


def _powers(A, h, count):
    """``[e^{A h k} for k in range(count)]`` as a stacked array."""
    n = A.shape[0]
    E = linops.expm(A, h)
    P = np.empty((count, n, n), dtype=np.result_type(E, float))
    P[0] = np.eye(n)
    for k in range(1, count):
        P[k] = E @ P[k - 1]
    return P


def _node_exponentials(A, grid, times=None):
    if times is None and grid.uniform:
        return _powers(A, grid.h, grid.size)
    times = grid.nodes if times is None else times
    return np.stack([linops.expm(A, t) for t in times])


class ToeplitzOperator:
    """Block lower-triangular Toeplitz map in the trapezoid embedding.

    ``M = S (h K) S + blockdiag(D + w_i C B / 2)`` where ``K`` is the strictly
    causal block-Toeplitz matrix of kernel samples ``K_k = C e^{A k h} B``
    (``k >= 1``) and ``S = diag(sqrt(w_i / h))``.  Matrix-vector products
    use zero-padded FFTs along the time axis.

    Instances are created by :func:`build_toeplitz`; they carry the kernel
    in a form that is closed under the dual (reversed adjoint) operation.
    """

    def __init__(self, kernel, diag, scale, dense=None):
        # kernel[k] = h * K_k (kernel[0] must be zero); diag[i] is the diagonal block
        self.kernel = kernel
        self.diag = diag
        self.scale = scale
        self._dense = dense
        self.nt, self.p, self.m = diag.shape
        self.shape = (self.nt * self.p, self.nt * self.m)
        self.dtype = np.result_type(kernel, diag)
        self.is_real = not np.iscomplexobj(self.dtype.type(0))
        self._nfft = sfft.next_fast_len(2 * self.nt)

    @classmethod
    def from_dense(cls, M, nt, p, m):
        """Wrap an explicit matrix (used for non-uniform grids)."""
        op = cls(np.zeros((nt, p, m)), np.zeros((nt, p, m)), np.ones(nt), dense=np.asarray(M))
        op.dtype = op._dense.dtype
        op.is_real = not np.iscomplexobj(op._dense)
        return op

    @functools.cached_property
    def _spec_real(self):
        return sfft.rfft(self.kernel, n=self._nfft, axis=0)

    @functools.cached_property
    def _spec_complex(self):
        return sfft.fft(self.kernel, n=self._nfft, axis=0)

    def _conv(self, V, adjoint):
        real = self.is_real and not np.iscomplexobj(V)
        if real:
            Kf = self._spec_real
            Vf = sfft.rfft(V, n=self._nfft, axis=0)
        else:
            Kf = self._spec_complex
            Vf = sfft.fft(V, n=self._nfft, axis=0)
        if adjoint:
            Yf = np.einsum("fpm,fpr->fmr", Kf.conj(), Vf)
        else:
            Yf = np.einsum("fpm,fmr->fpr", Kf, Vf)
        if real:
            Y = sfft.irfft(Yf, n=self._nfft, axis=0)
        else:
            Y = sfft.ifft(Yf, n=self._nfft, axis=0)
        return Y[: self.nt]

    def matvec(self, U):
        """``M @ U`` for ``U`` of shape ``(nt*m,)`` or ``(nt*m, r)``."""
        U = np.asarray(U)
        vec = U.ndim == 1
        U2 = U.reshape(self.shape[1], -1)
        if self._dense is not None:
            Y = self._dense @ U2
        else:
            r = U2.shape[1]
            V = U2.reshape(self.nt, self.m, r)
            s = self.scale[:, None, None]
            Y = s * self._conv(s * V, adjoint=False)
            Y = Y + np.einsum("ipm,imr->ipr", self.diag, V)
            Y = Y.reshape(self.shape[0], r)
        return Y[:, 0] if vec else Y

    def rmatvec(self, Y):
        """``M* @ Y``."""
        Y = np.asarray(Y)
        vec = Y.ndim == 1
        Y2 = Y.reshape(self.shape[0], -1)
        if self._dense is not None:
            U = self._dense.conj().T @ Y2
        else:
            r = Y2.shape[1]
            V = Y2.reshape(self.nt, self.p, r)
            s = self.scale[:, None, None]
            U = s * self._conv(s * V, adjoint=True)
            U = U + np.einsum("ipm,ipr->imr", self.diag.conj(), V)
            U = U.reshape(self.shape[1], r)
        return U[:, 0] if vec else U

    def todense(self):
        if self._dense is not None:
            return self._dense
        nt = self.nt
        idx = np.arange(nt)
        diff = idx[:, None] - idx[None, :]
        blk = self.kernel[np.clip(diff, 0, nt - 1)] * (diff > 0)[:, :, None, None]
        blk = blk * np.outer(self.scale, self.scale)[:, :, None, None]
        blk = blk.astype(self.dtype, copy=False)
        blk[idx, idx] = self.diag
        return blk.transpose(0, 2, 1, 3).reshape(self.shape)

    def dual(self):
        """Reversed adjoint ``J M* J`` (block reversal ``J`` on the grid)."""
        if self._dense is not None:
            M = self._dense
            Mr = M.conj().T.reshape(self.nt, self.m, self.nt, self.p)[::-1, :, ::-1, :]
            return ToeplitzOperator.from_dense(Mr.reshape(self.shape[::-1]), self.nt, self.m, self.p)
        return ToeplitzOperator(
            np.ascontiguousarray(self.kernel.conj().transpose(0, 2, 1)),
            np.ascontiguousarray(self.diag.conj().transpose(0, 2, 1)[::-1]),
            self.scale[::-1].copy(),
        )

    def as_linear_operator(self):
        return LinearOperator(self.shape, matvec=self.matvec, rmatvec=self.rmatvec,
                              matmat=self.matvec, rmatmat=self.rmatvec,
                              dtype=self.dtype)

    @functools.cached_property
    def norm(self):
        """Largest singular value.

        Dense SVD for small sizes; otherwise Lanczos with full
        reorthogonalization on ``M* M`` (at most 150 steps, stopped when the
        top Ritz value is stable to 1e-13).  The Krylov estimate is a lower
        bound; positive definiteness of the defect operators is re-checked
        by the curvature test in :meth:`defect_solve`.
        """
        if max(self.shape) <= 600 or min(self.shape) <= 2:
            return linops.opnorm(self.todense())
        return math.sqrt(max(_lanczos_top(self.gram_apply, self.shape[1], self.dtype), 0.0))

    def gram_apply(self, X):
        return self.rmatvec(self.matvec(X))

    def defect_solve(self, R, side, tol=1e-12, maxiter=20000):
        """Solve ``(I - M M*) Z = R`` (``side='left'``) or ``(I - M* M) Z = R``.

        Conjugate gradients, run column by column in vectorized form.

        Raises
        ------
        NotStrictlyContractive
            If a non-positive curvature is met or CG fails to converge.
        """
        if side == "left":
            def apply(X):
                return X - self.matvec(self.rmatvec(X))
        elif side == "right":
            def apply(X):
                return X - self.rmatvec(self.matvec(X))
        else:
            raise ValueError("side must be 'left' or 'right'")
        R = np.asarray(R)
        vec = R.ndim == 1
        B = R.reshape(R.shape[0], -1)
        dt = np.result_type(B, self.dtype)
        X = np.zeros_like(B, dtype=dt)
        Rk = B.astype(dt, copy=True)
        P = Rk.copy()
        rr = np.einsum("ij,ij->j", Rk.conj(), Rk).real
        bnorm2 = rr.copy()
        active = bnorm2 > 0
        thresh = (tol ** 2) * bnorm2
        it = 0
        while np.any(active):
            if it >= maxiter:
                raise NotStrictlyContractive("conjugate gradients did not converge; "
                                             "the Toeplitz map is not strictly contractive")
            it += 1
            AP = apply(P)
            pAp = np.einsum("ij,ij->j", P.conj(), AP).real
            if np.any(pAp[active] <= 0):
                raise NotStrictlyContractive("defect operator is not positive definite")
            alpha = np.where(active, rr / np.where(active, pAp, 1.0), 0.0)
            X += alpha * P
            Rk -= alpha * AP
            rr_new = np.einsum("ij,ij->j", Rk.conj(), Rk).real
            active = active & (rr_new > thresh)
            beta = np.where(active, rr_new / np.where(rr > 0, rr, 1.0), 0.0)
            P = Rk + beta * P
            rr = rr_new
        return X[:, 0] if vec else X


def _lanczos_top(apply, dim, dtype, maxiter=150, tol=1e-13):
    """Largest eigenvalue of a Hermitian PSD operator by Lanczos."""
    rng = np.random.default_rng(12345)
    q = rng.standard_normal(dim).astype(dtype)
    q /= np.linalg.norm(q)
    Q = np.zeros((dim, min(maxiter, dim) + 1), dtype=np.result_type(dtype, float))
    Q[:, 0] = q
    alpha, beta = [], []
    top = 0.0
    for k in range(min(maxiter, dim)):
        w = apply(Q[:, k])
        a = np.vdot(Q[:, k], w).real
        w = w - a * Q[:, k] - (beta[-1] * Q[:, k - 1] if k else 0.0)
        w -= Q[:, : k + 1] @ (Q[:, : k + 1].conj().T @ w)
        b = np.linalg.norm(w)
        alpha.append(a)
        T = np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1)
        new = np.linalg.eigvalsh(T)[-1]
        if k > 5 and abs(new - top) <= tol * max(new, 1e-300) or b <= 1e-14 * max(new, 1e-300):
            return float(new)
        top = new
        beta.append(b)
        Q[:, k + 1] = w / b
    return float(top)


@dataclass(eq=False)
class DiscretizedMaps:
    """Discretized output, input, Toeplitz and Hankel maps on a grid.

    ``Wo`` is ``((N+1) p) x n`` and ``Wc`` is ``n x ((N+1) m)``.  The
    Toeplitz map is stored structurally in ``toeplitz``; future and past
    Toeplitz maps share it (time invariance), so ``Tfut`` and ``Tpast``
    return the same dense matrix.  ``Hank`` is the factorized ``Wo @ Wc``.
    """

    grid: TimeGrid
    Wo: np.ndarray
    Wc: np.ndarray
    toeplitz: ToeplitzOperator
    system: StateSpaceSystem = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self):
        return self.Wo.shape[1]

    @property
    def p(self):
        return self.toeplitz.p

    @property
    def m(self):
        return self.toeplitz.m

    @property
    def Tfut(self):
        if "T" not in self._cache:
            self._cache["T"] = self.toeplitz.todense()
        return self._cache["T"]

    @property
    def Tpast(self):
        return self.Tfut

    @property
    def Hank(self):
        if "H" not in self._cache:
            self._cache["H"] = self.Wo @ self.Wc
        return self._cache["H"]

    def bilateral(self):
        """Finite section ``[[Tpast, 0], [Hank, Tfut]]`` of the Laurent map."""
        T = self.Tfut
        Z = np.zeros_like(T)
        return np.block([[T, Z], [self.Hank, T]])


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Zero-order-hold trajectory: ``u`` and ``y`` have ``N`` rows, ``x`` has ``N + 1``."""

    grid: TimeGrid
    u: np.ndarray
    x: np.ndarray
    y: np.ndarray


def _check_grid_uniform(grid, what):
    if not grid.uniform:
        raise UnsupportedGrid(f"{what} requires a uniform grid")


def build_Wo(sys, grid, _P=None):
    """Output map ``x0 -> sqrt(w_i) C e^{A t_i} x0`` stacked over the nodes."""
    P = _node_exponentials(sys.A, grid) if _P is None else _P
    sw = np.sqrt(grid.weights)
    return (sw[:, None, None] * (sys.C @ P)).reshape(grid.size * sys.p, sys.n)


def build_Wc(sys, grid, _P=None):
    """Input map ``u -> sum_j sqrt(w_j) e^{A (T - t_j)} B u_j``."""
    if _P is None:
        P = _node_exponentials(sys.A, grid, grid.horizon - grid.nodes)
    else:
        P = _P[::-1]
    sw = np.sqrt(grid.weights)
    blocks = sw[:, None, None] * (P @ sys.B)       # (N+1, n, m)
    return blocks.transpose(1, 0, 2).reshape(sys.n, grid.size * sys.m)


def build_toeplitz(sys, grid, side="future", _P=None):
    """Toeplitz input/output map on the grid.

    `side` is ``"future"`` or ``"past"``; both sides have the same matrix
    (time invariance) and differ only in which half-axis they represent.
    """
    if side not in ("future", "past"):
        raise ValueError("side must be 'future' or 'past'")
    A, B, C, D = sys.matrices()
    w = grid.weights
    CB = C @ B
    diag = D[None] + 0.5 * w[:, None, None] * CB[None]
    if grid.uniform:
        P = _node_exponentials(A, grid) if _P is None else _P
        h = grid.h
        kernel = h * (C @ P @ B)
        kernel[0] = 0.0
        scale = np.sqrt(w / h)
        return ToeplitzOperator(kernel, diag.astype(kernel.dtype), scale)
    nt = grid.size
    t = grid.nodes
    sw = np.sqrt(w)
    M = np.zeros((nt, sys.p, nt, sys.m), dtype=np.result_type(A, B, C, D, float))
    for i in range(nt):
        for j in range(i):
            M[i, :, j, :] = sw[i] * sw[j] * (C @ linops.expm(A, t[i] - t[j]) @ B)
        M[i, :, i, :] = diag[i]
    return ToeplitzOperator.from_dense(M.reshape(nt * sys.p, nt * sys.m), nt, sys.p, sys.m)


def build_hankel(sys, grid, direct=False):
    """Hankel map (past input to future output).

    By default the factorized form ``Wo @ Wc``.  With ``direct=True`` the
    kernel ``sqrt(w_i w_j) C e^{A (t_i + T - t_j)} B`` is assembled entry
    by entry instead, which serves as an independent cross-check.
    """
    if not direct:
        return build_Wo(sys, grid) @ build_Wc(sys, grid)
    nt = grid.size
    sw = np.sqrt(grid.weights)
    t = grid.nodes
    T = grid.horizon
    if grid.uniform:
        K = sys.C @ _powers(sys.A, grid.h, 2 * nt - 1) @ sys.B
        idx = np.arange(nt)
        blk = K[idx[:, None] + (nt - 1) - idx[None, :]]
    else:
        blk = np.stack([np.stack([sys.C @ linops.expm(sys.A, t[i] + T - t[j]) @ sys.B
                                  for j in range(nt)]) for i in range(nt)])
    blk = blk * np.outer(sw, sw)[:, :, None, None]
    return blk.transpose(0, 2, 1, 3).reshape(nt * sys.p, nt * sys.m)


def build_maps(sys, grid):
    """Assemble :class:`DiscretizedMaps` for `sys` on `grid`."""
    P = _node_exponentials(sys.A, grid) if grid.uniform else None
    return DiscretizedMaps(
        grid=grid,
        Wo=build_Wo(sys, grid, P),
        Wc=build_Wc(sys, grid, P),
        toeplitz=build_toeplitz(sys, grid, _P=P),
        system=sys,
    )


def dual_maps(maps):
    """Maps of the dual system obtained by time reversal on the grid.

    The dual output map is the reversed adjoint of ``Wc``, the dual input
    map the reversed adjoint of ``Wo``, and the dual Toeplitz map is
    ``J M* J`` with ``J`` the block reversal.

    Raises
    ------
    UnsupportedGrid
        On a non-uniform grid, where reversal does not preserve weights.
    """
    grid = maps.grid
    _check_grid_uniform(grid, "dual_maps")
    nt, n, m, p = grid.size, maps.n, maps.m, maps.p
    Wc3 = maps.Wc.reshape(n, nt, m)[:, ::-1, :]
    Wo_d = Wc3.conj().transpose(1, 2, 0).reshape(nt * m, n)
    Wo3 = maps.Wo.reshape(nt, p, n)[::-1]
    Wc_d = Wo3.conj().transpose(2, 0, 1).reshape(n, nt * p)
    sys_d = None
    if maps.system is not None:
        from .system_model import dual
        sys_d = dual(maps.system)
    return DiscretizedMaps(grid, np.ascontiguousarray(Wo_d), np.ascontiguousarray(Wc_d),
                           maps.toeplitz.dual(), sys_d)


def simulate(sys, x0, u, grid):
    """Exact zero-order-hold simulation.

    ``x_{i+1} = e^{A h_i} x_i + (int_0^{h_i} e^{A s} ds) B u_i`` with the
    integral taken from the exponential of the augmented matrix
    ``[[A, B], [0, 0]]``; ``y_i = C x_i + D u_i``.

    Parameters
    ----------
    x0 : (n,) array_like
    u : (N, m) array_like
        Held input values on each interval.
    """
    n, m = sys.n, sys.m
    x0 = np.asarray(x0).reshape(-1)
    if x0.size != n:
        raise ShapeError(f"x0 has length {x0.size}, expected {n}")
    u = np.asarray(u)
    if u.ndim == 1 and m == 1:
        u = u[:, None]
    if u.shape != (grid.steps, m):
        raise ShapeError(f"u must have shape {(grid.steps, m)}, got {u.shape}")
    dt = np.result_type(sys.dtype, x0, u, float)
    aug = np.zeros((n + m, n + m), dtype=sys.dtype)
    aug[:n, :n] = sys.A
    aug[:n, n:] = sys.B
    steps = np.diff(grid.nodes)
    cache = {}
    x = np.empty((grid.size, n), dtype=dt)
    x[0] = x0
    for i, hi in enumerate(steps):
        key = hi if not grid.uniform else 0
        if key not in cache:
            F = linops.expm(aug, hi)
            cache[key] = (F[:n, :n], F[:n, n:])
        E, G = cache[key]
        x[i + 1] = E @ x[i] + G @ u[i]
    y = x[:-1] @ sys.C.T + u @ sys.D.T
    for a in (u, x, y):
        a.setflags(write=False)
    return Trajectory(grid, u, x, y)


def integrated_block(sys, grid, t_index):
    """Integrated system operators on ``[0, t]`` with ``t = t_{t_index}``.

    Returns ``(At, Bt, Ct, Dt)``: the semigroup ``e^{A t}``, the input map,
    the output map and the Toeplitz map on the sub-grid ``t_0 .. t_k``.
    Inputs and outputs on the sub-grid are in the trapezoid embedding.
    """
    sub = grid.sub(t_index)
    At = linops.expm(sys.A, sub.horizon)
    mp = build_maps(sys, sub)
    return At, mp.Wc, mp.Wo, mp.Tfut


def aux_state_maps(sys, grid, t_index):
    """State-trajectory maps on ``[0, t]``: ``x|[0,t] = C1t x0 + DABt u``.

    ``C1t`` stacks ``sqrt(w_i) e^{A t_i}`` and ``DABt`` is the Toeplitz map of
    the system ``(A, B, I, 0)``.
    """
    sub = grid.sub(t_index)
    aux = StateSpaceSystem(sys.A, sys.B, np.eye(sys.n), np.zeros((sys.n, sys.m)))
    mp = build_maps(aux, sub)
    return mp.Wo, mp.Tfut


def _fmt(v):
    if isinstance(v, complex) or np.iscomplexobj(v):
        z = complex(v)
        if z.imag == 0.0:
            return f"{z.real:.17g}"
        return f"{z.real:.17g}{z.imag:+.17g}j"
    return f"{float(v):.17g}"


def write_trajectory_csv(traj, fh, system=None):
    """Write ``t, u_1..u_m, x_1..x_n, y_1..y_p`` with one row per node.

    The last node has no interval of its own; its input column repeats the
    held value of the final interval and, when `system` is given, its
    output is ``C x_N + D u_{N-1}`` (otherwise the last output is repeated).
    """
    N = traj.grid.steps
    m = traj.u.shape[1]
    n = traj.x.shape[1]
    p = traj.y.shape[1]
    header = ["t"] + [f"u_{i+1}" for i in range(m)] + [f"x_{i+1}" for i in range(n)] + \
        [f"y_{i+1}" for i in range(p)]
    fh.write(", ".join(header) + "\n")
    if system is not None:
        y_last = system.C @ traj.x[N] + system.D @ traj.u[N - 1]
    else:
        y_last = traj.y[N - 1]
    for i in range(N + 1):
        ui = traj.u[min(i, N - 1)]
        yi = traj.y[i] if i < N else y_last
        row = [traj.grid.nodes[i], *ui, *traj.x[i], *yi]
        fh.write(", ".join(_fmt(v) for v in row) + "\n")
