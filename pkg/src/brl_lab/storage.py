"""Available storage, required supply and the extremal KYP solutions.

On a grid, with ``M`` the Toeplitz map, ``Wo``/``Wc`` the output/input maps,

* available storage ``S_a(x0) = sup_u ||Wo x0 + M u||^2 - ||u||^2``
  ``= x0* Wo* (I - M M*)^{-1} Wo x0``;
* required supply ``S_r(x0) = inf {u* (I - M* M) u : Wc u = x0}``
  ``= x0* (Wc (I - M* M)^{-1} Wc*)^{-1} x0``.

Their Gram matrices are ``Ha`` and ``Hr``.  :func:`extremal_band` adds the
practical layer: per-component grids for decoupled realizations and
Richardson extrapolation over a grid refined twice.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg as sla

from . import linops
from .discretization import TimeGrid, build_maps, default_grid
from .errors import (
    NotL2Controllable,
    NotL2Observable,
    NotStrictlyContractive,
    NotStrictSchur,
    ShapeError,
    Unreachable,
)
from .system_model import decoupled_blocks, growth_bound, subsystem

__all__ = [
    "StorageReport",
    "DissipationLedger",
    "ExtremalBand",
    "available_storage",
    "required_supply",
    "extremal_solutions",
    "extremal_band",
    "richardson",
    "dissipation_audit",
    "storage_ordering_check",
]

STRICT_MARGIN = 1e-8
REACH_TOL = 1e-8
GRAM_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class StorageReport:
    """Value of a storage functional with its optimizing input."""

    value: float
    optimizer: np.ndarray
    method: str
    warnings: tuple = ()


def _check_strict(maps):
    s = maps.toeplitz.norm
    if s >= 1.0 - STRICT_MARGIN:
        raise NotStrictlyContractive(f"||M|| = {s:.12g} is not below 1 - {STRICT_MARGIN:g}")
    return s


def _vector(x0, n):
    x0 = np.asarray(x0).reshape(-1)
    if x0.size != n:
        raise ShapeError(f"x0 has length {x0.size}, expected {n}")
    return x0


def _sa_oracle(maps, x0, sigma, iterations=10_000):
    """Gradient ascent on ``f(u) = ||v + M u||^2 - ||u||^2`` (concave when ||M|| < 1)."""
    op = maps.toeplitz
    v = maps.Wo @ x0
    step = 0.1 * (1.0 - min(sigma, 1.0) ** 2)
    u = np.zeros(op.shape[1], dtype=np.result_type(v, op.dtype))
    for _ in range(iterations):
        grad = 2.0 * (op.rmatvec(v + op.matvec(u)) - u)
        u = u + step * grad
    r = v + op.matvec(u)
    return float(np.vdot(r, r).real - np.vdot(u, u).real), u


def available_storage(maps, x0, method="closed_form"):
    """Available storage of ``x0`` on the grid.

    Parameters
    ----------
    maps : DiscretizedMaps
    x0 : (n,) array_like
    method : {"closed_form", "oracle", "auto"}
        ``closed_form`` solves ``(I - M M*) z = Wo x0`` and requires
        ``||M|| < 1 - 1e-8``.  ``oracle`` runs 10^4 steps of gradient ascent
        with step ``0.1 (1 - ||M||^2)``.  ``auto`` uses the closed form when
        the map is strictly contractive and otherwise falls back to the
        oracle with a warning.

    Returns
    -------
    StorageReport
        ``optimizer`` is the supremizing embedded input
        ``u* = (I - M* M)^{-1} M* Wo x0``.

    Raises
    ------
    NotStrictlyContractive
        In ``closed_form`` mode when ``||M|| >= 1 - 1e-8``.
    """
    x0 = _vector(x0, maps.n)
    if method not in ("closed_form", "oracle", "auto"):
        raise ValueError(f"unknown method {method!r}")
    sigma = maps.toeplitz.norm
    warnings = ()
    if method == "auto":
        if sigma < 1.0 - STRICT_MARGIN:
            method = "closed_form"
        else:
            method = "oracle"
            warnings = (f"Toeplitz norm {sigma:.6g} is not strictly below 1; "
                        "value from gradient ascent",)
    if method == "oracle":
        val, u = _sa_oracle(maps, x0, sigma)
        return StorageReport(max(val, 0.0), u, "oracle", warnings)
    _check_strict(maps)
    v = maps.Wo @ x0
    z = maps.toeplitz.defect_solve(v, "left")
    val = float(np.vdot(v, z).real)
    u = maps.toeplitz.rmatvec(z)
    return StorageReport(max(val, 0.0), u, "closed_form")


def _reach_residual(Wc, x0):
    U, s, _ = np.linalg.svd(Wc, full_matrices=False)
    keep = s > 1e-12 * (s[0] if s.size and s[0] > 0 else 1.0)
    U = U[:, keep]
    return float(np.linalg.norm(x0 - U @ (U.conj().T @ x0)))


def _sr_oracle(maps, x0, rho=1e8, sweeps=3):
    """Quadratic penalty: minimize ``u*(I - M*M)u + rho ||Wc u - c||^2`` densely.

    The first sweep uses ``c = x0``.  The plain penalty minimizer misses the
    constraint by ``O(1/rho)``, which biases the value when ``Wc`` has small
    singular values, so ``c`` is then shifted by the constraint residual
    (a multiplier update at the same ``rho``) for the remaining sweeps.
    """
    M = maps.Tpast
    Wc = maps.Wc
    F = np.eye(M.shape[1]) - M.conj().T @ M
    G = F + rho * (Wc.conj().T @ Wc)
    lu = sla.lu_factor(G)
    c = x0.astype(np.result_type(x0, G), copy=True)
    for _ in range(sweeps):
        u = sla.lu_solve(lu, rho * (Wc.conj().T @ c))
        c = c + (x0 - Wc @ u)
    return float(np.vdot(u, F @ u).real), u


def required_supply(maps, x0, method="closed_form"):
    """Required supply (L2-regularized) of ``x0`` on the grid.

    Parameters
    ----------
    maps : DiscretizedMaps
    x0 : (n,) array_like
    method : {"closed_form", "oracle"}
        ``closed_form`` solves the KKT system
        ``Wc (I - M* M)^{-1} Wc* lam = x0``.  ``oracle`` minimizes the
        quadratic-penalty objective with ``rho = 1e8`` by dense solves
        (three sweeps with multiplier updates).

    Raises
    ------
    Unreachable
        If ``x0`` leaves a least-squares residual above ``1e-8 ||x0||``
        against ``range(Wc)``.
    NotStrictlyContractive
        If ``||M|| >= 1 - 1e-8``.
    """
    x0 = _vector(x0, maps.n)
    nx = np.linalg.norm(x0)
    if nx == 0.0:
        return StorageReport(0.0, np.zeros(maps.Wc.shape[1]), method)
    res = _reach_residual(maps.Wc, x0)
    if res > REACH_TOL * nx:
        raise Unreachable(f"x0 is not in range(Wc) (residual {res:.3e})")
    if method == "oracle":
        val, u = _sr_oracle(maps, x0)
        return StorageReport(val, u, "oracle")
    if method != "closed_form":
        raise ValueError(f"unknown method {method!r}")
    _check_strict(maps)
    Y = maps.toeplitz.defect_solve(maps.Wc.conj().T, "right")
    G = linops.hermitize(maps.Wc @ Y)
    lam = np.linalg.lstsq(G, x0, rcond=None)[0]
    u = Y @ lam
    return StorageReport(float(np.vdot(x0, lam).real), u, "closed_form")


def extremal_solutions(maps):
    """Gram matrices ``Ha`` and ``Hr`` of available storage and required supply.

    ``Ha = Wo* (I - M M*)^{-1} Wo`` and
    ``Hr^{-1} = Wc (I - M* M)^{-1} Wc*``.

    Raises
    ------
    NotStrictSchur
        If ``||M|| >= 1 - 1e-8``.
    NotL2Controllable
        If ``Hr^{-1}`` is numerically singular.
    NotL2Observable
        If ``Ha`` is numerically singular.
    """
    Ha, Hr_inv = _gram_pair(maps)
    return Ha, _invert_checked(Hr_inv)


def _gram_pair(maps):
    try:
        _check_strict(maps)
        op = maps.toeplitz
        Ha = linops.hermitize(maps.Wo.conj().T @ op.defect_solve(maps.Wo, "left"))
        Hri = linops.hermitize(maps.Wc @ op.defect_solve(maps.Wc.conj().T, "right"))
    except NotStrictlyContractive as exc:
        raise NotStrictSchur(str(exc)) from exc
    wa = np.linalg.eigvalsh(Ha)
    if wa[0] <= GRAM_RTOL * max(wa[-1], 1.0):
        raise NotL2Observable(f"Ha is singular (lambda_min = {wa[0]:.3e})")
    _check_controllable(Hri)
    return Ha, Hri


def _check_controllable(Hri):
    w = np.linalg.eigvalsh(Hri)
    if w[0] <= GRAM_RTOL * max(w[-1], 1.0):
        raise NotL2Controllable(f"Hr^-1 is singular (lambda_min = {w[0]:.3e})")


def _invert_checked(Hri):
    _check_controllable(Hri)
    return linops.herm_inv(Hri)


def richardson(values, exponents=(2, 3)):
    """Extrapolate a sequence computed at ``h, h/2, h/4, ...``.

    Assumes the error expands in the powers ``h^e`` for ``e`` in
    `exponents`; ``len(values)`` must be ``len(exponents) + 1``.
    """
    vals = list(values)
    if len(vals) != len(exponents) + 1:
        raise ValueError("need one more value than exponents")
    for e in exponents:
        f = 2.0 ** e
        vals = [(f * b - a) / (f - 1.0) for a, b in zip(vals[:-1], vals[1:])]
    return vals[0]


@dataclass(eq=False)
class ExtremalBand:
    """Extremal solutions with the grids they came from."""

    Ha: np.ndarray
    Hr: np.ndarray
    grids: list = field(default_factory=list)
    levels: int = 1
    raw: list = field(default_factory=list)

    @property
    def Hr_inv(self):
        return linops.herm_inv(self.Hr)


def _steps_for(sys, horizon, h_scale):
    A = sys.A
    speed = max(abs(growth_bound(sys)), float(np.abs(np.linalg.eigvals(A)).max()))
    steps = int(math.ceil(horizon * speed / h_scale))
    return max(steps, 64)


def _component_grams(sys, grid, levels, exponents, steps, horizon_factor, h_scale, transient):
    if grid is None:
        grid = default_grid(sys, steps=1, horizon_factor=horizon_factor,
                            transient=transient)
        if steps is None:
            steps = _steps_for(sys, grid.horizon, h_scale)
        grid = TimeGrid(grid.horizon, steps)
    grids = [grid]
    for _ in range(levels - 1):
        grids.append(grids[-1].refined(2))
    pairs = [_gram_pair(build_maps(sys, g)) for g in grids]
    if levels == 1:
        Ha, Hri = pairs[0]
    else:
        ex = exponents[: levels - 1]
        Ha = linops.hermitize(richardson([p[0] for p in pairs], ex))
        Hri = linops.hermitize(richardson([p[1] for p in pairs], ex))
    return Ha, Hri, grids, pairs


def extremal_band(sys, grid=None, *, levels=1, exponents=(2, 3), split=True,
                  steps=None, horizon_factor=12.0, h_scale=0.25, transient=True):
    """Extremal solutions of a system computed from its discretized maps.

    Parameters
    ----------
    sys : StateSpaceSystem
    grid : TimeGrid, optional
        Base grid used for every component.  By default each decoupled
        component gets its own grid with ``T = horizon_factor / |growth|``
        and ``steps`` steps (or enough steps to make ``h * |lambda|_max``
        about `h_scale`).  With `transient` the horizon is extended until
        ``||e^{AT}|| <= exp(-horizon_factor)``.
    levels : int
        Number of grids (``h``, ``h/2``, ...); with ``levels > 1`` the Gram
        matrices ``Ha`` and ``Hr^{-1}`` are Richardson-extrapolated with the
        given error `exponents` before ``Hr`` is formed.
    split : bool
        Treat decoupled components (see
        :func:`~brl_lab.system_model.decoupled_blocks`) separately.

    Returns
    -------
    ExtremalBand
    """
    if levels < 1 or levels > len(exponents) + 1:
        raise ValueError(f"levels must lie in [1, {len(exponents) + 1}]")
    blocks = decoupled_blocks(sys) if split else [(np.arange(sys.n), np.arange(sys.m),
                                                    np.arange(sys.p))]
    if sum(b[0].size for b in blocks) != sys.n:
        raise ShapeError("decoupled blocks do not cover the state space")
    dt = np.result_type(sys.dtype, float)
    Ha = np.zeros((sys.n, sys.n), dtype=dt)
    Hri = np.zeros((sys.n, sys.n), dtype=dt)
    grids, raw = [], []
    for st, inp, out in blocks:
        if inp.size == 0:
            raise NotL2Controllable("a decoupled block has no inputs")
        if out.size == 0:
            raise NotL2Observable("a decoupled block has no outputs")
        sub = subsystem(sys, st, inp, out)
        a, ri, g, pairs = _component_grams(sub, grid, levels, exponents, steps,
                                           horizon_factor, h_scale, transient)
        ix = np.ix_(st, st)
        Ha[ix] = a
        Hri[ix] = ri
        grids.append(g)
        raw.append(pairs)
    Hr = _invert_checked(Hri)
    return ExtremalBand(Ha, Hr, grids, levels, raw)


@dataclass(eq=False)
class DissipationLedger:
    """Dissipation inequality checked on pairs of grid times.

    ``rows`` has columns ``t1, t2, lhs, rhs, slack`` with
    ``slack = rhs - lhs``; ``max_violation = -min(slack)``.
    """

    rows: np.ndarray
    mode: str
    delta: float
    max_violation: float

    def passed(self, tol=0.0):
        return bool(self.max_violation <= tol)

    def summary(self, tol=0.0):
        return {"mode": self.mode, "delta": self.delta,
                "max_violation": self.max_violation, "pass": self.passed(tol)}

    def write_csv(self, fh):
        fh.write("t1, t2, lhs, rhs, slack\n")
        for r in self.rows:
            fh.write(", ".join(f"{v:.17g}" for v in r) + "\n")


def _pairs(N, rng, sample=512):
    if N <= 64:
        i, j = np.triu_indices(N + 1, k=1)
        return i, j
    a = rng.integers(0, N + 1, size=(sample, 2))
    a = a[a[:, 0] != a[:, 1]]
    a.sort(axis=1)
    pre_i = np.zeros(N, dtype=int)
    pre_j = np.arange(1, N + 1)
    i = np.concatenate([a[:, 0], pre_i])
    j = np.concatenate([a[:, 1], pre_j])
    return i, j


def dissipation_audit(sys, H, traj, mode="standard", delta=0.0, seed=0):
    """Check the dissipation inequality of ``S(x) = x* H x`` along a trajectory.

    For pairs of nodes ``t1 < t2`` the left side is
    ``S(x(t2)) + int ||y||^2 (+ delta int ||x||^2 in strict mode)`` and the
    right side ``S(x(t1)) + (1 - delta) int ||u||^2`` (``delta`` applies to
    the input term in the strict and semi-strict modes only).

    Integrals are taken interval by interval: ``||u||^2`` is exact for the
    held input, ``||y||^2`` uses the trapezoid rule on the one-sided limits
    ``C x_i + D u_i`` and ``C x_{i+1} + D u_i``, and ``||x||^2`` the
    trapezoid rule on the nodes.  All pairs are used when ``N <= 64``,
    otherwise 512 random pairs (seeded) plus every prefix ``(0, t)``.
    """
    if mode not in ("standard", "strict", "semi_strict"):
        raise ValueError(f"unknown mode {mode!r}")
    if not 0.0 <= delta < 1.0:
        raise ValueError("delta must lie in [0, 1)")
    H = linops.hermitize(H, "H")
    x, u = traj.x, traj.u
    N = traj.grid.steps
    dts = np.diff(traj.grid.nodes)
    y_left = x[:-1] @ sys.C.T + u @ sys.D.T
    y_right = x[1:] @ sys.C.T + u @ sys.D.T
    Ey = 0.5 * dts * (np.sum(np.abs(y_left) ** 2, axis=1) + np.sum(np.abs(y_right) ** 2, axis=1))
    Eu = dts * np.sum(np.abs(u) ** 2, axis=1)
    xn = np.sum(np.abs(x) ** 2, axis=1)
    Ex = 0.5 * dts * (xn[:-1] + xn[1:])
    cum = lambda e: np.concatenate([[0.0], np.cumsum(e)])
    Y, U, X = cum(Ey), cum(Eu), cum(Ex)
    S = np.einsum("ti,ij,tj->t", x.conj(), H, x).real
    i, j = _pairs(N, np.random.default_rng(seed))
    lhs = S[j] + (Y[j] - Y[i])
    u_weight = 1.0
    if mode == "strict":
        lhs = lhs + delta * (X[j] - X[i])
    if mode != "standard":
        u_weight = 1.0 - delta
    rhs = S[i] + u_weight * (U[j] - U[i])
    t = traj.grid.nodes
    rows = np.column_stack([t[i], t[j], lhs, rhs, rhs - lhs])
    return DissipationLedger(rows, mode, float(delta), float(-(rhs - lhs).min()))


def storage_ordering_check(Ha, H, Hr, tol=1e-8):
    """``Ha <= H <= Hr`` in the Loewner order, up to `tol`."""
    ok1, _ = linops.loewner_leq(Ha, H, tol)
    ok2, _ = linops.loewner_leq(H, Hr, tol)
    return ok1 and ok2
