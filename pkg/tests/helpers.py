"""Shared fixtures: random systems and an independent Riccati oracle."""

import numpy as np
import scipy.linalg as sla

from brl_lab.system_model import StateSpaceSystem, hinf_norm


def gramian_condition(A, B, C):
    Wc = sla.solve_continuous_lyapunov(A, -B @ B.conj().T)
    Wo = sla.solve_continuous_lyapunov(A.conj().T, -C.conj().T @ C)
    return max(np.linalg.cond(Wc), np.linalg.cond(Wo))


def random_stable(rng, n=None, m=None, p=None, hinf=None, max_cond=100.0, complex_=False,
                  nmax=5):
    """Random exponentially stable, robustly minimal system.

    ``A = Q (-diag(rates) + 0.5 U) Q^T`` with rates in ``[0.5, 2]`` and ``U``
    strictly upper triangular Gaussian.  Draws whose controllability or
    observability Gramian has condition number above `max_cond` are
    rejected.  The output channels are scaled so that the H-infinity norm
    equals `hinf` (uniform in ``[0.3, 0.9]`` by default).
    """
    while True:
        nn = n or int(rng.integers(1, nmax + 1))
        mm = m or int(rng.integers(1, 4))
        pp = p or int(rng.integers(1, 4))
        Q, _ = np.linalg.qr(rng.standard_normal((nn, nn)))
        A = Q @ (np.diag(-rng.uniform(0.5, 2.0, nn))
                 + 0.5 * np.triu(rng.standard_normal((nn, nn)), 1)) @ Q.T
        B = rng.standard_normal((nn, mm))
        C = rng.standard_normal((pp, nn))
        D = 0.3 * rng.standard_normal((pp, mm))
        if complex_:
            A = A + 0.3j * np.diag(rng.standard_normal(nn))
            B = B + 1j * rng.standard_normal((nn, mm))
        if max_cond is not None and gramian_condition(A, B, C) > max_cond:
            continue
        g = hinf_norm(StateSpaceSystem(A, B, C, D)).hinf_norm
        target = rng.uniform(0.3, 0.9) if hinf is None else hinf
        s = target / g
        return StateSpaceSystem(A, B, C * s, D * s)


def riccati_extremals(sys):
    """Extremal solutions from the bounded-real Hamiltonian (ordered Schur).

    The stable invariant subspace gives ``Ha`` and the antistable one ``Hr``.
    This route shares no code with the quadrature construction.
    """
    A, B, C, D = sys.matrices()
    n, m = sys.n, sys.m
    R = D.conj().T @ D - np.eye(m)
    Ri = np.linalg.inv(R)
    S = C.conj().T @ D
    Q = C.conj().T @ C
    Ak = A - B @ Ri @ S.conj().T
    Ham = np.block([[Ak, -B @ Ri @ B.conj().T],
                    [-(Q - S @ Ri @ S.conj().T), -Ak.conj().T]])
    out = []
    for sort in ("lhp", "rhp"):
        _, Z, _ = sla.schur(Ham.astype(complex), output="complex", sort=sort)
        X = Z[n:, :n] @ np.linalg.inv(Z[:n, :n])
        X = 0.5 * (X + X.conj().T)
        out.append(X if sys.dtype.kind == "c" else X.real)
    Ha, Hr = sorted(out, key=lambda M: np.trace(M).real)
    return Ha, Hr
