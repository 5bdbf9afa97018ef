"""Command-line interface: ``brl-lab <command> ...``.

Exit codes: 0 completed, 1 certificate invalid, 2 input error,
3 numerical failure.  Reports are JSON on stdout (or ``--out``).
"""

import argparse
import contextlib
import json
import os
import sys

import numpy as np

from . import io as bio
from .discretization import TimeGrid, build_maps, default_grid, simulate, write_trajectory_csv
from .dilation import choose_epsilon, epsilon_regularize, strict_from_standard
from .errors import BRLError
from .kyp import (
    KypCertificate,
    kyp_integrated_check,
    kyp_node_check,
    kyp_strict_node_check,
)
from .linops import loewner_leq
from .storage import (
    available_storage,
    dissipation_audit,
    extremal_band,
    required_supply,
)
from .system_model import (
    DiagonalSystem,
    cayley,
    diagonal_example,
    growth_bound,
    hinf_norm,
    truncate,
)

EXIT_OK, EXIT_INVALID, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class InputError(Exception):
    """Malformed command-line input."""


def _as_ss(sys_):
    return truncate(sys_, len(sys_)) if isinstance(sys_, DiagonalSystem) else sys_


def _load(path):
    try:
        return _as_ss(bio.load_system(path))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read system {path}: {exc}") from exc


def _load_matrix(path, n):
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read matrix {path}: {exc}") from exc
    if isinstance(obj, dict):
        if "H" not in obj:
            raise InputError(f"{path}: expected a matrix or an object with key 'H'")
        obj = obj["H"]
    H = bio.matrix_from_json(obj, "H")
    if H.shape != (n, n):
        raise InputError(f"H must be {n}x{n}, got {H.shape}")
    return H


def _parse_grid(text, sys_=None):
    if text is None:
        return default_grid(sys_) if sys_ is not None else None
    try:
        T, N = text.split(",")
        return TimeGrid(float(T), int(N))
    except ValueError as exc:
        raise InputError(f"--grid expects T,N (got {text!r})") from exc


def _parse_vector(text, n):
    try:
        vals = [complex(v.replace("i", "j")) for v in text.split(",")]
    except ValueError as exc:
        raise InputError(f"cannot parse vector {text!r}") from exc
    if len(vals) != n:
        raise InputError(f"vector must have {n} entries, got {len(vals)}")
    v = np.array(vals)
    return v.real.copy() if not np.any(v.imag) else v


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w") as fh:
            yield fh


def _band_options(args):
    opts = {"levels": args.levels}
    if args.grid is not None:
        opts["grid"] = _parse_grid(args.grid)
    else:
        opts.update(horizon_factor=18.0 if args.levels > 1 else 12.0,
                    h_scale=0.05 if args.levels > 1 else 0.02)
    return opts


def cmd_analyze(args):
    s = _load(args.system)
    verdict = hinf_norm(s)
    report = {
        "system_fingerprint": bio.fingerprint(s),
        "verdict": verdict.to_dict(),
        "certificates": [],
        "extremal_band": None,
        "warnings": [],
    }
    if not args.hinf_only:
        if not verdict.is_strict_schur:
            report["warnings"].append("not strict Schur: extremal solutions not computed")
        else:
            band = extremal_band(s, **_band_options(args))
            ok, wit = loewner_leq(band.Ha, band.Hr, args.tol)
            report["extremal_band"] = {
                "Ha": bio.matrix_to_json(band.Ha),
                "Hr": bio.matrix_to_json(band.Hr),
                "ordering_ok": ok,
                "ordering_witness": wit,
            }
            for H in (band.Ha, band.Hr):
                cert = KypCertificate(H, 0.0, "node", kyp_node_check(s, H))
                report["certificates"].append(cert.to_dict())
            report["warnings"].append(
                "integrated-form checks sample finitely many horizons; the node form is authoritative")
    with _output(args.out) as fh:
        bio.dump_json(report, fh)
    return EXIT_OK


def cmd_kyp_check(args):
    s = _load(args.system)
    H = _load_matrix(args.H, s.n)
    delta = args.delta if args.strict else 0.0
    if args.integrated:
        grid = _parse_grid(args.grid, s)
        mode = "strict" if args.strict else "standard"
        res = kyp_integrated_check(s, H, grid, mode=mode, delta=delta)
        form = "integrated"
    else:
        res = kyp_strict_node_check(s, H, delta) if args.strict else kyp_node_check(s, H)
        form = "node"
    cert = KypCertificate(H, delta, form, res)
    out = cert.to_dict()
    out["valid"] = cert.valid(args.tol)
    with _output(args.out) as fh:
        bio.dump_json(out, fh)
    if not out["valid"]:
        print(f"certificate invalid: residual {res:.17g} > {args.tol:g}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def cmd_storage(args):
    s = _load(args.system)
    x0 = _parse_vector(args.x0, s.n)
    maps = build_maps(s, _parse_grid(args.grid, s))
    out = {}
    if args.kind in ("available", "both"):
        r = available_storage(maps, x0, method=args.method)
        out["available"] = {"value": r.value, "method": r.method, "warnings": list(r.warnings)}
    if args.kind in ("required", "both"):
        method = "oracle" if args.method == "oracle" else "closed_form"
        r = required_supply(maps, x0, method=method)
        out["required"] = {"value": r.value, "method": r.method}
    with _output(args.out) as fh:
        bio.dump_json(out, fh)
    return EXIT_OK


def cmd_extremal(args):
    s = _load(args.system)
    band = extremal_band(s, **_band_options(args))
    ok, wit = loewner_leq(band.Ha, band.Hr, args.tol)
    out = {"Ha": bio.matrix_to_json(band.Ha), "Hr": bio.matrix_to_json(band.Hr),
           "ordering_ok": ok, "ordering_witness": wit,
           "residual_Ha": kyp_node_check(s, band.Ha),
           "residual_Hr": kyp_node_check(s, band.Hr)}
    with _output(args.out) as fh:
        bio.dump_json(out, fh)
    return EXIT_OK


def _dilate(s, eps, safety, tol):
    if eps is None:
        eps = choose_epsilon(s, safety)
    cert = strict_from_standard(s, eps, tol=tol)
    out = cert.to_dict()
    out["epsilon"] = eps
    w = np.linalg.eigvalsh(cert.H)
    out["conditioning"] = float(w[-1] / w[0])
    return out


def cmd_dilate(args):
    s = _load(args.system)
    out = _dilate(s, args.eps, args.safety, args.tol)
    with _output(args.out) as fh:
        bio.dump_json(out, fh)
    return EXIT_OK


def _read_input_csv(path, N, m):
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read input samples {path}: {exc}") from exc
    if data.shape != (N, m):
        raise InputError(f"input file must hold {N} rows of {m} values, got {data.shape}")
    return data


def cmd_simulate(args):
    s = _load(args.system)
    grid = _parse_grid(args.grid, s)
    x0 = _parse_vector(args.x0, s.n) if args.x0 else np.zeros(s.n)
    N = grid.steps
    if args.input == "zero":
        u = np.zeros((N, s.m))
    elif args.input == "step":
        u = np.ones((N, s.m))
    else:
        u = _read_input_csv(args.input, N, s.m)
    traj = simulate(s, x0, u, grid)
    with _output(args.out) as fh:
        write_trajectory_csv(traj, fh, system=s)
    if args.audit:
        H = _load_matrix(args.audit, s.n)
        ledger = dissipation_audit(s, H, traj, mode=args.mode, delta=args.delta, seed=args.seed)
        summary = ledger.summary(args.tol)
        if args.ledger_csv:
            with open(args.ledger_csv, "w") as fh:
                ledger.write_csv(fh)
        if args.ledger_out:
            with open(args.ledger_out, "w") as fh:
                bio.dump_json(summary, fh)
        else:
            bio.dump_json(summary, sys.stderr)
    return EXIT_OK


def _demo_diagonal(args):
    N = args.modes
    dsys = diagonal_example(N)
    obs, ctrb = dsys.gramians()
    low, high = dsys.riccati_roots()
    s = truncate(dsys, N)
    band = extremal_band(s, levels=1, steps=2048, horizon_factor=12.0)
    out = {
        "modes": N,
        "targets": {"Ha": 2.0, "Hr": 8.0},
        "analytic": {"Ha": obs.tolist(), "Hr": (1.0 / ctrb).tolist()},
        "riccati_roots": {"low": low.tolist(), "high": high.tolist()},
        "quadrature": {"Ha": np.real(np.diag(band.Ha)).tolist(),
                       "Hr": np.real(np.diag(band.Hr)).tolist(),
                       "grid": "T = 12/(n+1), N = 2048 per mode"},
    }
    return out


def _demo_cayley(args):
    N = args.modes
    s = truncate(diagonal_example(N), N)
    Ad, rho = cayley(s)
    eig = np.real(np.diag(Ad))
    return {"modes": N,
            "eigenvalues": [{"n": k, "value": float(eig[k]), "expected": -k / (k + 2.0)}
                            for k in range(N)],
            "spectral_radius": rho,
            "expected_radius": (N - 1.0) / (N + 1.0)}


def _demo_dilation(args):
    N = args.modes
    s = truncate(diagonal_example(N), N)
    out = _dilate(s, args.eps, args.safety, args.tol)
    out["modes"] = N
    return out


def cmd_demo(args):
    if args.modes < 1:
        raise InputError("--modes must be at least 1")
    fn = {"diagonal": _demo_diagonal, "cayley": _demo_cayley, "dilation": _demo_dilation}
    out = fn[args.name](args)
    with _output(args.out) as fh:
        bio.dump_json(out, fh)
    if args.csv and args.name == "cayley":
        with open(args.csv, "w") as fh:
            fh.write("n, eigenvalue, expected\n")
            for row in out["eigenvalues"]:
                fh.write(f"{row['n']}, {row['value']:.17g}, {row['expected']:.17g}\n")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="brl-lab", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0, help="seed for sampled audits")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, grid=True):
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--tol", type=float, default=1e-6)
        if grid:
            sp.add_argument("--grid", help="time grid as T,N")

    a = sub.add_parser("analyze", help="norm, extremal solutions and node certificates")
    a.add_argument("system")
    a.add_argument("--hinf-only", action="store_true")
    a.add_argument("--levels", type=int, default=3, choices=(1, 2, 3))
    common(a)
    a.set_defaults(func=cmd_analyze)

    k = sub.add_parser("kyp-check", help="check a KYP certificate")
    k.add_argument("system")
    k.add_argument("H", help="JSON matrix or certificate")
    k.add_argument("--strict", action="store_true")
    k.add_argument("--delta", type=float, default=0.0)
    k.add_argument("--integrated", action="store_true")
    common(k)
    k.set_defaults(func=cmd_kyp_check)

    st = sub.add_parser("storage", help="available storage / required supply of a state")
    st.add_argument("system")
    st.add_argument("--x0", required=True, help="comma-separated state")
    st.add_argument("--kind", choices=("available", "required", "both"), default="both")
    st.add_argument("--method", choices=("closed_form", "oracle", "auto"), default="closed_form")
    common(st)
    st.set_defaults(func=cmd_storage)

    e = sub.add_parser("extremal", help="extremal KYP solutions Ha and Hr")
    e.add_argument("system")
    e.add_argument("--levels", type=int, default=3, choices=(1, 2, 3))
    common(e)
    e.set_defaults(func=cmd_extremal)

    d = sub.add_parser("dilate", help="strict certificate through eps-regularization")
    d.add_argument("system")
    d.add_argument("--eps", type=float)
    d.add_argument("--safety", type=float, default=0.05)
    common(d, grid=False)
    d.set_defaults(func=cmd_dilate)

    sm = sub.add_parser("simulate", help="simulate and optionally audit a storage function")
    sm.add_argument("system")
    sm.add_argument("--x0")
    sm.add_argument("--input", default="zero", help="zero, step, or a CSV file of N x m samples")
    sm.add_argument("--audit", help="JSON matrix H of the storage function to audit")
    sm.add_argument("--mode", choices=("standard", "strict", "semi_strict"), default="standard")
    sm.add_argument("--delta", type=float, default=0.0)
    sm.add_argument("--ledger-out", help="write the audit summary JSON here")
    sm.add_argument("--ledger-csv", help="write the audit rows here")
    common(sm)
    sm.set_defaults(func=cmd_simulate)

    dm = sub.add_parser("demo", help="built-in examples")
    dm.add_argument("name", choices=("diagonal", "cayley", "dilation"))
    dm.add_argument("--modes", type=int, default=4)
    dm.add_argument("--eps", type=float)
    dm.add_argument("--safety", type=float, default=0.05)
    dm.add_argument("--csv", help="cayley: write the eigenvalue table here")
    common(dm, grid=False)
    dm.set_defaults(func=cmd_demo)
    return p


def _thread_limit():
    val = os.environ.get("BRL_LAB_THREADS")
    if not val:
        return contextlib.nullcontext()
    try:
        n = int(val)
    except ValueError:
        raise InputError(f"BRL_LAB_THREADS must be an integer, got {val!r}")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=max(n, 1))


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        with _thread_limit():
            return args.func(args)
    except (InputError, ValueError, TypeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BRLError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
