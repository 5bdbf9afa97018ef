"""JSON encodings of systems, matrices and certificates.

Matrices are lists of rows; entries are JSON numbers when real and
``[re, im]`` pairs when complex.  Python's float ``repr`` is the shortest
string that round-trips, so reading back a written file reproduces every
double bit for bit.
"""

import hashlib
import json
import math

import numpy as np

from .errors import ShapeError
from .system_model import DiagonalSystem, StateSpaceSystem

__all__ = [
    "matrix_to_json",
    "matrix_from_json",
    "system_to_json",
    "system_from_json",
    "load_system",
    "dump_json",
    "fingerprint",
]


def _scalar_out(z):
    z = complex(z)
    if z.imag == 0.0:
        return z.real
    return [z.real, z.imag]


def _scalar_in(v, where):
    if isinstance(v, bool) or v is None:
        raise ShapeError(f"{where}: expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return complex(float(v), 0.0)
    if isinstance(v, list) and len(v) == 2 and all(
            isinstance(t, (int, float)) and not isinstance(t, bool) for t in v):
        return complex(float(v[0]), float(v[1]))
    raise ShapeError(f"{where}: entries must be numbers or [re, im] pairs, got {v!r}")


def matrix_to_json(M):
    M = np.atleast_2d(np.asarray(M))
    return [[_scalar_out(z) for z in row] for row in M]


def matrix_from_json(rows, name="matrix"):
    """Parse a list of rows; returns a float array unless an entry is complex."""
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ShapeError(f"{name} must be a non-empty list of rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ShapeError(f"{name} has rows of unequal length")
    vals = np.array([[_scalar_in(v, name) for v in r] for r in rows], dtype=complex)
    vals = vals.reshape(len(rows), width)
    if not np.all(np.isfinite(vals)):
        raise ShapeError(f"{name} has non-finite entries")
    is_complex = any(isinstance(v, list) for r in rows for v in r)
    return vals if is_complex else vals.real.copy()


def system_to_json(sys):
    if isinstance(sys, DiagonalSystem):
        return {"modes": [{"lambda": _scalar_out(l), "b": _scalar_out(b),
                           "c": _scalar_out(c), "d": _scalar_out(d)}
                          for l, b, c, d in sys.modes]}
    return {k: matrix_to_json(M) for k, M in zip("ABCD", sys.matrices())}


def system_from_json(obj):
    """Build a :class:`StateSpaceSystem` or :class:`DiagonalSystem` from parsed JSON."""
    if not isinstance(obj, dict):
        raise ShapeError("system JSON must be an object")
    if "modes" in obj:
        modes = obj["modes"]
        if not isinstance(modes, list) or not modes:
            raise ShapeError("'modes' must be a non-empty list")
        cols = {k: [] for k in ("lambda", "b", "c", "d")}
        for i, md in enumerate(modes):
            if not isinstance(md, dict) or set(cols) - set(md):
                raise ShapeError(f"mode {i} needs keys lambda, b, c, d")
            for k in cols:
                cols[k].append(_scalar_in(md[k], f"modes[{i}].{k}"))
        return DiagonalSystem(*(np.array(cols[k]) for k in ("lambda", "b", "c", "d")))
    missing = [k for k in "ABCD" if k not in obj]
    if missing:
        raise ShapeError(f"system JSON lacks keys {missing}")
    mats = [matrix_from_json(obj[k], k) for k in "ABCD"]
    return StateSpaceSystem(*mats)


def load_system(path):
    with open(path) as fh:
        return system_from_json(json.load(fh))


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dump_json(obj, fh=None, indent=2):
    """Serialize with stable key order; non-finite floats become ``null``."""
    text = json.dumps(_clean(obj), indent=indent, sort_keys=False, allow_nan=False)
    if fh is not None:
        fh.write(text + "\n")
    return text


def fingerprint(sys):
    """SHA-256 of the canonical JSON encoding of a system."""
    canon = json.dumps(system_to_json(sys), separators=(",", ":"), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()
