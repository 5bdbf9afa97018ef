"""Bounded real lemma machinery for finite-dimensional continuous-time systems.

Submodules
----------
linops          Hermitian calculus, defect operators, pseudoinverse, expm.
system_model    State-space and diagonal systems, H-infinity norm, duality.
discretization  Trapezoid-embedded input/output, Toeplitz and Hankel maps.
storage         Available storage, required supply, extremal solutions, audits.
kyp             Node and integrated KYP certificates.
dilation        Epsilon-regularization and strict certificates.
contractive     Optimization over a contractive operator block.
io              JSON encodings.
cli             Command-line interface.
"""

from .errors import BRLError
from .system_model import (
    DiagonalSystem,
    StateSpaceSystem,
    diagonal_example,
    dual,
    hinf_norm,
    truncate,
)
from .discretization import TimeGrid, build_maps
from .storage import extremal_band, extremal_solutions
from .kyp import KypCertificate, kyp_node_check, kyp_strict_node_check
from .dilation import choose_epsilon, epsilon_regularize, strict_from_standard

__version__ = "0.1.0"

__all__ = [
    "BRLError",
    "DiagonalSystem",
    "StateSpaceSystem",
    "diagonal_example",
    "dual",
    "hinf_norm",
    "truncate",
    "TimeGrid",
    "build_maps",
    "extremal_band",
    "extremal_solutions",
    "KypCertificate",
    "kyp_node_check",
    "kyp_strict_node_check",
    "choose_epsilon",
    "epsilon_regularize",
    "strict_from_standard",
]
