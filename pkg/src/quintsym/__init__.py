"""Symbolic verification of symmetries, self-adjointness and conservation laws
for a fifth-order quasilinear evolution equation, plus a spectral monitor."""

from .expr import Expr, jet, param, var, total_derivative, substitute, zero_test, normalize
from .parse import parse_expr, format_expr

__version__ = "0.1.0"
