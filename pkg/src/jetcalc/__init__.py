"""jetcalc: finite-order variational calculus on jet bundles.

Symbolic Euler-Lagrange forms, Noether currents, integration by parts,
reduced currents and superpotentials, with exact-rational canonical forms
and a numeric verification backend.
"""

from .expr import (
    Atom,
    Expr,
    OpaqueFunction,
    Rational,
    as_expr,
    atom_expr,
    base_coord,
    const,
    esum,
    evaluate,
    field_jet,
    normalize,
    opaque_call,
    param_jet,
    partial,
    substitute,
)
from .multiindex import MultiIndex, mi_add, mi_multinomial
from .problem import Field, JetProblem, PrincipalConnection, TensorDensity
from .jets import (
    HorizontalDensity,
    dH,
    dV_fiber_partials,
    total_derivative,
    total_derivative_multi,
)

__all__ = [
    "Atom",
    "Expr",
    "Field",
    "HorizontalDensity",
    "JetProblem",
    "MultiIndex",
    "OpaqueFunction",
    "PrincipalConnection",
    "Rational",
    "TensorDensity",
    "as_expr",
    "atom_expr",
    "base_coord",
    "const",
    "dH",
    "dV_fiber_partials",
    "esum",
    "evaluate",
    "field_jet",
    "mi_add",
    "mi_multinomial",
    "normalize",
    "opaque_call",
    "param_jet",
    "partial",
    "substitute",
    "total_derivative",
    "total_derivative_multi",
]

__version__ = "0.1.0"
