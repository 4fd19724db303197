"""Finite-lattice laboratory for unitary convolution operators.

Subpackages build symbols on the torus, realize the associated lattice
operators on finite boxes, construct Hessenberg-type unitaries from
reflection-coefficient sequences, verify commutator positivity bounds,
and measure ballistic transport rates.
"""

from .symbol import (
    Symbol,
    CriticalReport,
    constant_symbol,
    harmonic_symbol,
    fourier_coeffs,
    ggt_symbol,
    ggt_weight_symbol,
    derived_symbols,
    critical_set,
    range_arc,
)
from .lattice import (
    Box,
    LatticeOperator,
    shift_op,
    position_op,
    laurent_op,
    diagonal_op,
    conjugate_op,
    conjugate_op_ggt,
    x_norm,
)

__all__ = [
    "Symbol", "CriticalReport", "constant_symbol", "harmonic_symbol",
    "fourier_coeffs", "ggt_symbol", "ggt_weight_symbol", "derived_symbols",
    "critical_set", "range_arc",
    "Box", "LatticeOperator", "shift_op", "position_op", "laurent_op",
    "diagonal_op", "conjugate_op", "conjugate_op_ggt", "x_norm",
]

__version__ = "0.1.0"
