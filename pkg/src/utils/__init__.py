"""
Utilidades del proyecto.

Este modulo exporta funciones auxiliares y la jerarquia de errores.
"""

from src.utils.helpers import (
    setup_logging,
    timing_decorator,
    neumaier_sum,
    first_derivative_5pt,
    second_derivative_5pt,
    richardson,
    observed_order,
    complex_pair,
    pair_complex,
    RunMetrics,
)
from src.utils import errors

__all__ = [
    "setup_logging",
    "timing_decorator",
    "neumaier_sum",
    "first_derivative_5pt",
    "second_derivative_5pt",
    "richardson",
    "observed_order",
    "complex_pair",
    "pair_complex",
    "RunMetrics",
    "errors",
]
