"""
Soluciones theta y de Baker-Akhiezer.

Recursión de la solución de onda, funciones de Baker-Akhiezer desde
datos de curva y los residuos lineales y no lineales de KP, Toda 2D y BDHE.
"""

from src.solutions.baker_akhiezer import (
    GridResidual,
    LaurentTail,
    MarkedPoint,
    CurveDatum,
    GaugedWave,
    TODA_LAYOUTS,
    heat_bilinear_parts,
    heat_bilinear_residual,
    rs_bilinear_parts,
    rs_bilinear_residual,
    ba_bilinear_parts,
    ba_bilinear_residual,
    linear_residual_kp,
    adjoint_residual,
    linear_residual_toda,
    linear_residual_bdhe,
    heat_wave,
    gauge_transform,
    potential_kp,
    gauge_residual,
    ba_eval,
    ba_linear_residual,
    kp_u,
    kp_derivatives,
    kp_residual,
    toda_phi,
    toda_layout_comparison,
    toda_residual,
    bdhe_tau_residual,
    discrete_schrodinger_residual,
)
from src.solutions.wave_series import (
    ChebyshevPath,
    PotentialStrip,
    LocalWave,
    WaveSeries,
    wave_recursion,
    residue_obstruction,
    obstruction_propagation_gap,
    lax_coefficients,
    PoleTerm,
    panel_integral,
    xi1_along,
)

__all__ = [
    "GridResidual",
    "LaurentTail",
    "MarkedPoint",
    "CurveDatum",
    "GaugedWave",
    "TODA_LAYOUTS",
    "heat_bilinear_parts",
    "heat_bilinear_residual",
    "rs_bilinear_parts",
    "rs_bilinear_residual",
    "ba_bilinear_parts",
    "ba_bilinear_residual",
    "linear_residual_kp",
    "adjoint_residual",
    "linear_residual_toda",
    "linear_residual_bdhe",
    "heat_wave",
    "gauge_transform",
    "potential_kp",
    "gauge_residual",
    "ba_eval",
    "ba_linear_residual",
    "kp_u",
    "kp_derivatives",
    "kp_residual",
    "toda_phi",
    "toda_layout_comparison",
    "toda_residual",
    "bdhe_tau_residual",
    "discrete_schrodinger_residual",
    "ChebyshevPath",
    "PotentialStrip",
    "LocalWave",
    "WaveSeries",
    "wave_recursion",
    "residue_obstruction",
    "obstruction_propagation_gap",
    "lax_coefficients",
    "PoleTerm",
    "panel_integral",
    "xi1_along",
]
